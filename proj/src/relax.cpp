#include "shellforms/relax.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace shf {

PointFrame PointFrame::orthonormal() {
    PointFrame f;
    f.tau[0] = Vec3::UnitX();
    f.tau[1] = Vec3::UnitY();
    f.tau_dual[0] = Vec3::UnitX();
    f.tau_dual[1] = Vec3::UnitY();
    f.n = Vec3::UnitZ();
    f.basis = Mat3::Identity();
    f.dual_to_ortho = Mat3::Identity();
    return f;
}

PointFrame PointFrame::make(const Vec3& tau1, const Vec3& tau2) {
    PointFrame f;
    f.tau[0] = tau1;
    f.tau[1] = tau2;
    Mat2 g;
    g << tau1.dot(tau1), tau1.dot(tau2), tau2.dot(tau1), tau2.dot(tau2);
    const double det = g.determinant();
    if (!(det > 1e-12)) throw degenerate_chart("PointFrame: tangent pair is rank deficient");
    const Mat2 gi = g.inverse();
    f.tau_dual[0] = gi(0, 0) * tau1 + gi(0, 1) * tau2;
    f.tau_dual[1] = gi(1, 0) * tau1 + gi(1, 1) * tau2;
    f.n = tau1.cross(tau2).normalized();
    // Gram-Schmidt on the tangent pair keeps (e1, e2, n) right-handed.
    const Vec3 e1 = tau1.normalized();
    const Vec3 e2 = (tau2 - tau2.dot(e1) * e1).normalized();
    f.basis.col(0) = e1;
    f.basis.col(1) = e2;
    f.basis.col(2) = f.n;
    // Voigt-2 coefficient conversion: coefficients q_ab vs the orthonormal pair.
    // q = q_ab tau^a (x) tau^b = q'_cd e_c (x) e_d with q' = P q P^T, P_ca = e_c . tau^a.
    Mat2 P;
    for (int c = 0; c < 2; ++c)
        for (int a = 0; a < 2; ++a) P(c, a) = f.basis.col(c).dot(f.tau_dual[a]);
    auto congr = [&P](const Mat2& m) { return (P * m * P.transpose()).eval(); };
    Mat3 C;
    for (int i = 0; i < 3; ++i) {
        Vec3 e = Vec3::Zero();
        e[i] = 1.0;
        const Mat2 out = congr(TangentForm2(e).matrix());
        C.col(i) = TangentForm2::from_matrix(out).v;
    }
    f.dual_to_ortho = C;
    return f;
}

bool PointFrame::same_as(const PointFrame& other, double tol) const {
    for (int a = 0; a < 2; ++a)
        if ((tau[a] - other.tau[a]).lpNorm<Eigen::Infinity>() > tol) return false;
    return (n - other.n).lpNorm<Eigen::Infinity>() <= tol;
}

namespace {

// Voigt-6 index sets in the orthonormal frame: tangential (11, 22, 12) and
// free (33, 23, 13) strain components.
constexpr int kTan[3] = {0, 1, 5};
constexpr int kFree[3] = {2, 3, 4};

}  // namespace

TangentQuadraticForm q2_form(const Mat6& voigt, const PointFrame& frame) {
    // Rotate the density into the orthonormal frame of this point.
    const Mat6 T = voigt6_rotation(frame.basis);
    const Mat6 m = T.transpose() * voigt * T;

    Mat3 att, ann, atn;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            att(i, j) = m(kTan[i], kTan[j]);
            ann(i, j) = m(kFree[i], kFree[j]);
            atn(i, j) = m(kTan[i], kFree[j]);
        }
    Eigen::JacobiSVD<Mat3> svd(ann);
    const double cond = svd.singularValues()(0) / svd.singularValues()(2);
    if (!(svd.singularValues()(2) > 0) || cond > 1e12)
        throw singular_block("q2_form: normal strain block is numerically singular");

    TangentQuadraticForm out;
    out.frame = frame;
    out.dual_to_ortho = frame.dual_to_ortho;
    out.m_ortho = att - atn * ann.inverse() * atn.transpose();
    out.m_ortho = 0.5 * (out.m_ortho + out.m_ortho.transpose()).eval();
    out.m_dual = out.dual_to_ortho.transpose() * out.m_ortho * out.dual_to_ortho;
    out.m_dual = 0.5 * (out.m_dual + out.m_dual.transpose()).eval();
    return out;
}

double q2_value(const TangentQuadraticForm& form, const PointFrame& frame, const TangentForm2& q) {
    if (!form.frame.same_as(frame, 0.0))
        throw frame_mismatch("q2_value: form was built for a different frame");
    return q.v.dot(form.m_dual * q.v);
}

double brute_force_q2(const Mat6& voigt, const PointFrame& frame, const TangentForm2& q) {
    // Embed q via the orthonormal coefficients and minimize over the free
    // entries M13, M23, M33 of the symmetric strain directly.
    const Vec3 q_ortho = frame.dual_to_ortho * q.v;
    Mat3 Q = Mat3::Zero();
    Q(0, 0) = q_ortho[0];
    Q(1, 1) = q_ortho[1];
    Q(0, 1) = Q(1, 0) = q_ortho[2] / kSqrt2;
    const Mat3 Qa = frame.basis * Q * frame.basis.transpose();
    const Vec6 v0 = voigt6(Qa);

    // Free directions: e1 (.) n, e2 (.) n, n (x) n in ambient coordinates.
    Eigen::Matrix<double, 6, 3> N;
    N.col(0) = voigt6(sym_outer(frame.basis.col(0), frame.n));
    N.col(1) = voigt6(sym_outer(frame.basis.col(1), frame.n));
    N.col(2) = voigt6(frame.n * frame.n.transpose());

    const Mat3 nn = N.transpose() * voigt * N;
    const Vec3 rhs = -N.transpose() * (voigt * v0);
    Eigen::JacobiSVD<Mat3> svd(nn);
    const double cond = svd.singularValues()(0) / svd.singularValues()(2);
    if (!(svd.singularValues()(2) > 0) || cond > 1e12)
        throw singular_block("brute_force_q2: stationarity system is singular");
    const Vec3 a = nn.ldlt().solve(rhs);
    const Vec6 v = v0 + N * a;
    return v.dot(voigt * v);
}

}  // namespace shf

#include "shellforms/cell.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <random>

#include "spectral.hpp"

namespace shf {

namespace {

// Voigt-6 embeddings of the tangential / mixed / normal strain slots of a frame.
struct FrameEmbed {
    Eigen::Matrix<double, 6, 3> Et;  // dual-frame tangential Voigt-2
    Eigen::Matrix<double, 6, 2> Em;  // coefficient of tau^a (.) n
    Vec6 En;                         // n (x) n

    static FrameEmbed make(const PointFrame& f) {
        FrameEmbed e;
        e.Et.col(0) = voigt6(f.tau_dual[0] * f.tau_dual[0].transpose());
        e.Et.col(1) = voigt6(f.tau_dual[1] * f.tau_dual[1].transpose());
        e.Et.col(2) = kSqrt2 * voigt6(sym_outer(f.tau_dual[0], f.tau_dual[1]));
        e.Em.col(0) = voigt6(sym_outer(f.tau_dual[0], f.n));
        e.Em.col(1) = voigt6(sym_outer(f.tau_dual[1], f.n));
        e.En = voigt6(f.n * f.n.transpose());
        return e;
    }
};

// Material samples and quadrature weights over the (t, y) nodes.
struct MaterialSamples {
    std::vector<Mat6> m;       // per node
    std::vector<double> w;     // per node, t-weight / n_y^2
    std::vector<Mat6> m_bar;   // y-average per t-slice

    static MaterialSamples make(const MaterialLaw& law, const CellGrid& grid) {
        MaterialSamples s;
        const int N = grid.node_count();
        s.m.resize(N);
        s.w.resize(N);
        s.m_bar.assign(grid.n_t(), Mat6::Zero());
        for (int it = 0; it < grid.n_t(); ++it) {
            const double t = grid.t_nodes()[it];
            for (int j1 = 0; j1 < grid.n_y(); ++j1)
                for (int j2 = 0; j2 < grid.n_y(); ++j2) {
                    const int idx = grid.node_index(it, j1, j2);
                    s.m[idx] = law.eval(t, grid.y_node(j1, j2));
                    s.w[idx] = grid.t_weights()[it] * grid.y_weight();
                    s.m_bar[it] += s.m[idx];
                }
            s.m_bar[it] *= grid.y_weight();
        }
        return s;
    }
};

// Quadratic least-squares structure min_u (A u + b)^T W (A u + b); the last
// three unknowns are always the affine form p.
class CellOperator {
public:
    virtual ~CellOperator() = default;

    virtual int dof() const = 0;
    virtual int rows() const = 0;   // sample vector dimension (6 or 3)
    virtual int cols() const = 0;   // sample count
    virtual void apply(const VecX& u, MatX& E) const = 0;
    virtual void adjoint(const MatX& Z, VecX& g) const = 0;
    virtual void affine(const TangentForm2& q, MatX& E) const = 0;
    virtual void weight(MatX& E) const = 0;  // E_j <- w_j M_j E_j
    virtual VecX precond_diag() const = 0;

    double energy(const VecX& u, const TangentForm2& q) const {
        MatX E(rows(), cols());
        apply(u, E);
        MatX B(rows(), cols());
        affine(q, B);
        E += B;
        MatX WE = E;
        weight(WE);
        return (E.array() * WE.array()).sum();
    }

    void normal_apply(const VecX& u, VecX& out, MatX& scratch) const {
        apply(u, scratch);
        weight(scratch);
        out.setZero();
        adjoint(scratch, out);
    }
};

struct CGOutcome {
    VecX x;
    double rel_residual = 0.0;
    int iterations = 0;
    std::vector<double> history;
};

// rhs = -A^T W b for the offset samples B (consumed).
VecX rhs_from_offset(const CellOperator& op, MatX& B) {
    op.weight(B);
    VecX rhs = VecX::Zero(op.dof());
    op.adjoint(B, rhs);
    return -rhs;
}

CGOutcome pcg(const CellOperator& op, const VecX& rhs, double tol, int max_iter) {
    CGOutcome out;
    const int n = op.dof();
    out.x = VecX::Zero(n);

    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return out;

    MatX scratch(op.rows(), op.cols());
    VecX dinv = op.precond_diag();
    const double dmax = dinv.maxCoeff();
    for (int i = 0; i < n; ++i) dinv[i] = 1.0 / std::max(dinv[i], 1e-14 * dmax);

    VecX r = rhs;
    VecX z = dinv.asDiagonal() * r;
    VecX p = z;
    VecX Ap(n);
    double rz = r.dot(z);
    for (int it = 0; it < max_iter; ++it) {
        op.normal_apply(p, Ap, scratch);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0)) break;  // numerically flat direction; residual test decides
        const double alpha = rz / pAp;
        out.x += alpha * p;
        r -= alpha * Ap;
        const double rel = r.norm() / rhs_norm;
        out.history.push_back(rel);
        out.iterations = it + 1;
        if (rel <= tol) {
            out.rel_residual = rel;
            return out;
        }
        z = dinv.asDiagonal() * r;
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    // Recompute the true residual before giving up.
    op.normal_apply(out.x, Ap, scratch);
    const double rel = (rhs - Ap).norm() / rhs_norm;
    out.rel_residual = rel;
    if (rel > tol)
        throw no_convergence("cell solver stalled at relative residual " + std::to_string(rel) +
                             " after " + std::to_string(out.iterations) + " iterations");
    return out;
}

CGOutcome pcg_for_q(const CellOperator& op, const TangentForm2& q, double tol, int max_iter) {
    MatX B(op.rows(), op.cols());
    op.affine(q, B);
    return pcg(op, rhs_from_offset(op, B), tol, max_iter);
}

// ---------------------------------------------------------------- regime 0 --

// Unknowns [zeta1 | zeta2 | phi | g | p] with the per-node field kept.
class Regime0Full final : public CellOperator {
public:
    Regime0Full(const MaterialLaw& law, const PointFrame& frame, const CellGrid& grid)
        : grid_(grid),
          embed_(FrameEmbed::make(frame)),
          mat_(MaterialSamples::make(law, grid)),
          fft_(grid.n_y()),
          nf_(grid.fourier_dof()),
          N_(grid.node_count()) {}

    int dof() const override { return 3 * nf_ + 3 * N_ + 3; }
    int rows() const override { return 6; }
    int cols() const override { return N_; }

    void apply(const VecX& u, MatX& E) const override {
        const int ny = grid_.n_y(), nyy = ny * ny;
        std::vector<double> d11(nyy), d12(nyy), d21(nyy), d22(nyy);
        std::vector<double> h11(nyy), h12(nyy), h22(nyy);
        auto& fft = const_cast<SpectralTransform&>(fft_);
        const auto& modes = grid_.modes_half();
        fft.synth(modes, u.data(), false, 1, 0, d11.data());
        fft.synth(modes, u.data(), false, 0, 1, d12.data());
        fft.synth(modes, u.data() + nf_, false, 1, 0, d21.data());
        fft.synth(modes, u.data() + nf_, false, 0, 1, d22.data());
        fft.synth(modes, u.data() + 2 * nf_, false, 2, 0, h11.data());
        fft.synth(modes, u.data() + 2 * nf_, false, 1, 1, h12.data());
        fft.synth(modes, u.data() + 2 * nf_, false, 0, 2, h22.data());
        const double* g = u.data() + 3 * nf_;
        const Vec3 p(u[dof() - 3], u[dof() - 2], u[dof() - 1]);
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double t = grid_.t_nodes()[it];
            for (int jy = 0; jy < nyy; ++jy) {
                const int idx = it * nyy + jy;
                Vec3 vt;
                vt[0] = d11[jy] - t * h11[jy] + p[0];
                vt[1] = d22[jy] - t * h22[jy] + p[1];
                vt[2] = (d12[jy] + d21[jy]) / kSqrt2 - t * kSqrt2 * h12[jy] + p[2];
                const Eigen::Vector2d m(2.0 * g[3 * idx], 2.0 * g[3 * idx + 1]);
                E.col(idx) = embed_.Et * vt + embed_.Em * m + embed_.En * g[3 * idx + 2];
            }
        }
    }

    void adjoint(const MatX& Z, VecX& grad) const override {
        const int ny = grid_.n_y(), nyy = ny * ny;
        std::vector<double> a11(nyy, 0.0), a12(nyy, 0.0), a21(nyy, 0.0), a22(nyy, 0.0);
        std::vector<double> b11(nyy, 0.0), b12(nyy, 0.0), b22(nyy, 0.0);
        Vec3 gp = Vec3::Zero();
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double t = grid_.t_nodes()[it];
            for (int jy = 0; jy < nyy; ++jy) {
                const int idx = it * nyy + jy;
                const Vec3 zt = embed_.Et.transpose() * Z.col(idx);
                const Eigen::Vector2d zm = embed_.Em.transpose() * Z.col(idx);
                const double zn = embed_.En.dot(Z.col(idx));
                a11[jy] += zt[0];
                a22[jy] += zt[1];
                a12[jy] += zt[2] / kSqrt2;
                a21[jy] += zt[2] / kSqrt2;
                b11[jy] += -t * zt[0];
                b22[jy] += -t * zt[1];
                b12[jy] += -t * kSqrt2 * zt[2];
                grad[3 * nf_ + 3 * idx] += 2.0 * zm[0];
                grad[3 * nf_ + 3 * idx + 1] += 2.0 * zm[1];
                grad[3 * nf_ + 3 * idx + 2] += zn;
                gp += zt;
            }
        }
        auto& fft = const_cast<SpectralTransform&>(fft_);
        const auto& modes = grid_.modes_half();
        fft.adjoint(modes, a11.data(), false, 1, 0, grad.data());
        fft.adjoint(modes, a12.data(), false, 0, 1, grad.data());
        fft.adjoint(modes, a21.data(), false, 1, 0, grad.data() + nf_);
        fft.adjoint(modes, a22.data(), false, 0, 1, grad.data() + nf_);
        fft.adjoint(modes, b11.data(), false, 2, 0, grad.data() + 2 * nf_);
        fft.adjoint(modes, b12.data(), false, 1, 1, grad.data() + 2 * nf_);
        fft.adjoint(modes, b22.data(), false, 0, 2, grad.data() + 2 * nf_);
        grad[dof() - 3] += gp[0];
        grad[dof() - 2] += gp[1];
        grad[dof() - 1] += gp[2];
    }

    void affine(const TangentForm2& q, MatX& E) const override {
        const int nyy = grid_.n_y() * grid_.n_y();
        const Vec6 eq = embed_.Et * q.v;
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double t = grid_.t_nodes()[it];
            for (int jy = 0; jy < nyy; ++jy) E.col(it * nyy + jy) = t * eq;
        }
    }

    void weight(MatX& E) const override {
        for (int idx = 0; idx < N_; ++idx)
            E.col(idx) = (mat_.w[idx] * (mat_.m[idx] * E.col(idx))).eval();
    }

    VecX precond_diag() const override {
        VecX d = VecX::Zero(dof());
        const auto& modes = grid_.modes_half();
        double wt_sum = 0.0, wtt_sum = 0.0;
        Mat6 mw = Mat6::Zero(), mwt = Mat6::Zero();
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double w = grid_.t_weights()[it], t = grid_.t_nodes()[it];
            wt_sum += w;
            wtt_sum += w * t * t;
            mw += w * mat_.m_bar[it];
            mwt += w * t * t * mat_.m_bar[it];
        }
        for (size_t mi = 0; mi < modes.size(); ++mi) {
            const Vec2 k(2.0 * M_PI * modes[mi].k1, 2.0 * M_PI * modes[mi].k2);
            for (int c = 0; c < 2; ++c) {
                Vec3 s;  // tangential Voigt-2 pattern of sym(e_c k^T)
                s << (c == 0 ? k[0] : 0.0), (c == 1 ? k[1] : 0.0),
                    (c == 0 ? k[1] : k[0]) / kSqrt2;
                const Vec6 v = embed_.Et * s;
                d[c * nf_ + 2 * mi] = d[c * nf_ + 2 * mi + 1] = 0.5 * v.dot(mw * v);
            }
            Vec3 s;
            s << k[0] * k[0], k[1] * k[1], kSqrt2 * k[0] * k[1];
            const Vec6 v = embed_.Et * s;
            d[2 * nf_ + 2 * mi] = d[2 * nf_ + 2 * mi + 1] = 0.5 * v.dot(mwt * v);
        }
        const int nyy = grid_.n_y() * grid_.n_y();
        for (int it = 0; it < grid_.n_t(); ++it)
            for (int jy = 0; jy < nyy; ++jy) {
                const int idx = it * nyy + jy;
                const Vec6 m0 = 2.0 * embed_.Em.col(0), m1 = 2.0 * embed_.Em.col(1);
                d[3 * nf_ + 3 * idx] = mat_.w[idx] * m0.dot(mat_.m[idx] * m0);
                d[3 * nf_ + 3 * idx + 1] = mat_.w[idx] * m1.dot(mat_.m[idx] * m1);
                d[3 * nf_ + 3 * idx + 2] = mat_.w[idx] * embed_.En.dot(mat_.m[idx] * embed_.En);
            }
        for (int c = 0; c < 3; ++c) {
            const Vec6 v = embed_.Et.col(c);
            d[dof() - 3 + c] = v.dot(mw * v);
        }
        return d;
    }

    const FrameEmbed& embed() const { return embed_; }

private:
    CellGrid grid_;
    FrameEmbed embed_;
    MaterialSamples mat_;
    SpectralTransform fft_;
    int nf_, N_;
};

// Unknowns [zeta1 | zeta2 | phi | p]; samples are tangential dual Voigt-2
// vectors weighted by per-node 3x3 reduced forms (the per-node elimination of
// the free strain components).
class Regime0Reduced final : public CellOperator {
public:
    Regime0Reduced(const CellGrid& grid, std::vector<Mat3> s2, std::vector<double> w)
        : grid_(grid),
          s2_(std::move(s2)),
          w_(std::move(w)),
          fft_(grid.n_y()),
          nf_(grid.fourier_dof()),
          N_(grid.node_count()) {
        s2_bar_.assign(grid_.n_t(), Mat3::Zero());
        const int nyy = grid_.n_y() * grid_.n_y();
        for (int it = 0; it < grid_.n_t(); ++it) {
            for (int jy = 0; jy < nyy; ++jy) s2_bar_[it] += s2_[it * nyy + jy];
            s2_bar_[it] *= grid_.y_weight();
        }
    }

    int dof() const override { return 3 * nf_ + 3; }
    int rows() const override { return 3; }
    int cols() const override { return N_; }

    void apply(const VecX& u, MatX& E) const override {
        const int nyy = grid_.n_y() * grid_.n_y();
        std::vector<double> d11(nyy), d12(nyy), d21(nyy), d22(nyy);
        std::vector<double> h11(nyy), h12(nyy), h22(nyy);
        auto& fft = const_cast<SpectralTransform&>(fft_);
        const auto& modes = grid_.modes_half();
        fft.synth(modes, u.data(), false, 1, 0, d11.data());
        fft.synth(modes, u.data(), false, 0, 1, d12.data());
        fft.synth(modes, u.data() + nf_, false, 1, 0, d21.data());
        fft.synth(modes, u.data() + nf_, false, 0, 1, d22.data());
        fft.synth(modes, u.data() + 2 * nf_, false, 2, 0, h11.data());
        fft.synth(modes, u.data() + 2 * nf_, false, 1, 1, h12.data());
        fft.synth(modes, u.data() + 2 * nf_, false, 0, 2, h22.data());
        const Vec3 p(u[dof() - 3], u[dof() - 2], u[dof() - 1]);
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double t = grid_.t_nodes()[it];
            for (int jy = 0; jy < nyy; ++jy) {
                Vec3 vt;
                vt[0] = d11[jy] - t * h11[jy] + p[0];
                vt[1] = d22[jy] - t * h22[jy] + p[1];
                vt[2] = (d12[jy] + d21[jy]) / kSqrt2 - t * kSqrt2 * h12[jy] + p[2];
                E.col(it * nyy + jy) = vt;
            }
        }
    }

    void adjoint(const MatX& Z, VecX& grad) const override {
        const int nyy = grid_.n_y() * grid_.n_y();
        std::vector<double> a11(nyy, 0.0), a12(nyy, 0.0), a21(nyy, 0.0), a22(nyy, 0.0);
        std::vector<double> b11(nyy, 0.0), b12(nyy, 0.0), b22(nyy, 0.0);
        Vec3 gp = Vec3::Zero();
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double t = grid_.t_nodes()[it];
            for (int jy = 0; jy < nyy; ++jy) {
                const Vec3 zt = Z.col(it * nyy + jy);
                a11[jy] += zt[0];
                a22[jy] += zt[1];
                a12[jy] += zt[2] / kSqrt2;
                a21[jy] += zt[2] / kSqrt2;
                b11[jy] += -t * zt[0];
                b22[jy] += -t * zt[1];
                b12[jy] += -t * kSqrt2 * zt[2];
                gp += zt;
            }
        }
        auto& fft = const_cast<SpectralTransform&>(fft_);
        const auto& modes = grid_.modes_half();
        fft.adjoint(modes, a11.data(), false, 1, 0, grad.data());
        fft.adjoint(modes, a12.data(), false, 0, 1, grad.data());
        fft.adjoint(modes, a21.data(), false, 1, 0, grad.data() + nf_);
        fft.adjoint(modes, a22.data(), false, 0, 1, grad.data() + nf_);
        fft.adjoint(modes, b11.data(), false, 2, 0, grad.data() + 2 * nf_);
        fft.adjoint(modes, b12.data(), false, 1, 1, grad.data() + 2 * nf_);
        fft.adjoint(modes, b22.data(), false, 0, 2, grad.data() + 2 * nf_);
        grad[dof() - 3] += gp[0];
        grad[dof() - 2] += gp[1];
        grad[dof() - 1] += gp[2];
    }

    void affine(const TangentForm2& q, MatX& E) const override {
        const int nyy = grid_.n_y() * grid_.n_y();
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double t = grid_.t_nodes()[it];
            for (int jy = 0; jy < nyy; ++jy) E.col(it * nyy + jy) = t * q.v;
        }
    }

    void weight(MatX& E) const override {
        for (int idx = 0; idx < N_; ++idx)
            E.col(idx) = (w_[idx] * (s2_[idx] * E.col(idx))).eval();
    }

    VecX precond_diag() const override {
        VecX d = VecX::Zero(dof());
        const auto& modes = grid_.modes_half();
        Mat3 sw = Mat3::Zero(), swt = Mat3::Zero();
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double w = grid_.t_weights()[it], t = grid_.t_nodes()[it];
            sw += w * s2_bar_[it];
            swt += w * t * t * s2_bar_[it];
        }
        for (size_t mi = 0; mi < modes.size(); ++mi) {
            const Vec2 k(2.0 * M_PI * modes[mi].k1, 2.0 * M_PI * modes[mi].k2);
            for (int c = 0; c < 2; ++c) {
                Vec3 s;
                s << (c == 0 ? k[0] : 0.0), (c == 1 ? k[1] : 0.0),
                    (c == 0 ? k[1] : k[0]) / kSqrt2;
                d[c * nf_ + 2 * mi] = d[c * nf_ + 2 * mi + 1] = 0.5 * s.dot(sw * s);
            }
            Vec3 s;
            s << k[0] * k[0], k[1] * k[1], kSqrt2 * k[0] * k[1];
            d[2 * nf_ + 2 * mi] = d[2 * nf_ + 2 * mi + 1] = 0.5 * s.dot(swt * s);
        }
        for (int c = 0; c < 3; ++c) d[dof() - 3 + c] = sw(c, c);
        return d;
    }

private:
    CellGrid grid_;
    std::vector<Mat3> s2_;
    std::vector<double> w_;
    std::vector<Mat3> s2_bar_;
    SpectralTransform fft_;
    int nf_, N_;
};

// --------------------------------------------------------------- finite gamma

// Scalar-field layout: level 0 has no constant coefficient, levels >= 1 do.
struct GammaLayout {
    int nf;        // 2 * |K+|
    int p_leg;
    int level0_size;
    int level_size;

    explicit GammaLayout(const CellGrid& g)
        : nf(g.fourier_dof()), p_leg(g.p_leg()), level0_size(nf), level_size(nf + 1) {}

    int scalar_dof() const { return level0_size + p_leg * level_size; }
    int level_offset(int l) const { return l == 0 ? 0 : level0_size + (l - 1) * level_size; }
    bool level_has_zero(int l) const { return l > 0; }
};

class RegimeGamma final : public CellOperator {
public:
    RegimeGamma(const MaterialLaw& law, const PointFrame& frame, const CellGrid& grid, double gamma)
        : grid_(grid),
          layout_(grid),
          embed_(FrameEmbed::make(frame)),
          mat_(MaterialSamples::make(law, grid)),
          fft_(grid.n_y()),
          gamma_(gamma),
          N_(grid.node_count()) {}

    int dof() const override { return 3 * layout_.scalar_dof() + 3; }
    int rows() const override { return 6; }
    int cols() const override { return N_; }

    void apply(const VecX& u, MatX& E) const override {
        const int nyy = grid_.n_y() * grid_.n_y();
        const int sd = layout_.scalar_dof();
        auto& fft = const_cast<SpectralTransform&>(fft_);
        const auto& modes = grid_.modes_half();
        // Per level and field: value and first-derivative grids.
        const int L = layout_.p_leg + 1;
        std::vector<std::vector<double>> z1v(L), z1d1(L), z1d2(L);
        std::vector<std::vector<double>> z2v(L), z2d1(L), z2d2(L);
        std::vector<std::vector<double>> rv(L), rd1(L), rd2(L);
        for (int l = 0; l < L; ++l) {
            const bool has0 = layout_.level_has_zero(l);
            const int off = layout_.level_offset(l);
            auto synth_all = [&](const double* base, std::vector<double>& v,
                                 std::vector<double>& d1, std::vector<double>& d2) {
                v.resize(nyy);
                d1.resize(nyy);
                d2.resize(nyy);
                fft.synth(modes, base + off, has0, 0, 0, v.data());
                fft.synth(modes, base + off, has0, 1, 0, d1.data());
                fft.synth(modes, base + off, has0, 0, 1, d2.data());
            };
            synth_all(u.data(), z1v[l], z1d1[l], z1d2[l]);
            synth_all(u.data() + sd, z2v[l], z2d1[l], z2d2[l]);
            synth_all(u.data() + 2 * sd, rv[l], rd1[l], rd2[l]);
        }
        const Vec3 p(u[dof() - 3], u[dof() - 2], u[dof() - 1]);
        const double ig = 1.0 / gamma_;
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double t = grid_.t_nodes()[it];
            for (int jy = 0; jy < nyy; ++jy) {
                double s11 = 0, s22 = 0, s12 = 0, m1 = 0, m2 = 0, cn = 0;
                for (int l = 0; l < L; ++l) {
                    const double lv = grid_.legendre(l, it);
                    const double ld = grid_.legendre_d(l, it);
                    s11 += lv * z1d1[l][jy];
                    s22 += lv * z2d2[l][jy];
                    s12 += 0.5 * lv * (z1d2[l][jy] + z2d1[l][jy]);
                    m1 += lv * rd1[l][jy] + ig * ld * z1v[l][jy];
                    m2 += lv * rd2[l][jy] + ig * ld * z2v[l][jy];
                    cn += ig * ld * rv[l][jy];
                }
                Vec3 vt(s11 + p[0], s22 + p[1], kSqrt2 * s12 + p[2]);
                const int idx = it * nyy + jy;
                E.col(idx) =
                    embed_.Et * vt + embed_.Em * Eigen::Vector2d(m1, m2) + embed_.En * cn;
            }
        }
    }

    void adjoint(const MatX& Z, VecX& grad) const override {
        const int nyy = grid_.n_y() * grid_.n_y();
        const int sd = layout_.scalar_dof();
        const int L = layout_.p_leg + 1;
        const double ig = 1.0 / gamma_;
        std::vector<std::vector<double>> az1v(L), az1d1(L), az1d2(L);
        std::vector<std::vector<double>> az2v(L), az2d1(L), az2d2(L);
        std::vector<std::vector<double>> arv(L), ard1(L), ard2(L);
        for (int l = 0; l < L; ++l) {
            az1v[l].assign(nyy, 0.0);
            az1d1[l].assign(nyy, 0.0);
            az1d2[l].assign(nyy, 0.0);
            az2v[l].assign(nyy, 0.0);
            az2d1[l].assign(nyy, 0.0);
            az2d2[l].assign(nyy, 0.0);
            arv[l].assign(nyy, 0.0);
            ard1[l].assign(nyy, 0.0);
            ard2[l].assign(nyy, 0.0);
        }
        Vec3 gp = Vec3::Zero();
        for (int it = 0; it < grid_.n_t(); ++it) {
            for (int jy = 0; jy < nyy; ++jy) {
                const int idx = it * nyy + jy;
                const Vec3 zt = embed_.Et.transpose() * Z.col(idx);
                const Eigen::Vector2d zm = embed_.Em.transpose() * Z.col(idx);
                const double zn = embed_.En.dot(Z.col(idx));
                gp += zt;
                for (int l = 0; l < L; ++l) {
                    const double lv = grid_.legendre(l, it);
                    const double ld = grid_.legendre_d(l, it);
                    az1d1[l][jy] += lv * zt[0];
                    az2d2[l][jy] += lv * zt[1];
                    az1d2[l][jy] += lv * zt[2] / kSqrt2;
                    az2d1[l][jy] += lv * zt[2] / kSqrt2;
                    ard1[l][jy] += lv * zm[0];
                    ard2[l][jy] += lv * zm[1];
                    az1v[l][jy] += ig * ld * zm[0];
                    az2v[l][jy] += ig * ld * zm[1];
                    arv[l][jy] += ig * ld * zn;
                }
            }
        }
        auto& fft = const_cast<SpectralTransform&>(fft_);
        const auto& modes = grid_.modes_half();
        for (int l = 0; l < L; ++l) {
            const bool has0 = layout_.level_has_zero(l);
            const int off = layout_.level_offset(l);
            fft.adjoint(modes, az1v[l].data(), has0, 0, 0, grad.data() + off);
            fft.adjoint(modes, az1d1[l].data(), has0, 1, 0, grad.data() + off);
            fft.adjoint(modes, az1d2[l].data(), has0, 0, 1, grad.data() + off);
            fft.adjoint(modes, az2v[l].data(), has0, 0, 0, grad.data() + sd + off);
            fft.adjoint(modes, az2d1[l].data(), has0, 1, 0, grad.data() + sd + off);
            fft.adjoint(modes, az2d2[l].data(), has0, 0, 1, grad.data() + sd + off);
            fft.adjoint(modes, arv[l].data(), has0, 0, 0, grad.data() + 2 * sd + off);
            fft.adjoint(modes, ard1[l].data(), has0, 1, 0, grad.data() + 2 * sd + off);
            fft.adjoint(modes, ard2[l].data(), has0, 0, 1, grad.data() + 2 * sd + off);
        }
        grad[dof() - 3] += gp[0];
        grad[dof() - 2] += gp[1];
        grad[dof() - 1] += gp[2];
    }

    void affine(const TangentForm2& q, MatX& E) const override {
        const int nyy = grid_.n_y() * grid_.n_y();
        const Vec6 eq = embed_.Et * q.v;
        for (int it = 0; it < grid_.n_t(); ++it) {
            const double t = grid_.t_nodes()[it];
            for (int jy = 0; jy < nyy; ++jy) E.col(it * nyy + jy) = t * eq;
        }
    }

    void weight(MatX& E) const override {
        for (int idx = 0; idx < N_; ++idx)
            E.col(idx) = (mat_.w[idx] * (mat_.m[idx] * E.col(idx))).eval();
    }

    VecX precond_diag() const override {
        VecX d = VecX::Zero(dof());
        const auto& modes = grid_.modes_half();
        const int sd = layout_.scalar_dof();
        const int L = layout_.p_leg + 1;
        const double ig2 = 1.0 / (gamma_ * gamma_);
        // Per level: t-quadrature of L_l^2 and L_l'^2 against the averaged law.
        for (int l = 0; l < L; ++l) {
            Mat6 mw = Mat6::Zero(), mwd = Mat6::Zero();
            for (int it = 0; it < grid_.n_t(); ++it) {
                const double w = grid_.t_weights()[it];
                const double lv = grid_.legendre(l, it), ld = grid_.legendre_d(l, it);
                mw += w * lv * lv * mat_.m_bar[it];
                mwd += w * ld * ld * mat_.m_bar[it];
            }
            const int off = layout_.level_offset(l);
            const bool has0 = layout_.level_has_zero(l);
            auto set_entry = [&](int field, int pos, double val) {
                d[field * sd + off + pos] = std::max(val, 0.0);
            };
            int pos = 0;
            if (has0) {
                // constant-in-y coefficient: only the d3 channels act
                const Vec6 vm0 = embed_.Em.col(0), vm1 = embed_.Em.col(1);
                set_entry(0, pos, ig2 * vm0.dot(mwd * vm0));
                set_entry(1, pos, ig2 * vm1.dot(mwd * vm1));
                set_entry(2, pos, ig2 * embed_.En.dot(mwd * embed_.En));
                pos = 1;
            }
            for (size_t mi = 0; mi < modes.size(); ++mi) {
                const Vec2 k(2.0 * M_PI * modes[mi].k1, 2.0 * M_PI * modes[mi].k2);
                for (int c = 0; c < 2; ++c) {
                    Vec3 s;
                    s << (c == 0 ? k[0] : 0.0), (c == 1 ? k[1] : 0.0),
                        (c == 0 ? k[1] : k[0]) / kSqrt2;
                    const Vec6 vdef = embed_.Et * s;
                    const Vec6 vmix = embed_.Em.col(c);
                    const double val = 0.5 * vdef.dot(mw * vdef) + 0.5 * ig2 * vmix.dot(mwd * vmix);
                    d[c * sd + off + pos + 2 * mi] = val;
                    d[c * sd + off + pos + 2 * mi + 1] = val;
                }
                const Vec6 vr = embed_.Em.col(0) * k[0] + embed_.Em.col(1) * k[1];
                const double val = 0.5 * vr.dot(mw * vr) + 0.5 * ig2 * embed_.En.dot(mwd * embed_.En);
                d[2 * sd + off + pos + 2 * mi] = val;
                d[2 * sd + off + pos + 2 * mi + 1] = val;
            }
        }
        Mat6 mw = Mat6::Zero();
        for (int it = 0; it < grid_.n_t(); ++it) mw += grid_.t_weights()[it] * mat_.m_bar[it];
        for (int c = 0; c < 3; ++c) {
            const Vec6 v = embed_.Et.col(c);
            d[dof() - 3 + c] = v.dot(mw * v);
        }
        return d;
    }

    const GammaLayout& layout() const { return layout_; }

private:
    CellGrid grid_;
    GammaLayout layout_;
    FrameEmbed embed_;
    MaterialSamples mat_;
    SpectralTransform fft_;
    double gamma_;
    int N_;
};

// ---------------------------------------------------------------- infinity --

// One t-slice: unknowns [zeta1 | zeta2 | rho | c]; the tangential offset r is
// supplied through affine_r.
class SliceInf final : public CellOperator {
public:
    SliceInf(const MaterialLaw& law, const PointFrame& frame, const CellGrid& grid, int slice)
        : grid_(grid),
          embed_(FrameEmbed::make(frame)),
          fft_(grid.n_y()),
          nf_(grid.fourier_dof()),
          slice_(slice) {
        const int ny = grid.n_y();
        const double t = grid.t_nodes()[slice];
        m_.resize(ny * ny);
        w_ = grid.t_weights()[slice] * grid.y_weight();
        m_bar_ = Mat6::Zero();
        for (int j1 = 0; j1 < ny; ++j1)
            for (int j2 = 0; j2 < ny; ++j2) {
                m_[j1 * ny + j2] = law.eval(t, grid.y_node(j1, j2));
                m_bar_ += m_[j1 * ny + j2];
            }
        m_bar_ *= grid.y_weight();
    }

    int dof() const override { return 3 * nf_ + 3; }
    int rows() const override { return 6; }
    int cols() const override { return grid_.n_y() * grid_.n_y(); }

    void apply(const VecX& u, MatX& E) const override {
        const int nyy = cols();
        std::vector<double> d11(nyy), d12(nyy), d21(nyy), d22(nyy), r1(nyy), r2(nyy);
        auto& fft = const_cast<SpectralTransform&>(fft_);
        const auto& modes = grid_.modes_half();
        fft.synth(modes, u.data(), false, 1, 0, d11.data());
        fft.synth(modes, u.data(), false, 0, 1, d12.data());
        fft.synth(modes, u.data() + nf_, false, 1, 0, d21.data());
        fft.synth(modes, u.data() + nf_, false, 0, 1, d22.data());
        fft.synth(modes, u.data() + 2 * nf_, false, 1, 0, r1.data());
        fft.synth(modes, u.data() + 2 * nf_, false, 0, 1, r2.data());
        const Vec3 c(u[dof() - 3], u[dof() - 2], u[dof() - 1]);
        for (int jy = 0; jy < nyy; ++jy) {
            Vec3 vt(d11[jy], d22[jy], (d12[jy] + d21[jy]) / kSqrt2);
            const Eigen::Vector2d m(2.0 * (r1[jy] + c[0]), 2.0 * (r2[jy] + c[1]));
            E.col(jy) = embed_.Et * vt + embed_.Em * m + embed_.En * c[2];
        }
    }

    void adjoint(const MatX& Z, VecX& grad) const override {
        const int nyy = cols();
        std::vector<double> a11(nyy), a12(nyy), a21(nyy), a22(nyy), g1(nyy), g2(nyy);
        Vec3 gc = Vec3::Zero();
        for (int jy = 0; jy < nyy; ++jy) {
            const Vec3 zt = embed_.Et.transpose() * Z.col(jy);
            const Eigen::Vector2d zm = embed_.Em.transpose() * Z.col(jy);
            const double zn = embed_.En.dot(Z.col(jy));
            a11[jy] = zt[0];
            a22[jy] = zt[1];
            a12[jy] = zt[2] / kSqrt2;
            a21[jy] = zt[2] / kSqrt2;
            g1[jy] = 2.0 * zm[0];
            g2[jy] = 2.0 * zm[1];
            gc += Vec3(2.0 * zm[0], 2.0 * zm[1], zn);
        }
        auto& fft = const_cast<SpectralTransform&>(fft_);
        const auto& modes = grid_.modes_half();
        fft.adjoint(modes, a11.data(), false, 1, 0, grad.data());
        fft.adjoint(modes, a12.data(), false, 0, 1, grad.data());
        fft.adjoint(modes, a21.data(), false, 1, 0, grad.data() + nf_);
        fft.adjoint(modes, a22.data(), false, 0, 1, grad.data() + nf_);
        fft.adjoint(modes, g1.data(), false, 1, 0, grad.data() + 2 * nf_);
        fft.adjoint(modes, g2.data(), false, 0, 1, grad.data() + 2 * nf_);
        grad[dof() - 3] += gc[0];
        grad[dof() - 2] += gc[1];
        grad[dof() - 1] += gc[2];
    }

    // The slice affine term: embedded tangential vector r (not t*q).
    void affine_r(const Vec3& r, MatX& E) const {
        const Vec6 er = embed_.Et * r;
        for (int jy = 0; jy < cols(); ++jy) E.col(jy) = er;
    }

    void affine(const TangentForm2& q, MatX& E) const override {
        affine_r(grid_.t_nodes()[slice_] * q.v, E);
    }

    void weight(MatX& E) const override {
        for (int jy = 0; jy < cols(); ++jy) E.col(jy) = (w_ * (m_[jy] * E.col(jy))).eval();
    }

    VecX precond_diag() const override {
        VecX d = VecX::Zero(dof());
        const auto& modes = grid_.modes_half();
        const double wt = grid_.t_weights()[slice_];
        for (size_t mi = 0; mi < modes.size(); ++mi) {
            const Vec2 k(2.0 * M_PI * modes[mi].k1, 2.0 * M_PI * modes[mi].k2);
            for (int c = 0; c < 2; ++c) {
                Vec3 s;
                s << (c == 0 ? k[0] : 0.0), (c == 1 ? k[1] : 0.0),
                    (c == 0 ? k[1] : k[0]) / kSqrt2;
                const Vec6 v = embed_.Et * s;
                d[c * nf_ + 2 * mi] = d[c * nf_ + 2 * mi + 1] = 0.5 * wt * v.dot(m_bar_ * v);
            }
            const Vec6 vr = 2.0 * (embed_.Em.col(0) * k[0] + embed_.Em.col(1) * k[1]);
            d[2 * nf_ + 2 * mi] = d[2 * nf_ + 2 * mi + 1] = 0.5 * wt * vr.dot(m_bar_ * vr);
        }
        const Vec6 c0 = 2.0 * embed_.Em.col(0), c1 = 2.0 * embed_.Em.col(1);
        d[dof() - 3] = wt * c0.dot(m_bar_ * c0);
        d[dof() - 2] = wt * c1.dot(m_bar_ * c1);
        d[dof() - 1] = wt * embed_.En.dot(m_bar_ * embed_.En);
        return d;
    }

    // rhs for offset r: -A^T W (E r); also exposes B = A^T W E columns.
    VecX rhs_for(const Vec3& r) const {
        MatX E(rows(), cols());
        affine_r(r, E);
        weight(E);
        VecX g = VecX::Zero(dof());
        adjoint(E, g);
        return -g;
    }

    double offset_energy(const Vec3& ra, const Vec3& rb) const {
        MatX Ea(rows(), cols()), Eb(rows(), cols());
        affine_r(ra, Ea);
        affine_r(rb, Eb);
        weight(Eb);
        return (Ea.array() * Eb.array()).sum();
    }

private:
    CellGrid grid_;
    FrameEmbed embed_;
    std::vector<Mat6> m_;
    double w_ = 0.0;
    Mat6 m_bar_;
    SpectralTransform fft_;
    int nf_;
    int slice_;
};

// Per-node reduced 3x3 forms by direct block elimination (independent of the
// relax_pointwise code path, which goes through the orthonormal rotation).
std::vector<Mat3> reduce_per_node(const MaterialLaw& law, const PointFrame& frame,
                                  const CellGrid& grid, std::vector<double>* weights) {
    const FrameEmbed embed = FrameEmbed::make(frame);
    Eigen::Matrix<double, 6, 3> G;
    G.col(0) = 2.0 * embed.Em.col(0);
    G.col(1) = 2.0 * embed.Em.col(1);
    G.col(2) = embed.En;
    std::vector<Mat3> out(grid.node_count());
    if (weights) weights->assign(grid.node_count(), 0.0);
    for (int it = 0; it < grid.n_t(); ++it) {
        const double t = grid.t_nodes()[it];
        for (int j1 = 0; j1 < grid.n_y(); ++j1)
            for (int j2 = 0; j2 < grid.n_y(); ++j2) {
                const int idx = grid.node_index(it, j1, j2);
                const Mat6 m = law.eval(t, grid.y_node(j1, j2));
                const Mat3 gmg = G.transpose() * m * G;
                const Eigen::Matrix<double, 3, 3> cross = G.transpose() * m * embed.Et;
                Mat3 s = embed.Et.transpose() * m * embed.Et -
                         cross.transpose() * gmg.ldlt().solve(cross);
                out[idx] = 0.5 * (s + s.transpose());
                if (weights) (*weights)[idx] = grid.t_weights()[it] * grid.y_weight();
            }
    }
    return out;
}

RelaxField0 unpack_field0(const CellGrid& grid, const VecX& u, bool has_g) {
    RelaxField0 f;
    const int nf = grid.fourier_dof();
    f.zeta1 = u.segment(0, nf);
    f.zeta2 = u.segment(nf, nf);
    f.phi = u.segment(2 * nf, nf);
    f.has_g = has_g;
    if (has_g) f.g = u.segment(3 * nf, 3 * grid.node_count());
    return f;
}

VecX pack_field0(const CellGrid& grid, const RelaxField0& f, const Vec3& p) {
    const int nf = grid.fourier_dof();
    const int gsize = f.has_g ? 3 * grid.node_count() : 0;
    VecX u = VecX::Zero(3 * nf + gsize + 3);
    u.segment(0, nf) = f.zeta1;
    u.segment(nf, nf) = f.zeta2;
    u.segment(2 * nf, nf) = f.phi;
    if (f.has_g) u.segment(3 * nf, gsize) = f.g;
    u.tail(3) = p;
    return u;
}

RelaxFieldGamma unpack_gamma(const CellGrid& grid, const VecX& u) {
    RelaxFieldGamma f;
    const int sd = RelaxFieldGamma::scalar_dof(grid);
    f.zeta1 = u.segment(0, sd);
    f.zeta2 = u.segment(sd, sd);
    f.rho = u.segment(2 * sd, sd);
    return f;
}

VecX pack_gamma(const CellGrid& grid, const RelaxFieldGamma& f, const Vec3& p) {
    const int sd = RelaxFieldGamma::scalar_dof(grid);
    VecX u = VecX::Zero(3 * sd + 3);
    u.segment(0, sd) = f.zeta1;
    u.segment(sd, sd) = f.zeta2;
    u.segment(2 * sd, sd) = f.rho;
    u.tail(3) = p;
    return u;
}

}  // namespace

RelaxField0 RelaxField0::zeros(const CellGrid& grid, bool with_g) {
    RelaxField0 f;
    f.zeta1 = VecX::Zero(grid.fourier_dof());
    f.zeta2 = VecX::Zero(grid.fourier_dof());
    f.phi = VecX::Zero(grid.fourier_dof());
    f.has_g = with_g;
    if (with_g) f.g = VecX::Zero(3 * grid.node_count());
    return f;
}

int RelaxFieldGamma::scalar_dof(const CellGrid& grid) {
    return GammaLayout(grid).scalar_dof();
}

RelaxFieldGamma RelaxFieldGamma::zeros(const CellGrid& grid) {
    RelaxFieldGamma f;
    f.zeta1 = VecX::Zero(scalar_dof(grid));
    f.zeta2 = VecX::Zero(scalar_dof(grid));
    f.rho = VecX::Zero(scalar_dof(grid));
    return f;
}

RelaxFieldInf RelaxFieldInf::zeros(const CellGrid& grid) {
    RelaxFieldInf f;
    f.slices = MatX::Zero(3 * grid.fourier_dof() + 3, grid.n_t());
    return f;
}

StrainSamples apply_u0(const RelaxField0& f, const CellGrid& grid, const PointFrame& frame) {
    RelaxField0 fg = f;
    if (!fg.has_g) {
        fg.has_g = true;
        fg.g = VecX::Zero(3 * grid.node_count());
    }
    // The operator has no law dependence in its strain map; a unit law serves.
    Regime0Full op(*MaterialLaw::isotropic(0.5, 0.0), frame, grid);
    StrainSamples E(6, grid.node_count());
    op.apply(pack_field0(grid, fg, Vec3::Zero()), E);
    return E;
}

StrainSamples apply_ugamma(const RelaxFieldGamma& f, const CellGrid& grid, const PointFrame& frame,
                           double gamma) {
    if (!(gamma > 0) || !std::isfinite(gamma)) throw bad_gamma("apply_ugamma needs finite gamma > 0");
    const int sd = RelaxFieldGamma::scalar_dof(grid);
    if (f.zeta1.size() != sd || f.zeta2.size() != sd || f.rho.size() != sd)
        throw shape_mismatch("apply_ugamma: coefficient sizes do not match the grid");
    RegimeGamma opf(*MaterialLaw::isotropic(0.5, 0.0), frame, grid, gamma);
    StrainSamples E(6, grid.node_count());
    opf.apply(pack_gamma(grid, f, Vec3::Zero()), E);
    return E;
}

StrainSamples apply_uinf(const RelaxFieldInf& f, const CellGrid& grid, const PointFrame& frame) {
    const int sd = 3 * grid.fourier_dof() + 3;
    if (f.slices.rows() != sd || f.slices.cols() != grid.n_t())
        throw shape_mismatch("apply_uinf: slice count does not match n_t");
    StrainSamples E(6, grid.node_count());
    const int nyy = grid.n_y() * grid.n_y();
    for (int it = 0; it < grid.n_t(); ++it) {
        SliceInf op(*MaterialLaw::isotropic(0.5, 0.0), frame, grid, it);
        MatX Es(6, nyy);
        op.apply(f.slices.col(it), Es);
        E.block(0, it * nyy, 6, nyy) = Es;
    }
    return E;
}

namespace {

SolverOptions sanitize(const SolverOptions& opts) {
    SolverOptions o = opts;
    if (!(o.tol > 0)) o.tol = 1e-10;
    if (o.max_iter <= 0) o.max_iter = 10000;
    return o;
}

void check_q(const TangentForm2& q) {
    if (!q.v.allFinite()) throw invalid_argument("cell_solve: q has non-finite entries");
}

CellSolution solve_inf(const MaterialLaw& law, const PointFrame& frame, const TangentForm2& q,
                       const CellGrid& grid, const SolverOptions& opts) {
    CellSolution sol;
    sol.gamma = Gamma::inf();
    const int n_t = grid.n_t();
    // Per-slice solution operators for the Voigt-2 offset basis, then an exact
    // 3x3 outer minimization over p (the slices couple only through p).
    std::vector<Mat3> A_s(n_t);
    std::vector<std::array<VecX, 3>> basis_sol(n_t);
    double worst_res = 0.0;
    int worst_it = 0;
    for (int it = 0; it < n_t; ++it) {
        SliceInf op(law, frame, grid, it);
        Mat3 offset_gram;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                offset_gram(i, j) = op.offset_energy(Vec3::Unit(i), Vec3::Unit(j));
        std::array<VecX, 3> rhs;
        std::array<VecX, 3> us;
        for (int i = 0; i < 3; ++i) {
            rhs[i] = op.rhs_for(Vec3::Unit(i));
            CGOutcome cg = pcg(op, rhs[i], opts.tol, opts.max_iter);
            worst_res = std::max(worst_res, cg.rel_residual);
            worst_it = std::max(worst_it, cg.iterations);
            us[i] = std::move(cg.x);
        }
        Mat3 correction;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) correction(i, j) = us[i].dot(-rhs[j]);
        Mat3 As = offset_gram - correction;
        A_s[it] = 0.5 * (As + As.transpose());
        basis_sol[it] = std::move(us);
    }
    Mat3 outer = Mat3::Zero();
    Vec3 outer_rhs = Vec3::Zero();
    for (int it = 0; it < n_t; ++it) {
        outer += A_s[it];
        outer_rhs -= grid.t_nodes()[it] * (A_s[it] * q.v);
    }
    const Vec3 p = outer.ldlt().solve(outer_rhs);
    RelaxFieldInf f = RelaxFieldInf::zeros(grid);
    for (int it = 0; it < n_t; ++it) {
        const Vec3 r = p + grid.t_nodes()[it] * q.v;
        f.slices.col(it) =
            r[0] * basis_sol[it][0] + r[1] * basis_sol[it][1] + r[2] * basis_sol[it][2];
    }
    sol.finf = std::move(f);
    sol.p = TangentForm2(p);
    sol.residual = worst_res;
    sol.iterations = worst_it;
    sol.value = cell_energy(sol, law, frame, q, grid);
    return sol;
}

}  // namespace

CellSolution cell_solve(const Gamma& gamma, const MaterialLaw& law, const PointFrame& frame,
                        const TangentForm2& q, const CellGrid& grid, const SolverOptions& opts_in) {
    check_q(q);
    const SolverOptions opts = sanitize(opts_in);
    CellSolution sol;
    sol.gamma = gamma;
    if (gamma.is_zero()) {
        if (opts.keep_g) {
            Regime0Full op(law, frame, grid);
            CGOutcome cg = pcg_for_q(op, q, opts.tol, opts.max_iter);
            sol.f0 = unpack_field0(grid, cg.x, true);
            sol.p = TangentForm2(cg.x.tail(3));
            sol.residual = cg.rel_residual;
            sol.iterations = cg.iterations;
            sol.residual_history = std::move(cg.history);
        } else {
            std::vector<double> w;
            std::vector<Mat3> s2 = reduce_per_node(law, frame, grid, &w);
            Regime0Reduced op(grid, std::move(s2), std::move(w));
            CGOutcome cg = pcg_for_q(op, q, opts.tol, opts.max_iter);
            sol.f0 = unpack_field0(grid, cg.x, false);
            sol.p = TangentForm2(cg.x.tail(3));
            sol.residual = cg.rel_residual;
            sol.iterations = cg.iterations;
            sol.residual_history = std::move(cg.history);
        }
    } else if (gamma.is_inf()) {
        return solve_inf(law, frame, q, grid, opts);
    } else {
        RegimeGamma op(law, frame, grid, gamma.value);
        CGOutcome cg = pcg_for_q(op, q, opts.tol, opts.max_iter);
        sol.fgamma = unpack_gamma(grid, cg.x);
        sol.p = TangentForm2(cg.x.tail(3));
        sol.residual = cg.rel_residual;
        sol.iterations = cg.iterations;
        sol.residual_history = std::move(cg.history);
    }
    sol.value = cell_energy(sol, law, frame, q, grid);
    return sol;
}

double cell_energy(const CellSolution& sol, const MaterialLaw& law, const PointFrame& frame,
                   const TangentForm2& q, const CellGrid& grid) {
    if (sol.gamma.is_zero() && sol.f0 && !sol.f0->has_g) {
        // Reduced functional: the free strain components are eliminated per node.
        std::vector<double> w;
        std::vector<Mat3> s2 = reduce_per_node(law, frame, grid, &w);
        Regime0Reduced op(grid, std::move(s2), std::move(w));
        return op.energy(pack_field0(grid, *sol.f0, sol.p.v), q);
    }
    if (sol.gamma.is_zero() && sol.f0) {
        Regime0Full op(law, frame, grid);
        return op.energy(pack_field0(grid, *sol.f0, sol.p.v), q);
    }
    if (sol.gamma.is_inf() && sol.finf) {
        StrainSamples E = apply_uinf(*sol.finf, grid, frame);
        const FrameEmbed embed = FrameEmbed::make(frame);
        MaterialSamples mat = MaterialSamples::make(law, grid);
        const int nyy = grid.n_y() * grid.n_y();
        double total = 0.0;
        for (int it = 0; it < grid.n_t(); ++it) {
            const double t = grid.t_nodes()[it];
            const Vec6 off = embed.Et * (sol.p.v + t * q.v);
            for (int jy = 0; jy < nyy; ++jy) {
                const int idx = it * nyy + jy;
                const Vec6 e = E.col(idx) + off;
                total += mat.w[idx] * e.dot(mat.m[idx] * e);
            }
        }
        return total;
    }
    if (sol.gamma.is_finite_positive() && sol.fgamma) {
        RegimeGamma op(law, frame, grid, sol.gamma.value);
        return op.energy(pack_gamma(grid, *sol.fgamma, sol.p.v), q);
    }
    throw invalid_argument("cell_energy: solution does not carry fields for its regime");
}

double zero_field_value(const MaterialLaw& law, const PointFrame& frame, const TangentForm2& q,
                        const CellGrid& grid) {
    const FrameEmbed embed = FrameEmbed::make(frame);
    const Vec6 eq = embed.Et * q.v;
    double total = 0.0;
    for (int it = 0; it < grid.n_t(); ++it) {
        const double t = grid.t_nodes()[it];
        for (int j1 = 0; j1 < grid.n_y(); ++j1)
            for (int j2 = 0; j2 < grid.n_y(); ++j2) {
                const Mat6 m = law.eval(t, grid.y_node(j1, j2));
                const Vec6 e = t * eq;
                total += grid.t_weights()[it] * grid.y_weight() * e.dot(m * e);
            }
    }
    return total;
}

EffectiveForm effective_form(const Gamma& gamma, const MaterialLaw& law, const PointFrame& frame,
                             const CellGrid& grid, const SolverOptions& opts) {
    EffectiveForm out;
    out.gamma = gamma;
    out.n_y = grid.n_y();
    out.n_t = grid.n_t();
    out.p_leg = grid.p_leg();

    double diag[3];
    CellSolution sols[3];
    for (int i = 0; i < 3; ++i) {
        TangentForm2 qi;
        qi.v = Vec3::Unit(i);
        sols[i] = cell_solve(gamma, law, frame, qi, grid, opts);
        diag[i] = sols[i].value;
        out.max_residual = std::max(out.max_residual, sols[i].residual);
        out.max_iterations = std::max(out.max_iterations, sols[i].iterations);
    }
    Mat3 m = Mat3::Zero();
    for (int i = 0; i < 3; ++i) m(i, i) = diag[i];
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            TangentForm2 qij;
            qij.v = Vec3::Unit(i) + Vec3::Unit(j);
            CellSolution s = cell_solve(gamma, law, frame, qij, grid, opts);
            out.max_residual = std::max(out.max_residual, s.residual);
            out.max_iterations = std::max(out.max_iterations, s.iterations);
            m(i, j) = m(j, i) = 0.5 * (s.value - diag[i] - diag[j]);
        }
    out.m = m;
    Eigen::SelfAdjointEigenSolver<Mat3> es(m);
    if (es.eigenvalues().minCoeff() <= 0)
        throw not_spd("effective_form: assembled matrix is not positive definite");
    // Orthonormal-frame representation via the cached coefficient conversion:
    // q_dual = C^{-1} q_ortho, so m_ortho = C^{-T} m C^{-1}.
    const Mat3 cinv = frame.dual_to_ortho.inverse();
    out.m_ortho = cinv.transpose() * m * cinv;
    out.m_ortho = 0.5 * (out.m_ortho + out.m_ortho.transpose()).eval();
    return out;
}

bool verify_minimizer(const CellSolution& sol, const MaterialLaw& law, const PointFrame& frame,
                      const TangentForm2& q, const CellGrid& grid, int trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double base = cell_energy(sol, law, frame, q, grid);

    // Flatten the solution into the coefficient vector of its regime.
    VecX u;
    if (sol.gamma.is_zero() && sol.f0)
        u = pack_field0(grid, *sol.f0, sol.p.v);
    else if (sol.gamma.is_finite_positive() && sol.fgamma)
        u = pack_gamma(grid, *sol.fgamma, sol.p.v);
    else if (sol.gamma.is_inf() && sol.finf) {
        const int sd = int(sol.finf->slices.rows());
        u = VecX::Zero(sd * grid.n_t() + 3);
        for (int it = 0; it < grid.n_t(); ++it) u.segment(it * sd, sd) = sol.finf->slices.col(it);
        u.tail(3) = sol.p.v;
    } else {
        throw invalid_argument("verify_minimizer: solution does not carry fields");
    }

    const double scale = 1e-3 * std::max(u.norm(), 1e-6);
    for (int trial = 0; trial < trials; ++trial) {
        VecX d(u.size());
        for (int i = 0; i < d.size(); ++i) d[i] = gauss(rng);
        d *= scale / d.norm();
        const VecX up = u + d;
        CellSolution pert = sol;
        if (sol.gamma.is_zero()) {
            pert.f0 = unpack_field0(grid, up, sol.f0->has_g);
            pert.p = TangentForm2(up.tail(3));
        } else if (sol.gamma.is_finite_positive()) {
            pert.fgamma = unpack_gamma(grid, up);
            pert.p = TangentForm2(up.tail(3));
        } else {
            const int sd = int(sol.finf->slices.rows());
            RelaxFieldInf f = *sol.finf;
            for (int it = 0; it < grid.n_t(); ++it) f.slices.col(it) = up.segment(it * sd, sd);
            pert.finf = std::move(f);
            pert.p = TangentForm2(up.tail(3));
        }
        const double fval = cell_energy(pert, law, frame, q, grid);
        if (fval < base - 1e-12) return false;
    }
    return true;
}

double q0_via_q2(const MaterialLaw& law, const PointFrame& frame, const CellGrid& grid,
                 const TangentForm2& q, const SolverOptions& opts_in) {
    check_q(q);
    const SolverOptions opts = sanitize(opts_in);
    // Pointwise reduction through the relax_pointwise module.
    std::vector<Mat3> s2(grid.node_count());
    std::vector<double> w(grid.node_count());
    for (int it = 0; it < grid.n_t(); ++it) {
        const double t = grid.t_nodes()[it];
        for (int j1 = 0; j1 < grid.n_y(); ++j1)
            for (int j2 = 0; j2 < grid.n_y(); ++j2) {
                const int idx = grid.node_index(it, j1, j2);
                s2[idx] = q2_form(law.eval(t, grid.y_node(j1, j2)), frame).m_dual;
                w[idx] = grid.t_weights()[it] * grid.y_weight();
            }
    }
    Regime0Reduced op(grid, std::move(s2), std::move(w));
    CGOutcome cg = pcg_for_q(op, q, opts.tol, opts.max_iter);
    return op.energy(cg.x, q);
}

}  // namespace shf

#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "shellforms/errors.hpp"

namespace shf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;

// Rectangle [lo1,hi1] x [lo2,hi2] in chart coordinates.
struct Rect {
    double lo1 = 0.0, hi1 = 1.0;
    double lo2 = 0.0, hi2 = 1.0;

    double len1() const { return hi1 - lo1; }
    double len2() const { return hi2 - lo2; }
    bool contains(const Vec2& z, double pad = 0.0) const {
        return z[0] >= lo1 - pad && z[0] <= hi1 + pad && z[1] >= lo2 - pad && z[1] <= hi2 + pad;
    }
};

// Uniform tensor grid over a rectangle, endpoints included.
struct GridSpec {
    int n1 = 0;
    int n2 = 0;
    Rect rect;

    GridSpec() = default;
    GridSpec(int n1_, int n2_, const Rect& r) : n1(n1_), n2(n2_), rect(r) {
        if (n1 < 2 || n2 < 2) throw invalid_argument("grid needs at least 2 nodes per axis");
    }

    int count() const { return n1 * n2; }
    double h1() const { return rect.len1() / (n1 - 1); }
    double h2() const { return rect.len2() / (n2 - 1); }
    int index(int i, int j) const { return i * n2 + j; }
    Vec2 node(int i, int j) const {
        return {rect.lo1 + i * h1(), rect.lo2 + j * h2()};
    }
    // Trapezoid quadrature weight of node (i,j), already times h1*h2.
    double trapezoid_weight(int i, int j) const {
        double w = h1() * h2();
        if (i == 0 || i == n1 - 1) w *= 0.5;
        if (j == 0 || j == n2 - 1) w *= 0.5;
        return w;
    }
};

// Symmetric 2x2 tangential form stored as Voigt-2 (q11, q22, sqrt(2) q12) in the
// dual frame (tau^1, tau^2). Euclidean norm equals the Frobenius norm of the
// coefficient matrix.
struct TangentForm2 {
    Vec3 v = Vec3::Zero();

    TangentForm2() = default;
    explicit TangentForm2(const Vec3& voigt) : v(voigt) {}
    TangentForm2(double q11, double q22, double q12) : v(q11, q22, kSqrt2 * q12) {}

    static TangentForm2 from_matrix(const Mat2& q) {
        return TangentForm2(q(0, 0), q(1, 1), 0.5 * (q(0, 1) + q(1, 0)));
    }
    Mat2 matrix() const {
        Mat2 m;
        m << v[0], v[2] / kSqrt2, v[2] / kSqrt2, v[1];
        return m;
    }
    double trace() const { return v[0] + v[1]; }
    double norm() const { return v.norm(); }
};

// Voigt-6 vector of a symmetric 3x3 matrix: (S11, S22, S33, s2*S23, s2*S13, s2*S12).
inline Vec6 voigt6(const Mat3& g) {
    Mat3 s = 0.5 * (g + g.transpose());
    Vec6 v;
    v << s(0, 0), s(1, 1), s(2, 2), kSqrt2 * s(1, 2), kSqrt2 * s(0, 2), kSqrt2 * s(0, 1);
    return v;
}

inline Mat3 from_voigt6(const Vec6& v) {
    Mat3 s;
    s << v[0], v[5] / kSqrt2, v[4] / kSqrt2,
         v[5] / kSqrt2, v[1], v[3] / kSqrt2,
         v[4] / kSqrt2, v[3] / kSqrt2, v[2];
    return s;
}

inline Mat3 sym_outer(const Vec3& a, const Vec3& b) {
    return 0.5 * (a * b.transpose() + b * a.transpose());
}

// Voigt-6 matrix T of the congruence G -> B G B^T, i.e. voigt6(B G B^T) =
// T voigt6(G). With the sqrt(2) scaling T is orthogonal for B in SO(3).
Mat6 voigt6_rotation(const Mat3& basis);

// Scale ratio gamma in [0, inf]; 0 and inf select the degenerate regimes.
struct Gamma {
    double value = 0.0;
    bool infinite = false;

    static Gamma zero() { return {0.0, false}; }
    static Gamma finite(double g) {
        if (!(g > 0.0) || !std::isfinite(g)) throw bad_gamma("gamma must be positive and finite");
        return {g, false};
    }
    static Gamma inf() { return {0.0, true}; }

    bool is_zero() const { return !infinite && value == 0.0; }
    bool is_inf() const { return infinite; }
    bool is_finite_positive() const { return !infinite && value > 0.0; }
};

}  // namespace shf

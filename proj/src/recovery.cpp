#include "shellforms/recovery.hpp"

#include <cmath>

namespace shf {

namespace {

// Matched second-order stencils for s and w (see the rigid-motion identity in
// the module tests: both sides must use the same derivative operator).
struct Stencils {
    GridSpec grid;
    std::vector<Vec3> ds1, ds2;   // derivatives of the sampled chart
    std::vector<double> weight;   // trapezoid * sqrt(det g)

    Stencils(const SurfaceChart& chart, const GridSpec& g) : grid(g) {
        SampledMap s = SampledMap::from_chart(chart, g);
        ds1.resize(g.count());
        ds2.resize(g.count());
        weight.resize(g.count());
        for (int i = 0; i < g.n1; ++i)
            for (int j = 0; j < g.n2; ++j) {
                const int idx = g.index(i, j);
                ds1[idx] = s.d1(0, i, j);
                ds2[idx] = s.d1(1, i, j);
                Mat2 gm;
                gm << ds1[idx].dot(ds1[idx]), ds1[idx].dot(ds2[idx]), ds2[idx].dot(ds1[idx]),
                    ds2[idx].dot(ds2[idx]);
                const double det = gm.determinant();
                if (!(det > 1e-12)) throw degenerate_chart("recovery: det g <= 1e-12");
                weight[idx] = g.trapezoid_weight(i, j) * std::sqrt(det);
            }
    }
};

// First derivative of a nodal R^3 field with the SampledMap stencils.
Vec3 field_d1(const GridSpec& g, const std::vector<Vec3>& w, int axis, int i, int j) {
    const double h = axis == 0 ? g.h1() : g.h2();
    const int n = axis == 0 ? g.n1 : g.n2;
    const int p = axis == 0 ? i : j;
    auto at = [&](int sidx) -> const Vec3& {
        return axis == 0 ? w[g.index(sidx, j)] : w[g.index(i, sidx)];
    };
    if (p == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    if (p == n - 1) return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    return (at(p + 1) - at(p - 1)) / (2.0 * h);
}

// Adjoint of field_d1 in the unweighted nodal inner product.
void field_d1_adjoint(const GridSpec& g, const std::vector<Vec3>& z, int axis,
                      std::vector<Vec3>& out) {
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            const Vec3& zz = z[g.index(i, j)];
            if (zz.isZero(0.0)) continue;
            const double h = axis == 0 ? g.h1() : g.h2();
            const int n = axis == 0 ? g.n1 : g.n2;
            const int p = axis == 0 ? i : j;
            auto add = [&](int sidx, double c) {
                const int idx = axis == 0 ? g.index(sidx, j) : g.index(i, sidx);
                out[idx] += c * zz;
            };
            if (p == 0) {
                add(0, -3.0 / (2.0 * h));
                add(1, 4.0 / (2.0 * h));
                add(2, -1.0 / (2.0 * h));
            } else if (p == n - 1) {
                add(n - 1, 3.0 / (2.0 * h));
                add(n - 2, -4.0 / (2.0 * h));
                add(n - 3, 1.0 / (2.0 * h));
            } else {
                add(p + 1, 1.0 / (2.0 * h));
                add(p - 1, -1.0 / (2.0 * h));
            }
        }
}

// q^s_w samples as (q11, q22, sqrt2 q12) per node.
std::vector<Vec3> apply_qsw(const Stencils& st, const std::vector<Vec3>& w) {
    const GridSpec& g = st.grid;
    std::vector<Vec3> out(g.count());
    for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
            const int idx = g.index(i, j);
            const Vec3 dw1 = field_d1(g, w, 0, i, j);
            const Vec3 dw2 = field_d1(g, w, 1, i, j);
            out[idx][0] = st.ds1[idx].dot(dw1);
            out[idx][1] = st.ds2[idx].dot(dw2);
            out[idx][2] = 0.5 * (st.ds1[idx].dot(dw2) + st.ds2[idx].dot(dw1)) * kSqrt2;
        }
    return out;
}

// Adjoint of apply_qsw in the unweighted inner products.
std::vector<Vec3> apply_qsw_adjoint(const Stencils& st, const std::vector<Vec3>& z) {
    const GridSpec& g = st.grid;
    std::vector<Vec3> z1(g.count(), Vec3::Zero()), z2(g.count(), Vec3::Zero());
    for (int idx = 0; idx < g.count(); ++idx) {
        // d(out)/d(dw1) = q11 channel ds1 + q12 channel ds2/sqrt2, etc.
        z1[idx] = z[idx][0] * st.ds1[idx] + z[idx][2] * (kSqrt2 * 0.5) * st.ds2[idx];
        z2[idx] = z[idx][1] * st.ds2[idx] + z[idx][2] * (kSqrt2 * 0.5) * st.ds1[idx];
    }
    std::vector<Vec3> out(g.count(), Vec3::Zero());
    field_d1_adjoint(g, z1, 0, out);
    field_d1_adjoint(g, z2, 1, out);
    return out;
}

double weighted_norm2(const Stencils& st, const std::vector<Vec3>& v) {
    double total = 0.0;
    for (size_t i = 0; i < v.size(); ++i) total += st.weight[i] * v[i].squaredNorm();
    return total;
}

}  // namespace

BendingSystem::BendingSystem(std::shared_ptr<const SurfaceChart> chart_, const GridSpec& grid_,
                             std::vector<Mat2> B_)
    : chart(std::move(chart_)), grid(grid_), B(std::move(B_)) {
    if (!chart) throw invalid_argument("BendingSystem needs a chart");
    if (int(B.size()) != grid.count()) throw shape_mismatch("BendingSystem: B size mismatch");
    for (const Mat2& b : B)
        if (!b.allFinite()) throw invalid_argument("BendingSystem: B has non-finite entries");
}

RecoverySolution solve_qsw(const BendingSystem& sys, const RecoveryOptions& opts) {
    if (opts.check_convexity) {
        GeometryData geo = build_geometry(*sys.chart, sys.grid);
        ConvexityResult conv = convexity_check(geo.curvature, geo.metric);
        if (!conv.convex)
            throw not_convex("solve_qsw: chart patch fails the shape-operator convexity check");
    }
    Stencils st(*sys.chart, sys.grid);
    const int n = sys.grid.count();

    std::vector<Vec3> rhs_field(n);
    for (int idx = 0; idx < n; ++idx)
        rhs_field[idx] = Vec3(sys.B[idx](0, 0), sys.B[idx](1, 1), kSqrt2 * sys.B[idx](0, 1));
    const double bnorm2 = weighted_norm2(st, rhs_field);

    RecoverySolution sol;
    sol.w.assign(n, Vec3::Zero());
    if (bnorm2 == 0.0) return sol;  // minimal-norm solution of the zero datum

    // Normal equations L^T W L w = L^T W B by CG from zero (minimal-norm limit).
    auto normal_apply = [&](const std::vector<Vec3>& w) {
        std::vector<Vec3> q = apply_qsw(st, w);
        for (int idx = 0; idx < n; ++idx) q[idx] *= st.weight[idx];
        return apply_qsw_adjoint(st, q);
    };
    std::vector<Vec3> wb = rhs_field;
    for (int idx = 0; idx < n; ++idx) wb[idx] *= st.weight[idx];
    std::vector<Vec3> rhs = apply_qsw_adjoint(st, wb);

    auto dot = [n](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += a[i].dot(b[i]);
        return total;
    };
    const double rhs_norm = std::sqrt(dot(rhs, rhs));
    std::vector<Vec3> r = rhs, p = rhs, Ap;
    double rr = dot(r, r);
    for (int it = 0; it < opts.max_iter; ++it) {
        Ap = normal_apply(p);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0)) break;
        const double alpha = rr / pAp;
        for (int idx = 0; idx < n; ++idx) {
            sol.w[idx] += alpha * p[idx];
            r[idx] -= alpha * Ap[idx];
        }
        const double rr_new = dot(r, r);
        sol.iterations = it + 1;
        if (std::sqrt(rr_new) <= opts.tol * rhs_norm) break;
        for (int idx = 0; idx < n; ++idx) p[idx] = r[idx] + (rr_new / rr) * p[idx];
        rr = rr_new;
    }
    if (std::sqrt(dot(r, r)) > 10.0 * opts.tol * rhs_norm && sol.iterations >= opts.max_iter)
        throw no_convergence("solve_qsw: CG on the normal equations did not converge");

    std::vector<Vec3> q = apply_qsw(st, sol.w);
    for (int idx = 0; idx < n; ++idx) q[idx] -= rhs_field[idx];
    sol.abs_residual = std::sqrt(weighted_norm2(st, q));
    sol.rel_residual = sol.abs_residual / std::sqrt(bnorm2);
    return sol;
}

std::pair<double, double> residual_qsw(const BendingSystem& sys, const std::vector<Vec3>& w) {
    if (int(w.size()) != sys.grid.count()) throw shape_mismatch("residual_qsw: w size mismatch");
    Stencils st(*sys.chart, sys.grid);
    std::vector<Vec3> q = apply_qsw(st, w);
    std::vector<Vec3> bf(sys.grid.count());
    for (int idx = 0; idx < sys.grid.count(); ++idx)
        bf[idx] = Vec3(sys.B[idx](0, 0), sys.B[idx](1, 1), kSqrt2 * sys.B[idx](0, 1));
    for (int idx = 0; idx < sys.grid.count(); ++idx) q[idx] -= bf[idx];
    const double abs = std::sqrt(weighted_norm2(st, q));
    const double bn = std::sqrt(weighted_norm2(st, bf));
    return {abs, bn > 0 ? abs / bn : abs};
}

std::vector<Mat2> qsw_apply(const BendingSystem& sys, const std::vector<Vec3>& w) {
    if (int(w.size()) != sys.grid.count()) throw shape_mismatch("qsw_apply: w size mismatch");
    Stencils st(*sys.chart, sys.grid);
    std::vector<Vec3> q = apply_qsw(st, w);
    std::vector<Mat2> out(q.size());
    for (size_t i = 0; i < q.size(); ++i) out[i] = TangentForm2(q[i]).matrix();
    return out;
}

}  // namespace shf

#include "shellforms/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>

namespace shf {

namespace {

constexpr double kDetFloor = 1e-12;

struct NodeGeometry {
    Mat2 g, g_inv;
    double det_g;
    Vec3 tau[2], tau_dual[2], n;
    Mat2 h, shape;
    double gauss_k;
};

// Shared per-node computation from first/second derivatives of a map.
NodeGeometry node_geometry(const Vec3 d1[2], const Vec3 d2[2][2], const char* what) {
    NodeGeometry out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) out.g(a, b) = d1[a].dot(d1[b]);
    out.det_g = out.g.determinant();
    if (!(out.det_g > kDetFloor)) throw degenerate_chart(std::string(what) + ": det g <= 1e-12");
    out.g_inv = out.g.inverse();
    out.tau[0] = d1[0];
    out.tau[1] = d1[1];
    for (int a = 0; a < 2; ++a)
        out.tau_dual[a] = out.g_inv(a, 0) * d1[0] + out.g_inv(a, 1) * d1[1];
    const Vec3 cross = d1[0].cross(d1[1]);
    out.n = cross / cross.norm();
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) out.h(a, b) = out.n.dot(d2[a][b]);
    out.h = 0.5 * (out.h + out.h.transpose()).eval();
    // Matrix of A = dn in the chart basis; see ledger note on the sign.
    out.shape = -(out.g_inv * out.h);
    out.gauss_k = out.h.determinant() / out.det_g;
    return out;
}

GeometryData build_from_jets(const GridSpec& grid,
                             const std::function<void(int, int, Vec3[2], Vec3[2][2])>& deriv) {
    GeometryData out;
    out.metric.grid = grid;
    out.frame.grid = grid;
    out.curvature.grid = grid;
    const int n = grid.count();
    out.metric.g.resize(n);
    out.metric.g_inv.resize(n);
    out.metric.det_g.resize(n);
    out.metric.christoffel.resize(n);
    out.frame.tau1.resize(n);
    out.frame.tau2.resize(n);
    out.frame.tau_dual1.resize(n);
    out.frame.tau_dual2.resize(n);
    out.frame.normal.resize(n);
    out.frame.projector.resize(n);
    out.curvature.second_form.resize(n);
    out.curvature.shape_operator.resize(n);
    out.curvature.gauss_k.resize(n);

    for (int i = 0; i < grid.n1; ++i) {
        for (int j = 0; j < grid.n2; ++j) {
            Vec3 d1[2];
            Vec3 d2[2][2];
            deriv(i, j, d1, d2);
            NodeGeometry ng = node_geometry(d1, d2, "build_geometry");
            const int idx = grid.index(i, j);
            out.metric.g[idx] = ng.g;
            out.metric.g_inv[idx] = ng.g_inv;
            out.metric.det_g[idx] = ng.det_g;
            // Gamma^c_{ab} = g^{cd} (d_a d_b xi . tau_d)
            std::array<Mat2, 2> gam;
            for (int c = 0; c < 2; ++c)
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) gam[c](a, b) = ng.tau_dual[c].dot(d2[a][b]);
            for (int c = 0; c < 2; ++c) gam[c] = 0.5 * (gam[c] + gam[c].transpose()).eval();
            out.metric.christoffel[idx] = gam;
            out.frame.tau1[idx] = ng.tau[0];
            out.frame.tau2[idx] = ng.tau[1];
            out.frame.tau_dual1[idx] = ng.tau_dual[0];
            out.frame.tau_dual2[idx] = ng.tau_dual[1];
            out.frame.normal[idx] = ng.n;
            out.frame.projector[idx] = Mat3::Identity() - ng.n * ng.n.transpose();
            out.curvature.second_form[idx] = ng.h;
            out.curvature.shape_operator[idx] = ng.shape;
            out.curvature.gauss_k[idx] = ng.gauss_k;
        }
    }
    return out;
}

}  // namespace

GeometryData build_geometry(const SurfaceChart& chart, const GridSpec& grid) {
    if (!chart.domain().contains(grid.node(0, 0), 1e-12) ||
        !chart.domain().contains(grid.node(grid.n1 - 1, grid.n2 - 1), 1e-12))
        throw invalid_argument("geometry grid leaves the chart domain");
    return build_from_jets(
        grid,
        [&](int i, int j, Vec3 d1[2], Vec3 d2[2][2]) {
            ChartJet jet = chart.jet(grid.node(i, j));
            d1[0] = jet.d1[0];
            d1[1] = jet.d1[1];
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) d2[a][b] = jet.d2[a][b];
        });
}

GeometryData build_geometry_sampled(const SampledMap& map) {
    const GridSpec& grid = map.grid();
    return build_from_jets(
        grid,
        [&](int i, int j, Vec3 d1[2], Vec3 d2[2][2]) {
            d1[0] = map.d1(0, i, j);
            d1[1] = map.d1(1, i, j);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) d2[a][b] = map.d2(a, b, i, j);
        });
}

EgregiumResult egregium_residual(const SampledMap& immersion, const MetricData& metric,
                                 const std::vector<double>& gauss_k) {
    const GridSpec& grid = immersion.grid();
    if (grid.n1 != metric.grid.n1 || grid.n2 != metric.grid.n2 ||
        int(gauss_k.size()) != grid.count())
        throw shape_mismatch("egregium_residual: immersion grid does not match geometry grid");
    EgregiumResult out;
    out.grid = grid;
    out.residual.resize(grid.count());
    for (int i = 0; i < grid.n1; ++i) {
        for (int j = 0; j < grid.n2; ++j) {
            const Vec3 du1 = immersion.d1(0, i, j), du2 = immersion.d1(1, i, j);
            const Vec3 cross = du1.cross(du2);
            const double cn = cross.norm();
            if (cn <= 1e-12) throw degenerate_immersion("egregium_residual: |d1 u x d2 u| <= 1e-12");
            const Vec3 nu = cross / cn;
            Mat2 h;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) h(a, b) = nu.dot(immersion.d2(a, b, i, j));
            h = 0.5 * (h + h.transpose()).eval();
            const int idx = grid.index(i, j);
            const double r = std::abs(h.determinant() - gauss_k[idx] * metric.det_g[idx]);
            out.residual[idx] = r;
            out.max_residual = std::max(out.max_residual, r);
        }
    }
    return out;
}

RelativeWeingartenResult relative_weingarten(const SurfaceChart& chart, const SampledMap& immersion,
                                             const GeometryData& geometry,
                                             const RelativeWeingartenOptions& opts) {
    const GridSpec& grid = immersion.grid();
    if (grid.n1 != geometry.frame.grid.n1 || grid.n2 != geometry.frame.grid.n2)
        throw shape_mismatch("relative_weingarten: immersion grid does not match geometry grid");

    // Reference side built from samples of xi through the same stencils, so that
    // the operator difference cancels the shared finite-difference error.
    SampledMap ref = SampledMap::from_chart(chart, grid);

    double g_scale = 0.0;
    for (const Mat2& g : geometry.metric.g)
        g_scale = std::max(g_scale, g.cwiseAbs().maxCoeff());

    RelativeWeingartenResult out;
    out.grid = grid;
    out.field.resize(grid.count());

    // Pass 1: isometry defect against the FD metric of the reference.
    double defect = 0.0;
    for (int i = 0; i < grid.n1; ++i) {
        for (int j = 0; j < grid.n2; ++j) {
            Mat2 gu, gr;
            const Vec3 du[2] = {immersion.d1(0, i, j), immersion.d1(1, i, j)};
            const Vec3 dr[2] = {ref.d1(0, i, j), ref.d1(1, i, j)};
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    gu(a, b) = du[a].dot(du[b]);
                    gr(a, b) = dr[a].dot(dr[b]);
                }
            defect = std::max(defect, (gu - gr).cwiseAbs().maxCoeff());
        }
    }
    out.isometry_defect = defect / g_scale;
    if (opts.check_isometry && out.isometry_defect > opts.isometry_tol)
        throw not_isometric("relative_weingarten: isometry defect " +
                            std::to_string(out.isometry_defect) + " exceeds tolerance");

    auto weingarten3 = [](const SampledMap& m, int i, int j, Vec3 d1out[2]) -> Mat3 {
        Vec3 d1[2];
        Vec3 d2[2][2];
        d1[0] = m.d1(0, i, j);
        d1[1] = m.d1(1, i, j);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) d2[a][b] = m.d2(a, b, i, j);
        const Vec3 cross = d1[0].cross(d1[1]);
        if (cross.norm() <= 1e-12)
            throw degenerate_immersion("relative_weingarten: degenerate immersion frame");
        NodeGeometry ng = node_geometry(d1, d2, "relative_weingarten");
        d1out[0] = d1[0];
        d1out[1] = d1[1];
        // 3x3 Weingarten A = dn composed with the tangential projection.
        Mat3 A = Mat3::Zero();
        for (int b = 0; b < 2; ++b) {
            Vec3 col = ng.shape(0, b) * ng.tau[0] + ng.shape(1, b) * ng.tau[1];
            A += col * ng.tau_dual[b].transpose();
        }
        return A;
    };

    for (int i = 0; i < grid.n1; ++i) {
        for (int j = 0; j < grid.n2; ++j) {
            Vec3 du[2], dref[2];
            const Mat3 Au = weingarten3(immersion, i, j, du);
            const Mat3 Aref = weingarten3(ref, i, j, dref);
            const Vec3 nu = du[0].cross(du[1]).normalized();
            const Vec3 nref = dref[0].cross(dref[1]).normalized();
            // R tau_a = d_a u, R n = n_u (proper rotation for isometric u).
            Mat3 Fu, Fr;
            Fu.col(0) = du[0];
            Fu.col(1) = du[1];
            Fu.col(2) = nu;
            Fr.col(0) = dref[0];
            Fr.col(1) = dref[1];
            Fr.col(2) = nref;
            const Mat3 R = Fu * Fr.inverse();
            const int idx = grid.index(i, j);
            const Mat3 TS = Mat3::Identity() - nref * nref.transpose();
            const Mat3 Ar = R.transpose() * Au * R * TS - Aref;
            // Dual-frame coefficients of the associated form, via the analytic frame.
            const Vec3 t1 = geometry.frame.tau1[idx], t2 = geometry.frame.tau2[idx];
            Mat2 qc;
            qc(0, 0) = t1.dot(Ar * t1);
            qc(0, 1) = t1.dot(Ar * t2);
            qc(1, 0) = t2.dot(Ar * t1);
            qc(1, 1) = t2.dot(Ar * t2);
            out.max_asymmetry = std::max(out.max_asymmetry, std::abs(qc(0, 1) - qc(1, 0)));
            out.field[idx] = TangentForm2::from_matrix(qc);
        }
    }
    return out;
}

ConvexityResult convexity_check(const CurvatureData& curvature, const MetricData& metric) {
    ConvexityResult out;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    bool pos = false, neg = false;
    const int n = int(curvature.shape_operator.size());
    for (int idx = 0; idx < n; ++idx) {
        // Eigenvalues of the g-self-adjoint shape operator via the symmetric
        // congruence g^{-1/2} (-h) g^{-1/2}.
        Eigen::SelfAdjointEigenSolver<Mat2> gs(metric.g[idx]);
        const Mat2 g_isqrt = gs.operatorInverseSqrt();
        const Mat2 sym = g_isqrt * (-curvature.second_form[idx]) * g_isqrt;
        Eigen::SelfAdjointEigenSolver<Mat2> es(sym);
        for (int k = 0; k < 2; ++k) {
            const double lam = es.eigenvalues()[k];
            if (lam > 0) pos = true;
            if (lam < 0) neg = true;
            lo = std::min(lo, std::abs(lam));
            hi = std::max(hi, std::abs(lam));
        }
    }
    out.lambda_min_abs = lo;
    out.lambda_max_abs = hi;
    constexpr double kEigFloor = 1e-10;
    if ((pos && neg) || lo <= kEigFloor) {
        out.convex = false;
        out.bound_c = std::numeric_limits<double>::infinity();
        return out;
    }
    out.convex = true;
    out.bound_c = std::max(hi, 1.0 / lo);
    return out;
}

}  // namespace shf

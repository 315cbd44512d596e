#pragma once

#include <array>
#include <limits>
#include <vector>

#include "shellforms/chart.hpp"
#include "shellforms/types.hpp"

namespace shf {

// First fundamental form data per grid node.
struct MetricData {
    GridSpec grid;
    std::vector<Mat2> g;
    std::vector<Mat2> g_inv;
    std::vector<double> det_g;
    // christoffel[node][c](a,b) = Gamma^c_{ab}, symmetric in (a,b)
    std::vector<std::array<Mat2, 2>> christoffel;
};

// Tangent frames, unit normal and tangential projector per node.
struct FrameData {
    GridSpec grid;
    std::vector<Vec3> tau1, tau2;       // covariant basis d_a xi
    std::vector<Vec3> tau_dual1, tau_dual2;
    std::vector<Vec3> normal;
    std::vector<Mat3> projector;        // T_S = I - n (x) n
};

// Second fundamental form, Weingarten map and Gauss curvature per node.
// shape_operator is the matrix of A = dn in the chart basis, i.e. -g^{-1} h;
// with the outward-oriented built-in sphere cap its eigenvalues are +1/R.
struct CurvatureData {
    GridSpec grid;
    std::vector<Mat2> second_form;      // h_ab = n . d_a d_b xi
    std::vector<Mat2> shape_operator;   // -g^{-1} h
    std::vector<double> gauss_k;        // det h / det g
};

struct GeometryData {
    MetricData metric;
    FrameData frame;
    CurvatureData curvature;
};

// Populates metric, frames and curvature on the grid. Throws DegenerateChart if
// det g <= 1e-12 at any node.
GeometryData build_geometry(const SurfaceChart& chart, const GridSpec& grid);

// Same quantities from a sampled map via finite differences (no third-order
// data). Used for immersions and as the FD-consistent reference inside
// relative_weingarten.
GeometryData build_geometry_sampled(const SampledMap& map);

struct EgregiumResult {
    GridSpec grid;
    std::vector<double> residual;   // |det(n_u . hess u) - K det g| per node
    double max_residual = 0.0;
};

// Theorema Egregium defect of a sampled immersion against the chart curvature.
EgregiumResult egregium_residual(const SampledMap& immersion, const MetricData& metric,
                                 const std::vector<double>& gauss_k);

struct RelativeWeingartenResult {
    GridSpec grid;
    std::vector<TangentForm2> field;   // symmetrized A^r_u in the dual frame
    double max_asymmetry = 0.0;        // worst |raw_12 - raw_21| before symmetrization
    double isometry_defect = 0.0;      // max node deviation of the pulled-back metric
};

struct RelativeWeingartenOptions {
    double isometry_tol = 1e-6;   // relative to max ||g||
    bool check_isometry = true;
};

// Relative change of Weingarten maps R^T A_{u(S)} R T_S - A for an (approximately)
// isometric sampled immersion u. Throws NotIsometric / DegenerateImmersion.
RelativeWeingartenResult relative_weingarten(const SurfaceChart& chart, const SampledMap& immersion,
                                             const GeometryData& geometry,
                                             const RelativeWeingartenOptions& opts = {});

struct ConvexityResult {
    bool convex = false;
    double bound_c = std::numeric_limits<double>::infinity();
    double lambda_min_abs = 0.0;
    double lambda_max_abs = 0.0;
};

// True iff all shape-operator eigenvalues share one sign and stay away from 0;
// bound_c = max(|lambda|_max, 1/|lambda|_min).
ConvexityResult convexity_check(const CurvatureData& curvature, const MetricData& metric);

}  // namespace shf

#pragma once

#include <vector>

#include "shellforms/chart.hpp"
#include "shellforms/geometry.hpp"
#include "shellforms/types.hpp"

namespace shf {

// Infinitesimal-bending data: a convex chart patch and a symmetric 2x2 field B
// per grid node (components B11, B22, B12).
struct BendingSystem {
    std::shared_ptr<const SurfaceChart> chart;
    GridSpec grid;
    std::vector<Mat2> B;

    BendingSystem(std::shared_ptr<const SurfaceChart> chart_, const GridSpec& grid_,
                  std::vector<Mat2> B_);
};

struct RecoverySolution {
    std::vector<Vec3> w;       // per node
    double rel_residual = 0.0; // ||q^s_w - B|| / ||B|| in the weighted norm
    double abs_residual = 0.0;
    int iterations = 0;
};

struct RecoveryOptions {
    double tol = 1e-12;   // relative residual of the normal equations
    int max_iter = 20000;
    bool check_convexity = true;
};

// Minimal-norm least-squares solution of q^s_w = B, with
// (q^s_w)_ab = (d_a s . d_b w + d_a w . d_b s)/2 discretized by matched
// second-order stencils for s and w. CG on the normal equations from zero
// initialization. Throws NotConvex when the patch fails the convexity check.
RecoverySolution solve_qsw(const BendingSystem& sys, const RecoveryOptions& opts = {});

// Weighted residual ||q^s_w - B|| (discrete L^2, sqrt(det g) weights) of a
// given field w, absolute and relative to ||B||.
std::pair<double, double> residual_qsw(const BendingSystem& sys, const std::vector<Vec3>& w);

// q^s_w samples for a given w (exposed for tests).
std::vector<Mat2> qsw_apply(const BendingSystem& sys, const std::vector<Vec3>& w);

}  // namespace shf

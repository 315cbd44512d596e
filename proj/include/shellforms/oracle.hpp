#pragma once

#include "shellforms/cell.hpp"

namespace shf {

// Independent reference solver: assembles the full quadratic form of the cell
// functional by applying the relaxation operator to every basis coefficient
// (direct pointwise trigonometric formulas, no shared operator code) and
// solves the stationarity system by dense eigen-factorization with
// kernel-aware pseudo-inversion. Throws TooLarge above 2000 unknowns.
CellSolution dense_cell_solve(const Gamma& gamma, const MaterialLaw& law, const PointFrame& frame,
                              const TangentForm2& q, const CellGrid& grid);

struct SpdAudit {
    Vec3 eigenvalues;  // ascending
    double bound_c = 0.0;  // max(lambda_max, 1/lambda_min)
};

// Eigen-decomposition of an effective form; throws NotSPD if lambda_min <= 0.
SpdAudit spd_audit(const EffectiveForm& form);

}  // namespace shf

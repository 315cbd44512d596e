#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "shellforms/cell.hpp"
#include "shellforms/geometry.hpp"

namespace shf {

// Argument of the limit energy: either an explicit tangential form field on the
// chart grid, or a sampled immersion whose relative Weingarten strain is taken.
struct BendingStrainSource {
    struct QField {
        std::vector<TangentForm2> q;  // dual-frame, per grid node
    };
    struct Immersion {
        std::shared_ptr<SampledMap> u;
        double isometry_tol = 1e-6;
    };
    struct Identity {};  // u = xi, strain identically zero

    std::variant<QField, Immersion, Identity> source;

    static BendingStrainSource qfield(std::vector<TangentForm2> q);
    static BendingStrainSource immersion(std::shared_ptr<SampledMap> u, double isometry_tol = 1e-6);
    static BendingStrainSource identity();
};

enum class EnergyStatus { finite, infinite };

struct EnergyReport {
    EnergyStatus status = EnergyStatus::finite;
    double value = 0.0;
    double isometry_defect = 0.0;       // reported when status == infinite too
    GridSpec grid;
    std::vector<double> integrand;      // Q_gamma(x, q(x)) per node (no area weight)
    double area = 0.0;                  // quadrature area of the chart patch
    double max_solver_residual = 0.0;
    int cache_solves = 0;
    int cache_hits = 0;
};

// Per-node effective forms with x-dependent law support.
struct LawField {
    std::shared_ptr<const MaterialLaw> law;
    // Optional positive scale per chart point (x-dependent modulus).
    std::function<double(const Vec2&)> scale;

    const MaterialLaw& base() const { return *law; }
    double scale_at(const Vec2& z) const { return scale ? scale(z) : 1.0; }
};

struct EffectiveFormField {
    GridSpec grid;
    std::vector<EffectiveForm> forms;  // per node, dual frame of that node
    int cache_solves = 0;
    int cache_hits = 0;
};

// Solves (or reuses) the cell problem per node; constant laws collapse to a
// single solve, oscillatory laws are keyed by the node's metric/frame data.
EffectiveFormField effective_form_field(const SurfaceChart& chart, const GridSpec& grid,
                                        const Gamma& gamma, const LawField& law,
                                        const CellGrid& cell_grid, const SolverOptions& opts = {});

// I_gamma = integral of Q_gamma(x, q(x)) over the patch with dvol = sqrt(det g) dz,
// tensor-trapezoid quadrature on the chart grid. Returns status == infinite
// (never throws for that branch) when the immersion misses the isometry tolerance.
EnergyReport bending_energy(const SurfaceChart& chart, const GridSpec& grid,
                            const BendingStrainSource& source, const Gamma& gamma,
                            const LawField& law, const CellGrid& cell_grid,
                            const SolverOptions& opts = {});

}  // namespace shf

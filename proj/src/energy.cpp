#include "shellforms/energy.hpp"

#include <cstring>
#include <map>
#include <mutex>

namespace shf {

namespace {

// Cache key: regime, law identity, scale bits, and the frame class the cell
// problem actually depends on (see ledger note). Constant frame-invariant laws
// collapse chart-wide; oscillatory isotropic-phase laws depend on the metric;
// raw anisotropic laws depend on the full frame.
struct FormKey {
    int regime_tag;  // 0, 1 (finite), 2 (inf)
    std::uint64_t gamma_bits;
    std::uint64_t law_id;
    std::uint64_t scale_bits;
    std::array<std::uint64_t, 9> frame_bits;

    bool operator<(const FormKey& o) const {
        if (regime_tag != o.regime_tag) return regime_tag < o.regime_tag;
        if (gamma_bits != o.gamma_bits) return gamma_bits < o.gamma_bits;
        if (law_id != o.law_id) return law_id < o.law_id;
        if (scale_bits != o.scale_bits) return scale_bits < o.scale_bits;
        return frame_bits < o.frame_bits;
    }
};

std::uint64_t bits_of(double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof(u));
    return u;
}

FormKey make_key(const Gamma& gamma, const MaterialLaw& law, double scale, const PointFrame& f) {
    FormKey k{};
    k.regime_tag = gamma.is_zero() ? 0 : (gamma.is_inf() ? 2 : 1);
    k.gamma_bits = bits_of(gamma.is_inf() ? -1.0 : gamma.value);
    k.law_id = law.id();
    k.scale_bits = bits_of(scale);
    k.frame_bits.fill(0);
    if (law.y_constant() && law.frame_invariant()) {
        // Cell value depends only on the orthonormal components of q.
    } else if (law.frame_invariant()) {
        // Oscillatory isotropic phases: the problem depends on the metric.
        Mat2 g;
        g << f.tau[0].dot(f.tau[0]), f.tau[0].dot(f.tau[1]), f.tau[1].dot(f.tau[0]),
            f.tau[1].dot(f.tau[1]);
        k.frame_bits[0] = bits_of(g(0, 0));
        k.frame_bits[1] = bits_of(g(0, 1));
        k.frame_bits[2] = bits_of(g(1, 1));
    } else {
        int pos = 0;
        for (int a = 0; a < 2; ++a)
            for (int c = 0; c < 3; ++c) k.frame_bits[pos++] = bits_of(f.tau[a][c]);
        for (int c = 0; c < 3; ++c) k.frame_bits[pos++] = bits_of(f.n[c]);
    }
    return k;
}

struct FormCache {
    std::map<FormKey, EffectiveForm> entries;
    std::mutex mutex;
    int solves = 0;
    int hits = 0;
};

// Cached solve; for fully frame-invariant keys the cached matrix is the
// orthonormal-frame one and is re-expressed in the node's dual frame.
EffectiveForm cached_form(FormCache& cache, const Gamma& gamma,
                          const std::shared_ptr<const MaterialLaw>& law, double scale,
                          const PointFrame& frame, const CellGrid& grid,
                          const SolverOptions& opts) {
    const FormKey key = make_key(gamma, *law, scale, frame);
    const bool invariant = law->y_constant() && law->frame_invariant();
    {
        std::lock_guard<std::mutex> lock(cache.mutex);
        auto it = cache.entries.find(key);
        if (it != cache.entries.end()) {
            ++cache.hits;
            EffectiveForm out = it->second;
            if (invariant) {
                out.m = frame.dual_to_ortho.transpose() * out.m_ortho * frame.dual_to_ortho;
                out.m = 0.5 * (out.m + out.m.transpose()).eval();
            }
            return out;
        }
    }
    std::shared_ptr<const MaterialLaw> use = law;
    if (scale != 1.0) use = MaterialLaw::scaled(law, scale);
    EffectiveForm form = effective_form(gamma, *use, frame, grid, opts);
    {
        std::lock_guard<std::mutex> lock(cache.mutex);
        ++cache.solves;
        cache.entries.emplace(key, form);
    }
    return form;
}

}  // namespace

BendingStrainSource BendingStrainSource::qfield(std::vector<TangentForm2> q) {
    BendingStrainSource s;
    s.source = QField{std::move(q)};
    return s;
}

BendingStrainSource BendingStrainSource::immersion(std::shared_ptr<SampledMap> u,
                                                   double isometry_tol) {
    BendingStrainSource s;
    s.source = Immersion{std::move(u), isometry_tol};
    return s;
}

BendingStrainSource BendingStrainSource::identity() {
    BendingStrainSource s;
    s.source = Identity{};
    return s;
}

EffectiveFormField effective_form_field(const SurfaceChart& chart, const GridSpec& grid,
                                        const Gamma& gamma, const LawField& law,
                                        const CellGrid& cell_grid, const SolverOptions& opts) {
    GeometryData geo = build_geometry(chart, grid);
    FormCache cache;
    EffectiveFormField out;
    out.grid = grid;
    out.forms.resize(grid.count());
    for (int i = 0; i < grid.n1; ++i)
        for (int j = 0; j < grid.n2; ++j) {
            const int idx = grid.index(i, j);
            PointFrame f = PointFrame::make(geo.frame.tau1[idx], geo.frame.tau2[idx]);
            const double sc = law.scale_at(grid.node(i, j));
            out.forms[idx] = cached_form(cache, gamma, law.law, sc, f, cell_grid, opts);
        }
    out.cache_solves = cache.solves;
    out.cache_hits = cache.hits;
    return out;
}

EnergyReport bending_energy(const SurfaceChart& chart, const GridSpec& grid,
                            const BendingStrainSource& source, const Gamma& gamma,
                            const LawField& law, const CellGrid& cell_grid,
                            const SolverOptions& opts) {
    GeometryData geo = build_geometry(chart, grid);
    EnergyReport report;
    report.grid = grid;
    report.integrand.assign(grid.count(), 0.0);

    // Strain field q(x).
    std::vector<TangentForm2> q(grid.count());
    if (std::holds_alternative<BendingStrainSource::QField>(source.source)) {
        const auto& qf = std::get<BendingStrainSource::QField>(source.source);
        if (int(qf.q.size()) != grid.count())
            throw shape_mismatch("bending_energy: q field size does not match the grid");
        q = qf.q;
    } else if (std::holds_alternative<BendingStrainSource::Immersion>(source.source)) {
        const auto& im = std::get<BendingStrainSource::Immersion>(source.source);
        RelativeWeingartenOptions ropts;
        ropts.isometry_tol = im.isometry_tol;
        try {
            RelativeWeingartenResult rw = relative_weingarten(chart, *im.u, geo, ropts);
            report.isometry_defect = rw.isometry_defect;
            q = std::move(rw.field);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::not_isometric) {
                RelativeWeingartenOptions loose = ropts;
                loose.check_isometry = false;
                RelativeWeingartenResult rw = relative_weingarten(chart, *im.u, geo, loose);
                report.status = EnergyStatus::infinite;
                report.isometry_defect = rw.isometry_defect;
                report.value = std::numeric_limits<double>::infinity();
                return report;
            }
            throw;
        }
    }
    // Identity source keeps q = 0.

    FormCache cache;
    double total = 0.0;
    double area = 0.0;
    for (int i = 0; i < grid.n1; ++i)
        for (int j = 0; j < grid.n2; ++j) {
            const int idx = grid.index(i, j);
            const double dvol = std::sqrt(geo.metric.det_g[idx]) * grid.trapezoid_weight(i, j);
            area += dvol;
            double integrand = 0.0;
            if (q[idx].v.squaredNorm() > 0.0) {
                PointFrame f = PointFrame::make(geo.frame.tau1[idx], geo.frame.tau2[idx]);
                EffectiveForm form = cached_form(cache, gamma, law.law,
                                                 law.scale_at(grid.node(i, j)), f, cell_grid, opts);
                integrand = q[idx].v.dot(form.m * q[idx].v);
                report.max_solver_residual = std::max(report.max_solver_residual, form.max_residual);
            }
            report.integrand[idx] = integrand;
            total += integrand * dvol;
        }
    report.value = total;
    report.area = area;
    report.cache_solves = cache.solves;
    report.cache_hits = cache.hits;
    return report;
}

}  // namespace shf

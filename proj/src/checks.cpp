#include "shellforms/checks.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "shellforms/energy.hpp"
#include "shellforms/geometry.hpp"
#include "shellforms/oracle.hpp"
#include "shellforms/recovery.hpp"
#include "shellforms/relax.hpp"

namespace shf {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6e", x);
    return buf;
}

Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond qt(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    qt.normalize();
    return qt.toRotationMatrix();
}

TangentForm2 random_q(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    return TangentForm2(Vec3(gauss(rng), gauss(rng), gauss(rng)));
}

IsotropicPhase phase(double mu, double lambda) { return IsotropicPhase{mu, lambda}; }

std::shared_ptr<MaterialLaw> check_laminate() {
    return MaterialLaw::laminate_y1(phase(1.0, 1.0), phase(2.0, 1.0), 0.5);
}

double analytic_q2_iso(double mu, double lambda, const Vec3& q) {
    const double tr = q[0] + q[1];
    return 2.0 * mu * q.squaredNorm() + (2.0 * mu * lambda / (2.0 * mu + lambda)) * tr * tr;
}

// Grid parameter n counts intervals per axis; nodes are (n+1)^2.
GridSpec chart_grid(const SurfaceChart& chart, int n) {
    return GridSpec(n + 1, n + 1, chart.domain());
}

CheckResult check_egregium(const CheckOptions&) {
    CheckResult res{"egregium", true, ""};
    std::ostringstream detail;
    const std::array<std::shared_ptr<SurfaceChart>, 2> charts = {
        SurfaceChart::sphere_cap(1.0), SurfaceChart::ellipsoid_patch(1.0, 1.0, 2.0)};
    const char* names[2] = {"sphere", "ellipsoid"};
    for (int c = 0; c < 2; ++c) {
        double prev = 0.0;
        std::array<double, 3> max_res{};
        const int sizes[3] = {32, 64, 128};
        for (int k = 0; k < 3; ++k) {
            GridSpec g = chart_grid(*charts[c], sizes[k]);
            GeometryData geo = build_geometry(*charts[c], g);
            SampledMap u = SampledMap::from_chart(*charts[c], g);
            EgregiumResult e = egregium_residual(u, geo.metric, geo.curvature.gauss_k);
            max_res[k] = e.max_residual;
            if (k > 0) {
                const double ratio = prev / e.max_residual;
                if (!(ratio >= 3.2 && ratio <= 4.8)) res.passed = false;
                detail << names[c] << " " << sizes[k - 1] << "->" << sizes[k] << " ratio "
                       << fmt(ratio) << "; ";
            }
            prev = e.max_residual;
        }
        if (!(max_res[1] <= 1e-3)) res.passed = false;
    }
    res.detail = detail.str();
    return res;
}

CheckResult check_homogeneous_form(const CheckOptions& opts) {
    CheckResult res{"homogeneous-form", true, ""};
    std::mt19937_64 rng(opts.seed + 1);
    auto law = MaterialLaw::isotropic(1.0, 1.0);
    const PointFrame frame = PointFrame::orthonormal();
    const CellGrid grid(8, 4, 4);
    SolverOptions sopts;
    sopts.tol = opts.solver_tol;
    sopts.max_iter = opts.max_iter;
    const std::array<Gamma, 5> gammas = {Gamma::zero(), Gamma::finite(0.5), Gamma::finite(1.0),
                                         Gamma::finite(2.0), Gamma::inf()};
    double worst = 0.0;
    for (const Gamma& gamma : gammas) {
        EffectiveForm form = effective_form(gamma, *law, frame, grid, sopts);
        for (int trial = 0; trial < 50; ++trial) {
            const TangentForm2 q = random_q(rng);
            const double got = q.v.dot(form.m * q.v);
            const double want = analytic_q2_iso(1.0, 1.0, q.v) / 12.0;
            worst = std::max(worst, std::abs(got - want) / std::abs(want));
        }
    }
    res.passed = worst <= 1e-6;
    res.detail = "worst relative error " + fmt(worst) + " over 5 regimes x 50 q";
    return res;
}

CheckResult check_q2_oracle(const CheckOptions& opts) {
    CheckResult res{"q2-oracle", true, ""};
    std::mt19937_64 rng(opts.seed + 2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Mat6 a;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) a(i, j) = unif(rng);
        const Mat6 voigt = a.transpose() * a + 0.5 * Mat6::Identity();
        PointFrame frame = PointFrame::orthonormal();
        if (trial % 2 == 1) {
            // random well-conditioned tangent pair
            Vec3 t1(1.0 + 0.3 * unif(rng), 0.3 * unif(rng), 0.3 * unif(rng));
            Vec3 t2(0.3 * unif(rng), 1.0 + 0.3 * unif(rng), 0.3 * unif(rng));
            frame = PointFrame::make(t1, t2);
        }
        const TangentForm2 q = random_q(rng);
        const TangentQuadraticForm form = q2_form(voigt, frame);
        const double via_schur = q2_value(form, frame, q);
        const double via_brute = brute_force_q2(voigt, frame, q);
        worst = std::max(worst,
                         std::abs(via_schur - via_brute) / std::max(1e-30, std::abs(via_brute)));
    }
    res.passed = worst <= 1e-10;
    res.detail = "worst relative gap " + fmt(worst) + " over 100 trials";
    return res;
}

CheckResult check_cell_oracle(const CheckOptions& opts) {
    CheckResult res{"cell-oracle", true, ""};
    const CellGrid grid(4, 3, 2);
    const PointFrame frame = PointFrame::orthonormal();
    SolverOptions sopts;
    sopts.tol = opts.solver_tol;
    sopts.max_iter = opts.max_iter;
    const std::array<Gamma, 3> gammas = {Gamma::zero(), Gamma::finite(1.0), Gamma::inf()};
    const std::array<std::shared_ptr<MaterialLaw>, 2> laws = {MaterialLaw::isotropic(1.0, 1.0),
                                                              check_laminate()};
    double worst = 0.0;
    for (const auto& law : laws)
        for (const Gamma& gamma : gammas)
            for (int i = 0; i < 3; ++i) {
                TangentForm2 q;
                q.v = Vec3::Unit(i);
                const CellSolution fast = cell_solve(gamma, *law, frame, q, grid, sopts);
                const CellSolution dense = dense_cell_solve(gamma, *law, frame, q, grid);
                const double gap =
                    std::abs(fast.value - dense.value) / std::max(1e-30, std::abs(dense.value));
                worst = std::max(worst, gap);
            }
    res.passed = worst <= 1e-8;
    res.detail = "worst relative value gap " + fmt(worst) + " (2 laws x 3 regimes x 3 basis q)";
    return res;
}

CheckResult check_regime0_equivalence(const CheckOptions& opts) {
    CheckResult res{"regime0-equivalence", true, ""};
    const CellGrid grid(8, 3, 2);
    const PointFrame frame = PointFrame::orthonormal();
    auto law = check_laminate();
    SolverOptions keep;
    keep.tol = opts.solver_tol;
    keep.max_iter = opts.max_iter;
    keep.keep_g = true;
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        TangentForm2 q;
        q.v = Vec3::Unit(i);
        const CellSolution full = cell_solve(Gamma::zero(), *law, frame, q, grid, keep);
        SolverOptions red = keep;
        red.keep_g = false;
        const double via = q0_via_q2(*law, frame, grid, q, red);
        worst = std::max(worst, std::abs(full.value - via) / std::max(1e-30, std::abs(via)));
    }
    res.passed = worst <= 1e-8;
    res.detail = "worst relative gap keep_g vs q2 route " + fmt(worst);
    return res;
}

CheckResult check_gamma_continuity(const CheckOptions& opts) {
    CheckResult res{"gamma-continuity", true, ""};
    const CellGrid grid(16, 4, 4);
    const PointFrame frame = PointFrame::orthonormal();
    auto law = check_laminate();
    SolverOptions sopts;
    sopts.tol = opts.solver_tol;
    sopts.max_iter = opts.max_iter;
    const EffectiveForm f0 = effective_form(Gamma::zero(), *law, frame, grid, sopts);
    const EffectiveForm fsmall = effective_form(Gamma::finite(1e-2), *law, frame, grid, sopts);
    const EffectiveForm finf = effective_form(Gamma::inf(), *law, frame, grid, sopts);
    const EffectiveForm flarge = effective_form(Gamma::finite(1e2), *law, frame, grid, sopts);
    const double low = (fsmall.m - f0.m).norm() / f0.m.norm();
    const double high = (flarge.m - finf.m).norm() / finf.m.norm();
    res.passed = low <= 0.05 && high <= 0.05;
    res.detail = "gamma=1e-2 vs 0: " + fmt(low) + "; gamma=1e2 vs inf: " + fmt(high);
    return res;
}

CheckResult check_spd_feasibility(const CheckOptions& opts) {
    CheckResult res{"spd-feasibility", true, ""};
    std::mt19937_64 rng(opts.seed + 3);
    const CellGrid grid(8, 4, 4);
    const PointFrame frame = PointFrame::orthonormal();
    SolverOptions sopts;
    sopts.tol = opts.solver_tol;
    sopts.max_iter = opts.max_iter;
    const std::array<std::shared_ptr<MaterialLaw>, 2> laws = {MaterialLaw::isotropic(1.0, 1.0),
                                                              check_laminate()};
    const std::array<Gamma, 3> gammas = {Gamma::zero(), Gamma::finite(1.0), Gamma::inf()};
    std::ostringstream detail;
    double worst_gap = 0.0;
    for (const auto& law : laws)
        for (const Gamma& gamma : gammas) {
            const EffectiveForm form = effective_form(gamma, *law, frame, grid, sopts);
            SpdAudit audit = spd_audit(form);  // throws on failure
            detail << "C=" << fmt(audit.bound_c) << " ";
            for (int trial = 0; trial < 20; ++trial) {
                const TangentForm2 q = random_q(rng);
                const double value = q.v.dot(form.m * q.v);
                const double bound = zero_field_value(*law, frame, q, grid);
                const double gap = (value - bound) / std::max(1.0, std::abs(bound));
                worst_gap = std::max(worst_gap, gap);
            }
        }
    res.passed = worst_gap <= 1e-9;
    res.detail = detail.str() + "worst feasibility excess " + fmt(worst_gap);
    return res;
}

CheckResult check_minimizer_optimality(const CheckOptions& opts) {
    CheckResult res{"minimizer-optimality", true, ""};
    const CellGrid grid(8, 3, 3);
    const PointFrame frame = PointFrame::orthonormal();
    SolverOptions sopts;
    sopts.tol = opts.solver_tol;
    sopts.max_iter = opts.max_iter;
    const std::array<std::shared_ptr<MaterialLaw>, 2> laws = {MaterialLaw::isotropic(1.0, 1.0),
                                                              check_laminate()};
    const std::array<Gamma, 3> gammas = {Gamma::zero(), Gamma::finite(1.0), Gamma::inf()};
    TangentForm2 q(1.0, 0.3, -0.2);
    int count = 0;
    for (const auto& law : laws)
        for (const Gamma& gamma : gammas) {
            const CellSolution sol = cell_solve(gamma, *law, frame, q, grid, sopts);
            if (!verify_minimizer(sol, *law, frame, q, grid, 20, opts.seed + 40 + count))
                res.passed = false;
            ++count;
        }
    // q = 0 solution is optimal by construction.
    const CellSolution zero =
        cell_solve(Gamma::finite(1.0), *laws[0], frame, TangentForm2(), grid, sopts);
    if (!verify_minimizer(zero, *laws[0], frame, TangentForm2(), grid, 20, opts.seed + 99))
        res.passed = false;
    res.detail = std::to_string(count + 1) + " solutions x 20 perturbations";
    return res;
}

CheckResult check_rigid_motion(const CheckOptions& opts) {
    CheckResult res{"rigid-motion", true, ""};
    std::mt19937_64 rng(opts.seed + 4);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto chart = SurfaceChart::sphere_cap(1.0);
    GridSpec grid = chart_grid(*chart, 32);
    GeometryData geo = build_geometry(*chart, grid);
    auto law = MaterialLaw::isotropic(1.0, 1.0);
    const CellGrid cell_grid(4, 2, 2);
    double worst_field = 0.0, worst_energy = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const Mat3 Q = random_rotation(rng);
        const Vec3 c(gauss(rng), gauss(rng), gauss(rng));
        std::vector<Vec3> samples(grid.count());
        for (int i = 0; i < grid.n1; ++i)
            for (int j = 0; j < grid.n2; ++j)
                samples[grid.index(i, j)] = Q * chart->jet(grid.node(i, j)).x + c;
        auto u = std::make_shared<SampledMap>(grid, std::move(samples));
        RelativeWeingartenResult rw = relative_weingarten(*chart, *u, geo);
        for (const TangentForm2& f : rw.field) worst_field = std::max(worst_field, f.norm());
        LawField lf{law, nullptr};
        EnergyReport report = bending_energy(*chart, grid, BendingStrainSource::immersion(u),
                                             Gamma::finite(1.0), lf, cell_grid);
        worst_energy = std::max(worst_energy, std::abs(report.value));
    }
    res.passed = worst_field <= 1e-8 && worst_energy <= 1e-10;
    res.detail = "max |A^r| " + fmt(worst_field) + ", max |I_gamma| " + fmt(worst_energy);
    return res;
}

// Manufactured displacement for the recovery check: a quadratic base plus a
// mild trigonometric part so the finite-difference error is measurable but
// small.
Vec3 manufactured_w(const Vec2& z) {
    const double amp = 0.02;
    return Vec3(0.4 * z[0] * z[0] - 0.3 * z[0] * z[1] + amp * std::sin(2.0 * z[0] + z[1]),
                0.25 * z[1] * z[1] + 0.2 * z[0] * z[1] + amp * std::cos(z[0] - 1.5 * z[1]),
                0.1 * z[0] * z[0] + 0.1 * z[1] * z[1] + amp * std::sin(1.3 * z[0] * z[1]));
}

std::array<Vec3, 2> manufactured_dw(const Vec2& z) {
    const double amp = 0.02;
    Vec3 d1(0.8 * z[0] - 0.3 * z[1] + amp * 2.0 * std::cos(2.0 * z[0] + z[1]),
            0.2 * z[1] - amp * std::sin(z[0] - 1.5 * z[1]),
            0.2 * z[0] + amp * 1.3 * z[1] * std::cos(1.3 * z[0] * z[1]));
    Vec3 d2(-0.3 * z[0] + amp * std::cos(2.0 * z[0] + z[1]),
            0.5 * z[1] + 0.2 * z[0] + amp * 1.5 * std::sin(z[0] - 1.5 * z[1]),
            0.2 * z[1] + amp * 1.3 * z[0] * std::cos(1.3 * z[0] * z[1]));
    return {d1, d2};
}

double recovery_residual(const SurfaceChart& chart, int intervals, const RecoveryOptions& ropts) {
    GridSpec grid(intervals + 1, intervals + 1, chart.domain());
    std::vector<Mat2> B(grid.count());
    for (int i = 0; i < grid.n1; ++i)
        for (int j = 0; j < grid.n2; ++j) {
            const Vec2 z = grid.node(i, j);
            const ChartJet jet = chart.jet(z);
            const auto dw = manufactured_dw(z);
            Mat2 b;
            for (int a = 0; a < 2; ++a)
                for (int c = 0; c < 2; ++c)
                    b(a, c) = 0.5 * (jet.d1[a].dot(dw[c]) + dw[a].dot(jet.d1[c]));
            B[grid.index(i, j)] = 0.5 * (b + b.transpose()).eval();
        }
    BendingSystem sys(std::shared_ptr<const SurfaceChart>(&chart, [](const SurfaceChart*) {}),
                      grid, std::move(B));
    return solve_qsw(sys, ropts).rel_residual;
}

CheckResult check_recovery(const CheckOptions& opts) {
    CheckResult res{"recovery", true, ""};
    std::shared_ptr<SurfaceChart> chart;
    if (opts.recovery_chart == "flat")
        chart = SurfaceChart::flat(Rect{-0.4, 0.4, -0.4, 0.4});
    else if (opts.recovery_chart == "sphere-cap" || opts.recovery_chart.empty())
        chart = SurfaceChart::sphere_cap(1.0);
    else
        chart = SurfaceChart::from_json(opts.recovery_chart);
    RecoveryOptions ropts;
    std::ostringstream detail;
    try {
        const double r64 = recovery_residual(*chart, 64, ropts);
        const double r32 = recovery_residual(*chart, 32, ropts);
        const double ratio = r32 / r64;
        detail << "rel residual 64: " << fmt(r64) << ", 32->64 ratio " << fmt(ratio);
        if (!(r64 <= 1e-6) || !(ratio >= 3.2)) res.passed = false;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::not_convex) {
            res.passed = false;
            res.detail = std::string("NotConvex: ") + e.what();
            return res;
        }
        throw;
    }
    // The flat patch must be rejected.
    bool rejected = false;
    try {
        recovery_residual(*SurfaceChart::flat(Rect{-0.4, 0.4, -0.4, 0.4}), 16, ropts);
    } catch (const Error& e) {
        rejected = e.code() == ErrorCode::not_convex;
    }
    if (!rejected) res.passed = false;
    detail << ", flat rejected: " << (rejected ? "yes" : "no");
    res.detail = detail.str();
    return res;
}

using CheckFn = CheckResult (*)(const CheckOptions&);

const std::vector<std::pair<std::string, CheckFn>>& registry() {
    static const std::vector<std::pair<std::string, CheckFn>> reg = {
        {"egregium", check_egregium},
        {"homogeneous-form", check_homogeneous_form},
        {"q2-oracle", check_q2_oracle},
        {"cell-oracle", check_cell_oracle},
        {"regime0-equivalence", check_regime0_equivalence},
        {"gamma-continuity", check_gamma_continuity},
        {"spd-feasibility", check_spd_feasibility},
        {"minimizer-optimality", check_minimizer_optimality},
        {"rigid-motion", check_rigid_motion},
        {"recovery", check_recovery},
    };
    return reg;
}

}  // namespace

std::vector<std::string> check_names() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : registry()) names.push_back(name);
    return names;
}

CheckResult run_single_check(const std::string& name, const CheckOptions& opts) {
    for (const auto& [n, fn] : registry())
        if (n == name) {
            try {
                return fn(opts);
            } catch (const std::exception& e) {
                return CheckResult{name, false, std::string("exception: ") + e.what()};
            }
        }
    throw invalid_argument("unknown check: " + name);
}

std::vector<CheckResult> run_check_suite(const CheckOptions& opts) {
    std::vector<CheckResult> results;
    for (const auto& [name, fn] : registry()) results.push_back(run_single_check(name, opts));
    return results;
}

std::string format_check_report(const std::vector<CheckResult>& results, std::uint64_t seed) {
    std::ostringstream os;
    os << "verification suite (seed " << seed << ")\n";
    int passed = 0;
    for (const auto& r : results) {
        os << (r.passed ? "PASS" : "FAIL") << " " << r.name;
        if (!r.detail.empty()) os << ": " << r.detail;
        os << "\n";
        if (r.passed) ++passed;
    }
    os << passed << "/" << results.size() << " checks passed\n";
    return os.str();
}

}  // namespace shf

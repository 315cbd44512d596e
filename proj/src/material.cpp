#include "shellforms/material.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace shf {

namespace {

using nlohmann::json;

std::uint64_t next_law_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

double frac(double x) { return x - std::floor(x); }

IsotropicPhase phase_from_json(const json& j) {
    IsotropicPhase p;
    p.mu = j.value("mu", 1.0);
    p.lambda = j.value("lambda", 0.0);
    return p;
}

}  // namespace

Mat6 isotropic_voigt(double mu, double lambda) {
    Vec6 tr;
    tr << 1, 1, 1, 0, 0, 0;
    return 2.0 * mu * Mat6::Identity() + lambda * (tr * tr.transpose());
}

Mat6 MaterialLaw::eval(double t, const Vec2& y) const { return eval_(t, y); }

std::shared_ptr<MaterialLaw> MaterialLaw::custom(std::function<Mat6(double, const Vec2&)> eval,
                                                 bool y_constant, bool t_constant,
                                                 bool frame_invariant, std::string describe) {
    auto law = std::shared_ptr<MaterialLaw>(new MaterialLaw());
    law->kind_ = MaterialKind::custom;
    law->y_constant_ = y_constant;
    law->t_constant_ = t_constant;
    law->frame_invariant_ = frame_invariant;
    law->id_ = next_law_id();
    law->describe_ = std::move(describe);
    law->eval_ = std::move(eval);
    return law;
}

std::shared_ptr<MaterialLaw> MaterialLaw::isotropic(double mu, double lambda) {
    if (!(mu > 0) || lambda < 0) throw not_coercive("isotropic law needs mu > 0, lambda >= 0");
    const Mat6 m = isotropic_voigt(mu, lambda);
    std::ostringstream os;
    os << "isotropic(mu=" << mu << ",lambda=" << lambda << ")";
    auto law = custom([m](double, const Vec2&) { return m; }, true, true, true, os.str());
    law->kind_ = MaterialKind::isotropic;
    return law;
}

std::shared_ptr<MaterialLaw> MaterialLaw::laminate_y1(IsotropicPhase a, IsotropicPhase b,
                                                      double fraction) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw invalid_argument("laminate fraction must lie in (0,1)");
    const Mat6 ma = isotropic_voigt(a.mu, a.lambda);
    const Mat6 mb = isotropic_voigt(b.mu, b.lambda);
    if (!(a.mu > 0) || !(b.mu > 0)) throw not_coercive("laminate phases need mu > 0");
    std::ostringstream os;
    os << "laminate-y1(mu=" << a.mu << "/" << b.mu << ",lambda=" << a.lambda << "/" << b.lambda
       << ",theta=" << fraction << ")";
    auto law = custom(
        [ma, mb, fraction](double, const Vec2& y) { return frac(y[0]) < fraction ? ma : mb; },
        false, true, true, os.str());
    law->kind_ = MaterialKind::laminate_y1;
    return law;
}

std::shared_ptr<MaterialLaw> MaterialLaw::layered_t(std::vector<double> breaks,
                                                    std::vector<IsotropicPhase> phases) {
    if (phases.size() != breaks.size() + 1)
        throw invalid_argument("layered law needs breaks.size()+1 phases");
    for (size_t i = 0; i + 1 < breaks.size(); ++i)
        if (!(breaks[i] < breaks[i + 1])) throw invalid_argument("layer breakpoints must ascend");
    for (double b : breaks)
        if (!(b > -0.5) || !(b < 0.5)) throw invalid_argument("layer breakpoints must lie in (-1/2,1/2)");
    std::vector<Mat6> mats;
    mats.reserve(phases.size());
    for (const auto& p : phases) {
        if (!(p.mu > 0)) throw not_coercive("layered phases need mu > 0");
        mats.push_back(isotropic_voigt(p.mu, p.lambda));
    }
    std::ostringstream os;
    os << "layered-t(" << phases.size() << " layers)";
    auto law = custom(
        [breaks, mats](double t, const Vec2&) {
            size_t k = 0;
            while (k < breaks.size() && t >= breaks[k]) ++k;
            return mats[k];
        },
        true, false, true, os.str());
    law->kind_ = MaterialKind::layered_t;
    return law;
}

std::shared_ptr<MaterialLaw> MaterialLaw::constant(const Mat6& m) {
    const Mat6 sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat6> es(sym);
    if (es.eigenvalues().minCoeff() <= 1e-10)
        throw not_coercive("constant law matrix is not positive definite");
    auto law = custom([sym](double, const Vec2&) { return sym; }, true, true, false, "constant(6x6)");
    law->kind_ = MaterialKind::constant;
    return law;
}

std::shared_ptr<MaterialLaw> MaterialLaw::scaled(std::shared_ptr<const MaterialLaw> base, double s) {
    if (!(s > 0)) throw not_coercive("law scale must be positive");
    std::ostringstream os;
    os << base->describe() << " * " << s;
    auto law = custom([base, s](double t, const Vec2& y) { return (s * base->eval(t, y)).eval(); },
                      base->y_constant(), base->t_constant(), base->frame_invariant(), os.str());
    law->kind_ = base->kind();
    return law;
}

std::shared_ptr<MaterialLaw> MaterialLaw::from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw parse_error(std::string("material descriptor: ") + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "isotropic") return isotropic(j.value("mu", 1.0), j.value("lambda", 0.0));
    if (kind == "laminate") {
        if (!j.contains("phase_a") || !j.contains("phase_b"))
            throw parse_error("laminate needs phase_a and phase_b");
        return laminate_y1(phase_from_json(j["phase_a"]), phase_from_json(j["phase_b"]),
                           j.value("fraction", 0.5));
    }
    if (kind == "layered") {
        if (!j.contains("phases")) throw parse_error("layered needs phases");
        std::vector<double> breaks = j.value("breaks", std::vector<double>{});
        std::vector<IsotropicPhase> phases;
        for (const auto& p : j["phases"]) phases.push_back(phase_from_json(p));
        return layered_t(std::move(breaks), std::move(phases));
    }
    if (kind == "constant") {
        auto vals = j.value("matrix", std::vector<double>{});
        if (vals.size() != 36) throw parse_error("constant law needs a 36-entry matrix");
        Mat6 m;
        for (int r = 0; r < 6; ++r)
            for (int c = 0; c < 6; ++c) m(r, c) = vals[r * 6 + c];
        return constant(m);
    }
    throw parse_error("unknown material kind: " + kind);
}

double q_value(const MaterialLaw& law, double t, const Vec2& y, const Mat3& G) {
    if (!(std::abs(t) < 0.5)) throw out_of_thickness("q_value: |t| >= 1/2");
    const Vec6 v = voigt6(G);
    const Mat6 m = law.eval(t, y);
    return v.dot(m * v);
}

BoundsEstimate verify_bounds(const MaterialLaw& law, int samples, std::uint64_t seed) {
    if (samples < 1) throw invalid_argument("verify_bounds needs samples >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(-0.5 + 1e-9, 0.5 - 1e-9);
    std::uniform_real_distribution<double> uy(0.0, 1.0);
    BoundsEstimate out;
    out.alpha = std::numeric_limits<double>::infinity();
    out.beta = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double t = ut(rng);
        const Vec2 y(uy(rng), uy(rng));
        Eigen::SelfAdjointEigenSolver<Mat6> es(law.eval(t, y));
        out.alpha = std::min(out.alpha, es.eigenvalues().minCoeff());
        out.beta = std::max(out.beta, es.eigenvalues().maxCoeff());
        if (es.eigenvalues().minCoeff() <= 1e-10)
            throw not_coercive("verify_bounds: sampled Voigt eigenvalue <= 1e-10");
    }
    return out;
}

}  // namespace shf

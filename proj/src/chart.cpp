#include "shellforms/chart.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <sstream>

namespace shf {

namespace {

using nlohmann::json;

// Graph chart (z1, z2, f(z)). The normal (-grad f, 1)/sqrt(1+|grad f|^2) points
// to the +x3 side; the built-in sphere/ellipsoid caps are upper patches, so it
// points outward.
class GraphChart final : public SurfaceChart {
public:
    GraphChart(SurfaceChart::GraphFn fn, const Rect& domain, std::string name)
        : SurfaceChart(ChartKind::graph, domain), fn_(std::move(fn)), name_(std::move(name)) {}

    GraphChart(ChartKind kind, SurfaceChart::GraphFn fn, const Rect& domain, std::string name)
        : SurfaceChart(kind, domain), fn_(std::move(fn)), name_(std::move(name)) {}

    ChartJet jet(const Vec2& z) const override {
        ChartJet out;
        const double f = fn_.f(z);
        const Vec2 grad = fn_.grad(z);
        const Mat2 hess = fn_.hess(z);
        const auto third = fn_.third(z);
        out.x = Vec3(z[0], z[1], f);
        for (int a = 0; a < 2; ++a) {
            out.d1[a] = Vec3(a == 0 ? 1.0 : 0.0, a == 1 ? 1.0 : 0.0, grad[a]);
            for (int b = 0; b < 2; ++b) {
                out.d2[a][b] = Vec3(0, 0, hess(a, b));
                for (int c = 0; c < 2; ++c) out.d3[a][b][c] = Vec3(0, 0, third[a](b, c));
            }
        }
        return out;
    }

    std::string describe() const override { return name_; }

private:
    SurfaceChart::GraphFn fn_;
    std::string name_;
};

// f = c sqrt(1 - z1^2/a^2 - z2^2/b^2); the sphere cap is a = b = c = R.
SurfaceChart::GraphFn ellipsoid_graph(double a, double b, double c) {
    const Vec2 inv_sq(1.0 / (a * a), 1.0 / (b * b));
    auto w_of = [inv_sq](const Vec2& z) {
        return 1.0 - z[0] * z[0] * inv_sq[0] - z[1] * z[1] * inv_sq[1];
    };
    SurfaceChart::GraphFn fn;
    fn.f = [c, w_of](const Vec2& z) { return c * std::sqrt(w_of(z)); };
    fn.grad = [c, w_of, inv_sq](const Vec2& z) {
        const double w = w_of(z);
        Vec2 s(z[0] * inv_sq[0], z[1] * inv_sq[1]);
        return Vec2(-c * s[0] / std::sqrt(w), -c * s[1] / std::sqrt(w));
    };
    fn.hess = [c, w_of, inv_sq](const Vec2& z) {
        const double w = w_of(z);
        const double w12 = std::sqrt(w), w32 = w * w12;
        Vec2 s(z[0] * inv_sq[0], z[1] * inv_sq[1]);
        Mat2 h;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                h(i, j) = -c * ((i == j ? inv_sq[i] : 0.0) / w12 + s[i] * s[j] / w32);
        return h;
    };
    fn.third = [c, w_of, inv_sq](const Vec2& z) {
        const double w = w_of(z);
        const double w32 = std::pow(w, 1.5), w52 = std::pow(w, 2.5);
        Vec2 s(z[0] * inv_sq[0], z[1] * inv_sq[1]);
        std::array<Mat2, 2> t;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) {
                    double v = 0.0;
                    if (i == j) v += inv_sq[i] * s[k];
                    if (i == k) v += inv_sq[i] * s[j];
                    if (j == k) v += inv_sq[j] * s[i];
                    t[i](j, k) = -c * (v / w32 + 3.0 * s[i] * s[j] * s[k] / w52);
                }
        return t;
    };
    return fn;
}

Rect default_cap_domain(double a, double b) {
    return Rect{-0.4 * a, 0.4 * a, -0.4 * b, 0.4 * b};
}

class SampledChart final : public SurfaceChart {
public:
    SampledChart(const GridSpec& grid, std::vector<Vec3> values)
        : SurfaceChart(ChartKind::sampled, grid.rect), map_(grid, std::move(values)) {}

    ChartJet jet(const Vec2& z) const override {
        const auto& grid = map_.grid();
        const double fi = (z[0] - grid.rect.lo1) / grid.h1();
        const double fj = (z[1] - grid.rect.lo2) / grid.h2();
        const int i = int(std::lround(fi)), j = int(std::lround(fj));
        if (std::abs(fi - i) > 1e-8 || std::abs(fj - j) > 1e-8 || i < 0 || i >= grid.n1 || j < 0 ||
            j >= grid.n2)
            throw derivative_unavailable("sampled chart can only be evaluated at grid nodes");
        ChartJet out;
        out.x = map_.value(i, j);
        for (int a = 0; a < 2; ++a) {
            out.d1[a] = map_.d1(a, i, j);
            for (int b = 0; b < 2; ++b) {
                out.d2[a][b] = map_.d2(a, b, i, j);
                for (int c = 0; c < 2; ++c)
                    out.d3[a][b][c].setZero();  // not provided by sampled charts
            }
        }
        return out;
    }

    std::string describe() const override {
        std::ostringstream os;
        os << "sampled(" << map_.grid().n1 << "x" << map_.grid().n2 << ")";
        return os.str();
    }

private:
    SampledMap map_;
};

Rect rect_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw parse_error("domain must be [lo1, hi1, lo2, hi2]");
    Rect r{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!(r.hi1 > r.lo1) || !(r.hi2 > r.lo2)) throw parse_error("empty chart domain");
    return r;
}

}  // namespace

std::shared_ptr<SurfaceChart> SurfaceChart::sphere_cap(double radius) {
    return sphere_cap(radius, default_cap_domain(radius, radius));
}

std::shared_ptr<SurfaceChart> SurfaceChart::sphere_cap(double radius, const Rect& domain) {
    if (!(radius > 0)) throw invalid_argument("sphere radius must be positive");
    std::ostringstream os;
    os << "sphere-cap(R=" << radius << ")";
    return std::make_shared<GraphChart>(ChartKind::sphere_cap,
                                        ellipsoid_graph(radius, radius, radius), domain, os.str());
}

std::shared_ptr<SurfaceChart> SurfaceChart::ellipsoid_patch(double a, double b, double c) {
    return ellipsoid_patch(a, b, c, default_cap_domain(a, b));
}

std::shared_ptr<SurfaceChart> SurfaceChart::ellipsoid_patch(double a, double b, double c,
                                                            const Rect& domain) {
    if (!(a > 0) || !(b > 0) || !(c > 0)) throw invalid_argument("semi-axes must be positive");
    std::ostringstream os;
    os << "ellipsoid-patch(" << a << "," << b << "," << c << ")";
    return std::make_shared<GraphChart>(ChartKind::ellipsoid_patch, ellipsoid_graph(a, b, c),
                                        domain, os.str());
}

std::shared_ptr<SurfaceChart> SurfaceChart::graph(GraphFn fn, const Rect& domain,
                                                  std::string name) {
    return std::make_shared<GraphChart>(std::move(fn), domain, std::move(name));
}

std::shared_ptr<SurfaceChart> SurfaceChart::flat(const Rect& domain) {
    GraphFn fn;
    fn.f = [](const Vec2&) { return 0.0; };
    fn.grad = [](const Vec2&) { return Vec2::Zero().eval(); };
    fn.hess = [](const Vec2&) { return Mat2::Zero().eval(); };
    fn.third = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
    return std::make_shared<GraphChart>(std::move(fn), domain, "graph(flat)");
}

std::shared_ptr<SurfaceChart> SurfaceChart::paraboloid(double cx, double cy, const Rect& domain) {
    GraphFn fn;
    fn.f = [cx, cy](const Vec2& z) { return 0.5 * (cx * z[0] * z[0] + cy * z[1] * z[1]); };
    fn.grad = [cx, cy](const Vec2& z) { return Vec2(cx * z[0], cy * z[1]); };
    fn.hess = [cx, cy](const Vec2&) {
        Mat2 h = Mat2::Zero();
        h(0, 0) = cx;
        h(1, 1) = cy;
        return h;
    };
    fn.third = [](const Vec2&) { return std::array<Mat2, 2>{Mat2::Zero(), Mat2::Zero()}; };
    std::ostringstream os;
    os << "graph(paraboloid " << cx << "," << cy << ")";
    return std::make_shared<GraphChart>(std::move(fn), domain, os.str());
}

std::shared_ptr<SurfaceChart> SurfaceChart::sampled(const GridSpec& grid,
                                                    std::vector<Vec3> values) {
    if (int(values.size()) != grid.count()) throw shape_mismatch("sampled chart size mismatch");
    if (grid.n1 < 4 || grid.n2 < 4)
        throw derivative_unavailable("sampled chart narrower than the finite-difference stencil");
    return std::make_shared<SampledChart>(grid, std::move(values));
}

std::shared_ptr<SurfaceChart> SurfaceChart::from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw parse_error(std::string("chart descriptor: ") + e.what());
    }
    const std::string kind = j.value("kind", "");
    if (kind == "sphere-cap") {
        const double r = j.value("radius", 1.0);
        if (!(r > 0)) throw parse_error("sphere-cap radius must be positive");
        if (j.contains("domain")) return sphere_cap(r, rect_from_json(j["domain"]));
        return sphere_cap(r);
    }
    if (kind == "ellipsoid-patch") {
        if (!j.contains("semi_axes")) throw parse_error("ellipsoid-patch needs semi_axes");
        auto ax = j["semi_axes"];
        if (!ax.is_array() || ax.size() != 3) throw parse_error("semi_axes must have 3 entries");
        double a = ax[0].get<double>(), b = ax[1].get<double>(), c = ax[2].get<double>();
        if (j.contains("domain")) return ellipsoid_patch(a, b, c, rect_from_json(j["domain"]));
        return ellipsoid_patch(a, b, c);
    }
    if (kind == "graph") {
        Rect domain{0.0, 1.0, 0.0, 1.0};
        if (j.contains("domain")) domain = rect_from_json(j["domain"]);
        const std::string profile = j.value("profile", "flat");
        if (profile == "flat") return flat(domain);
        if (profile == "paraboloid") {
            auto co = j.value("coeffs", std::vector<double>{1.0, 1.0});
            if (co.size() != 2) throw parse_error("paraboloid coeffs must have 2 entries");
            return paraboloid(co[0], co[1], domain);
        }
        throw parse_error("unknown graph profile: " + profile);
    }
    if (kind == "sampled") throw parse_error("sampled charts are created from grid data, not JSON");
    throw parse_error("unknown chart kind: " + kind);
}

SampledMap::SampledMap(const GridSpec& grid, std::vector<Vec3> values)
    : grid_(grid), values_(std::move(values)) {
    if (int(values_.size()) != grid_.count()) throw shape_mismatch("sampled map size mismatch");
    if (grid_.n1 < 4 || grid_.n2 < 4)
        throw derivative_unavailable("sampled map narrower than the finite-difference stencil");
}

Vec3 SampledMap::d1(int axis, int i, int j) const {
    const double h = axis == 0 ? grid_.h1() : grid_.h2();
    const int n = axis == 0 ? grid_.n1 : grid_.n2;
    const int p = axis == 0 ? i : j;
    auto at = [&](int s) -> const Vec3& {
        return axis == 0 ? values_[grid_.index(s, j)] : values_[grid_.index(i, s)];
    };
    if (p == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    if (p == n - 1) return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    return (at(p + 1) - at(p - 1)) / (2.0 * h);
}

Vec3 SampledMap::d2(int a, int b, int i, int j) const {
    if (a != b) {
        // Mixed derivative: apply the axis-0 stencil to d1-along-axis-1 values.
        const double h = grid_.h1();
        auto dv = [&](int s) { return d1(1, s, j); };
        if (i == 0) return (-3.0 * dv(0) + 4.0 * dv(1) - dv(2)) / (2.0 * h);
        if (i == grid_.n1 - 1)
            return (3.0 * dv(grid_.n1 - 1) - 4.0 * dv(grid_.n1 - 2) + dv(grid_.n1 - 3)) / (2.0 * h);
        return (dv(i + 1) - dv(i - 1)) / (2.0 * h);
    }
    const double h = a == 0 ? grid_.h1() : grid_.h2();
    const int n = a == 0 ? grid_.n1 : grid_.n2;
    const int p = a == 0 ? i : j;
    auto at = [&](int s) -> const Vec3& {
        return a == 0 ? values_[grid_.index(s, j)] : values_[grid_.index(i, s)];
    };
    if (p == 0) return (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h);
    if (p == n - 1)
        return (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / (h * h);
    return (at(p + 1) - 2.0 * at(p) + at(p - 1)) / (h * h);
}

SampledMap SampledMap::from_chart(const SurfaceChart& chart, const GridSpec& grid) {
    std::vector<Vec3> vals(grid.count());
    for (int i = 0; i < grid.n1; ++i)
        for (int j = 0; j < grid.n2; ++j) vals[grid.index(i, j)] = chart.jet(grid.node(i, j)).x;
    return SampledMap(grid, std::move(vals));
}

}  // namespace shf

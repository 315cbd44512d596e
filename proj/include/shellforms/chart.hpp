#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "shellforms/types.hpp"

namespace shf {

// Value and derivatives of an embedding xi at one chart point.
struct ChartJet {
    Vec3 x = Vec3::Zero();
    Vec3 d1[2];           // d_a xi
    Vec3 d2[2][2];        // d_a d_b xi, symmetric
    Vec3 d3[2][2][2];     // d_a d_b d_c xi, symmetric

    ChartJet() {
        for (auto& v : d1) v.setZero();
        for (auto& r : d2)
            for (auto& v : r) v.setZero();
        for (auto& p : d3)
            for (auto& r : p)
                for (auto& v : r) v.setZero();
    }
};

enum class ChartKind { sphere_cap, ellipsoid_patch, graph, sampled };

// Evaluator for an embedding xi : omega -> R^3 with derivatives up to third
// order. Built-in charts are analytic; sampled charts differentiate their grid
// values with second-order finite differences and can only be evaluated at
// grid nodes.
class SurfaceChart {
public:
    virtual ~SurfaceChart() = default;

    virtual ChartJet jet(const Vec2& z) const = 0;
    const Rect& domain() const { return domain_; }
    ChartKind kind() const { return kind_; }
    virtual std::string describe() const = 0;

    static std::shared_ptr<SurfaceChart> sphere_cap(double radius);
    static std::shared_ptr<SurfaceChart> sphere_cap(double radius, const Rect& domain);
    static std::shared_ptr<SurfaceChart> ellipsoid_patch(double a, double b, double c);
    static std::shared_ptr<SurfaceChart> ellipsoid_patch(double a, double b, double c, const Rect& domain);

    // Graph chart (z1, z2, f(z)); callers supply f with derivatives up to third order.
    struct GraphFn {
        std::function<double(const Vec2&)> f;
        std::function<Vec2(const Vec2&)> grad;
        std::function<Mat2(const Vec2&)> hess;
        // third(z)[a](b,c) = f_{abc}
        std::function<std::array<Mat2, 2>(const Vec2&)> third;
    };
    static std::shared_ptr<SurfaceChart> graph(GraphFn fn, const Rect& domain, std::string name = "graph");
    static std::shared_ptr<SurfaceChart> flat(const Rect& domain);
    static std::shared_ptr<SurfaceChart> paraboloid(double cx, double cy, const Rect& domain);

    static std::shared_ptr<SurfaceChart> sampled(const GridSpec& grid, std::vector<Vec3> values);

    // Descriptor: {"kind": "sphere-cap", "radius": 1.0, "domain": [lo1,hi1,lo2,hi2], ...}
    static std::shared_ptr<SurfaceChart> from_json(const std::string& json_text);

protected:
    SurfaceChart(ChartKind kind, const Rect& domain) : kind_(kind), domain_(domain) {}

    ChartKind kind_;
    Rect domain_;
};

// A vector-valued map sampled on a uniform grid, differentiated with
// second-order stencils (centered inside, one-sided at the boundary). Shared by
// sampled charts and by the immersion-handling geometry routines.
class SampledMap {
public:
    SampledMap(const GridSpec& grid, std::vector<Vec3> values);

    const GridSpec& grid() const { return grid_; }
    const Vec3& value(int i, int j) const { return values_[grid_.index(i, j)]; }

    // First derivative along axis (0 or 1) at node (i,j).
    Vec3 d1(int axis, int i, int j) const;
    // Second derivative d_a d_b at node (i,j).
    Vec3 d2(int a, int b, int i, int j) const;

    static SampledMap from_chart(const SurfaceChart& chart, const GridSpec& grid);

private:
    GridSpec grid_;
    std::vector<Vec3> values_;
};

}  // namespace shf

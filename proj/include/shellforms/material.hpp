#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "shellforms/types.hpp"

namespace shf {

// 6x6 symmetric positive-definite matrix acting on strain Voigt-6 vectors.
using VoigtTensor6 = Mat6;

// Isotropic density 2 mu |sym G|^2 + lambda (tr G)^2 in Voigt-6 form.
Mat6 isotropic_voigt(double mu, double lambda);

struct IsotropicPhase {
    double mu = 1.0;
    double lambda = 0.0;
};

enum class MaterialKind { isotropic, laminate_y1, layered_t, constant, custom };

// Quadratic energy density Q(x + t n, y, .) as a field of Voigt matrices over
// the thickness variable t in (-1/2, 1/2) and the torus variable y in [0,1)^2.
// Laws are immutable; evaluation is pure and reentrant.
class MaterialLaw {
public:
    ~MaterialLaw() = default;

    Mat6 eval(double t, const Vec2& y) const;

    MaterialKind kind() const { return kind_; }
    // True when eval does not depend on y.
    bool y_constant() const { return y_constant_; }
    // True when eval does not depend on t.
    bool t_constant() const { return t_constant_; }
    // True when every phase is isotropic, so the density is invariant under
    // conjugation by ambient rotations.
    bool frame_invariant() const { return frame_invariant_; }
    std::uint64_t id() const { return id_; }
    std::string describe() const { return describe_; }

    static std::shared_ptr<MaterialLaw> isotropic(double mu, double lambda);
    static std::shared_ptr<MaterialLaw> laminate_y1(IsotropicPhase a, IsotropicPhase b, double fraction);
    // breaks are the interior t-breakpoints (ascending, inside (-1/2,1/2));
    // phases has breaks.size()+1 entries.
    static std::shared_ptr<MaterialLaw> layered_t(std::vector<double> breaks, std::vector<IsotropicPhase> phases);
    static std::shared_ptr<MaterialLaw> constant(const Mat6& m);
    static std::shared_ptr<MaterialLaw> custom(std::function<Mat6(double, const Vec2&)> eval,
                                               bool y_constant, bool t_constant, bool frame_invariant,
                                               std::string describe = "custom");
    // Same law scaled by s > 0 (used for x-dependent laws built per node).
    static std::shared_ptr<MaterialLaw> scaled(std::shared_ptr<const MaterialLaw> base, double s);

    // Descriptor: {"kind": "isotropic", "mu": 1.0, "lambda": 1.0}, see README.
    static std::shared_ptr<MaterialLaw> from_json(const std::string& json_text);

private:
    MaterialLaw() = default;

    MaterialKind kind_ = MaterialKind::custom;
    bool y_constant_ = false;
    bool t_constant_ = false;
    bool frame_invariant_ = false;
    std::uint64_t id_ = 0;
    std::string describe_;
    std::function<Mat6(double, const Vec2&)> eval_;
};

// Q(x,y,G) = (voigt6 sym G)^T m (voigt6 sym G); depends only on sym G.
// Throws OutOfThickness when |t| >= 1/2.
double q_value(const MaterialLaw& law, double t, const Vec2& y, const Mat3& G);

struct BoundsEstimate {
    double alpha = 0.0;  // smallest sampled Voigt eigenvalue
    double beta = 0.0;   // largest sampled Voigt eigenvalue
};

// Min/max Voigt eigenvalues over random (t, y) samples; throws NotCoercive if
// any sampled eigenvalue <= 1e-10.
BoundsEstimate verify_bounds(const MaterialLaw& law, int samples, std::uint64_t seed = 0);

}  // namespace shf

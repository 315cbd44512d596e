#pragma once

#include <vector>

#include "shellforms/types.hpp"

namespace shf {

struct FourierMode {
    int k1 = 0;
    int k2 = 0;
    bool operator==(const FourierMode&) const = default;
};

// Discretization of I x Y: Fourier collocation on the torus Y = [0,1)^2 with
// n_y nodes per axis and symmetric mode cutoff |k_i| <= n_y/2 - 1 (Nyquist
// excluded), Gauss-Legendre quadrature with n_t nodes on I = (-1/2,1/2), and a
// Legendre modal basis of degree p_leg for t-dependent fields.
class CellGrid {
public:
    CellGrid(int n_y, int n_t, int p_leg);

    int n_y() const { return n_y_; }
    int n_t() const { return n_t_; }
    int p_leg() const { return p_leg_; }
    int max_mode() const { return n_y_ / 2 - 1; }

    int y_count() const { return n_y_ * n_y_; }
    int node_count() const { return n_t_ * y_count(); }
    int node_index(int it, int j1, int j2) const { return (it * n_y_ + j1) * n_y_ + j2; }
    Vec2 y_node(int j1, int j2) const { return {double(j1) / n_y_, double(j2) / n_y_}; }
    double y_weight() const { return 1.0 / y_count(); }

    const std::vector<double>& t_nodes() const { return t_nodes_; }
    const std::vector<double>& t_weights() const { return t_weights_; }

    // Nonzero modes, one representative per conjugate pair: k1 > 0, or k1 == 0
    // and k2 > 0. Each carries a cosine and a sine coefficient.
    const std::vector<FourierMode>& modes_half() const { return modes_half_; }
    // Coefficient count of a mean-zero scalar Fourier field.
    int fourier_dof() const { return 2 * int(modes_half_.size()); }

    // Shifted Legendre values L_l(t) = P_l(2t) and derivatives at the t-nodes.
    double legendre(int l, int it) const { return leg_val_[l * n_t_ + it]; }
    double legendre_d(int l, int it) const { return leg_der_[l * n_t_ + it]; }

private:
    int n_y_, n_t_, p_leg_;
    std::vector<double> t_nodes_, t_weights_;
    std::vector<FourierMode> modes_half_;
    std::vector<double> leg_val_, leg_der_;
};

// Gauss-Legendre nodes/weights on (-1/2, 1/2); nodes symmetric, weights sum to 1.
void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights);

// P_l(s) and P_l'(s) on [-1,1].
double legendre_p(int l, double s);
double legendre_dp(int l, double s);

}  // namespace shf

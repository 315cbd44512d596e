#include "shellforms/cellgrid.hpp"

#include <cmath>

namespace shf {

double legendre_p(int l, double s) {
    if (l == 0) return 1.0;
    double pm = 1.0, p = s;
    for (int k = 2; k <= l; ++k) {
        const double pn = ((2.0 * k - 1.0) * s * p - (k - 1.0) * pm) / k;
        pm = p;
        p = pn;
    }
    return p;
}

double legendre_dp(int l, double s) {
    if (l == 0) return 0.0;
    // (1-s^2) P_l' = l (P_{l-1} - s P_l); Gauss nodes stay away from +-1.
    const double denom = 1.0 - s * s;
    return l * (legendre_p(l - 1, s) - s * legendre_p(l, s)) / denom;
}

void gauss_legendre_unit(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    // Newton iteration on P_n over [-1,1]; mirrored to keep exact symmetry.
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            const double f = legendre_p(n, x);
            const double df = legendre_dp(n, x);
            const double dx = f / df;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double dp = legendre_dp(n, x);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
    // Map [-1,1] -> (-1/2,1/2).
    for (int i = 0; i < n; ++i) {
        nodes[i] *= 0.5;
        weights[i] *= 0.5;
    }
}

CellGrid::CellGrid(int n_y, int n_t, int p_leg) : n_y_(n_y), n_t_(n_t), p_leg_(p_leg) {
    if (n_y < 4 || n_y > 128 || n_y % 2 != 0)
        throw invalid_argument("n_y must be even and within [4, 128]");
    if (n_t < 2) throw invalid_argument("n_t must be at least 2");
    if (p_leg < 1) throw invalid_argument("p_leg must be at least 1");
    if (p_leg > n_t)
        throw invalid_argument("p_leg must not exceed n_t (t-quadrature must resolve the basis)");

    gauss_legendre_unit(n_t, t_nodes_, t_weights_);

    const int m = max_mode();
    for (int k1 = 0; k1 <= m; ++k1)
        for (int k2 = -m; k2 <= m; ++k2) {
            if (k1 == 0 && k2 <= 0) continue;  // one representative per conjugate pair
            modes_half_.push_back({k1, k2});
        }

    leg_val_.resize((p_leg_ + 1) * n_t_);
    leg_der_.resize((p_leg_ + 1) * n_t_);
    for (int l = 0; l <= p_leg_; ++l)
        for (int it = 0; it < n_t_; ++it) {
            const double s = 2.0 * t_nodes_[it];
            leg_val_[l * n_t_ + it] = legendre_p(l, s);
            leg_der_[l * n_t_ + it] = 2.0 * legendre_dp(l, s);
        }
}

}  // namespace shf

#include "shellforms/oracle.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace shf {

namespace {

// The oracle re-derives every strain evaluation from the printed operator
// formulas with plain trigonometric loops; it shares only type definitions and
// coefficient layouts with the fast path.
struct DenseAssembly {
    MatX B;      // (6N) x dof strain columns
    VecX b;      // 6N affine offset (t * q embedding)
    VecX wdiag;  // quadrature weight per node (expanded per row below)
    std::vector<Mat6> m;  // material per node
    int N = 0;

    double weighted(const VecX& x, const VecX& y) const {
        double total = 0.0;
        for (int idx = 0; idx < N; ++idx)
            total += wdiag[idx] * x.segment<6>(6 * idx).dot(m[idx] * y.segment<6>(6 * idx));
        return total;
    }
};

Vec6 sym_voigt(const Vec3& a, const Vec3& b) { return voigt6(sym_outer(a, b)); }

void add_tangential(const PointFrame& f, const Mat2& coeff, Vec6& out) {
    for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c)
            out += coeff(a, c) * sym_voigt(f.tau_dual[a], f.tau_dual[c]);
}

DenseAssembly assemble(const Gamma& gamma, const MaterialLaw& law, const PointFrame& frame,
                       const TangentForm2& q, const CellGrid& grid) {
    const int ny = grid.n_y(), n_t = grid.n_t();
    const int nyy = ny * ny;
    const int N = n_t * nyy;
    const int nf = grid.fourier_dof();
    const auto& modes = grid.modes_half();

    int dof = 0;
    if (gamma.is_zero())
        dof = 3 * nf + 3 * N + 3;
    else if (gamma.is_inf())
        dof = n_t * (3 * nf + 3) + 3;
    else
        dof = 3 * RelaxFieldGamma::scalar_dof(grid) + 3;
    if (dof > 2000) throw too_large("dense_cell_solve: " + std::to_string(dof) + " unknowns");

    DenseAssembly out;
    out.N = N;
    out.B = MatX::Zero(6 * N, dof);
    out.b = VecX::Zero(6 * N);
    out.wdiag = VecX::Zero(N);
    out.m.resize(N);
    for (int it = 0; it < n_t; ++it)
        for (int j1 = 0; j1 < ny; ++j1)
            for (int j2 = 0; j2 < ny; ++j2) {
                const int idx = grid.node_index(it, j1, j2);
                out.m[idx] = law.eval(grid.t_nodes()[it], grid.y_node(j1, j2));
                out.wdiag[idx] = grid.t_weights()[it] * grid.y_weight();
            }

    // Affine offset t * q in the dual tangential embedding.
    for (int it = 0; it < n_t; ++it) {
        Vec6 eq = Vec6::Zero();
        add_tangential(frame, grid.t_nodes()[it] * q.matrix(), eq);
        for (int jy = 0; jy < nyy; ++jy) out.b.segment<6>(6 * (it * nyy + jy)) = eq;
    }

    auto trig = [&](const FourierMode& k, int j1, int j2, bool sin_part) {
        const double ang = 2.0 * M_PI * (double(k.k1 * j1 + k.k2 * j2) / ny);
        return sin_part ? std::sin(ang) : std::cos(ang);
    };

    int col = 0;
    auto fill_def_column = [&](int comp, const FourierMode& k, bool sin_part,
                               const std::function<double(int)>& t_factor) {
        // zeta_comp = f(y) * t_factor(t); Def_y contribution only.
        for (int it = 0; it < n_t; ++it)
            for (int j1 = 0; j1 < ny; ++j1)
                for (int j2 = 0; j2 < ny; ++j2) {
                    const double df = 2.0 * M_PI *
                                      (sin_part ? trig(k, j1, j2, false) : -trig(k, j1, j2, true));
                    Vec2 grad(df * k.k1, df * k.k2);
                    Mat2 s = Mat2::Zero();
                    for (int b2 = 0; b2 < 2; ++b2) {
                        s(comp, b2) += 0.5 * grad[b2];
                        s(b2, comp) += 0.5 * grad[b2];
                    }
                    Vec6 e = Vec6::Zero();
                    add_tangential(frame, s * t_factor(it), e);
                    out.B.block<6, 1>(6 * grid.node_index(it, j1, j2), col) += e;
                }
    };
    auto fill_value_mixed = [&](int comp, const FourierMode& k, bool sin_part, bool has_mode,
                                const std::function<double(int)>& t_factor, double scale) {
        // coefficient of tau^comp (.) n equal to scale * f(y) * t_factor(t)
        for (int it = 0; it < n_t; ++it)
            for (int j1 = 0; j1 < ny; ++j1)
                for (int j2 = 0; j2 < ny; ++j2) {
                    const double v = has_mode ? trig(k, j1, j2, sin_part) : 1.0;
                    out.B.block<6, 1>(6 * grid.node_index(it, j1, j2), col) +=
                        scale * v * t_factor(it) * sym_voigt(frame.tau_dual[comp], frame.n);
                }
    };
    auto fill_grad_mixed = [&](const FourierMode& k, bool sin_part,
                               const std::function<double(int)>& t_factor, double scale) {
        // coefficient of tau^a (.) n equal to scale * d_a f(y) * t_factor(t)
        for (int it = 0; it < n_t; ++it)
            for (int j1 = 0; j1 < ny; ++j1)
                for (int j2 = 0; j2 < ny; ++j2) {
                    const double df = 2.0 * M_PI *
                                      (sin_part ? trig(k, j1, j2, false) : -trig(k, j1, j2, true));
                    const Vec2 grad(df * k.k1, df * k.k2);
                    Vec6 e = Vec6::Zero();
                    for (int a = 0; a < 2; ++a)
                        e += scale * grad[a] * t_factor(it) * sym_voigt(frame.tau_dual[a], frame.n);
                    out.B.block<6, 1>(6 * grid.node_index(it, j1, j2), col) += e;
                }
    };
    auto fill_value_normal = [&](const FourierMode& k, bool sin_part, bool has_mode,
                                 const std::function<double(int)>& t_factor, double scale) {
        for (int it = 0; it < n_t; ++it)
            for (int j1 = 0; j1 < ny; ++j1)
                for (int j2 = 0; j2 < ny; ++j2) {
                    const double v = has_mode ? trig(k, j1, j2, sin_part) : 1.0;
                    out.B.block<6, 1>(6 * grid.node_index(it, j1, j2), col) +=
                        scale * v * t_factor(it) * voigt6(frame.n * frame.n.transpose());
                }
    };

    auto one = [](int) { return 1.0; };

    if (gamma.is_zero()) {
        for (int comp = 0; comp < 2; ++comp)
            for (const auto& k : modes)
                for (int sp = 0; sp < 2; ++sp) {
                    fill_def_column(comp, k, sp == 1, one);
                    ++col;
                }
        for (const auto& k : modes)
            for (int sp = 0; sp < 2; ++sp) {
                // - t Hess_y phi
                for (int it = 0; it < n_t; ++it) {
                    const double t = grid.t_nodes()[it];
                    for (int j1 = 0; j1 < ny; ++j1)
                        for (int j2 = 0; j2 < ny; ++j2) {
                            const double f = trig(k, j1, j2, sp == 1);
                            Mat2 hess;
                            for (int a = 0; a < 2; ++a)
                                for (int b2 = 0; b2 < 2; ++b2)
                                    hess(a, b2) = -4.0 * M_PI * M_PI * (a == 0 ? k.k1 : k.k2) *
                                                  (b2 == 0 ? k.k1 : k.k2) * f;
                            Vec6 e = Vec6::Zero();
                            add_tangential(frame, (-t * hess).eval(), e);
                            out.B.block<6, 1>(6 * grid.node_index(it, j1, j2), col) += e;
                        }
                }
                ++col;
            }
        // g: 2 g_a tau^a (.) n + g_3 n (x) n, one unknown per node component.
        for (int idx = 0; idx < N; ++idx) {
            out.B.block<6, 1>(6 * idx, col++) = 2.0 * sym_voigt(frame.tau_dual[0], frame.n);
            out.B.block<6, 1>(6 * idx, col++) = 2.0 * sym_voigt(frame.tau_dual[1], frame.n);
            out.B.block<6, 1>(6 * idx, col++) = voigt6(frame.n * frame.n.transpose());
        }
    } else if (gamma.is_inf()) {
        for (int it = 0; it < n_t; ++it) {
            auto slice_only = [it](int s) { return s == it ? 1.0 : 0.0; };
            for (int comp = 0; comp < 2; ++comp)
                for (const auto& k : modes)
                    for (int sp = 0; sp < 2; ++sp) {
                        fill_def_column(comp, k, sp == 1, slice_only);
                        ++col;
                    }
            for (const auto& k : modes)
                for (int sp = 0; sp < 2; ++sp) {
                    fill_grad_mixed(k, sp == 1, slice_only, 2.0);
                    ++col;
                }
            for (int comp = 0; comp < 2; ++comp) {
                fill_value_mixed(comp, FourierMode{}, false, false, slice_only, 2.0);
                ++col;
            }
            fill_value_normal(FourierMode{}, false, false, slice_only, 1.0);
            ++col;
        }
    } else {
        const double ig = 1.0 / gamma.value;
        const int L = grid.p_leg() + 1;
        for (int field = 0; field < 3; ++field) {
            for (int l = 0; l < L; ++l) {
                auto lv = [&grid, l](int it) { return grid.legendre(l, it); };
                auto ld = [&grid, l](int it) { return grid.legendre_d(l, it); };
                if (l > 0) {
                    // constant-in-y coefficient of this level
                    if (field < 2) {
                        fill_value_mixed(field, FourierMode{}, false, false, ld, ig);
                    } else {
                        fill_value_normal(FourierMode{}, false, false, ld, ig);
                    }
                    ++col;
                }
                for (const auto& k : modes)
                    for (int sp = 0; sp < 2; ++sp) {
                        if (field < 2) {
                            fill_def_column(field, k, sp == 1, lv);
                            fill_value_mixed(field, k, sp == 1, true, ld, ig);
                        } else {
                            fill_grad_mixed(k, sp == 1, lv, 1.0);
                            fill_value_normal(k, sp == 1, true, ld, ig);
                        }
                        ++col;
                    }
            }
        }
    }
    // p columns (dual tangential basis).
    for (int i = 0; i < 3; ++i) {
        TangentForm2 pi;
        pi.v = Vec3::Unit(i);
        Vec6 e = Vec6::Zero();
        add_tangential(frame, pi.matrix(), e);
        for (int idx = 0; idx < N; ++idx) out.B.block<6, 1>(6 * idx, col) = e;
        ++col;
    }
    if (col != dof) throw Error(ErrorCode::internal, "dense oracle column count mismatch");
    return out;
}

}  // namespace

CellSolution dense_cell_solve(const Gamma& gamma, const MaterialLaw& law, const PointFrame& frame,
                              const TangentForm2& q, const CellGrid& grid) {
    DenseAssembly asmb = assemble(gamma, law, frame, q, grid);
    const int dof = int(asmb.B.cols());

    // Weighted Gram matrix and right-hand side.
    MatX WB(asmb.B.rows(), dof);
    for (int idx = 0; idx < asmb.N; ++idx)
        WB.middleRows(6 * idx, 6) = asmb.wdiag[idx] * (asmb.m[idx] * asmb.B.middleRows(6 * idx, 6));
    MatX G = asmb.B.transpose() * WB;
    G = 0.5 * (G + G.transpose()).eval();
    VecX rhs = -WB.transpose() * asmb.b;

    // Kernel-aware pseudo-inverse solve of the stationarity system.
    Eigen::SelfAdjointEigenSolver<MatX> es(G);
    const VecX& ev = es.eigenvalues();
    const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-12;
    VecX u = VecX::Zero(dof);
    for (int i = 0; i < dof; ++i) {
        if (ev[i] <= cutoff) continue;
        const double c = es.eigenvectors().col(i).dot(rhs) / ev[i];
        u += c * es.eigenvectors().col(i);
    }

    const VecX e = asmb.B * u + asmb.b;
    CellSolution sol;
    sol.gamma = gamma;
    sol.value = asmb.weighted(e, e);
    sol.residual = 0.0;
    sol.iterations = 0;
    sol.p = TangentForm2(Vec3(u[dof - 3], u[dof - 2], u[dof - 1]));

    const int nf = grid.fourier_dof();
    if (gamma.is_zero()) {
        RelaxField0 f = RelaxField0::zeros(grid, true);
        f.zeta1 = u.segment(0, nf);
        f.zeta2 = u.segment(nf, nf);
        f.phi = u.segment(2 * nf, nf);
        f.g = u.segment(3 * nf, 3 * grid.node_count());
        sol.f0 = std::move(f);
    } else if (gamma.is_inf()) {
        RelaxFieldInf f = RelaxFieldInf::zeros(grid);
        const int sd = 3 * nf + 3;
        for (int it = 0; it < grid.n_t(); ++it) f.slices.col(it) = u.segment(it * sd, sd);
        sol.finf = std::move(f);
    } else {
        RelaxFieldGamma f = RelaxFieldGamma::zeros(grid);
        const int sd = RelaxFieldGamma::scalar_dof(grid);
        f.zeta1 = u.segment(0, sd);
        f.zeta2 = u.segment(sd, sd);
        f.rho = u.segment(2 * sd, sd);
        sol.fgamma = std::move(f);
    }
    return sol;
}

SpdAudit spd_audit(const EffectiveForm& form) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(form.m);
    SpdAudit out;
    out.eigenvalues = es.eigenvalues();
    if (!(out.eigenvalues.minCoeff() > 0))
        throw not_spd("spd_audit: effective form has eigenvalue <= 0");
    out.bound_c = std::max(out.eigenvalues.maxCoeff(), 1.0 / out.eigenvalues.minCoeff());
    return out;
}

}  // namespace shf

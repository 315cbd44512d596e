#include "spectral.hpp"

#include <cmath>
#include <cstring>
#include <mutex>

namespace shf {

namespace {
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

SpectralTransform::SpectralTransform(int n) : n_(n), nc_(n * (n / 2 + 1)) {
    real_ = fftw_alloc_real(size_t(n_) * n_);
    spec_ = fftw_alloc_complex(nc_);
    std::lock_guard<std::mutex> lock(plan_mutex());
    // FFTW_ESTIMATE keeps planning deterministic run to run.
    plan_c2r_ = fftw_plan_dft_c2r_2d(n_, n_, spec_, real_, FFTW_ESTIMATE);
    plan_r2c_ = fftw_plan_dft_r2c_2d(n_, n_, real_, spec_, FFTW_ESTIMATE);
}

SpectralTransform::~SpectralTransform() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan_c2r_);
    fftw_destroy_plan(plan_r2c_);
    fftw_free(real_);
    fftw_free(spec_);
}

std::complex<double> SpectralTransform::deriv_factor(const FourierMode& m, int s1, int s2) const {
    const std::complex<double> i1(0.0, 2.0 * M_PI * m.k1);
    const std::complex<double> i2(0.0, 2.0 * M_PI * m.k2);
    std::complex<double> f(1.0, 0.0);
    for (int s = 0; s < s1; ++s) f *= i1;
    for (int s = 0; s < s2; ++s) f *= i2;
    return f;
}

void SpectralTransform::synth(const std::vector<FourierMode>& modes, const double* coeffs,
                              bool include_zero, int s1, int s2, double* values) {
    std::memset(spec_, 0, sizeof(fftw_complex) * nc_);
    auto entry = [&](int k0, int k1) -> std::complex<double>& {
        return reinterpret_cast<std::complex<double>*>(spec_)[k0 * (n_ / 2 + 1) + k1];
    };
    const double* c = coeffs;
    if (include_zero) {
        if (s1 == 0 && s2 == 0) entry(0, 0) += std::complex<double>(c[0], 0.0);
        ++c;
    }
    for (size_t mi = 0; mi < modes.size(); ++mi) {
        const FourierMode& m = modes[mi];
        const std::complex<double> chat =
            0.5 * std::complex<double>(c[2 * mi], -c[2 * mi + 1]) * deriv_factor(m, s1, s2);
        if (m.k2 > 0) {
            entry(((m.k1 % n_) + n_) % n_, m.k2) += chat;
        } else if (m.k2 < 0) {
            entry((((-m.k1) % n_) + n_) % n_, -m.k2) += std::conj(chat);
        } else {
            // k2 == 0, k1 > 0: both conjugate partners live in the stored column.
            entry(m.k1, 0) += chat;
            entry(n_ - m.k1, 0) += std::conj(chat);
        }
    }
    fftw_execute(plan_c2r_);
    std::memcpy(values, real_, sizeof(double) * size_t(n_) * n_);
}

void SpectralTransform::adjoint(const std::vector<FourierMode>& modes, const double* z,
                                bool include_zero, int s1, int s2, double* grad) {
    std::memcpy(real_, z, sizeof(double) * size_t(n_) * n_);
    fftw_execute(plan_r2c_);
    const auto* spec = reinterpret_cast<const std::complex<double>*>(spec_);
    auto fwd = [&](int k1, int k2) -> std::complex<double> {
        if (k2 >= 0) return spec[(((k1 % n_) + n_) % n_) * (n_ / 2 + 1) + k2];
        return std::conj(spec[((((-k1) % n_) + n_) % n_) * (n_ / 2 + 1) + (-k2)]);
    };
    double* g = grad;
    if (include_zero) {
        if (s1 == 0 && s2 == 0) g[0] += fwd(0, 0).real();
        ++g;
    }
    for (size_t mi = 0; mi < modes.size(); ++mi) {
        const FourierMode& m = modes[mi];
        const std::complex<double> w = deriv_factor(m, s1, s2) * std::conj(fwd(m.k1, m.k2));
        g[2 * mi] += w.real();
        g[2 * mi + 1] += w.imag();
    }
}

}  // namespace shf

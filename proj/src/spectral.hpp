#pragma once

#include <fftw3.h>

#include <complex>
#include <vector>

#include "shellforms/cellgrid.hpp"
#include "shellforms/types.hpp"

namespace shf {

// FFT-backed synthesis/analysis between the half-mode trigonometric
// coefficients used by the relaxation fields and nodal values on the n x n
// torus grid. Each instance owns its buffers and plans; plan creation is
// serialized internally (FFTW requirement), execution is thread-safe per
// instance.
class SpectralTransform {
public:
    explicit SpectralTransform(int n);
    ~SpectralTransform();

    SpectralTransform(const SpectralTransform&) = delete;
    SpectralTransform& operator=(const SpectralTransform&) = delete;

    int n() const { return n_; }

    // values[j1*n+j2] of sum_k a_k cos(2 pi k.y) + b_k sin(2 pi k.y),
    // differentiated by the multi-index (s1, s2) with s1+s2 <= 2.
    // Modes are the half-list of the grid; include_zero appends a leading
    // constant coefficient (value c0, derivatives zero).
    void synth(const std::vector<FourierMode>& modes, const double* coeffs, bool include_zero,
               int s1, int s2, double* values);

    // Adjoint of synth with the same mode list and multi-index: given nodal
    // values z, accumulates d(sum_j z_j value_j)/d(coeff) into grad (+=).
    void adjoint(const std::vector<FourierMode>& modes, const double* z, bool include_zero, int s1,
                 int s2, double* grad);

private:
    std::complex<double> deriv_factor(const FourierMode& m, int s1, int s2) const;

    int n_;
    int nc_;  // n * (n/2 + 1)
    double* real_;
    fftw_complex* spec_;
    fftw_plan plan_c2r_;
    fftw_plan plan_r2c_;
    // adjoint needs a cached forward transform of z for consecutive gathers
    std::vector<std::complex<double>> fwd_;
};

}  // namespace shf

#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "levylab/grid.hpp"

namespace levylab {

using cplx = std::complex<double>;

// Half spectrum layout of FFTW r2c: N^(n-1) x (N/2+1).
struct HalfLattice {
    std::size_t size = 0;
    std::vector<std::array<double, 3>> k;
    std::vector<double> k2;
    std::vector<std::size_t> full_index;
    std::vector<unsigned char> nyquist;
    std::vector<unsigned char> dealias_keep;
    // weight 1 or 2 for Parseval sums over the half spectrum
    std::vector<double> weight;
};

const HalfLattice& half_lattice(const Grid& g);

std::vector<cplx> fft_forward(const Grid& g, const std::vector<double>& values);
std::vector<double> fft_inverse(const Grid& g, std::vector<cplx> spectrum);

template <class M>
SampledField apply_multiplier(const SampledField& f, M&& multiplier) {
    const HalfLattice& hl = half_lattice(f.grid);
    std::vector<cplx> s = fft_forward(f.grid, f.values);
    for (std::size_t i = 0; i < hl.size; ++i) s[i] *= multiplier(i);
    SampledField out(f.grid, fft_inverse(f.grid, std::move(s)));
    out.time = f.time;
    return out;
}

std::vector<double> spectral_derivative(const Grid& g, const std::vector<double>& values, int axis);
std::vector<double> spectral_divergence(const Grid& g, const std::vector<std::vector<double>>& comps,
                                        bool dealias);
// Divergence of the product field * comps, computed pseudo-spectrally.
std::vector<cplx> flux_divergence_spectrum(const Grid& g, const std::vector<double>& scalar,
                                           const std::vector<std::vector<double>>& comps, bool dealias);

// Trigonometric interpolant on a grid refined by an integer factor.
SampledField spectral_upsample(const SampledField& f, int factor);
// Supremum of |f| over the trigonometric interpolant.
double spectral_sup(const SampledField& f, int upsample = 4);
// L^p norm of the trigonometric interpolant, quadrature on a refined grid.
double spectral_lp_norm(const SampledField& f, double p, int upsample = 4);

}  // namespace levylab

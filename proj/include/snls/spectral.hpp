#pragma once
// Discrete Fourier transforms and diagonal Fourier multipliers.
//
// Normalization: the forward transform is unnormalized, the inverse carries
// 1/n^d, so from_spectrum(to_spectrum(f)) == f and Parseval reads
// h^d sum|f|^2 == (1/n^d) h^d sum|f_hat|^2.
//
// Sign convention for the free flow: free_evolve(f, t, +1) multiplies the
// spectrum by e^{+i t |xi|^2}, which solves i du/dt = Lap u forward in t.
// The scattering pullback e^{itLap} applied as an inverse therefore uses
// sign = -1.

#include <functional>
#include <vector>

#include "snls/grid.hpp"

namespace snls {

// Low-level unnormalized transforms on raw buffers (in != out required).
// dir = -1: forward (physical -> spectrum); dir = +1: inverse (unnormalized).
void dft_raw(const TorusGrid& grid, const cplx* in, cplx* out, int dir);

ComplexField to_spectrum(const ComplexField& f);
ComplexField from_spectrum(const ComplexField& spec);

struct SpectralMultiplier {
    enum class Kind { bracket_power, free_propagator, dealias_mask, gradient, laplacian, custom };
    Kind kind = Kind::custom;
    double s = 0.0;    // bracket exponent
    double t = 0.0;    // propagator time
    int sign = +1;     // propagator sign
    int axis = 0;      // gradient axis
    TorusGrid grid;
    std::vector<cplx> symbol;  // value per flat mode index
};

SpectralMultiplier bracket_multiplier(const TorusGrid& grid, double s);
SpectralMultiplier propagator_multiplier(const TorusGrid& grid, double t, int sign);
SpectralMultiplier dealias_multiplier(const TorusGrid& grid);  // 2/3-rule mask
SpectralMultiplier gradient_multiplier(const TorusGrid& grid, int axis);   // i xi_axis
SpectralMultiplier laplacian_multiplier(const TorusGrid& grid);            // -|xi|^2
// pointwise product of symbols (e.g. propagator x dealias)
SpectralMultiplier compose_multipliers(const SpectralMultiplier& a, const SpectralMultiplier& b);

ComplexField apply_multiplier(const ComplexField& f, const SpectralMultiplier& m);
ComplexField free_evolve(const ComplexField& f, double t, int sign);

// spectral gradient components and Laplacian of a physical-space field
std::vector<ComplexField> spectral_gradient(const ComplexField& f);
ComplexField spectral_laplacian(const ComplexField& f);

// iterate over modes: fn(flat_index, xi[3] wavenumber vector, |xi|^2)
void for_each_mode(const TorusGrid& grid,
                   const std::function<void(std::size_t, const double*, double)>& fn);

}  // namespace snls

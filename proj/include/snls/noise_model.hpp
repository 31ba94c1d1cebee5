#pragma once
// Spatial noise profiles and the multiplicative-noise model G_k = g_k(t) phi_k(x).
//
// Profiles are compactly supported C^inf bumps, so the asymptotic-flatness
// requirement (weighted decay of the gradient) holds exactly for the continuum
// object; what the decay proxy monitors is the spectral-differentiation
// ringing that a finite grid adds on top.
//
// Derived pointwise quantities:
//   mu     = 1/2 sum_k |G_k|^2            (real, >= 0; the Ito compensator)
//   mu_hat = sum_k (Re G_k) G_k           (complex; identically 0 when every
//                                          profile is purely imaginary)

#include <complex>
#include <vector>

#include "snls/brownian.hpp"
#include "snls/grid.hpp"

namespace snls {

struct NoiseProfile {
    ComplexField phi;
    std::vector<ComplexField> grad;  // d spectral partial derivatives
    ComplexField lap;                // spectral Laplacian
    bool conservative = false;       // Re phi == 0 at every grid point (exact)
    // Flatness certificate: max over the outer 10% shell (sup-norm sense) of
    // |x|^2 |grad phi| relative to its global max, evaluated on the closed-form
    // derivative of the bump (exactly zero outside the support). Must be
    // <= 1e-8; nonzero only when the support intrudes into the shell.
    double decay_ratio = 0.0;
    // Monitored, not hidden: sup-norm gap between the spectral and closed-form
    // gradients. Dominated by ringing shed at the support edge, where the bump
    // is smooth but not analytic.
    double gradient_ringing = 0.0;
};

// Smooth bump amplitude * exp(-r^2 / (radius^2 - r^2)) vanishing identically
// outside |x - center| = radius (periodic minimal-image distance). Requires
// radius < L/2 - 2h so the support clears the box with a margin.
// conservative = true demands a purely imaginary amplitude.
NoiseProfile make_bump_profile(const TorusGrid& grid, const double* center, double radius,
                               cplx amplitude, bool conservative);

struct NoiseModel {
    TimeMesh mesh;
    std::vector<NoiseProfile> profiles;  // N channels
    std::vector<std::vector<double>> g;  // [N][steps+1] amplitude samples at mesh points
    bool conservative = false;           // all profiles conservative

    int channels() const { return (int)profiles.size(); }
    const TorusGrid& grid() const { return profiles.at(0).phi.grid; }
    double g_at(int channel, int j) const { return g[channel][j]; }

    // 1/2 sum_k g_k(t_j)^2 |phi_k(x)|^2 as a real field
    std::vector<double> mu_at(int j) const;
    // sum_k g_k(t_j)^2 (Re phi_k(x)) phi_k(x); exact zero field when conservative
    ComplexField mu_hat_at(int j) const;

    void validate() const;
};

NoiseModel make_noise_model(const TimeMesh& mesh, std::vector<NoiseProfile> profiles,
                            std::vector<std::vector<double>> amplitudes);

// Restrict the amplitude tables to every factor-th mesh point. The coarse mesh
// is a subset of the fine one, so this is pure subsampling (no resampling) and
// pairs with coarsen_driver when one Brownian path is run at several step
// sizes. factor must divide the step count.
NoiseModel coarsen_noise_model(const NoiseModel& model, int factor);

}  // namespace snls

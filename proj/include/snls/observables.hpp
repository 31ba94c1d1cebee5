#pragma once
// Scalar functionals of fields and trajectories: mass, Hamiltonian, the
// discrete Ito-formula residuals, and the norm profile binding the norm layer
// to stored trajectories.
//
// Residual convention: the stochastic integrals are reconstructed from the
// stored trajectory with left-point sums (the Ito evaluation point -- any
// other choice converges to a different object), while the absolutely
// continuous drift integrals use the trapezoid rule, where the higher order
// is free.  A residual is the formula's left side minus the reconstruction;
// at t = 0 it is exactly zero by construction, and its size under dt
// refinement is the test statistic.

#include <array>
#include <string>
#include <vector>

#include "snls/brownian.hpp"
#include "snls/dynamics.hpp"
#include "snls/grid.hpp"
#include "snls/noise_model.hpp"

namespace snls {

// h^d sum |f|^2
double mass(const ComplexField& f);

// H(f) = 1/2 |grad f|_2^2 - lambda/(alpha+1) |f|_{alpha+1}^{alpha+1}
// (spectral gradient; both terms add for lambda = -1, so H >= 0 defocusing)
double hamiltonian(const ComplexField& f, int lambda, double alpha);

struct ItoResidualReport {
    std::vector<double> times;
    std::vector<double> residual;  // left side minus reconstruction; [0] == 0 exactly
    // Energy residual only: the six cumulative right-side terms, signed as they
    // enter the sum -- [0] initial Hamiltonian, [1] -int Re(grad conj(X) .
    // grad(mu X)), [2] +1/2 sum int |grad(G_k X)|^2, [3] the (Re G_k)^2
    // potential drift, [4] the gradient martingale, [5] the potential
    // martingale.  residual = H(t) - sum of the six.
    std::vector<std::array<double, 6>> terms;
    double dt = 0.0;
    double fitted_order = 0.0;  // filled by refinement drivers, not per run
    // The closed Ito formula for the Hamiltonian is derived for 3 <= d <= 6;
    // outside that window the same expression is evaluated formally and the
    // report says so.
    bool extended_regime = false;
};

// R(t) = mass(t) - mass(0) - 2 sum_k sum_{t_j < t} (int Re G_k |X|^2 dx)(t_j) dbeta_k(j).
// Requires a stride-1 untruncated trajectory on the driver mesh.
ItoResidualReport ito_mass_residual(const Trajectory& traj, const NoiseModel& noise,
                                    const BrownianDriver& driver);

// Residual of the Hamiltonian Ito formula (six terms as above).  The products
// grad(mu X) and grad(G_k X) are expanded with the product rule using the
// precomputed profile gradients; only X itself is differentiated spectrally.
ItoResidualReport ito_energy_residual(const Trajectory& traj, const NoiseModel& noise,
                                      const BrownianDriver& driver, int lambda, double alpha);

// One named scalar per norm family evaluated on the stored series: the
// mass/energy scattering norms, two extreme Strichartz-type mixed pairs, the
// two local-smoothing indices, and (d >= 3 only -- the exponent tables are
// dimension-gated) the exotic families.
struct NormProfileEntry {
    std::string name;
    double value = 0.0;
};
std::vector<NormProfileEntry> norm_profile(const Trajectory& traj);

// Least-squares slope of log2(y) against log2(x); the convergence-order fit
// used by residual and equivalence refinement studies.  Requires matching
// sizes >= 2 and strictly positive data.
double fit_log2_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace snls

#pragma once
// Phase fields for the two gauge transformations and the lower-order
// coefficients they induce.
//
//   forward phase    phi_sigma(t,x) = sum_k int_sigma^{sigma+t} G_k dbeta_k
//                                     - int_sigma^{sigma+t} mu_hat ds
//   scattering phase phi_star(t,x)  = - sum_k int_t^{T_end} G_k dbeta_k
//                                     + int_t^{T_end} mu_hat ds
//
// Both use the left-point Ito sum for the martingale part and the trapezoid
// rule for the mu_hat part, on the same increments as the SPDE solver, so the
// cross identities (additivity in sigma; phi_star(t) - phi_star(0) equal to
// the forward phase from 0) hold to rounding rather than to O(sqrt(dt)).
//
// Gauging by e^{phi} removes the noise: the coefficients of the resulting
// random PDE are b = 2 grad phi and c = lap phi + sum_j (d_j phi)^2.

#include <vector>

#include "snls/brownian.hpp"
#include "snls/grid.hpp"
#include "snls/noise_model.hpp"

namespace snls {

enum class PhaseKind { forward, scattering };

struct PhasePath {
    TimeMesh mesh;          // the driver mesh the phase was built on
    SpaceTimeSeries phase;  // one field per covered mesh point, absolute times
    int origin_index = 0;   // forward: sigma (phase vanishes there);
                            // scattering: the horizon index (phase vanishes there)
    PhaseKind kind = PhaseKind::forward;
};

PhasePath forward_phase(const NoiseModel& noise, const BrownianDriver& driver, int sigma_index);

// horizon must lie on the mesh; every amplitude sample strictly beyond it must
// vanish so that cutting the tail integral there is exact, not approximate.
PhasePath scattering_phase(const NoiseModel& noise, const BrownianDriver& driver,
                           double horizon);

struct LowerOrderCoeffs {
    std::vector<double> times;
    std::vector<std::vector<ComplexField>> b;  // [time][axis], b = 2 grad phi
    std::vector<ComplexField> c;               // c = lap phi + sum_j (d_j phi)^2
};

LowerOrderCoeffs coeffs_from_phase(const PhasePath& phase);

// single-snapshot version used per solver step
void coeffs_at(const ComplexField& phi, std::vector<ComplexField>& b_out, ComplexField& c_out);

// pointwise e^{direction phi} f; throws if the real part is large enough to
// overflow the exponential, reporting max |Re phi|
ComplexField gauge(const ComplexField& f, const ComplexField& phase, int direction);

}  // namespace snls

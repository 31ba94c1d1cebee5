#pragma once
// Space and space-time norms on grid functions.
//
// Spatial L^p uses the quadrature h^d * sum |f|^p (grid max for p = inf).
// Space-time L^q_t L^p_x uses the trapezoid rule on the stored sample times.
// The exotic families and the local-smoothing norm apply their fractional
// <grad> multiplier spatially before any weighting, matching the integrand
// order of the estimates they discretize.

#include <limits>
#include <utility>

#include "snls/grid.hpp"
#include "snls/spectral.hpp"

namespace snls {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

double lp_norm(const ComplexField& f, double p);

double mixed_spacetime_norm(const SpaceTimeSeries& s, double q, double p);
// same, but the spatial norm is ||<grad>^brackets u||_p (W^{1,p}-type integrand)
double mixed_spacetime_norm_bracket(const SpaceTimeSeries& s, double q, double p,
                                    double bracket_s);

// L^2(I; H^alpha_beta): sqrt of the time integral of h^d sum <x>^{2 beta} |<grad>^alpha u|^2
double local_smoothing_norm(const SpaceTimeSeries& s, double alpha, double beta);

enum class ExoticKind { X0, XX, YY };
// (q, p, bracket exponent) of the exotic space for dimension d; throws for d < 3
struct ExoticExponents {
    double q, p, bracket;
};
ExoticExponents exotic_exponents(int d, ExoticKind kind);
double exotic_norm(const SpaceTimeSeries& s, ExoticKind kind);

// Named space-time norms of the analysis:
//   V  = L^{2+4/d}_{t,x}
//   W  = L^{2(d+2)/(d-2)}_t L^{2d(d+2)/(d^2+4)}_x             (d >= 3)
//   W1 = same exponents on <grad>u                            (d >= 3)
double v_norm(const SpaceTimeSeries& s);
double w_norm(const SpaceTimeSeries& s);
double w1_norm(const SpaceTimeSeries& s);

// (mass + ||grad f||_2^2)^{1/2} with spectral gradient
double h1_norm(const ComplexField& f);

}  // namespace snls

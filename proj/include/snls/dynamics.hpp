#pragma once
// Split-step integrators for the four flows of the lab:
//
//   Ito SPDE        i dX = Lap X dt + lambda F(X) dt - i mu X dt + i X sum_k G_k dbeta_k
//   rescaled PDE    i dv/dt = (Lap + b.grad + c) v + lambda e^{(alpha-1) Re phi} F(v)
//   controlled eq.  i dS = Lap S dt + lambda F(S) dt - i mu_hat S dt + i S sum_k G_k hdot_k dt
//   deterministic   i du/dt = Lap u + lambda F(u)
//
// with F(X) = |X|^{alpha-1} X and G_k = g_k(t) phi_k(x).  Each substep is an
// exact flow of its own piece:
//
//   linear     spectral multiplier e^{i dt |xi|^2} (unitary);
//   nonlinear  pointwise rotation X e^{-i lambda |X|^{alpha-1} dt} -- the phase
//              ODE preserves |X|, so this is exact and modulus-preserving;
//   noise      pointwise factor exp(sum_k G_k dbeta_k - mu_hat dt).  This is
//              the exact solution of the noise + damping part: converting the
//              Ito equation to its exponential form combines the -mu damping
//              with the quadratic variation into mu_hat = sum_k (Re G_k) G_k,
//              which is why conservative noise (Re G_k = 0) gives a
//              unit-modulus factor and pathwise mass conservation.
//
// Lie order is noise -> nonlinear -> linear; Strang wraps the same middle
// (noise -> nonlinear) between two half linear steps.  The splitting error is
// therefore purely deterministic.  A run with g == 0 performs literally the
// same arithmetic as the deterministic solver -- zero noise exponents are
// detected and the multiplication skipped -- so solve_spde, solve_controlled
// (h == 0, conservative) and solve_deterministic collapse bit for bit.
//
// The rescaled equation has no exact factor for b.grad + c; that perturbation
// is integrated by classical RK4 in the interaction picture of the exact free
// flow, with coefficients and the nonlinear weight e^{(alpha-1) Re phi} frozen
// at the left endpoint of each step (first-order freezing error, which is what
// the equivalence report measures).

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "snls/brownian.hpp"
#include "snls/grid.hpp"
#include "snls/noise_model.hpp"
#include "snls/rescaling.hpp"

namespace snls {

enum class Criticality { mass, energy };
enum class Scheme { lie, strang };

struct ProblemSpec {
    Criticality criticality = Criticality::mass;
    int lambda = -1;  // -1 defocusing, +1 focusing
    ComplexField initial;
    std::shared_ptr<const NoiseModel> noise;  // null for deterministic problems

    const TorusGrid& grid() const { return initial.grid; }
    // 1 + 4/d (mass) or 1 + 4/(d-2) (energy); derived, never stored
    double alpha() const;
    void validate() const;
};

struct SolverConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::strang;
    int dealias = -1;      // 1 on, 0 off, -1 auto (on iff alpha >= 3)
    int store_stride = 1;  // keep every k-th snapshot (t=0 and the final step always kept)
    double horizon = 0.0;  // time span for solve_deterministic (others take it
                           // from their driver / control / phase)
    bool linear_only = false;  // drop the nonlinearity; used by the
                               // evolution-operator pullback diagnostics
    double blowup_factor = 1e6;  // stop when sup|X| exceeds this times sup|X_0|

    void validate() const;
    bool dealias_resolved(double alpha) const { return dealias < 0 ? alpha >= 3.0 : dealias > 0; }
};

struct Trajectory {
    SpaceTimeSeries series;            // snapshots at the stored steps
    std::vector<double> mass_record;   // h^d sum|X|^2 after every step; [0] = initial
    std::vector<double> energy_record; // Hamiltonian at stored snapshots (deterministic runs)
    ProblemSpec problem;
    SolverConfig config;               // with dealias resolved to 0/1
    std::uint64_t seed = 0;            // driver fingerprint; 0/0 when driverless
    std::uint32_t sample = 0;
    bool truncated = false;  // integration stopped early (ceiling or non-finite state)
    int stop_step = -1;      // step count actually completed
    std::string stop_reason; // empty for a clean run

    double time_at(int record_index) const { return series.times.at(record_index); }
};

// ---- exact substeps (public for tests and composition) ----------------------

// free flow over dt (identity at dt == 0)
ComplexField substep_linear(const ComplexField& f, double dt);

// pointwise rotation f e^{-i lambda |f|^{alpha-1} dt}; |result| == |f| exactly
ComplexField substep_nonlinear(const ComplexField& f, double dt, int lambda, double alpha);

// pointwise factor exp(sum_k g_k(t_j) phi_k dbeta_k(j) - mu_hat(t_j) dt) using
// the increments of step j; throws overflow_error when the real part of the
// exponent is large enough to overflow exp
ComplexField substep_noise(const ComplexField& f, const NoiseModel& noise,
                           const BrownianDriver& driver, int step);

// One interaction-picture RK4 step of i dv/dt = (Lap + b.grad + c) v over
// [0, tau] with the coefficients held fixed.  tau may be negative, which runs
// the same flow backward -- the evolution-operator pullback uses exactly this
// routine, so there is no separate adjoint code path.
ComplexField perturbed_linear_step(const ComplexField& f, const std::vector<ComplexField>& b,
                                   const ComplexField& c, double tau);

// ---- full solvers -----------------------------------------------------------
//
// All solvers run on the mesh of their time source (driver / control / phase);
// config.dt must match its spacing, except that solve_spde also accepts a
// finer driver whose spacing divides dt (the fine increments are summed into
// per-step increments, which is the same Brownian path consumed once per
// step).  Blow-up and non-finite states stop integration with a flagged,
// truncated trajectory holding the last finite state.

Trajectory solve_spde(const ProblemSpec& problem, const BrownianDriver& driver,
                      const SolverConfig& config);

Trajectory solve_controlled(const ProblemSpec& problem, const CameronMartinControl& control,
                            const SolverConfig& config);

Trajectory solve_deterministic(const ProblemSpec& problem, const SolverConfig& config);

// Rescaled random PDE on the window covered by a forward phase path, starting
// from problem.initial at the window's origin.  coeffs must be
// coeffs_from_phase(phase).  Throws invalid_argument before stepping when the
// transport coefficient violates max|b| dt / h <= 0.5 (CFL-type guard).
Trajectory solve_random_pde(const ProblemSpec& problem, const PhasePath& phase,
                            const LowerOrderCoeffs& coeffs, const SolverConfig& config);

// ---- gauge equivalence of the SPDE and the rescaled PDE ---------------------
//
// For each dt level (config.dt, /2, /4): solve the SPDE on the driver path,
// build the forward phase from sigma, solve the rescaled equation started at
// X(sigma), and measure
//     deviation = max_t |gauge(v(t), phi(t), +1) - X(sigma + t)|_2 / |X_0|_2.
// sigma_index counts steps of the config.dt mesh; the driver (and the model's
// amplitude tables) must be sampled finely enough that every level consumes a
// whole number of increments per step.

struct EquivalenceReport {
    std::vector<double> dts;         // coarse to fine
    std::vector<double> deviations;  // one per level
    double deviation = 0.0;          // finest level
    double order = 0.0;              // least-squares slope of log2(deviation) vs log2(dt)
};

EquivalenceReport rescaling_equivalence(const ProblemSpec& problem, const BrownianDriver& driver,
                                        int sigma_index, const SolverConfig& config);

}  // namespace snls

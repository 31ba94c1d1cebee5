#pragma once
// The three experiment drivers built on top of the solvers.
//
//   stability    solve the rescaled equation twice on one phase window -- once
//                clean, once with an O(eps) perturbation (shifted initial
//                datum, or an additive error term injected along the run) --
//                and report the scattering-norm size of the difference.  For
//                smooth forcing the response is linear in eps, so the log-log
//                slope of deviation vs eps sits near 1.
//
//   scattering   gauge the SPDE solution by the horizon-anchored phase,
//                z*(t) = e^{-phi*(t)} X(t), and pull each checkpoint back to
//                the start two ways: through the inverse free group, and
//                through the homogeneous perturbed flow (the evolution
//                operator U*(0,t), realized by stepping the same
//                interaction-picture integrator backward cell by cell).
//                Pairwise Cauchy gaps between checkpoints measure how settled
//                each pullback family is.  Because the phase vanishes at the
//                horizon rather than at zero, the exact backward pullback is
//                e^{-phi*(0)} X(0); re-gauging by e^{+phi*(0)} therefore
//                recovers the initial datum, which is what the
//                initial_recovery column reports.
//
//   support      compare the SPDE solution X(beta) against the controlled
//                solution S(beta^n) driven by the adapted piecewise-linear
//                interpolation of the same path, and the shifted pair
//                X(beta^n - beta + h) against S(h) -- the two distance
//                families behind the support theorem -- together with the
//                quadrature statistics E sup_t |int g dbeta^n - int g dbeta|^2
//                that control them.
//
// All Monte Carlo loops dispatch samples to a worker pool; per-sample results
// land in slots indexed by sample number and every reduction runs in sample
// order, so each report is a deterministic function of (seed, config, inputs)
// regardless of the thread count.

#include <cstdint>
#include <vector>

#include "snls/brownian.hpp"
#include "snls/dynamics.hpp"
#include "snls/grid.hpp"
#include "snls/rescaling.hpp"

namespace snls {

// ---- discrete scattering-space distances ------------------------------------
//
// Stand-ins for the continuum space-time norms: the maximum over the two
// extreme admissible mixed pairs (inf, 2) and (q2, q2) with q2 = 2 + 4/d.
// The S1 variant applies the <grad> bracket before the spatial norm, so it
// also sees one derivative.  Both act on an already-formed difference series.

double s0_distance(const SpaceTimeSeries& diff);
double s1_distance(const SpaceTimeSeries& diff);

// snapshot-wise a - b; the series must share grid, length, and times
SpaceTimeSeries series_difference(const SpaceTimeSeries& a, const SpaceTimeSeries& b);

// ---- stability probe --------------------------------------------------------

enum class ForcingKind {
    initial_datum,   // perturb the initial state by eps * direction
    additive_error,  // inject -i dt eps * direction after every step
};

struct StabilityEntry {
    double epsilon = 0.0;
    double deviation = 0.0;  // scattering-norm distance between the two runs
    bool blown_up = false;   // sentinel tripped on the perturbed run
};

struct StabilityReport {
    ForcingKind kind = ForcingKind::initial_datum;
    std::vector<double> epsilons;
    std::vector<double> deviations;  // matched to epsilons
    std::vector<char> blown_up;      // flagged entries are excluded from the fit
    double slope = 0.0;              // log-log slope over clean eps > 0 entries;
                                     // 0 when fewer than two such entries exist
};

// One perturbed-vs-clean comparison at a single eps.  The deviation is the
// V norm of the difference in the mass case and the larger of the two W-family
// norms (field and gradient) in the energy case, evaluated on the stored
// snapshots.  coeffs must be coeffs_from_phase(phase), as for solve_random_pde.
// eps = 0 reproduces the clean run exactly (deviation identically zero).  A
// perturbed run that trips a sentinel is flagged and its deviation measured on
// the stored prefix both runs share.
StabilityEntry stability_probe(const ProblemSpec& problem, const PhasePath& phase,
                               const LowerOrderCoeffs& coeffs, const ComplexField& direction,
                               double epsilon, ForcingKind kind, const SolverConfig& config);

// Sweep over several eps values against one clean baseline; fits the log-log
// slope over the clean nonzero entries.
StabilityReport stability_sweep(const ProblemSpec& problem, const PhasePath& phase,
                                const ComplexField& direction, const std::vector<double>& epsilons,
                                ForcingKind kind, const SolverConfig& config);

// ---- scattering pullback diagnostic -----------------------------------------

struct ScatteringReport {
    std::vector<double> times;                     // checkpoint times, increasing
    std::vector<ComplexField> free_pullback;       // inverse free group applied to z*(t)
    std::vector<ComplexField> rescaled_pullback;   // U*(0, t) z*(t)
    // pairwise Cauchy gaps |p_i - p_j|_2 / |X_0|_2: symmetric, zero diagonal
    std::vector<std::vector<double>> free_gaps;
    std::vector<std::vector<double>> rescaled_gaps;
    // same gaps in the H1 norm (relative to the initial datum's H1 norm);
    // filled for energy-critical problems, empty otherwise
    std::vector<std::vector<double>> free_gaps_h1;
    std::vector<std::vector<double>> rescaled_gaps_h1;
    // |e^{+phi*(0)} U*(0,t) z*(t) - X(0)|_2 / |X_0|_2 per checkpoint, where
    // X(0) is the forward run's stored initial snapshot (the datum after the
    // one-time dealias projection when the mask is on; the raw datum
    // otherwise).  With the nonlinearity disabled this is pure integrator
    // error and shrinks with dt
    std::vector<double> initial_recovery;
};

// Runs the SPDE on the driver path (storing every step), builds the
// horizon-anchored phase, and evaluates both pullback families at the given
// checkpoint times.  Checkpoints must be strictly increasing mesh points in
// [t0, horizon], at least two of them.  config.linear_only selects the
// homogeneous (F == 0) regime for the forward solve; the backward evolution
// operator is linear by definition.  Throws invalid_argument when the
// transport coefficient built from the phase violates the same CFL-type bound
// solve_random_pde enforces, and runtime_error when the forward solve stops
// at a sentinel before the last checkpoint.
ScatteringReport scattering_diagnostic(const ProblemSpec& problem, const BrownianDriver& driver,
                                       double horizon, const std::vector<double>& checkpoints,
                                       const SolverConfig& config);

// ---- adapted-interpolation quadrature statistics ----------------------------

struct InterpStat {
    int level = 0;    // dyadic refinement level n
    double mean = 0.0;  // Monte Carlo mean of sup_t |int g dbeta^n - int g dbeta|^2
    double se = 0.0;    // standard error of that mean
    int samples = 0;
};

// For each dyadic level: sample fresh Brownian paths, integrate every g table
// against the path (left-point Ito sum) and against its adapted interpolation
// (trapezoid against the piecewise-constant slope), and accumulate the squared
// sup over mesh points of the channel-wise l2 difference.  g tables carry one
// value per mesh point (steps + 1 entries).  Every 2^-level must be an integer
// multiple of the mesh spacing (domain_error otherwise, as for
// interpolate_adapted); the mesh must start at time zero.
std::vector<InterpStat> interpolation_convergence(const std::vector<std::vector<double>>& g_tables,
                                                  const TimeMesh& mesh,
                                                  const std::vector<int>& levels,
                                                  std::uint64_t seed, int samples, int threads = 1);

// ---- support-theorem comparison ---------------------------------------------

struct SupportReport {
    std::vector<int> levels;
    // [level][sample] distances, S0 norm for mass-critical problems and S1 for
    // energy-critical ones
    std::vector<std::vector<double>> distances;          // |S(beta^n) - X(beta)|
    std::vector<std::vector<double>> shifted_distances;  // |X(beta^n - beta + h) - S(h)|
    std::vector<double> mean, se;                  // per level, over samples
    std::vector<double> shifted_mean, shifted_se;  // per level, over samples
    std::vector<InterpStat> interpolation;  // quadrature statistics for the model's
                                            // g tables on the same driver ensemble
    int samples = 0;
};

// For each sample: draw a driver, solve the SPDE on it, and for each level
// solve the controlled equation driven by the adapted interpolation's slopes
// and measure the distance; the shifted comparison reruns the SPDE on the
// synthetic path beta^n - beta + h against the controlled solution S(h)
// (computed once).  The problem must carry a noise model on the same mesh and
// channel count as h; config.dt must equal the mesh spacing; every level must
// be dyadically compatible with the mesh.  Sentinel stops inside the ensemble
// raise runtime_error naming the sample, since a truncated series has no
// comparable distance.
SupportReport support_comparison(const ProblemSpec& problem, const CameronMartinControl& h,
                                 const std::vector<int>& levels, std::uint64_t seed, int samples,
                                 const SolverConfig& config, int threads = 1);

}  // namespace snls

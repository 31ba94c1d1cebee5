// Experiment drivers: stability probes on the rescaled equation, scattering
// pullback diagnostics, and the support-theorem Monte Carlo with its
// adapted-interpolation quadrature statistics.
//
// Monte Carlo determinism: samples are dispatched to a worker pool through an
// atomic ticket counter, but every per-sample result is written into a slot
// indexed by the sample number and all reductions (means, standard errors)
// run serially in sample order afterward.  Reports are therefore identical
// for any thread count, including 1.

#include "snls/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include "snls/kernels.hpp"
#include "snls/norms.hpp"
#include "snls/observables.hpp"
#include "snls/spectral.hpp"

namespace snls {

namespace {

// =============================================================================
// worker pool
// =============================================================================

// Run body(0..count-1) on up to `threads` workers.  Work items are claimed
// through an atomic counter; the first exception wins, stops the pool, and is
// rethrown on the calling thread.  Results must be written to per-index slots
// by the body -- nothing about the claiming order is deterministic.
void parallel_for(int count, int threads, const std::function<void(int)>& body) {
    if (count <= 0) return;
    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
        if (threads < 1) threads = 1;
    }
    threads = std::min(threads, count);
    if (threads == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> ticket{0};
    std::atomic<bool> bail{false};
    std::mutex gate;
    std::exception_ptr first;
    auto work = [&]() {
        while (!bail.load(std::memory_order_relaxed)) {
            const int i = ticket.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) break;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(gate);
                if (!first) first = std::current_exception();
                bail.store(true, std::memory_order_relaxed);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

// =============================================================================
// small field / series helpers
// =============================================================================

ComplexField field_difference(const ComplexField& a, const ComplexField& b) {
    ComplexField d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d.values[i] -= b.values[i];
    return d;
}

// Difference restricted to the snapshot times both series stored; the stored
// times advance strictly, so a two-pointer walk finds the shared subsequence.
// Used where one of the runs may have stopped at a sentinel.
SpaceTimeSeries common_difference(const SpaceTimeSeries& a, const SpaceTimeSeries& b) {
    SpaceTimeSeries d;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a.times[i] == b.times[j]) {
            d.times.push_back(a.times[i]);
            d.fields.push_back(field_difference(a.fields[i], b.fields[j]));
            ++i;
            ++j;
        } else if (a.times[i] < b.times[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return d;
}

// Stability deviation: the scattering norm of the difference.  A window that
// kept a single snapshot has no time quadrature, so only the spatial norm of
// that snapshot remains (this happens only for runs flagged at the first
// step, which are excluded from slope fits anyway).
double deviation_norm(Criticality crit, const SpaceTimeSeries& diff) {
    if (diff.empty()) return 0.0;
    if (diff.size() < 2)
        return crit == Criticality::mass ? lp_norm(diff.fields[0], 2.0) : h1_norm(diff.fields[0]);
    if (crit == Criticality::mass) return v_norm(diff);
    return std::max(w_norm(diff), w1_norm(diff));
}

double sup_abs(const ComplexField& f) {
    return std::sqrt(kern::sup_abs2(f.values.data(), f.size()));
}

void require_finite(const ComplexField& f, const char* where) {
    if (!std::isfinite(kern::sup_abs2(f.values.data(), f.size())))
        throw std::invalid_argument(std::string(where) + ": field must be finite");
}

// mirror of the dyadic-compatibility check in interpolate_adapted, run up
// front so a bad level fails before any Monte Carlo work starts
void require_dyadic(const TimeMesh& mesh, const std::vector<int>& levels, const char* where) {
    if (levels.empty()) throw std::invalid_argument(std::string(where) + ": no dyadic levels");
    if (mesh.t0 != 0.0)
        throw std::domain_error(std::string(where) + ": dyadic grid is anchored at time 0");
    for (int n : levels) {
        if (n < 1) throw std::domain_error(std::string(where) + ": level must be >= 1");
        const double dyadic = std::ldexp(1.0, -n);
        const long long r = std::llround(dyadic / mesh.dt);
        if (r < 1 || std::abs(static_cast<double>(r) * mesh.dt - dyadic) > 1e-9 * dyadic)
            throw std::domain_error(std::string(where) + ": 2^-" + std::to_string(n) +
                                    " is not an integer multiple of dt");
    }
}

void mean_and_se(const std::vector<double>& v, double& mean, double& se) {
    const std::size_t n = v.size();
    double acc = 0.0;
    for (double x : v) acc += x;
    mean = acc / static_cast<double>(n);
    if (n < 2) {
        se = 0.0;
        return;
    }
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n - 1);
    se = std::sqrt(var / static_cast<double>(n));
}

}  // namespace

// =============================================================================
// discrete scattering-space distances
// =============================================================================

SpaceTimeSeries series_difference(const SpaceTimeSeries& a, const SpaceTimeSeries& b) {
    a.validate();
    b.validate();
    if (a.size() != b.size())
        throw std::invalid_argument("series_difference: series lengths differ");
    if (!a.empty()) require_same_grid(a.grid(), b.grid(), "series_difference");
    SpaceTimeSeries d;
    d.times = a.times;
    d.fields.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a.times[i] - b.times[i]) > 1e-9 * std::max(1.0, std::abs(a.times[i])))
            throw std::invalid_argument("series_difference: snapshot times differ");
        d.fields.push_back(field_difference(a.fields[i], b.fields[i]));
    }
    return d;
}

double s0_distance(const SpaceTimeSeries& diff) {
    const double q2 = 2.0 + 4.0 / static_cast<double>(diff.grid().dim);
    return std::max(mixed_spacetime_norm(diff, kInf, 2.0), mixed_spacetime_norm(diff, q2, q2));
}

double s1_distance(const SpaceTimeSeries& diff) {
    const double q2 = 2.0 + 4.0 / static_cast<double>(diff.grid().dim);
    return std::max(mixed_spacetime_norm_bracket(diff, kInf, 2.0, 1.0),
                    mixed_spacetime_norm_bracket(diff, q2, q2, 1.0));
}

// =============================================================================
// stability probe
// =============================================================================

namespace {

struct RunOut {
    SpaceTimeSeries series;
    bool truncated = false;
    std::string reason;
};

// One run of the rescaled equation with an additive error term: the window is
// traversed one mesh cell at a time through solve_random_pde itself (so each
// cell performs exactly the arithmetic of the corresponding full-run step) and
// the first-order split contribution of the error term, -i dt eps e, is added
// between cells.  eps == 0 skips the injection entirely and reproduces the
// plain chained run bit for bit, which is what the clean baseline uses.  The
// amplitude ceiling is enforced against this run's own initial sup, not per
// cell, so flagging matches the whole-run sentinel semantics.
RunOut run_additive_chain(const ProblemSpec& problem, const PhasePath& phase,
                          const LowerOrderCoeffs& coeffs, const ComplexField& direction,
                          double epsilon, const SolverConfig& config) {
    const int steps = static_cast<int>(phase.phase.size()) - 1;
    const double dt = phase.mesh.dt;
    const std::size_t n = problem.grid().size();
    const double ceiling = config.blowup_factor * sup_abs(problem.initial);
    const cplx kick(0.0, -dt * epsilon);

    SolverConfig cell_config = config;
    cell_config.store_stride = 1;

    RunOut out;
    out.series.times.push_back(phase.phase.times[0]);
    out.series.fields.push_back(problem.initial);

    ComplexField state = problem.initial;
    for (int j = 0; j < steps; ++j) {
        PhasePath cell;
        cell.mesh.t0 = phase.phase.times[j];
        cell.mesh.dt = dt;
        cell.mesh.steps = 1;
        cell.kind = PhaseKind::forward;
        cell.origin_index = 0;
        cell.phase.times = {phase.phase.times[j], phase.phase.times[j + 1]};
        cell.phase.fields = {phase.phase.fields[j], phase.phase.fields[j + 1]};
        LowerOrderCoeffs cc;
        cc.times = cell.phase.times;
        cc.b = {coeffs.b[j], coeffs.b[j + 1]};
        cc.c = {coeffs.c[j], coeffs.c[j + 1]};

        ProblemSpec cellp = problem;
        cellp.initial = state;
        Trajectory sub = solve_random_pde(cellp, cell, cc, cell_config);
        if (sub.truncated) {
            out.truncated = true;
            out.reason = sub.stop_reason;
            break;
        }
        state = sub.series.fields.back();
        if (epsilon != 0.0) {
            for (std::size_t i = 0; i < n; ++i) state.values[i] += kick * direction.values[i];
        }
        const double s2 = kern::sup_abs2(state.values.data(), n);
        if (!std::isfinite(s2)) {
            out.truncated = true;
            out.reason = "non-finite state";
            break;
        }
        if (std::sqrt(s2) > ceiling) {
            out.truncated = true;
            out.reason = "amplitude ceiling";
            break;
        }
        const int step = j + 1;
        if (step == steps || step % config.store_stride == 0) {
            out.series.times.push_back(phase.phase.times[step]);
            out.series.fields.push_back(state);
        }
    }
    return out;
}

RunOut run_perturbed(const ProblemSpec& problem, const PhasePath& phase,
                     const LowerOrderCoeffs& coeffs, const ComplexField& direction, double epsilon,
                     ForcingKind kind, const SolverConfig& config) {
    if (kind == ForcingKind::additive_error)
        return run_additive_chain(problem, phase, coeffs, direction, epsilon, config);
    ProblemSpec p = problem;
    if (epsilon != 0.0) {
        for (std::size_t i = 0; i < p.initial.size(); ++i)
            p.initial.values[i] += epsilon * direction.values[i];
    }
    Trajectory t = solve_random_pde(p, phase, coeffs, config);
    return RunOut{std::move(t.series), t.truncated, std::move(t.stop_reason)};
}

void check_stability_inputs(const ProblemSpec& problem, const PhasePath& phase,
                            const LowerOrderCoeffs& coeffs, const ComplexField& direction,
                            const SolverConfig& config) {
    problem.validate();
    config.validate();
    phase.phase.validate();
    if (phase.kind != PhaseKind::forward)
        throw std::invalid_argument("stability_probe: needs a forward phase window");
    if (phase.phase.size() < 2) throw std::domain_error("stability_probe: phase window has no steps");
    if (coeffs.times.size() != phase.phase.times.size() ||
        coeffs.b.size() != phase.phase.times.size() || coeffs.c.size() != phase.phase.times.size())
        throw std::invalid_argument(
            "stability_probe: coefficient table does not match the phase window");
    require_same_grid(direction.grid, problem.grid(), "stability_probe");
    require_finite(direction, "stability_probe");
}

StabilityEntry probe_against(const ProblemSpec& problem, const PhasePath& phase,
                             const LowerOrderCoeffs& coeffs, const ComplexField& direction,
                             double epsilon, ForcingKind kind, const SolverConfig& config,
                             const SpaceTimeSeries& baseline) {
    if (!std::isfinite(epsilon) || epsilon < 0.0)
        throw std::domain_error("stability_probe: epsilon must be finite and nonnegative");
    RunOut pert = run_perturbed(problem, phase, coeffs, direction, epsilon, kind, config);
    StabilityEntry entry;
    entry.epsilon = epsilon;
    entry.blown_up = pert.truncated;
    entry.deviation = deviation_norm(problem.criticality, common_difference(baseline, pert.series));
    return entry;
}

}  // namespace

StabilityEntry stability_probe(const ProblemSpec& problem, const PhasePath& phase,
                               const LowerOrderCoeffs& coeffs, const ComplexField& direction,
                               double epsilon, ForcingKind kind, const SolverConfig& config) {
    check_stability_inputs(problem, phase, coeffs, direction, config);
    RunOut base = run_perturbed(problem, phase, coeffs, direction, 0.0, kind, config);
    if (base.truncated)
        throw std::runtime_error("stability_probe: clean run stopped early (" + base.reason + ")");
    return probe_against(problem, phase, coeffs, direction, epsilon, kind, config, base.series);
}

StabilityReport stability_sweep(const ProblemSpec& problem, const PhasePath& phase,
                                const ComplexField& direction, const std::vector<double>& epsilons,
                                ForcingKind kind, const SolverConfig& config) {
    if (epsilons.empty()) throw std::invalid_argument("stability_sweep: no epsilon values");
    const LowerOrderCoeffs coeffs = coeffs_from_phase(phase);
    check_stability_inputs(problem, phase, coeffs, direction, config);
    RunOut base = run_perturbed(problem, phase, coeffs, direction, 0.0, kind, config);
    if (base.truncated)
        throw std::runtime_error("stability_sweep: clean run stopped early (" + base.reason + ")");

    StabilityReport report;
    report.kind = kind;
    for (double eps : epsilons) {
        StabilityEntry e =
            probe_against(problem, phase, coeffs, direction, eps, kind, config, base.series);
        report.epsilons.push_back(e.epsilon);
        report.deviations.push_back(e.deviation);
        report.blown_up.push_back(e.blown_up ? 1 : 0);
    }
    // slope over clean entries with eps > 0 and a measurable deviation
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < report.epsilons.size(); ++i) {
        if (!report.blown_up[i] && report.epsilons[i] > 0.0 && report.deviations[i] > 0.0) {
            fx.push_back(report.epsilons[i]);
            fy.push_back(report.deviations[i]);
        }
    }
    report.slope = fx.size() >= 2 ? fit_log2_slope(fx, fy) : 0.0;
    return report;
}

// =============================================================================
// scattering pullback diagnostic
// =============================================================================

namespace {

std::vector<std::vector<double>> gap_matrix(const std::vector<ComplexField>& fields, double scale,
                                            double (*norm_fn)(const ComplexField&)) {
    const std::size_t k = fields.size();
    std::vector<std::vector<double>> gaps(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double v = norm_fn(field_difference(fields[i], fields[j])) / scale;
            gaps[i][j] = v;
            gaps[j][i] = v;
        }
    }
    return gaps;
}

double l2_of(const ComplexField& f) { return lp_norm(f, 2.0); }

}  // namespace

ScatteringReport scattering_diagnostic(const ProblemSpec& problem, const BrownianDriver& driver,
                                       double horizon, const std::vector<double>& checkpoints,
                                       const SolverConfig& config) {
    problem.validate();
    config.validate();
    driver.validate();
    if (!problem.noise)
        throw std::invalid_argument("scattering_diagnostic: problem has no noise model");
    const TimeMesh& mesh = driver.mesh;
    if (std::abs(config.dt - mesh.dt) > 1e-9 * mesh.dt)
        throw std::domain_error("scattering_diagnostic: config.dt must equal the driver spacing");
    const double l20 = lp_norm(problem.initial, 2.0);
    if (l20 == 0.0) throw std::domain_error("scattering_diagnostic: zero initial datum");

    const PhasePath phase = scattering_phase(*problem.noise, driver, horizon);
    if (checkpoints.size() < 2)
        throw std::invalid_argument("scattering_diagnostic: need at least two checkpoints");
    std::vector<int> idx;
    idx.reserve(checkpoints.size());
    for (double t : checkpoints) {
        const long long j = std::llround((t - mesh.t0) / mesh.dt);
        if (j < 0 || j > phase.origin_index ||
            std::abs(mesh.time(static_cast<int>(j)) - t) > 1e-9 * mesh.dt)
            throw std::domain_error(
                "scattering_diagnostic: checkpoint is off the mesh or outside [start, horizon]");
        if (!idx.empty() && static_cast<int>(j) <= idx.back())
            throw std::invalid_argument(
                "scattering_diagnostic: checkpoints must be strictly increasing");
        idx.push_back(static_cast<int>(j));
    }

    const LowerOrderCoeffs coeffs = coeffs_from_phase(phase);
    double bmax2 = 0.0;
    for (const auto& bt : coeffs.b)
        for (const ComplexField& ba : bt)
            bmax2 = std::max(bmax2, kern::sup_abs2(ba.values.data(), ba.size()));
    const double cfl = std::sqrt(bmax2) * mesh.dt / problem.grid().h();
    if (cfl > 0.5)
        throw std::invalid_argument("scattering_diagnostic: max|b| dt / h = " +
                                    std::to_string(cfl) +
                                    " exceeds 0.5; reduce dt or refine the grid");

    SolverConfig forward = config;
    forward.store_stride = 1;  // every checkpoint index must be stored
    Trajectory x = solve_spde(problem, driver, forward);
    if (static_cast<int>(x.series.size()) <= idx.back())
        throw std::runtime_error("scattering_diagnostic: forward solve stopped early (" +
                                 x.stop_reason + ")");

    ScatteringReport report;
    const double dt = mesh.dt;
    // The discrete flow starts from the forward run's own initial snapshot
    // (the datum after the one-time dealias projection when the mask is on),
    // so that is the reference the evolution-operator identity must recover;
    // with the mask off it is the raw datum bit for bit.
    const ComplexField& start = x.series.fields[0];
    for (int ci : idx) {
        report.times.push_back(mesh.time(ci));
        const ComplexField z = gauge(x.series.fields[ci], phase.phase.fields[ci], -1);
        report.free_pullback.push_back(free_evolve(z, mesh.time(ci) - mesh.t0, -1));
        ComplexField w = z;
        for (int j = ci - 1; j >= 0; --j)
            w = perturbed_linear_step(w, coeffs.b[j], coeffs.c[j], -dt);
        // the phase vanishes at the horizon, so the exact pullback is
        // e^{-phi*(0)} X(0); gauging that back recovers the starting state
        const ComplexField recovered = gauge(w, phase.phase.fields[0], +1);
        report.initial_recovery.push_back(lp_norm(field_difference(recovered, start), 2.0) / l20);
        report.rescaled_pullback.push_back(std::move(w));
    }

    report.free_gaps = gap_matrix(report.free_pullback, l20, &l2_of);
    report.rescaled_gaps = gap_matrix(report.rescaled_pullback, l20, &l2_of);
    if (problem.criticality == Criticality::energy) {
        const double h10 = h1_norm(problem.initial);
        report.free_gaps_h1 = gap_matrix(report.free_pullback, h10, &h1_norm);
        report.rescaled_gaps_h1 = gap_matrix(report.rescaled_pullback, h10, &h1_norm);
    }
    return report;
}

// =============================================================================
// adapted-interpolation quadrature statistics
// =============================================================================

std::vector<InterpStat> interpolation_convergence(const std::vector<std::vector<double>>& g_tables,
                                                  const TimeMesh& mesh,
                                                  const std::vector<int>& levels,
                                                  std::uint64_t seed, int samples, int threads) {
    mesh.validate();
    if (g_tables.empty())
        throw std::invalid_argument("interpolation_convergence: need at least one g table");
    const int channels = static_cast<int>(g_tables.size());
    for (const std::vector<double>& g : g_tables) {
        if (g.size() != static_cast<std::size_t>(mesh.steps) + 1)
            throw std::invalid_argument(
                "interpolation_convergence: g table needs one entry per mesh point");
        for (double v : g)
            if (!std::isfinite(v))
                throw std::invalid_argument("interpolation_convergence: g table must be finite");
    }
    require_dyadic(mesh, levels, "interpolation_convergence");
    if (samples < 1) throw std::invalid_argument("interpolation_convergence: need samples >= 1");

    const std::size_t nlevels = levels.size();
    std::vector<std::vector<double>> sup2(nlevels,
                                          std::vector<double>(static_cast<std::size_t>(samples)));
    parallel_for(samples, threads, [&](int s) {
        const BrownianDriver d =
            sample_driver(mesh, channels, seed, static_cast<std::uint32_t>(s));
        std::vector<std::vector<double>> ito(static_cast<std::size_t>(channels));
        for (int k = 0; k < channels; ++k)
            ito[static_cast<std::size_t>(k)] =
                ito_integral(g_tables[static_cast<std::size_t>(k)], d, k);
        for (std::size_t li = 0; li < nlevels; ++li) {
            const AdaptedInterpolation interp = interpolate_adapted(d, levels[li]);
            double best = 0.0;
            std::vector<std::vector<double>> pw(static_cast<std::size_t>(channels));
            for (int k = 0; k < channels; ++k)
                pw[static_cast<std::size_t>(k)] =
                    pathwise_integral(g_tables[static_cast<std::size_t>(k)], interp, k);
            for (int j = 0; j <= mesh.steps; ++j) {
                double acc = 0.0;
                for (int k = 0; k < channels; ++k) {
                    const double dd = pw[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] -
                                      ito[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                    acc += dd * dd;
                }
                best = std::max(best, acc);
            }
            sup2[li][static_cast<std::size_t>(s)] = best;
        }
    });

    std::vector<InterpStat> out(nlevels);
    for (std::size_t li = 0; li < nlevels; ++li) {
        out[li].level = levels[li];
        out[li].samples = samples;
        mean_and_se(sup2[li], out[li].mean, out[li].se);
    }
    return out;
}

// =============================================================================
// support-theorem comparison
// =============================================================================

namespace {

double support_distance(Criticality crit, const SpaceTimeSeries& a, const SpaceTimeSeries& b) {
    const SpaceTimeSeries diff = series_difference(a, b);
    return crit == Criticality::mass ? s0_distance(diff) : s1_distance(diff);
}

}  // namespace

SupportReport support_comparison(const ProblemSpec& problem, const CameronMartinControl& h,
                                 const std::vector<int>& levels, std::uint64_t seed, int samples,
                                 const SolverConfig& config, int threads) {
    problem.validate();
    config.validate();
    h.validate();
    if (!problem.noise)
        throw std::invalid_argument("support_comparison: problem has no noise model");
    const NoiseModel& noise = *problem.noise;
    const TimeMesh& mesh = noise.mesh;
    const int channels = noise.channels();
    if (h.channels != channels || h.mesh.steps != mesh.steps || h.mesh.t0 != mesh.t0 ||
        std::abs(h.mesh.dt - mesh.dt) > 1e-9 * mesh.dt)
        throw std::invalid_argument("support_comparison: control must live on the noise mesh");
    if (std::abs(config.dt - mesh.dt) > 1e-9 * mesh.dt)
        throw std::domain_error("support_comparison: config.dt must equal the mesh spacing");
    require_dyadic(mesh, levels, "support_comparison");
    if (samples < 1) throw std::invalid_argument("support_comparison: need samples >= 1");

    const Trajectory sh = solve_controlled(problem, h, config);
    if (sh.truncated)
        throw std::runtime_error("support_comparison: controlled solve for h stopped early (" +
                                 sh.stop_reason + ")");

    const std::size_t nlevels = levels.size();
    const int m = mesh.steps;
    SupportReport report;
    report.levels = levels;
    report.samples = samples;
    report.distances.assign(nlevels, std::vector<double>(static_cast<std::size_t>(samples)));
    report.shifted_distances.assign(nlevels,
                                    std::vector<double>(static_cast<std::size_t>(samples)));

    parallel_for(samples, threads, [&](int s) {
        const BrownianDriver d =
            sample_driver(mesh, channels, seed, static_cast<std::uint32_t>(s));
        const Trajectory x = solve_spde(problem, d, config);
        if (x.truncated)
            throw std::runtime_error("support_comparison: sample " + std::to_string(s) +
                                     " stopped early (" + x.stop_reason + ")");
        for (std::size_t li = 0; li < nlevels; ++li) {
            const AdaptedInterpolation interp = interpolate_adapted(d, levels[li]);
            CameronMartinControl adapted;
            adapted.mesh = mesh;
            adapted.channels = channels;
            adapted.hdot = interp.slopes;  // same flat [step][channel] layout
            const Trajectory sn = solve_controlled(problem, adapted, config);
            if (sn.truncated)
                throw std::runtime_error("support_comparison: controlled solve for sample " +
                                         std::to_string(s) + " stopped early (" + sn.stop_reason +
                                         ")");
            report.distances[li][static_cast<std::size_t>(s)] =
                support_distance(problem.criticality, sn.series, x.series);

            // shifted driver beta^n - beta + h, increments first, paths by cumsum
            BrownianDriver shifted;
            shifted.mesh = mesh;
            shifted.channels = channels;
            shifted.seed = d.seed;
            shifted.sample = d.sample;
            shifted.increments.assign(static_cast<std::size_t>(m) * channels, 0.0);
            for (int j = 0; j < m; ++j) {
                for (int k = 0; k < channels; ++k) {
                    shifted.increments[static_cast<std::size_t>(j) * channels + k] =
                        interp.slope(j, k) * mesh.dt - d.increment(j, k) +
                        h.hdot_at(j, k) * mesh.dt;
                }
            }
            shifted.paths.assign(static_cast<std::size_t>(m + 1) * channels, 0.0);
            for (int j = 0; j < m; ++j) {
                for (int k = 0; k < channels; ++k) {
                    shifted.paths[static_cast<std::size_t>(j + 1) * channels + k] =
                        shifted.paths[static_cast<std::size_t>(j) * channels + k] +
                        shifted.increments[static_cast<std::size_t>(j) * channels + k];
                }
            }
            const Trajectory xs = solve_spde(problem, shifted, config);
            if (xs.truncated)
                throw std::runtime_error("support_comparison: shifted solve for sample " +
                                         std::to_string(s) + " stopped early (" + xs.stop_reason +
                                         ")");
            report.shifted_distances[li][static_cast<std::size_t>(s)] =
                support_distance(problem.criticality, xs.series, sh.series);
        }
    });

    report.mean.resize(nlevels);
    report.se.resize(nlevels);
    report.shifted_mean.resize(nlevels);
    report.shifted_se.resize(nlevels);
    for (std::size_t li = 0; li < nlevels; ++li) {
        mean_and_se(report.distances[li], report.mean[li], report.se[li]);
        mean_and_se(report.shifted_distances[li], report.shifted_mean[li], report.shifted_se[li]);
    }

    std::vector<std::vector<double>> g_tables(static_cast<std::size_t>(channels));
    for (int k = 0; k < channels; ++k) {
        g_tables[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(m) + 1);
        for (int j = 0; j <= m; ++j)
            g_tables[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = noise.g_at(k, j);
    }
    report.interpolation = interpolation_convergence(g_tables, mesh, levels, seed, samples, threads);
    return report;
}

}  // namespace snls

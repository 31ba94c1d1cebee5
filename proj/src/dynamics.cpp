#include "snls/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snls/kernels.hpp"
#include "snls/norms.hpp"
#include "snls/observables.hpp"
#include "snls/spectral.hpp"

namespace snls {

// =============================================================================
// problem / config validation
// =============================================================================

double ProblemSpec::alpha() const {
    const int d = initial.grid.dim;
    if (criticality == Criticality::mass) return 1.0 + 4.0 / d;
    return 1.0 + 4.0 / (d - 2);  // validate() enforces d >= 3 first
}

void ProblemSpec::validate() const {
    initial.grid.validate();
    if (initial.values.size() != initial.grid.size())
        throw std::invalid_argument("ProblemSpec: initial data does not match its grid");
    if (lambda != -1 && lambda != 1)
        throw std::domain_error("ProblemSpec: lambda must be -1 (defocusing) or +1 (focusing)");
    if (criticality == Criticality::energy && initial.grid.dim < 3)
        throw std::domain_error(
            "ProblemSpec: energy criticality needs dimension >= 3 (alpha = 1 + 4/(d-2))");
    if (noise) require_same_grid(noise->grid(), initial.grid, "ProblemSpec");
}

void SolverConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::domain_error("SolverConfig: dt must be positive and finite");
    if (store_stride < 1) throw std::domain_error("SolverConfig: store_stride must be >= 1");
    if (dealias < -1 || dealias > 1)
        throw std::domain_error("SolverConfig: dealias must be -1 (auto), 0 or 1");
    if (!(blowup_factor > 0.0))
        throw std::domain_error("SolverConfig: blowup_factor must be positive");
    if (horizon < 0.0 || !std::isfinite(horizon))
        throw std::domain_error("SolverConfig: horizon must be nonnegative and finite");
}

// =============================================================================
// shared pieces
// =============================================================================

namespace {

double cell_volume(const TorusGrid& g) {
    double v = 1.0;
    for (int a = 0; a < g.dim; ++a) v *= g.h();
    return v;
}

// e^{i t |xi|^2} symbol with the inverse-transform normalization 1/n^d folded
// in, and optionally the 2/3 dealias mask.  Both the Ito solvers and the
// rescaled-equation stepper build their linear steps from this one function,
// so zero-noise cross-solver comparisons see identical multiplier tables.
std::vector<cplx> fused_propagator(const TorusGrid& grid, double t, bool dealias_on) {
    const double inv_n = 1.0 / static_cast<double>(grid.size());
    std::vector<cplx> sym(grid.size());
    for_each_mode(grid, [&](std::size_t i, const double*, double k2) {
        const double th = t * k2;
        sym[i] = cplx(std::cos(th) * inv_n, std::sin(th) * inv_n);
    });
    if (dealias_on) {
        const SpectralMultiplier mask = dealias_multiplier(grid);
        for (std::size_t i = 0; i < sym.size(); ++i) {
            if (mask.symbol[i] == cplx(0.0, 0.0)) sym[i] = cplx(0.0, 0.0);
        }
    }
    return sym;
}

// state <- idft(sym * dft(state)); sym carries the 1/n^d normalization
void apply_symbol(const TorusGrid& grid, std::vector<cplx>& state, const std::vector<cplx>& sym,
                  std::vector<cplx>& spec) {
    dft_raw(grid, state.data(), spec.data(), -1);
    kern::cmul(spec.data(), sym.data(), spec.data(), spec.size());
    dft_raw(grid, spec.data(), state.data(), +1);
}

// |f|^{alpha-1} specializations: the two critical families on supported grids
// hit alpha = 5 (d=1 mass, d=3 energy) and alpha = 3 (d=2 mass); d=3 mass
// needs the general fractional power.
enum class PowKind { square, quartic, general };

PowKind pow_kind_for(double alpha) {
    if (alpha == 5.0) return PowKind::quartic;
    if (alpha == 3.0) return PowKind::square;
    return PowKind::general;
}

// pointwise f e^{-i lambda w |f|^{alpha-1} dt}; rate = -lambda dt, weight may
// be null (w == 1)
void rotate_nonlinear(std::vector<cplx>& state, double rate, PowKind pk, double half_exp,
                      const double* weight) {
    const std::size_t n = state.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double a2 = std::norm(state[i]);
        double r;
        switch (pk) {
            case PowKind::square: r = a2; break;
            case PowKind::quartic: r = a2 * a2; break;
            default: r = std::pow(a2, half_exp);
        }
        if (weight) r *= weight[i];
        const double th = rate * r;
        state[i] *= cplx(std::cos(th), std::sin(th));
    }
}

// e <- sum_k g_k(t_j) scale_k phi_k - dt mu_hat(t_j); returns true when the
// result is exactly zero everywhere, so callers can skip the multiplication
// and a zero-noise run performs the same arithmetic as a driverless one
bool build_noise_exponent(const NoiseModel& noise, int j, const double* scale, double dt,
                          std::vector<cplx>& e) {
    std::fill(e.begin(), e.end(), cplx(0.0, 0.0));
    for (int k = 0; k < noise.channels(); ++k) {
        const double w = noise.g_at(k, j) * scale[k];
        if (w == 0.0) continue;
        kern::axpy(e.data(), noise.profiles[k].phi.values.data(), cplx(w, 0.0), e.size());
    }
    if (!noise.conservative) {
        const ComplexField mu_hat = noise.mu_hat_at(j);
        kern::axpy(e.data(), mu_hat.values.data(), cplx(-dt, 0.0), e.size());
    }
    return kern::sup_abs2(e.data(), e.size()) == 0.0;
}

double exponent_sup_re(const std::vector<cplx>& e) {
    double m = 0.0;
    for (const cplx& v : e) m = std::max(m, std::abs(v.real()));
    return m;
}

void apply_exponent(std::vector<cplx>& state, const std::vector<cplx>& e) {
    for (std::size_t i = 0; i < state.size(); ++i) state[i] *= std::exp(e[i]);
}

// per-step snapshot/mass bookkeeping and the two stop sentinels
struct Recorder {
    Trajectory* traj;
    const TorusGrid* grid;
    double hd;
    double ceiling;
    int stride;
    int total_steps;
    int last_stored_step = -1;

    void store(int step, double t, const std::vector<cplx>& state) {
        if (step == last_stored_step) return;
        traj->series.times.push_back(t);
        traj->series.fields.emplace_back(*grid, state);
        last_stored_step = step;
    }

    // called after completing step j (state now at t_{j+1}); false = stop
    bool after_step(int j, double t_prev, double t_next, const std::vector<cplx>& prev,
                    const std::vector<cplx>& state) {
        const double m = hd * kern::abs2_sum(state.data(), state.size());
        if (!std::isfinite(m)) {
            traj->truncated = true;
            traj->stop_step = j;
            traj->stop_reason = "non-finite state detected";
            store(j, t_prev, prev);  // last finite state
            return false;
        }
        traj->mass_record.push_back(m);
        const double sup = std::sqrt(kern::sup_abs2(state.data(), state.size()));
        if (sup > ceiling) {
            traj->truncated = true;
            traj->stop_step = j + 1;
            traj->stop_reason = "amplitude exceeded the blow-up ceiling";
            store(j + 1, t_next, state);
            return false;
        }
        if ((j + 1) % stride == 0 || j + 1 == total_steps) store(j + 1, t_next, state);
        return true;
    }
};

// =============================================================================
// the Ito split-step engine (SPDE / controlled / deterministic share it, so
// the zero-noise collapse is a property of one code path, not three)
// =============================================================================

Trajectory run_ito_split(const ProblemSpec& problem, const SolverConfig& config,
                         const TimeMesh& mesh, const NoiseModel* noise,
                         const BrownianDriver* driver, const CameronMartinControl* control) {
    const TorusGrid& grid = problem.grid();
    const std::size_t n = grid.size();
    const double dt = mesh.dt;
    const double alpha = problem.alpha();
    const bool dealias_on = config.dealias_resolved(alpha);

    Trajectory traj;
    traj.problem = problem;
    traj.config = config;
    traj.config.dt = dt;
    traj.config.dealias = dealias_on ? 1 : 0;
    if (driver) {
        traj.seed = driver->seed;
        traj.sample = driver->sample;
    }

    std::vector<cplx> state = problem.initial.values;
    std::vector<cplx> spec(n), prev(n), expo;
    std::vector<double> scale;
    if (noise) {
        expo.resize(n);
        scale.resize(noise->channels());
    }

    std::vector<cplx> mult_full, mult_half;
    if (config.scheme == Scheme::lie) {
        mult_full = fused_propagator(grid, dt, dealias_on);
    } else {
        mult_half = fused_propagator(grid, 0.5 * dt, dealias_on);
    }
    if (dealias_on) {
        // mask the initial state once so the recorded initial mass is the mass
        // of what the scheme actually propagates
        const std::vector<cplx> mask = fused_propagator(grid, 0.0, true);
        apply_symbol(grid, state, mask, spec);
    }

    const double hd = cell_volume(grid);
    const double sup0 = std::sqrt(kern::sup_abs2(state.data(), n));
    Recorder rec{&traj,  &grid, hd, config.blowup_factor * sup0, config.store_stride,
                 mesh.steps};

    traj.mass_record.reserve(static_cast<std::size_t>(mesh.steps) + 1);
    traj.mass_record.push_back(hd * kern::abs2_sum(state.data(), n));
    rec.store(0, mesh.time(0), state);

    const double rate = -static_cast<double>(problem.lambda) * dt;
    const PowKind pk = pow_kind_for(alpha);
    const double half_exp = 0.5 * (alpha - 1.0);

    for (int j = 0; j < mesh.steps; ++j) {
        prev = state;
        if (config.scheme == Scheme::strang) apply_symbol(grid, state, mult_half, spec);
        if (noise) {
            for (int k = 0; k < noise->channels(); ++k)
                scale[k] = driver ? driver->increment(j, k) : control->hdot_at(j, k) * dt;
            if (!build_noise_exponent(*noise, j, scale.data(), dt, expo)) {
                const double max_re = exponent_sup_re(expo);
                if (max_re > 700.0) {
                    traj.truncated = true;
                    traj.stop_step = j;
                    traj.stop_reason = "noise exponent real part " + std::to_string(max_re) +
                                       " would overflow exp";
                    rec.store(j, mesh.time(j), prev);
                    break;
                }
                apply_exponent(state, expo);
            }
        }
        if (!config.linear_only) rotate_nonlinear(state, rate, pk, half_exp, nullptr);
        apply_symbol(grid, state, config.scheme == Scheme::strang ? mult_half : mult_full, spec);
        if (!rec.after_step(j, mesh.time(j), mesh.time(j + 1), prev, state)) break;
    }
    if (!traj.truncated) traj.stop_step = mesh.steps;
    return traj;
}

// interaction-picture RK4 for i dv/dt = (Lap + b.grad + c) v over a fixed tau
struct PerturbedStepper {
    const TorusGrid grid;
    std::size_t n;
    double tau;
    double inv_n;
    std::vector<cplx> prop_h, prop_h_inv, prop_f, prop_f_inv;  // e^{+-i s |xi|^2}
    std::vector<cplx> grad_sym[3];                             // i xi_a
    std::vector<cplx> final_sym;  // e^{i tau |xi|^2} (x mask) / n^d
    std::vector<cplx> W, u, ga, acc, tmp, k1, k2, k3, k4, ws, spec;

    PerturbedStepper(const TorusGrid& g, double tau_, bool dealias_on)
        : grid(g), n(g.size()), tau(tau_), inv_n(1.0 / static_cast<double>(g.size())) {
        auto prop = [&](double s) {
            std::vector<cplx> p(n);
            for_each_mode(grid, [&](std::size_t i, const double*, double k2) {
                p[i] = cplx(std::cos(s * k2), std::sin(s * k2));
            });
            return p;
        };
        prop_h = prop(0.5 * tau);
        prop_h_inv = prop(-0.5 * tau);
        prop_f = prop(tau);
        prop_f_inv = prop(-tau);
        for (int a = 0; a < grid.dim; ++a) {
            grad_sym[a] = gradient_multiplier(grid, a).symbol;
        }
        final_sym = fused_propagator(grid, tau, dealias_on);
        W.resize(n);
        u.resize(n);
        ga.resize(n);
        acc.resize(n);
        tmp.resize(n);
        k1.resize(n);
        k2.resize(n);
        k3.resize(n);
        k4.resize(n);
        ws.resize(n);
        spec.resize(n);
    }

    // out <- -i U(-s) P U(s) w with P = b.grad + c and U the free flow; the
    // stage propagators may be null for s = 0
    void stage(const std::vector<cplx>& w_in, const std::vector<cplx>* p,
               const std::vector<cplx>* p_inv, const std::vector<ComplexField>& b,
               const ComplexField& c, std::vector<cplx>& out) {
        dft_raw(grid, w_in.data(), W.data(), -1);
        if (p) kern::cmul(W.data(), p->data(), W.data(), n);
        // u = U(s) w in physical space
        dft_raw(grid, W.data(), u.data(), +1);
        kern::scal(u.data(), cplx(inv_n, 0.0), n);
        // acc = c u + sum_a b_a d_a u
        kern::cmul(c.values.data(), u.data(), acc.data(), n);
        for (int a = 0; a < grid.dim; ++a) {
            kern::cmul(W.data(), grad_sym[a].data(), tmp.data(), n);
            dft_raw(grid, tmp.data(), ga.data(), +1);
            kern::scal(ga.data(), cplx(inv_n, 0.0), n);
            kern::cmul(b[a].values.data(), ga.data(), ga.data(), n);
            kern::axpy(acc.data(), ga.data(), cplx(1.0, 0.0), n);
        }
        // back to the interaction picture, times -i (and the idft norm)
        dft_raw(grid, acc.data(), W.data(), -1);
        if (p_inv) kern::cmul(W.data(), p_inv->data(), W.data(), n);
        kern::scal(W.data(), cplx(0.0, -inv_n), n);
        dft_raw(grid, W.data(), out.data(), +1);
    }

    void advance(std::vector<cplx>& y, const std::vector<ComplexField>& b,
                 const ComplexField& c) {
        stage(y, nullptr, nullptr, b, c, k1);
        ws = y;
        kern::axpy(ws.data(), k1.data(), cplx(0.5 * tau, 0.0), n);
        stage(ws, &prop_h, &prop_h_inv, b, c, k2);
        ws = y;
        kern::axpy(ws.data(), k2.data(), cplx(0.5 * tau, 0.0), n);
        stage(ws, &prop_h, &prop_h_inv, b, c, k3);
        ws = y;
        kern::axpy(ws.data(), k3.data(), cplx(tau, 0.0), n);
        stage(ws, &prop_f, &prop_f_inv, b, c, k4);
        kern::axpy(y.data(), k1.data(), cplx(tau / 6.0, 0.0), n);
        kern::axpy(y.data(), k2.data(), cplx(tau / 3.0, 0.0), n);
        kern::axpy(y.data(), k3.data(), cplx(tau / 3.0, 0.0), n);
        kern::axpy(y.data(), k4.data(), cplx(tau / 6.0, 0.0), n);
        apply_symbol(grid, y, final_sym, spec);
    }
};

}  // namespace

// =============================================================================
// exact substeps
// =============================================================================

ComplexField substep_linear(const ComplexField& f, double dt) { return free_evolve(f, dt, +1); }

ComplexField substep_nonlinear(const ComplexField& f, double dt, int lambda, double alpha) {
    if (lambda != -1 && lambda != 1)
        throw std::invalid_argument("substep_nonlinear: lambda must be -1 or +1");
    ComplexField out = f;
    if (dt == 0.0) return out;
    rotate_nonlinear(out.values, -static_cast<double>(lambda) * dt, pow_kind_for(alpha),
                     0.5 * (alpha - 1.0), nullptr);
    return out;
}

ComplexField substep_noise(const ComplexField& f, const NoiseModel& noise,
                           const BrownianDriver& driver, int step) {
    noise.validate();
    driver.validate();
    if (!(noise.mesh == driver.mesh))
        throw std::invalid_argument("substep_noise: noise tables and driver use different meshes");
    if (driver.channels != noise.channels())
        throw std::invalid_argument("substep_noise: channel count mismatch");
    require_same_grid(f.grid, noise.grid(), "substep_noise");
    if (step < 0 || step >= driver.mesh.steps)
        throw std::invalid_argument("substep_noise: step outside the driver mesh");

    std::vector<cplx> e(f.size());
    std::vector<double> scale(noise.channels());
    for (int k = 0; k < noise.channels(); ++k) scale[k] = driver.increment(step, k);
    ComplexField out = f;
    if (!build_noise_exponent(noise, step, scale.data(), driver.mesh.dt, e)) {
        const double max_re = exponent_sup_re(e);
        if (max_re > 700.0)
            throw std::overflow_error("substep_noise: exponent real part " +
                                      std::to_string(max_re) + " would overflow exp");
        apply_exponent(out.values, e);
    }
    return out;
}

ComplexField perturbed_linear_step(const ComplexField& f, const std::vector<ComplexField>& b,
                                   const ComplexField& c, double tau) {
    if (static_cast<int>(b.size()) != f.grid.dim)
        throw std::invalid_argument("perturbed_linear_step: need one b component per axis");
    for (const ComplexField& ba : b) require_same_grid(ba.grid, f.grid, "perturbed_linear_step");
    require_same_grid(c.grid, f.grid, "perturbed_linear_step");
    if (!std::isfinite(tau)) throw std::domain_error("perturbed_linear_step: tau must be finite");

    PerturbedStepper stepper(f.grid, tau, /*dealias_on=*/false);
    ComplexField out = f;
    stepper.advance(out.values, b, c);
    return out;
}

// =============================================================================
// full solvers
// =============================================================================

Trajectory solve_spde(const ProblemSpec& problem, const BrownianDriver& driver,
                      const SolverConfig& config) {
    problem.validate();
    config.validate();
    if (!problem.noise) throw std::invalid_argument("solve_spde: problem carries no noise model");
    driver.validate();
    const NoiseModel& noise = *problem.noise;
    noise.validate();
    if (!(noise.mesh == driver.mesh))
        throw std::invalid_argument("solve_spde: noise tables and driver use different meshes");
    if (driver.channels != noise.channels())
        throw std::invalid_argument("solve_spde: channel count mismatch");

    const double delta = driver.mesh.dt;
    const long long m = std::llround(config.dt / delta);
    if (m < 1 || std::abs(m * delta - config.dt) > 1e-9 * config.dt)
        throw std::domain_error(
            "solve_spde: dt must equal the driver spacing or a whole multiple of it");
    if (m == 1) return run_ito_split(problem, config, driver.mesh, &noise, &driver, nullptr);

    // one Brownian path at a coarser step: sum the fine increments (and take
    // every m-th amplitude sample) so refinement studies stay on one path
    const BrownianDriver coarse = coarsen_driver(driver, static_cast<int>(m));
    auto noise_c = std::make_shared<NoiseModel>(coarsen_noise_model(noise, static_cast<int>(m)));
    ProblemSpec p = problem;
    p.noise = noise_c;
    return run_ito_split(p, config, coarse.mesh, noise_c.get(), &coarse, nullptr);
}

Trajectory solve_controlled(const ProblemSpec& problem, const CameronMartinControl& control,
                            const SolverConfig& config) {
    problem.validate();
    config.validate();
    if (!problem.noise)
        throw std::invalid_argument("solve_controlled: problem carries no noise model");
    control.validate();
    const NoiseModel& noise = *problem.noise;
    noise.validate();
    if (!(noise.mesh == control.mesh))
        throw std::invalid_argument(
            "solve_controlled: noise tables and control use different meshes");
    if (control.channels != noise.channels())
        throw std::invalid_argument("solve_controlled: channel count mismatch");
    if (std::abs(config.dt - control.mesh.dt) > 1e-9 * config.dt)
        throw std::domain_error("solve_controlled: dt must match the control mesh spacing");
    return run_ito_split(problem, config, control.mesh, &noise, nullptr, &control);
}

Trajectory solve_deterministic(const ProblemSpec& problem, const SolverConfig& config) {
    problem.validate();
    config.validate();
    if (!(config.horizon > 0.0))
        throw std::domain_error("solve_deterministic: config.horizon must be positive");
    const long long steps = std::llround(config.horizon / config.dt);
    if (steps < 1 || std::abs(steps * config.dt - config.horizon) > 1e-9 * config.dt)
        throw std::domain_error(
            "solve_deterministic: horizon must be a whole number of dt steps");
    const TimeMesh mesh{0.0, config.dt, static_cast<int>(steps)};
    Trajectory traj = run_ito_split(problem, config, mesh, nullptr, nullptr, nullptr);
    // expose the Hamiltonian drift at the stored snapshots
    traj.energy_record.reserve(traj.series.size());
    for (const ComplexField& f : traj.series.fields)
        traj.energy_record.push_back(hamiltonian(f, problem.lambda, problem.alpha()));
    return traj;
}

Trajectory solve_random_pde(const ProblemSpec& problem, const PhasePath& phase,
                            const LowerOrderCoeffs& coeffs, const SolverConfig& config) {
    problem.validate();
    config.validate();
    if (phase.kind != PhaseKind::forward)
        throw std::invalid_argument("solve_random_pde: needs a forward phase window");
    phase.phase.validate();
    if (phase.phase.size() < 2)
        throw std::domain_error("solve_random_pde: phase window has no steps");
    require_same_grid(phase.phase.grid(), problem.grid(), "solve_random_pde");
    const int steps = static_cast<int>(phase.phase.size()) - 1;
    const double dt = phase.mesh.dt;
    if (std::abs(config.dt - dt) > 1e-9 * dt)
        throw std::domain_error("solve_random_pde: dt must match the phase mesh spacing");
    if (coeffs.times.size() != phase.phase.times.size() ||
        coeffs.b.size() != phase.phase.times.size() || coeffs.c.size() != phase.phase.times.size())
        throw std::invalid_argument(
            "solve_random_pde: coefficient table does not match the phase window");

    const TorusGrid& grid = problem.grid();
    const std::size_t n = grid.size();
    const double alpha = problem.alpha();
    const bool dealias_on = config.dealias_resolved(alpha);

    // transport stability guard, checked before any stepping
    double bmax2 = 0.0;
    for (const auto& bt : coeffs.b)
        for (const ComplexField& ba : bt)
            bmax2 = std::max(bmax2, kern::sup_abs2(ba.values.data(), ba.size()));
    const double cfl = std::sqrt(bmax2) * dt / grid.h();
    if (cfl > 0.5)
        throw std::invalid_argument("solve_random_pde: max|b| dt / h = " + std::to_string(cfl) +
                                    " exceeds 0.5; reduce dt or refine the grid");

    Trajectory traj;
    traj.problem = problem;
    traj.config = config;
    traj.config.dt = dt;
    traj.config.dealias = dealias_on ? 1 : 0;

    std::vector<cplx> state = problem.initial.values;
    std::vector<cplx> spec(n), prev(n);
    std::vector<double> weight(n);

    const double step_tau = config.scheme == Scheme::strang ? 0.5 * dt : dt;
    PerturbedStepper stepper(grid, step_tau, dealias_on);
    if (dealias_on) {
        const std::vector<cplx> mask = fused_propagator(grid, 0.0, true);
        apply_symbol(grid, state, mask, spec);
    }

    const double hd = cell_volume(grid);
    const double sup0 = std::sqrt(kern::sup_abs2(state.data(), n));
    Recorder rec{&traj,  &grid, hd, config.blowup_factor * sup0, config.store_stride,
                 steps};

    traj.mass_record.reserve(static_cast<std::size_t>(steps) + 1);
    traj.mass_record.push_back(hd * kern::abs2_sum(state.data(), n));
    rec.store(0, phase.phase.times[0], state);

    const double rate = -static_cast<double>(problem.lambda) * dt;
    const PowKind pk = pow_kind_for(alpha);
    const double half_exp = 0.5 * (alpha - 1.0);
    const double wexp = alpha - 1.0;

    for (int j = 0; j < steps; ++j) {
        prev = state;
        const std::vector<ComplexField>& bj = coeffs.b[j];
        const ComplexField& cj = coeffs.c[j];
        if (config.scheme == Scheme::strang) stepper.advance(state, bj, cj);
        if (!config.linear_only) {
            // nonlinear weight e^{(alpha-1) Re phi} frozen at the left endpoint
            const ComplexField& phi = phase.phase.fields[j];
            for (std::size_t i = 0; i < n; ++i)
                weight[i] = std::exp(wexp * phi.values[i].real());
            rotate_nonlinear(state, rate, pk, half_exp, weight.data());
        }
        stepper.advance(state, bj, cj);
        if (!rec.after_step(j, phase.phase.times[j], phase.phase.times[j + 1], prev, state))
            break;
    }
    if (!traj.truncated) traj.stop_step = steps;
    return traj;
}

// =============================================================================
// gauge equivalence report
// =============================================================================

EquivalenceReport rescaling_equivalence(const ProblemSpec& problem, const BrownianDriver& driver,
                                        int sigma_index, const SolverConfig& config) {
    problem.validate();
    config.validate();
    if (!problem.noise)
        throw std::invalid_argument("rescaling_equivalence: problem carries no noise model");
    driver.validate();

    const double x0_norm = lp_norm(problem.initial, 2.0);
    if (!(x0_norm > 0.0))
        throw std::domain_error("rescaling_equivalence: initial data must be nonzero");

    EquivalenceReport report;
    for (int level = 0; level < 3; ++level) {
        const double dt_l = config.dt / static_cast<double>(1 << level);
        const long long m = std::llround(dt_l / driver.mesh.dt);
        if (m < 1 || std::abs(m * driver.mesh.dt - dt_l) > 1e-9 * dt_l)
            throw std::domain_error(
                "rescaling_equivalence: driver too coarse for the dt/4 refinement level");

        const BrownianDriver drv =
            m == 1 ? driver : coarsen_driver(driver, static_cast<int>(m));
        auto noise_l = std::make_shared<NoiseModel>(
            coarsen_noise_model(*problem.noise, static_cast<int>(m)));
        const int sigma_l = sigma_index * (1 << level);
        if (sigma_l < 0 || sigma_l >= drv.mesh.steps)
            throw std::invalid_argument(
                "rescaling_equivalence: sigma index leaves no steps to compare");

        SolverConfig cfg = config;
        cfg.dt = dt_l;
        cfg.store_stride = 1;
        ProblemSpec ps = problem;
        ps.noise = noise_l;

        const Trajectory x_run = solve_spde(ps, drv, cfg);
        if (x_run.truncated)
            throw std::runtime_error("rescaling_equivalence: SPDE run stopped early: " +
                                     x_run.stop_reason);

        const PhasePath phase = forward_phase(*noise_l, drv, sigma_l);
        const LowerOrderCoeffs coeffs = coeffs_from_phase(phase);
        ProblemSpec pv = ps;
        pv.initial = x_run.series.fields[sigma_l];
        const Trajectory v_run = solve_random_pde(pv, phase, coeffs, cfg);
        if (v_run.truncated)
            throw std::runtime_error("rescaling_equivalence: rescaled run stopped early: " +
                                     v_run.stop_reason);

        double dev = 0.0;
        for (std::size_t j = 0; j < v_run.series.size(); ++j) {
            ComplexField back = gauge(v_run.series.fields[j], phase.phase.fields[j], +1);
            const ComplexField& ref = x_run.series.fields[sigma_l + j];
            for (std::size_t i = 0; i < back.values.size(); ++i) back.values[i] -= ref.values[i];
            dev = std::max(dev, lp_norm(back, 2.0));
        }
        report.dts.push_back(dt_l);
        report.deviations.push_back(dev / x0_norm);
    }
    report.deviation = report.deviations.back();
    const double dev_max =
        *std::max_element(report.deviations.begin(), report.deviations.end());
    // a degenerate (already exact) comparison has no meaningful slope
    report.order = dev_max < 1e-13 ? 0.0 : fit_log2_slope(report.dts, report.deviations);
    return report;
}

}  // namespace snls

// Split-step solvers built from three exact substeps (free flow, pointwise
// nonlinear rotation, pointwise noise factor), the controlled and deterministic
// reductions that share the same engine, the frozen-coefficient solver for the
// rescaled equation, and the trajectory-level equivalence study between the two
// formulations.  Oracles: scalar closed forms (plane waves, flat noise
// profiles), bitwise collapse identities, and dt-refinement slopes measured on
// seeded runs.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "snls/brownian.hpp"
#include "snls/dynamics.hpp"
#include "snls/noise_model.hpp"
#include "snls/norms.hpp"
#include "snls/rescaling.hpp"
#include "snls/spectral.hpp"

using namespace snls;

namespace {

// width chosen so the data is glass-smooth on a 128-point box of side 10
const double kWidth = 1.5 / std::sqrt(2.0);

// one centered bump channel with a constant amplitude table
NoiseModel one_bump_model(const TorusGrid& g, const TimeMesh& mesh, cplx amp, bool conservative,
                          double gval, double radius = 3.0) {
    const double c0[3] = {0.0, 0.0, 0.0};
    std::vector<NoiseProfile> prof;
    prof.push_back(make_bump_profile(g, c0, radius, amp, conservative));
    std::vector<std::vector<double>> tables(1, std::vector<double>(mesh.steps + 1, gval));
    return make_noise_model(mesh, std::move(prof), std::move(tables));
}

// two off-center bumps (non-conservative) for the Monte Carlo checks
NoiseModel two_bump_model(const TorusGrid& g, const TimeMesh& mesh, double gval) {
    const double c0[3] = {-1.5, 0.0, 0.0}, c1[3] = {1.8, 0.0, 0.0};
    std::vector<NoiseProfile> prof;
    prof.push_back(make_bump_profile(g, c0, 2.0, cplx(0.3, 0.4), false));
    prof.push_back(make_bump_profile(g, c1, 2.0, cplx(-0.25, 0.35), false));
    std::vector<std::vector<double>> tables(2, std::vector<double>(mesh.steps + 1, gval));
    return make_noise_model(mesh, std::move(prof), std::move(tables));
}

// a flat (constant-in-x) profile with exactly zero derivatives: the noise
// substep then acts as one scalar factor and has a closed form
NoiseModel flat_model(const TorusGrid& g, const TimeMesh& mesh, cplx level, double gval) {
    NoiseProfile prof;
    prof.phi = ComplexField(g);
    for (cplx& v : prof.phi.values) v = level;
    for (int a = 0; a < g.dim; ++a) prof.grad.push_back(ComplexField(g));
    prof.lap = ComplexField(g);
    prof.conservative = (level.real() == 0.0);
    NoiseModel m;
    m.mesh = mesh;
    m.profiles.push_back(std::move(prof));
    m.g.assign(1, std::vector<double>(mesh.steps + 1, gval));
    m.conservative = m.profiles[0].conservative;
    m.validate();
    return m;
}

ProblemSpec mass_problem(const TorusGrid& g) {
    ProblemSpec p;
    p.criticality = Criticality::mass;
    p.initial = testing::gaussian(g, kWidth, 0.5);
    return p;
}

CameronMartinControl zero_control(const TimeMesh& mesh, int channels) {
    CameronMartinControl c;
    c.mesh = mesh;
    c.channels = channels;
    c.hdot.assign(static_cast<std::size_t>(mesh.steps) * channels, 0.0);
    return c;
}

bool bitwise_equal(const ComplexField& a, const ComplexField& b) {
    return a.values.size() == b.values.size() &&
           std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(cplx)) == 0;
}

bool bitwise_equal(const Trajectory& a, const Trajectory& b) {
    if (a.series.fields.size() != b.series.fields.size()) return false;
    if (a.mass_record != b.mass_record) return false;
    for (std::size_t i = 0; i < a.series.fields.size(); ++i) {
        if (!bitwise_equal(a.series.fields[i], b.series.fields[i])) return false;
    }
    return true;
}

double sup_diff(const ComplexField& a, const ComplexField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

double mass_span(const Trajectory& t) {
    double dev = 0.0;
    for (double m : t.mass_record)
        dev = std::max(dev, std::abs(m - t.mass_record[0]) / t.mass_record[0]);
    return dev;
}

}  // namespace

TEST_CASE("problem and solver configuration validation") {
    const TorusGrid g(1, 32, 10.0);
    ProblemSpec p = mass_problem(g);
    CHECK(p.alpha() == doctest::Approx(5.0));
    p.validate();

    const TorusGrid g2(2, 8, 10.0);
    ProblemSpec p2;
    p2.initial = ComplexField(g2);
    CHECK(p2.alpha() == doctest::Approx(3.0));
    ProblemSpec p3;
    p3.initial = ComplexField(TorusGrid(3, 8, 10.0));
    CHECK(p3.alpha() == doctest::Approx(1.0 + 4.0 / 3.0));
    p3.criticality = Criticality::energy;
    CHECK(p3.alpha() == doctest::Approx(5.0));

    // energy-critical scaling needs at least three dimensions
    ProblemSpec bad = mass_problem(g);
    bad.criticality = Criticality::energy;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);

    bad = mass_problem(g);
    bad.lambda = 2;
    CHECK_THROWS_AS(bad.validate(), std::domain_error);

    bad = mass_problem(g);
    bad.initial.values.resize(g.size() - 1);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    SolverConfig c;
    c.validate();
    CHECK(c.dealias_resolved(5.0));          // quintic: auto turns the mask on
    CHECK(!c.dealias_resolved(1.0 + 4.0 / 3.0));  // cubic threshold not reached
    c.dealias = 0;
    CHECK(!c.dealias_resolved(5.0));
    c.dealias = 1;
    CHECK(c.dealias_resolved(2.0));

    c = SolverConfig{};
    c.dt = 0.0;
    CHECK_THROWS_AS(c.validate(), std::domain_error);
    c = SolverConfig{};
    c.store_stride = 0;
    CHECK_THROWS_AS(c.validate(), std::domain_error);
    c = SolverConfig{};
    c.dealias = 2;
    CHECK_THROWS_AS(c.validate(), std::domain_error);
    c = SolverConfig{};
    c.blowup_factor = 0.0;
    CHECK_THROWS_AS(c.validate(), std::domain_error);
}

TEST_CASE("nonlinear substep: exact rotation closed forms") {
    const TorusGrid g(1, 64, 10.0);

    // unit-modulus data, defocusing quintic, dt = 0.1: every point turns by the
    // same angle e^{+0.1 i}
    ComplexField f(g);
    for (int j = 0; j < g.n; ++j) {
        const double th = 0.3 * j;
        f.values[j] = cplx(std::cos(th), std::sin(th));
    }
    const ComplexField out = substep_nonlinear(f, 0.1, -1, 5.0);
    const cplx turn(std::cos(0.1), std::sin(0.1));
    for (int j = 0; j < g.n; ++j) CHECK(std::abs(out.values[j] - f.values[j] * turn) <= 1e-14);

    // dt = 0 is the identity, bit for bit
    const ComplexField same = substep_nonlinear(f, 0.0, -1, 5.0);
    CHECK(bitwise_equal(same, f));

    // the rotation never changes the modulus (here on rough random data)
    const ComplexField rough = testing::white_field(g, 321);
    const ComplexField spun = substep_nonlinear(rough, 0.37, -1, 5.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        CHECK(std::abs(std::abs(spun.values[i]) - std::abs(rough.values[i])) <=
              1e-14 * std::abs(rough.values[i]) + 1e-300);

    // two half steps compose to one full step (the flow is exact, so the only
    // slack is the rounding of the recomputed modulus)
    const ComplexField two = substep_nonlinear(substep_nonlinear(rough, 0.05, -1, 5.0), 0.05, -1, 5.0);
    const ComplexField one = substep_nonlinear(rough, 0.1, -1, 5.0);
    CHECK(sup_diff(two, one) <= 1e-13);

    // the non-integer power branch (d = 3 mass-critical) against the pointwise
    // formula evaluated independently
    const TorusGrid g3(3, 8, 10.0);
    const ComplexField r3 = testing::white_field(g3, 77);
    const double alpha = 1.0 + 4.0 / 3.0;
    const ComplexField o3 = substep_nonlinear(r3, 0.2, -1, alpha);
    for (std::size_t i = 0; i < g3.size(); ++i) {
        const double a2 = std::norm(r3.values[i]);
        const double angle = 0.2 * std::pow(a2, 0.5 * (alpha - 1.0));
        const cplx expect = r3.values[i] * cplx(std::cos(angle), std::sin(angle));
        CHECK(std::abs(o3.values[i] - expect) <= 1e-13);
    }

    // focusing flag turns the other way
    const ComplexField foc = substep_nonlinear(f, 0.1, +1, 5.0);
    const cplx turn_back(std::cos(0.1), -std::sin(0.1));
    for (int j = 0; j < g.n; ++j) CHECK(std::abs(foc.values[j] - f.values[j] * turn_back) <= 1e-14);

    CHECK_THROWS_AS(substep_nonlinear(f, 0.1, 0, 5.0), std::invalid_argument);
}

TEST_CASE("noise substep: scalar factor oracle on a flat profile") {
    const TorusGrid g(1, 64, 10.0);
    const TimeMesh mesh{0.0, 1e-2, 20};
    const ComplexField f = testing::gaussian(g, kWidth, 0.5);
    const BrownianDriver drv = sample_driver(mesh, 1, 7, 3);
    const double gval = 0.7;

    // conservative flat level i c: mu_hat = 0 and the factor is the pure phase
    // exp(i c g dbeta), same at every grid point
    {
        const cplx level(0.0, 0.7);
        const NoiseModel m = flat_model(g, mesh, level, gval);
        const int j = 3;
        const ComplexField out = substep_noise(f, m, drv, j);
        const cplx factor = std::exp(gval * level * drv.increment(j, 0));
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(std::abs(out.values[i] - factor * f.values[i]) <= 1e-15);
        CHECK(std::abs(lp_norm(out, 2.0) - lp_norm(f, 2.0)) <= 1e-12 * lp_norm(f, 2.0));
    }

    // non-conservative level: the compensator mu_hat = g^2 (Re c) c joins in
    {
        const cplx level(0.12, 0.3);
        const NoiseModel m = flat_model(g, mesh, level, gval);
        const int j = 5;
        const ComplexField out = substep_noise(f, m, drv, j);
        const cplx mu_hat = gval * gval * level.real() * level;
        const cplx factor = std::exp(gval * level * drv.increment(j, 0) - mu_hat * mesh.dt);
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(std::abs(out.values[i] - factor * f.values[i]) <= 1e-15);
    }

    // silent channel (g == 0) returns the input bit for bit
    {
        const NoiseModel m = flat_model(g, mesh, cplx(0.12, 0.3), 0.0);
        const ComplexField out = substep_noise(f, m, drv, 2);
        CHECK(bitwise_equal(out, f));
    }

    // a deliberately huge increment overflows exp and is refused
    {
        const NoiseModel m = flat_model(g, mesh, cplx(2.0, 0.0), 1.0);
        BrownianDriver big = drv;
        big.increments[4] = 500.0;
        big.paths.clear();
        big.paths.assign(static_cast<std::size_t>(mesh.steps) + 1, 0.0);
        for (int j = 0; j < mesh.steps; ++j) big.paths[j + 1] = big.paths[j] + big.increments[j];
        CHECK_THROWS_AS(substep_noise(f, m, big, 4), std::overflow_error);
    }

    // bookkeeping errors
    const NoiseModel m = flat_model(g, mesh, cplx(0.0, 0.7), gval);
    CHECK_THROWS_AS(substep_noise(f, m, drv, -1), std::invalid_argument);
    CHECK_THROWS_AS(substep_noise(f, m, drv, mesh.steps), std::invalid_argument);
    const BrownianDriver other = sample_driver(TimeMesh{0.0, 1e-2, 21}, 1, 7, 3);
    CHECK_THROWS_AS(substep_noise(f, m, other, 0), std::invalid_argument);
}

TEST_CASE("noise substep: conservative bump preserves mass per step") {
    const TorusGrid g(1, 128, 10.0);
    const TimeMesh mesh{0.0, 1e-2, 10};
    const NoiseModel m = one_bump_model(g, mesh, cplx(0.0, 0.8), true, 1.0);
    const BrownianDriver drv = sample_driver(mesh, 1, 191, 0);
    ComplexField f = testing::band_limited_random(g, 55, 4.0);
    const double m0 = lp_norm(f, 2.0);
    for (int j = 0; j < mesh.steps; ++j) {
        f = substep_noise(f, m, drv, j);
        CHECK(std::abs(lp_norm(f, 2.0) - m0) <= 1e-12 * m0);
    }
}

TEST_CASE("zero-noise collapse: one engine behind the three solvers") {
    const TorusGrid g(1, 128, 10.0);
    const TimeMesh mesh{0.0, 2e-3, 125};
    for (const Scheme sch : {Scheme::lie, Scheme::strang}) {
        CAPTURE(static_cast<int>(sch));
        ProblemSpec p = mass_problem(g);
        p.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(0.0, 0.5), true, 0.0));
        const BrownianDriver drv = sample_driver(mesh, 1, 5, 1);
        SolverConfig cfg;
        cfg.dt = mesh.dt;
        cfg.scheme = sch;
        cfg.store_stride = 25;
        const Trajectory a = solve_spde(p, drv, cfg);

        // the controlled run may carry live amplitudes: with h == 0 and a
        // conservative profile nothing multiplies the state
        ProblemSpec pc = mass_problem(g);
        pc.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(0.0, 0.5), true, 0.8));
        const Trajectory b = solve_controlled(pc, zero_control(mesh, 1), cfg);

        SolverConfig cfgd = cfg;
        cfgd.horizon = mesh.dt * mesh.steps;
        const Trajectory c = solve_deterministic(mass_problem(g), cfgd);

        CHECK(bitwise_equal(a, b));
        CHECK(bitwise_equal(a, c));
        CHECK(a.series.times == c.series.times);
        CHECK(!a.truncated);
        CHECK(a.stop_step == mesh.steps);
        CHECK(a.config.dealias == 1);  // auto resolved on for the quintic
    }
}

TEST_CASE("conservative runs hold mass pathwise") {
    const TorusGrid g(1, 128, 10.0);
    const TimeMesh mesh{0.0, 1e-3, 1000};
    ProblemSpec p = mass_problem(g);
    p.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(0.0, 0.5), true, 0.6));
    const BrownianDriver drv = sample_driver(mesh, 1, 99, 0);

    SolverConfig cfg;
    cfg.dt = 1e-3;
    cfg.store_stride = 100;
    const Trajectory t = solve_spde(p, drv, cfg);
    CHECK(!t.truncated);
    CHECK(t.mass_record.size() == 1001);
    CHECK(mass_span(t) <= 1e-10);  // measured 4.0e-12 with the mask on

    // with the projection off both substeps are exactly modulus-preserving and
    // only rounding is left
    SolverConfig raw = cfg;
    raw.dealias = 0;
    const Trajectory u = solve_spde(p, drv, raw);
    CHECK(mass_span(u) <= 1e-12);  // measured 1.5e-13
    CHECK(u.config.dealias == 0);
}

TEST_CASE("martingale mean mass under non-conservative noise") {
    const TorusGrid g(1, 128, 10.0);
    const TimeMesh mesh{0.0, 2e-3, 100};
    ProblemSpec p = mass_problem(g);
    p.noise = std::make_shared<NoiseModel>(two_bump_model(g, mesh, 1.0));
    SolverConfig cfg;
    cfg.dt = 2e-3;
    cfg.store_stride = 1 << 20;

    const int samples = 200;
    double sum = 0.0, sum2 = 0.0, m0 = 0.0;
    for (int s = 0; s < samples; ++s) {
        const BrownianDriver drv = sample_driver(mesh, 2, 4242, static_cast<std::uint32_t>(s));
        const Trajectory t = solve_spde(p, drv, cfg);
        REQUIRE(!t.truncated);
        m0 = t.mass_record.front();
        sum += t.mass_record.back();
        sum2 += t.mass_record.back() * t.mass_record.back();
    }
    const double mean = sum / samples;
    const double var = (sum2 - samples * mean * mean) / (samples - 1);
    const double se = std::sqrt(var / samples);
    CHECK(se > 0.0);
    // the per-step factor has E|factor|^2 = 1 exactly, so the discrete mean
    // mass is a martingale and the sample mean sits within sampling error
    CHECK(std::abs(mean - m0) <= 3.0 * se);
}

TEST_CASE("controlled equation: h == 0 damps mass monotonically when mu_hat >= 0") {
    const TorusGrid g(1, 64, 10.0);
    const TimeMesh mesh{0.0, 1e-2, 50};
    ProblemSpec p = mass_problem(g);
    // real amplitude: mu_hat = g^2 phi^2 >= 0 pointwise, so exp(-mu_hat dt)
    // shrinks the state wherever the bump lives
    p.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(1.0, 0.0), false, 0.5));
    SolverConfig cfg;
    cfg.dt = mesh.dt;
    const Trajectory t = solve_controlled(p, zero_control(mesh, 1), cfg);
    CHECK(!t.truncated);
    for (std::size_t j = 1; j < t.mass_record.size(); ++j)
        CHECK(t.mass_record[j] <= t.mass_record[j - 1] * (1.0 + 1e-14));
    CHECK(t.mass_record.back() < 0.999 * t.mass_record.front());
}

TEST_CASE("controlled equation matches the SPDE driven by slope-built increments") {
    const TorusGrid g(1, 128, 10.0);
    const TimeMesh mesh{0.0, 1.0 / 256.0, 256};
    ProblemSpec p = mass_problem(g);
    p.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(0.24, 0.32), false, 0.5));
    const BrownianDriver drv = sample_driver(mesh, 1, 11, 2);
    const AdaptedInterpolation interp = interpolate_adapted(drv, 4);

    CameronMartinControl ctrl = zero_control(mesh, 1);
    for (int j = 0; j < mesh.steps; ++j) ctrl.hdot[j] = interp.slope(j, 0);

    // a synthetic driver whose increments are slope * dt: the controlled
    // product h' * dt and the driver product g * dbeta then agree bit for bit
    BrownianDriver synth;
    synth.mesh = mesh;
    synth.channels = 1;
    synth.increments.assign(mesh.steps, 0.0);
    synth.paths.assign(static_cast<std::size_t>(mesh.steps) + 1, 0.0);
    for (int j = 0; j < mesh.steps; ++j) {
        synth.increments[j] = ctrl.hdot[j] * mesh.dt;
        synth.paths[j + 1] = synth.paths[j] + synth.increments[j];
    }
    SolverConfig cfg;
    cfg.dt = mesh.dt;
    cfg.store_stride = 64;
    const Trajectory a = solve_spde(p, synth, cfg);
    const Trajectory b = solve_controlled(p, ctrl, cfg);
    CHECK(bitwise_equal(a, b));

    // control mesh must match the solver spacing
    SolverConfig off = cfg;
    off.dt = 2.0 * mesh.dt;
    CHECK_THROWS_AS(solve_controlled(p, ctrl, off), std::domain_error);
}

TEST_CASE("driver aggregation: a finer driver collapses onto the solver mesh") {
    const TorusGrid g(1, 64, 10.0);
    const TimeMesh fine{0.0, 5e-4, 400};
    ProblemSpec p = mass_problem(g);
    p.noise = std::make_shared<NoiseModel>(one_bump_model(g, fine, cplx(0.0, 0.5), true, 0.7));
    const BrownianDriver drv = sample_driver(fine, 1, 77, 0);

    SolverConfig cfg;
    cfg.dt = 2e-3;  // four fine cells per solver step
    cfg.store_stride = 25;
    const Trajectory a = solve_spde(p, drv, cfg);

    ProblemSpec pc = mass_problem(g);
    pc.noise = std::make_shared<NoiseModel>(coarsen_noise_model(*p.noise, 4));
    const Trajectory b = solve_spde(pc, coarsen_driver(drv, 4), cfg);
    CHECK(bitwise_equal(a, b));
    CHECK(a.seed == drv.seed);
    CHECK(a.mass_record.size() == 101);

    // dt must be an integer multiple of the driver spacing
    SolverConfig bad = cfg;
    bad.dt = 7.5e-4;
    CHECK_THROWS_AS(solve_spde(p, drv, bad), std::domain_error);

    // driver and noise tables must live on the same mesh
    const BrownianDriver other = sample_driver(TimeMesh{0.0, 5e-4, 401}, 1, 77, 0);
    CHECK_THROWS_AS(solve_spde(p, other, cfg), std::invalid_argument);

    // channel counts must agree
    const BrownianDriver wide = sample_driver(fine, 2, 77, 0);
    CHECK_THROWS_AS(solve_spde(p, wide, cfg), std::invalid_argument);

    ProblemSpec hollow = mass_problem(g);
    CHECK_THROWS_AS(solve_spde(hollow, drv, cfg), std::invalid_argument);
}

TEST_CASE("deterministic solver: conservation, Strang order, bookkeeping") {
    const TorusGrid g(1, 256, 10.0);
    ProblemSpec p = mass_problem(g);

    double drift[3];
    int q = 0;
    for (const double dt : {2e-3, 1e-3, 5e-4}) {
        SolverConfig cfg;
        cfg.dt = dt;
        cfg.horizon = 1.0;
        cfg.store_stride = 1 << 20;  // initial and final only
        const Trajectory t = solve_deterministic(p, cfg);
        CHECK(!t.truncated);
        CHECK(mass_span(t) <= 1e-10);  // both substeps preserve the L^2 sum
        REQUIRE(t.energy_record.size() == 2);
        drift[q++] = std::abs(t.energy_record.back() - t.energy_record.front()) /
                     std::abs(t.energy_record.front());
    }
    // Strang splitting: Hamiltonian drift falls by 4 per dt halving
    CHECK(drift[0] / drift[1] == doctest::Approx(4.0).epsilon(0.15));
    CHECK(drift[1] / drift[2] == doctest::Approx(4.0).epsilon(0.15));

    // Lie splitting is first order and visibly worse at the same dt
    SolverConfig lie;
    lie.dt = 1e-3;
    lie.horizon = 1.0;
    lie.scheme = Scheme::lie;
    lie.store_stride = 1 << 20;
    const Trajectory tl = solve_deterministic(p, lie);
    const double lie_drift = std::abs(tl.energy_record.back() - tl.energy_record.front()) /
                             std::abs(tl.energy_record.front());
    CHECK(lie_drift > 100.0 * drift[1]);

    // zero data stays zero
    ProblemSpec silent;
    silent.initial = ComplexField(g);
    SolverConfig cfg;
    cfg.dt = 1e-2;
    cfg.horizon = 0.1;
    const Trajectory tz = solve_deterministic(silent, cfg);
    for (const ComplexField& f : tz.series.fields)
        for (const cplx& v : f.values) CHECK(v == cplx(0.0, 0.0));
    CHECK(tz.mass_record.back() == 0.0);

    // stride bookkeeping: every 7th step plus the endpoints
    SolverConfig st;
    st.dt = 1e-2;
    st.horizon = 1.0;
    st.store_stride = 7;
    const Trajectory ts = solve_deterministic(p, st);
    REQUIRE(ts.series.times.size() == 16);  // 0, 7dt, ..., 98dt, 100dt
    CHECK(ts.series.times[1] == doctest::Approx(0.07));
    CHECK(ts.series.times[14] == doctest::Approx(0.98));
    CHECK(ts.series.times[15] == doctest::Approx(1.0));
    CHECK(ts.mass_record.size() == 101);
    CHECK(ts.energy_record.size() == ts.series.fields.size());

    // horizon must be a positive whole number of steps
    SolverConfig bad;
    bad.dt = 1e-3;
    CHECK_THROWS_AS(solve_deterministic(p, bad), std::domain_error);
    bad.horizon = 0.0007;
    CHECK_THROWS_AS(solve_deterministic(p, bad), std::domain_error);
}

TEST_CASE("perturbed linear step: plane-wave closed form, reversibility, fourth order") {
    const TorusGrid g(1, 64, 2.0 * kPi);
    const int mode[3] = {3, 0, 0};
    const ComplexField f = testing::plane_wave(g, mode);
    const double k0 = 3.0;

    // constant coefficients keep the plane wave an eigenvector, so the flow
    // reduces to the scalar exp((i k0^2 - i c + b k0) tau) and the stage
    // construction reproduces it to rounding
    const cplx beta(0.2, 0.0), gamma(0.5, -0.3);
    std::vector<ComplexField> b(1, ComplexField(g));
    ComplexField c(g);
    for (int j = 0; j < g.n; ++j) {
        b[0].values[j] = beta;
        c.values[j] = gamma;
    }
    const double tau = 1e-3;
    const ComplexField out = perturbed_linear_step(f, b, c, tau);
    const cplx amp = std::exp((cplx(0.0, k0 * k0) - cplx(0.0, 1.0) * gamma + beta * k0) * tau);
    for (int j = 0; j < g.n; ++j) CHECK(std::abs(out.values[j] - amp * f.values[j]) <= 1e-13);

    // with b = c = 0 the step is the exact free flow; forward then backward
    // returns the input to rounding
    std::vector<ComplexField> b0(1, ComplexField(g));
    const ComplexField c0(g);
    const ComplexField z = testing::band_limited_random(g, 9, 3.0);
    const ComplexField fwd = perturbed_linear_step(z, b0, c0, 0.37);
    const ComplexField back = perturbed_linear_step(fwd, b0, c0, -0.37);
    CHECK(sup_diff(back, z) <= 1e-12);
    CHECK(sup_diff(fwd, free_evolve(z, 0.37, +1)) <= 1e-13);

    // spatially varying coefficients: fourth-order self-convergence against a
    // 256-substep reference (measured ratios ~16 per halving)
    const TorusGrid gv(1, 64, 10.0);
    const ComplexField fv = testing::gaussian(gv, 1.2 / std::sqrt(2.0), 1.0);
    std::vector<ComplexField> bv(1, ComplexField(gv));
    ComplexField cv(gv);
    for (int j = 0; j < gv.n; ++j) {
        const double x = gv.coordinate(j);
        bv[0].values[j] = cplx(0.4 * std::sin(2.0 * kPi * x / gv.L), 0.1 * std::cos(2.0 * kPi * x / gv.L));
        cv.values[j] = cplx(0.3 * std::cos(2.0 * kPi * x / gv.L), -0.2 * std::sin(4.0 * kPi * x / gv.L));
    }
    const double T = 0.064;
    ComplexField ref = fv;
    for (int s = 0; s < 256; ++s) ref = perturbed_linear_step(ref, bv, cv, T / 256.0);
    double err[4];
    int idx = 0;
    for (const int m : {1, 2, 4, 8}) {
        ComplexField y = fv;
        for (int s = 0; s < m; ++s) y = perturbed_linear_step(y, bv, cv, T / m);
        err[idx++] = sup_diff(y, ref);
    }
    CHECK(err[3] <= 1e-10);  // measured 9.6e-12
    CHECK(err[0] / err[1] >= 12.0);
    CHECK(err[1] / err[2] >= 12.0);
    CHECK(err[2] / err[3] >= 12.0);

    // one b component per axis, finite tau
    std::vector<ComplexField> short_b;
    CHECK_THROWS_AS(perturbed_linear_step(f, short_b, c, 0.1), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(perturbed_linear_step(f, b, c, inf), std::domain_error);
}

TEST_CASE("random-pde solver: zero phase reduces to the deterministic flow") {
    const TorusGrid g(1, 128, 10.0);
    const TimeMesh mesh{0.0, 2e-3, 50};
    for (const Scheme sch : {Scheme::lie, Scheme::strang}) {
        CAPTURE(static_cast<int>(sch));
        ProblemSpec p = mass_problem(g);
        p.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(0.0, 0.5), true, 0.0));
        const BrownianDriver drv = sample_driver(mesh, 1, 5, 1);
        const PhasePath phase = forward_phase(*p.noise, drv, 0);
        const LowerOrderCoeffs lo = coeffs_from_phase(phase);
        SolverConfig cfg;
        cfg.dt = mesh.dt;
        cfg.scheme = sch;
        cfg.store_stride = 10;
        const Trajectory v = solve_random_pde(p, phase, lo, cfg);

        SolverConfig cfgd = cfg;
        cfgd.horizon = mesh.dt * mesh.steps;
        const Trajectory x = solve_deterministic(mass_problem(g), cfgd);
        CHECK(bitwise_equal(v, x));
    }

    // an advection field fast enough to outrun the step triggers the guard
    {
        ProblemSpec p = mass_problem(TorusGrid(1, 64, 10.0));
        const TorusGrid& gg = p.grid();
        p.noise = std::make_shared<NoiseModel>(
            one_bump_model(gg, TimeMesh{0.0, 1e-2, 10}, cplx(0.0, 0.5), true, 0.7));
        PhasePath phase;
        phase.mesh = TimeMesh{0.0, 1e-2, 10};
        phase.origin_index = 0;
        phase.kind = PhaseKind::forward;
        for (int j = 0; j <= 10; ++j) {
            phase.phase.times.push_back(phase.mesh.time(j));
            ComplexField ph(gg);
            for (int q = 0; q < gg.n; ++q)
                ph.values[q] = cplx(0.0, 8.0 * std::sin(2.0 * kPi * gg.coordinate(q) / gg.L));
            phase.phase.fields.push_back(ph);
        }
        const LowerOrderCoeffs lo = coeffs_from_phase(phase);
        SolverConfig cfg;
        cfg.dt = 1e-2;
        CHECK_THROWS_AS(solve_random_pde(p, phase, lo, cfg), std::invalid_argument);

        // a horizon-anchored window is not a forward window
        PhasePath wrong = phase;
        wrong.kind = PhaseKind::scattering;
        CHECK_THROWS_AS(solve_random_pde(p, wrong, lo, cfg), std::invalid_argument);

        // dt must match the window spacing
        PhasePath ok = phase;
        for (auto& fld : ok.phase.fields)
            for (auto& vv : fld.values) vv = cplx(0.0, 0.0);
        const LowerOrderCoeffs lo0 = coeffs_from_phase(ok);
        SolverConfig off;
        off.dt = 5e-3;
        CHECK_THROWS_AS(solve_random_pde(p, ok, lo0, off), std::domain_error);
    }
}

TEST_CASE("rescaling equivalence: silent driver collapses, live driver converges at first order") {
    const TorusGrid g(1, 128, 10.0);
    const TimeMesh fine{0.0, 5e-4, 500};
    const BrownianDriver drv = sample_driver(fine, 1, 31, 4);
    SolverConfig cfg;
    cfg.dt = 2e-3;

    // g == 0: both sides run the same propagator tables and the deviation is
    // pure rounding; the slope fit refuses to report an order for noise-floor
    // deviations
    {
        ProblemSpec p = mass_problem(g);
        p.noise = std::make_shared<NoiseModel>(one_bump_model(g, fine, cplx(0.0, 0.4), true, 0.0));
        const EquivalenceReport r = rescaling_equivalence(p, drv, 0, cfg);
        CHECK(r.deviation <= 1e-12);  // measured 7.3e-15
        CHECK(r.order == 0.0);
    }

    // live conservative channel: the frozen-coefficient error is O(dt) and the
    // three-level study shows it
    {
        ProblemSpec p = mass_problem(g);
        p.noise = std::make_shared<NoiseModel>(one_bump_model(g, fine, cplx(0.0, 0.2), true, 0.4));
        const EquivalenceReport r0 = rescaling_equivalence(p, drv, 0, cfg);
        REQUIRE(r0.deviations.size() == 3);
        CHECK(r0.deviations[0] / r0.deviations[1] >= 1.8);  // measured 1.96
        CHECK(r0.deviations[1] / r0.deviations[2] >= 1.8);  // measured 2.00
        CHECK(r0.order >= 0.9);                              // measured 0.986
        CHECK(r0.deviation == r0.deviations.back());

        // starting the window mid-path changes nothing structural: the
        // deviation stays on the same scale as the sigma = 0 study
        const EquivalenceReport r62 = rescaling_equivalence(p, drv, 62, cfg);
        CHECK(r62.order >= 0.9);  // measured 0.971
        CHECK(r62.deviation <= 2.0 * r0.deviation);

        // error paths: empty data and an origin outside the mesh
        ProblemSpec hollow = p;
        hollow.initial = ComplexField(g);
        CHECK_THROWS_AS(rescaling_equivalence(hollow, drv, 0, cfg), std::domain_error);
        CHECK_THROWS_AS(rescaling_equivalence(p, drv, 125, cfg), std::invalid_argument);
    }
}

TEST_CASE("early-stop sentinels: ceiling, non-finite state, exponent overflow") {
    const TorusGrid g(1, 64, 10.0);

    // a steady positive control on a real profile inflates the state by
    // e^{~0.5} per step; the ceiling at 2 x sup|X_0| trips on step 2
    {
        const TimeMesh mesh{0.0, 0.01, 200};
        ProblemSpec p = mass_problem(g);
        p.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(1.0, 0.0), false, 1.0));
        CameronMartinControl ctrl = zero_control(mesh, 1);
        for (double& v : ctrl.hdot) v = 50.0;
        SolverConfig cfg;
        cfg.dt = 0.01;
        cfg.blowup_factor = 2.0;
        cfg.store_stride = 10;
        const Trajectory t = solve_controlled(p, ctrl, cfg);
        CHECK(t.truncated);
        CHECK(t.stop_step == 2);
        CHECK(t.stop_reason.find("ceiling") != std::string::npos);
        CHECK(t.mass_record.size() == 3);  // initial plus the two completed steps
        CHECK(t.series.times.back() == doctest::Approx(0.02));
        for (const ComplexField& f : t.series.fields) CHECK(all_finite(f));
    }

    // an exponent near (but below) the overflow guard produces a finite huge
    // state whose quintic rotation is NaN; the non-finite sentinel keeps the
    // last finite snapshot
    {
        const TimeMesh mesh{0.0, 0.01, 50};
        ProblemSpec p = mass_problem(g);
        p.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(1.0, 0.0), false, 1.0));
        CameronMartinControl ctrl = zero_control(mesh, 1);
        for (double& v : ctrl.hdot) v = 60000.0;
        SolverConfig cfg;
        cfg.dt = 0.01;
        cfg.blowup_factor = 1e290;
        const Trajectory t = solve_controlled(p, ctrl, cfg);
        CHECK(t.truncated);
        CHECK(t.stop_step == 0);
        CHECK(t.stop_reason.find("non-finite") != std::string::npos);
        REQUIRE(t.series.fields.size() == 1);
        CHECK(all_finite(t.series.fields.front()));
        CHECK(t.mass_record.size() == 1);
    }

    // past the guard the solver refuses the factor and stops cleanly instead
    // of multiplying by inf
    {
        const TimeMesh mesh{0.0, 0.01, 50};
        ProblemSpec p = mass_problem(g);
        p.noise = std::make_shared<NoiseModel>(one_bump_model(g, mesh, cplx(1.0, 0.0), false, 1.0));
        CameronMartinControl ctrl = zero_control(mesh, 1);
        for (double& v : ctrl.hdot) v = 80000.0;
        SolverConfig cfg;
        cfg.dt = 0.01;
        cfg.blowup_factor = 1e290;
        const Trajectory t = solve_controlled(p, ctrl, cfg);
        CHECK(t.truncated);
        CHECK(t.stop_step == 0);
        CHECK(t.stop_reason.find("overflow") != std::string::npos);
        CHECK(t.series.fields.size() == 1);
        CHECK(t.mass_record.size() == 1);
    }
}

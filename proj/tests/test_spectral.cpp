// Spectral core: grid invariants, DFT round-trip/Parseval, multiplier and
// free-propagator algebra, spectral differentiation against closed forms.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "helpers.hpp"
#include "snls/kernels.hpp"
#include "snls/norms.hpp"
#include "snls/spectral.hpp"

using namespace snls;
using testing::band_limited_random;
using testing::plane_wave;
using testing::white_field;

TEST_CASE("grid invariants: coordinates, spacing, wrap") {
    const TorusGrid g(1, 128, 12.0);
    CHECK(g.h() * g.n == g.L);  // exact: n is a power of two
    CHECK(g.coordinate(0) == -6.0);
    for (int j = 1; j < g.n; ++j) {
        CHECK(g.coordinate(j) - g.coordinate(j - 1) == doctest::Approx(g.h()).epsilon(1e-15));
        CHECK(g.coordinate(j) > g.coordinate(j - 1));
    }
    CHECK(g.coordinate(g.n - 1) < 0.5 * g.L);
    CHECK(g.wrap(0) == 0);
    CHECK(g.wrap(1) == 1);
    CHECK(g.wrap(g.n / 2) == -g.n / 2);
    CHECK(g.wrap(g.n - 1) == -1);
    CHECK(g.wavenumber(3) == doctest::Approx(2.0 * kPi / g.L * 3));
    CHECK_THROWS_AS(TorusGrid(1, 100, 1.0), std::domain_error);  // not a power of two
    CHECK_THROWS_AS(TorusGrid(4, 32, 1.0), std::domain_error);
}

TEST_CASE("constant field concentrates at the zero mode") {
    const TorusGrid g(2, 32, 5.0);
    ComplexField f(g);
    for (cplx& v : f.values) v = cplx(2.0, -1.0);
    const ComplexField spec = to_spectrum(f);
    CHECK(std::abs(spec.values[0] - cplx(2.0, -1.0) * (double)g.size()) <=
          1e-10 * (double)g.size());
    for (std::size_t i = 1; i < spec.size(); ++i) {
        CHECK(std::abs(spec.values[i]) <= 1e-10 * (double)g.size());
    }
}

TEST_CASE("plane wave has a single nonzero coefficient") {
    const TorusGrid g(1, 64, 8.0);
    const int mode[3] = {5, 0, 0};
    const ComplexField f = plane_wave(g, mode);
    const ComplexField spec = to_spectrum(f);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (i == 5) {
            CHECK(std::abs(spec.values[i]) == doctest::Approx((double)g.n).epsilon(1e-12));
        } else {
            CHECK(std::abs(spec.values[i]) <= 1e-10 * g.n);
        }
    }
    // negative mode lands on the wrapped index
    const int neg[3] = {-3, 0, 0};
    const ComplexField spec2 = to_spectrum(plane_wave(g, neg));
    CHECK(std::abs(spec2.values[64 - 3]) == doctest::Approx((double)g.n).epsilon(1e-12));
}

TEST_CASE("round-trip and Parseval on all acceptance grid sizes") {
    const TorusGrid grids[] = {TorusGrid(1, 256, 10.0), TorusGrid(2, 128, 7.0),
                               TorusGrid(3, 32, 6.0)};
    for (const TorusGrid& g : grids) {
        INFO("dim ", g.dim, " n ", g.n);
        const ComplexField f = white_field(g, 7);
        const ComplexField spec = to_spectrum(f);
        const ComplexField back = from_spectrum(spec);
        double diff2 = 0.0, ref2 = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            diff2 += std::norm(back.values[i] - f.values[i]);
            ref2 += std::norm(f.values[i]);
        }
        CHECK(std::sqrt(diff2) <= 1e-12 * std::sqrt(ref2));

        const double lhs = kern::abs2_sum(f.values.data(), f.size());
        const double rhs =
            kern::abs2_sum(spec.values.data(), spec.size()) / (double)g.size();
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("multiplier algebra") {
    const TorusGrid g(1, 64, 9.0);
    const ComplexField f = band_limited_random(g, 11, 2.0);

    // <xi>^0 is the identity
    const ComplexField id = apply_multiplier(f, bracket_multiplier(g, 0.0));
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(std::abs(id.values[i] - f.values[i]) <= 1e-13);
    }

    // eigenfunction: multiplier acts by its symbol value at the mode
    const int mode[3] = {7, 0, 0};
    const ComplexField pw = plane_wave(g, mode);
    const SpectralMultiplier br = bracket_multiplier(g, 1.5);
    const ComplexField bpw = apply_multiplier(pw, br);
    const double k = g.wavenumber(7);
    const double expected = std::pow(1.0 + k * k, 0.75);
    for (std::size_t i = 0; i < pw.size(); ++i) {
        CHECK(std::abs(bpw.values[i] - expected * pw.values[i]) <= 1e-10 * expected);
    }

    // unit-modulus multiplier preserves the l2 norm
    const SpectralMultiplier prop = propagator_multiplier(g, 0.37, +1);
    for (const cplx& v : prop.symbol) CHECK(std::abs(std::abs(v) - 1.0) <= 1e-15);
    const ComplexField pf = apply_multiplier(f, prop);
    CHECK(lp_norm(pf, 2.0) == doctest::Approx(lp_norm(f, 2.0)).epsilon(1e-12));
}

TEST_CASE("free evolution: identity, eigenvalue, group law, inversion") {
    const TorusGrid g(1, 128, 10.0);
    const ComplexField f = band_limited_random(g, 13, 2.0);

    const ComplexField f0 = free_evolve(f, 0.0, +1);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f0.values[i] == f.values[i]);

    const int mode[3] = {-9, 0, 0};
    const ComplexField pw = plane_wave(g, mode);
    const double k = 2.0 * kPi / g.L * -9;
    const double t = 0.21;
    const cplx phase = std::exp(cplx(0.0, t * k * k));
    const ComplexField pe = free_evolve(pw, t, +1);
    for (std::size_t i = 0; i < pw.size(); ++i) {
        CHECK(std::abs(pe.values[i] - phase * pw.values[i]) <= 1e-12);
    }

    const ComplexField two_step = free_evolve(free_evolve(f, 0.13, +1), 0.24, +1);
    const ComplexField one_step = free_evolve(f, 0.37, +1);
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        diff2 += std::norm(two_step.values[i] - one_step.values[i]);
        ref2 += std::norm(f.values[i]);
    }
    CHECK(std::sqrt(diff2) <= 1e-12 * std::sqrt(ref2));

    const ComplexField round = free_evolve(free_evolve(f, 0.42, -1), 0.42, +1);
    diff2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) diff2 += std::norm(round.values[i] - f.values[i]);
    CHECK(std::sqrt(diff2) <= 1e-12 * std::sqrt(ref2));
}

TEST_CASE("spectral gradient matches the closed form for a sine") {
    const TorusGrid g(1, 64, 4.0);
    ComplexField f(g);
    for (int j = 0; j < g.n; ++j) {
        f.values[j] = std::sin(2.0 * kPi * g.coordinate(j) / g.L);
    }
    const auto grad = spectral_gradient(f);
    REQUIRE(grad.size() == 1);
    for (int j = 0; j < g.n; ++j) {
        const double expected = (2.0 * kPi / g.L) * std::cos(2.0 * kPi * g.coordinate(j) / g.L);
        CHECK(std::abs(grad[0].values[j] - expected) <= 1e-10);
    }
    const ComplexField lap = spectral_laplacian(f);
    for (int j = 0; j < g.n; ++j) {
        const double w = 2.0 * kPi / g.L;
        CHECK(std::abs(lap.values[j] + w * w * f.values[j].real()) <= 1e-10);
    }
}

TEST_CASE("dealias mask kills the top third and is idempotent") {
    const TorusGrid g(1, 64, 5.0);
    const SpectralMultiplier mask = dealias_multiplier(g);
    for (int m = 0; m < g.n; ++m) {
        const bool keep = std::abs(g.wrap(m)) < g.n / 3.0;
        CHECK(mask.symbol[m] == cplx(keep ? 1.0 : 0.0, 0.0));
    }
    const ComplexField f = white_field(g, 3);
    const ComplexField once = apply_multiplier(f, mask);
    const ComplexField twice = apply_multiplier(once, mask);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(std::abs(twice.values[i] - once.values[i]) <= 1e-12);
    }
}

TEST_CASE("grid mismatch raises a contract violation") {
    const TorusGrid a(1, 64, 5.0), b(1, 32, 5.0);
    const ComplexField f(a);
    CHECK_THROWS_AS(apply_multiplier(f, bracket_multiplier(b, 1.0)), std::invalid_argument);
}

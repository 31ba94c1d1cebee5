#include "snls/norms.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "snls/kernels.hpp"

namespace snls {

namespace {

double cell_volume(const TorusGrid& g) {
    double v = 1.0;
    for (int a = 0; a < g.dim; ++a) v *= g.h();
    return v;
}

std::vector<double> trapezoid_weights(const std::vector<double>& t) {
    const std::size_t m = t.size();
    std::vector<double> w(m, 0.0);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        const double half = 0.5 * (t[j + 1] - t[j]);
        w[j] += half;
        w[j + 1] += half;
    }
    return w;
}

double mixed_impl(const SpaceTimeSeries& s, double q, double p, const SpectralMultiplier* mult) {
    s.validate();
    if (s.empty()) throw std::domain_error("mixed_spacetime_norm: empty series");
    if (q < 1.0 || p < 1.0)
        throw std::domain_error("mixed_spacetime_norm: exponents must be >= 1");
    const bool q_inf = std::isinf(q);
    if (!q_inf && s.size() < 2)
        throw std::domain_error(
            "mixed_spacetime_norm: finite time exponent needs at least 2 samples");

    std::vector<double> a(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        a[j] = mult != nullptr ? lp_norm(apply_multiplier(s.fields[j], *mult), p)
                               : lp_norm(s.fields[j], p);
    }
    if (q_inf) {
        double m = 0.0;
        for (double v : a) m = std::max(m, v);
        return m;
    }
    const std::vector<double> w = trapezoid_weights(s.times);
    double acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) acc += w[j] * std::pow(a[j], q);
    return std::pow(acc, 1.0 / q);
}

}  // namespace

double lp_norm(const ComplexField& f, double p) {
    if (p < 1.0) throw std::domain_error("lp_norm: p must be >= 1");
    if (std::isinf(p)) return std::sqrt(kern::sup_abs2(f.values.data(), f.size()));
    const double hv = cell_volume(f.grid);
    if (p == 2.0) return std::sqrt(hv * kern::abs2_sum(f.values.data(), f.size()));
    double acc = 0.0;
    const double halfp = 0.5 * p;
    for (const cplx& v : f.values) acc += std::pow(std::norm(v), halfp);
    return std::pow(hv * acc, 1.0 / p);
}

double mixed_spacetime_norm(const SpaceTimeSeries& s, double q, double p) {
    return mixed_impl(s, q, p, nullptr);
}

double mixed_spacetime_norm_bracket(const SpaceTimeSeries& s, double q, double p,
                                    double bracket_s) {
    if (s.empty()) throw std::domain_error("mixed_spacetime_norm: empty series");
    const SpectralMultiplier m = bracket_multiplier(s.grid(), bracket_s);
    return mixed_impl(s, q, p, &m);
}

double local_smoothing_norm(const SpaceTimeSeries& s, double alpha, double beta) {
    s.validate();
    if (s.empty()) throw std::domain_error("local_smoothing_norm: empty series");
    const TorusGrid& g = s.grid();
    // <x>^{2 beta} weight over the centered coordinates
    std::vector<double> wt(g.size());
    int idx[3];
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
        g.axis_indices(flat, idx);
        double x2 = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            const double x = g.coordinate(idx[a]);
            x2 += x * x;
        }
        wt[flat] = std::pow(1.0 + x2, beta);
    }
    const SpectralMultiplier br = bracket_multiplier(g, alpha);
    const double hv = cell_volume(g);
    std::vector<double> integrand(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        const ComplexField u = apply_multiplier(s.fields[j], br);
        integrand[j] = hv * kern::weighted_abs2_sum(wt.data(), u.values.data(), u.size());
    }
    const std::vector<double> w = trapezoid_weights(s.times);
    double acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) acc += w[j] * integrand[j];
    return std::sqrt(acc);
}

ExoticExponents exotic_exponents(int d, ExoticKind kind) {
    if (d < 3)
        throw std::domain_error(
            "exotic norms require dimension >= 3: exponents contain d-2 in a denominator");
    const double dd = d;
    switch (kind) {
        case ExoticKind::X0:
            return {dd * (dd + 2) / (2 * (dd - 2)),
                    2 * dd * dd * (dd + 2) / ((dd + 4) * (dd - 2) * (dd - 2)), 0.0};
        case ExoticKind::XX:
            return {dd * (dd + 2) / (2 * (dd - 2)),
                    2 * dd * dd * (dd + 2) / (dd * dd * dd - 4 * dd + 16), 4 / (dd + 2)};
        default:  // YY
            return {dd / 2,
                    2 * dd * dd * (dd + 2) / (dd * dd * dd + 4 * dd * dd + 4 * dd - 16),
                    4 / (dd + 2)};
    }
}

double exotic_norm(const SpaceTimeSeries& s, ExoticKind kind) {
    if (s.empty()) throw std::domain_error("exotic_norm: empty series");
    const ExoticExponents e = exotic_exponents(s.grid().dim, kind);
    if (e.bracket == 0.0) return mixed_spacetime_norm(s, e.q, e.p);
    return mixed_spacetime_norm_bracket(s, e.q, e.p, e.bracket);
}

double v_norm(const SpaceTimeSeries& s) {
    if (s.empty()) throw std::domain_error("v_norm: empty series");
    const double d = s.grid().dim;
    return mixed_spacetime_norm(s, 2 + 4 / d, 2 + 4 / d);
}

double w_norm(const SpaceTimeSeries& s) {
    if (s.empty()) throw std::domain_error("w_norm: empty series");
    const int d = s.grid().dim;
    if (d < 3) throw std::domain_error("w_norm requires dimension >= 3");
    const double dd = d;
    return mixed_spacetime_norm(s, 2 * (dd + 2) / (dd - 2), 2 * dd * (dd + 2) / (dd * dd + 4));
}

double w1_norm(const SpaceTimeSeries& s) {
    if (s.empty()) throw std::domain_error("w1_norm: empty series");
    const int d = s.grid().dim;
    if (d < 3) throw std::domain_error("w1_norm requires dimension >= 3");
    const double dd = d;
    return mixed_spacetime_norm_bracket(s, 2 * (dd + 2) / (dd - 2),
                                        2 * dd * (dd + 2) / (dd * dd + 4), 1.0);
}

double h1_norm(const ComplexField& f) {
    double acc = kern::abs2_sum(f.values.data(), f.size());
    for (const ComplexField& g : spectral_gradient(f)) {
        acc += kern::abs2_sum(g.values.data(), g.size());
    }
    return std::sqrt(cell_volume(f.grid) * acc);
}

}  // namespace snls

#pragma once
// Shared constructors for test fields: plane waves, Gaussians, and seeded
// band-limited random fields (smooth pseudorandom data with decaying spectrum).

#include <cmath>
#include <cstdint>
#include <vector>

#include "snls/grid.hpp"
#include "snls/philox.hpp"
#include "snls/spectral.hpp"

namespace snls::testing {

// e^{i k.x} for an admissible mode vector (integer per-axis mode numbers,
// negative allowed), sampled on the centered coordinates.
inline ComplexField plane_wave(const TorusGrid& g, const int mode[3], cplx amplitude = 1.0) {
    ComplexField f(g);
    int idx[3];
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
        g.axis_indices(flat, idx);
        double phase = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            phase += (2.0 * kPi / g.L) * mode[a] * g.coordinate(idx[a]);
        }
        f.values[flat] = amplitude * cplx(std::cos(phase), std::sin(phase));
    }
    return f;
}

// centered Gaussian bump amplitude * exp(-|x - c|^2 / (2 width^2))
inline ComplexField gaussian(const TorusGrid& g, double width, cplx amplitude = 1.0,
                             const double* center = nullptr) {
    ComplexField f(g);
    int idx[3];
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
        g.axis_indices(flat, idx);
        double r2 = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            const double x = g.coordinate(idx[a]) - (center != nullptr ? center[a] : 0.0);
            r2 += x * x;
        }
        f.values[flat] = amplitude * std::exp(-r2 / (2.0 * width * width));
    }
    return f;
}

// iid complex normal entries per grid point (rough data; exact via Philox)
inline ComplexField white_field(const TorusGrid& g, std::uint64_t seed, std::uint32_t series = 0,
                                std::uint32_t time_index = 0) {
    ComplexField f(g);
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
        const auto c0 = static_cast<std::uint32_t>(flat);
        f.values[flat] = cplx(rng::normal(seed, c0, 2 * time_index, series, rng::kTagField),
                              rng::normal(seed, c0, 2 * time_index + 1, series, rng::kTagField));
    }
    return f;
}

// Smooth random field: random spectrum damped by <k>^{-decay}, unit-normalized
// in the plain sup sense so different seeds have comparable size.
inline ComplexField band_limited_random(const TorusGrid& g, std::uint64_t seed, double decay,
                                        std::uint32_t series = 0, std::uint32_t time_index = 0) {
    ComplexField spec(g);
    for_each_mode(g, [&](std::size_t flat, const double*, double k2) {
        const auto c0 = static_cast<std::uint32_t>(flat);
        const double damp = std::pow(1.0 + k2, -0.5 * decay);
        spec.values[flat] =
            damp * cplx(rng::normal(seed, c0, 2 * time_index, series, rng::kTagField),
                        rng::normal(seed, c0, 2 * time_index + 1, series, rng::kTagField));
    });
    ComplexField f = from_spectrum(spec);
    double m = 0.0;
    for (const cplx& v : f.values) m = std::max(m, std::abs(v));
    if (m > 0.0) {
        for (cplx& v : f.values) v /= m;
    }
    return f;
}

inline SpaceTimeSeries constant_series(const ComplexField& f, const std::vector<double>& times) {
    SpaceTimeSeries s;
    s.times = times;
    s.fields.assign(times.size(), f);
    return s;
}

inline std::vector<double> uniform_times(double t0, double t1, int samples) {
    std::vector<double> t(samples);
    for (int j = 0; j < samples; ++j) {
        t[j] = t0 + (t1 - t0) * j / (samples - 1);
    }
    return t;
}

}  // namespace snls::testing

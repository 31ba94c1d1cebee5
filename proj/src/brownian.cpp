#include "snls/brownian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "snls/philox.hpp"

namespace snls {

void TimeMesh::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::domain_error("TimeMesh: dt must be > 0");
    if (steps < 1) throw std::domain_error("TimeMesh: need at least one step");
    if (!std::isfinite(t0)) throw std::domain_error("TimeMesh: t0 must be finite");
}

void BrownianDriver::validate() const {
    mesh.validate();
    if (channels < 1) throw std::domain_error("BrownianDriver: need at least one channel");
    const std::size_t n = (std::size_t)channels;
    if (increments.size() != (std::size_t)mesh.steps * n ||
        paths.size() != (std::size_t)(mesh.steps + 1) * n)
        throw std::invalid_argument("BrownianDriver: array sizes do not match mesh/channels");
}

void CameronMartinControl::validate() const {
    mesh.validate();
    if (channels < 1) throw std::domain_error("CameronMartinControl: need at least one channel");
    if (hdot.size() != (std::size_t)mesh.steps * (std::size_t)channels)
        throw std::invalid_argument("CameronMartinControl: hdot size does not match mesh");
}

double CameronMartinControl::h(int j, int k) const {
    double acc = 0.0;
    for (int i = 0; i < j; ++i) acc += hdot_at(i, k) * mesh.dt;
    return acc;
}

namespace {

void rebuild_paths(BrownianDriver& d) {
    const int N = d.channels;
    d.paths.assign((std::size_t)(d.mesh.steps + 1) * N, 0.0);
    for (int j = 0; j < d.mesh.steps; ++j) {
        for (int k = 0; k < N; ++k) {
            d.paths[(std::size_t)(j + 1) * N + k] =
                d.paths[(std::size_t)j * N + k] + d.increments[(std::size_t)j * N + k];
        }
    }
}

void check_channel(int channel, int channels, const char* where) {
    if (channel < 0 || channel >= channels)
        throw std::invalid_argument(std::string(where) + ": channel index out of range");
}

void check_mesh_array(const std::vector<double>& g, const TimeMesh& mesh, const char* where) {
    if (g.size() != (std::size_t)mesh.steps + 1)
        throw std::invalid_argument(std::string(where) +
                                    ": sample array does not match mesh (need steps+1 values)");
}

}  // namespace

BrownianDriver sample_driver(const TimeMesh& mesh, int channels, std::uint64_t seed,
                             std::uint32_t sample) {
    mesh.validate();
    if (channels < 1) throw std::domain_error("sample_driver: need at least one channel");
    BrownianDriver d;
    d.mesh = mesh;
    d.channels = channels;
    d.seed = seed;
    d.sample = sample;
    d.increments.resize((std::size_t)mesh.steps * channels);
    const double root_dt = std::sqrt(mesh.dt);
    for (int j = 0; j < mesh.steps; ++j) {
        for (int k = 0; k < channels; ++k) {
            d.increments[(std::size_t)j * channels + k] =
                root_dt * rng::normal(seed, (std::uint32_t)j, (std::uint32_t)k, sample,
                                      rng::kTagBrownian);
        }
    }
    rebuild_paths(d);
    return d;
}

BrownianDriver coarsen_driver(const BrownianDriver& driver, int factor) {
    driver.validate();
    if (factor < 1) throw std::domain_error("coarsen_driver: factor must be >= 1");
    if (driver.mesh.steps % factor != 0)
        throw std::domain_error("coarsen_driver: step count not divisible by factor");
    if (factor == 1) return driver;
    BrownianDriver d;
    d.mesh = TimeMesh{driver.mesh.t0, driver.mesh.dt * factor, driver.mesh.steps / factor};
    d.channels = driver.channels;
    d.seed = driver.seed;
    d.sample = driver.sample;
    const int N = driver.channels;
    d.increments.assign((std::size_t)d.mesh.steps * N, 0.0);
    for (int J = 0; J < d.mesh.steps; ++J) {
        for (int i = 0; i < factor; ++i) {
            for (int k = 0; k < N; ++k) {
                d.increments[(std::size_t)J * N + k] +=
                    driver.increments[(std::size_t)(J * factor + i) * N + k];
            }
        }
    }
    rebuild_paths(d);
    return d;
}

AdaptedInterpolation interpolate_adapted(const BrownianDriver& driver, int level) {
    driver.validate();
    if (level < 1) throw std::domain_error("interpolate_adapted: level must be >= 1");
    if (driver.mesh.t0 != 0.0)
        throw std::domain_error("interpolate_adapted: dyadic grid is anchored at time 0");
    const double dyadic = std::ldexp(1.0, -level);  // 2^-n
    const double ratio = dyadic / driver.mesh.dt;
    const long long r = std::llround(ratio);
    if (r < 1 || std::abs(r * driver.mesh.dt - dyadic) > 1e-9 * dyadic)
        throw std::domain_error(
            "interpolate_adapted: 2^-level is not an integer multiple of dt");

    AdaptedInterpolation a;
    a.mesh = driver.mesh;
    a.channels = driver.channels;
    a.level = level;
    a.cells_per_dyadic = (int)r;
    const int N = driver.channels;
    const int M = driver.mesh.steps;
    a.slopes.assign((std::size_t)M * N, 0.0);
    a.values.assign((std::size_t)(M + 1) * N, 0.0);

    // Slope on mesh cell j: the dyadic cell K = j / r aims from beta((K-1) 2^-n)
    // at beta(K 2^-n); the first dyadic cell has nothing behind it and stays 0.
    for (int j = 0; j < M; ++j) {
        const int K = j / (int)r;
        if (K == 0) continue;
        const int hi = K * (int)r, lo = (K - 1) * (int)r;
        for (int k = 0; k < N; ++k) {
            a.slopes[(std::size_t)j * N + k] =
                (driver.path_value(hi, k) - driver.path_value(lo, k)) / (r * driver.mesh.dt);
        }
    }
    // Values straight from the defining formula (no cumulative drift). A mesh
    // point on a dyadic node has zero offset into its cell, so the value is
    // exactly the lagged path point beta((K-1) 2^-n).
    for (int j = 1; j <= M; ++j) {
        const int K = j / (int)r;
        if (K == 0) continue;  // first dyadic cell: identically 0
        const int lo = (K - 1) * (int)r, hi = K * (int)r;
        for (int k = 0; k < N; ++k) {
            const double anchor = driver.path_value(lo, k);
            const double slope = (driver.path_value(hi, k) - anchor) / (r * driver.mesh.dt);
            a.values[(std::size_t)j * N + k] = anchor + slope * (driver.mesh.dt * (j - hi));
        }
    }
    return a;
}

std::vector<double> ito_integral(const std::vector<double>& g, const BrownianDriver& driver,
                                 int channel) {
    driver.validate();
    check_mesh_array(g, driver.mesh, "ito_integral");
    check_channel(channel, driver.channels, "ito_integral");
    std::vector<double> out((std::size_t)driver.mesh.steps + 1, 0.0);
    for (int j = 0; j < driver.mesh.steps; ++j) {
        out[j + 1] = out[j] + g[j] * driver.increment(j, channel);
    }
    return out;
}

namespace {

std::vector<double> pathwise_impl(const std::vector<double>& g, const TimeMesh& mesh,
                                  const double* slopes, int channels, int channel) {
    std::vector<double> out((std::size_t)mesh.steps + 1, 0.0);
    for (int j = 0; j < mesh.steps; ++j) {
        const double slope = slopes[(std::size_t)j * channels + channel];
        out[j + 1] = out[j] + slope * mesh.dt * (0.5 * (g[j] + g[j + 1]));
    }
    return out;
}

}  // namespace

std::vector<double> pathwise_integral(const std::vector<double>& g,
                                      const CameronMartinControl& control, int channel) {
    control.validate();
    check_mesh_array(g, control.mesh, "pathwise_integral");
    check_channel(channel, control.channels, "pathwise_integral");
    return pathwise_impl(g, control.mesh, control.hdot.data(), control.channels, channel);
}

std::vector<double> pathwise_integral(const std::vector<double>& g,
                                      const AdaptedInterpolation& interp, int channel) {
    check_mesh_array(g, interp.mesh, "pathwise_integral");
    check_channel(channel, interp.channels, "pathwise_integral");
    return pathwise_impl(g, interp.mesh, interp.slopes.data(), interp.channels, channel);
}

}  // namespace snls

#pragma once
// Time meshes, multi-channel Brownian drivers, the adapted piecewise-linear
// interpolation beta^n, Cameron-Martin controls, and the two quadratures the
// analysis uses on them:
//
//   ito_integral       left-point Riemann sum  I(t_j) = sum_{i<j} g(t_i) dbeta(i)
//   pathwise_integral  trapezoid of g against the piecewise-constant derivative
//                      of an absolutely continuous path (hdot or beta^n slope)
//
// Increments are derived from a counter-based generator keyed by (seed) with
// counter (step, channel, sample), so any (seed, sample) pair reproduces the
// same path bit-for-bit regardless of generation order or thread count.

#include <cstdint>
#include <vector>

namespace snls {

struct TimeMesh {
    double t0 = 0.0;
    double dt = 0.0;  // > 0
    int steps = 0;    // M >= 1 cells; mesh points t_0..t_M

    double time(int j) const { return t0 + j * dt; }
    double length() const { return steps * dt; }
    void validate() const;
    bool operator==(const TimeMesh&) const = default;
};

struct BrownianDriver {
    TimeMesh mesh;
    int channels = 0;                // N
    std::vector<double> increments;  // [M x N] row-major, dbeta_k(j) = increments[j*N + k]
    std::vector<double> paths;       // [(M+1) x N], beta_k(t_j) = paths[j*N + k]
    std::uint64_t seed = 0;
    std::uint32_t sample = 0;

    double increment(int j, int k) const { return increments[(std::size_t)j * channels + k]; }
    double path_value(int j, int k) const { return paths[(std::size_t)j * channels + k]; }
    void validate() const;
};

// Piecewise-linear path that on dyadic cell [k 2^-n, (k+1) 2^-n) runs from
// beta((k-1) 2^-n) toward beta(k 2^-n): each cell only looks backward, so the
// interpolation is adapted. The first cell is identically zero.
struct AdaptedInterpolation {
    TimeMesh mesh;     // copied from the source driver
    int channels = 0;
    int level = 0;     // n; dyadic spacing 2^-n = r * dt
    int cells_per_dyadic = 0;        // r
    std::vector<double> values;      // beta^n at mesh points, [(M+1) x N]
    std::vector<double> slopes;      // d/dt beta^n on mesh cells, [M x N]

    double value(int j, int k) const { return values[(std::size_t)j * channels + k]; }
    double slope(int j, int k) const { return slopes[(std::size_t)j * channels + k]; }
};

struct CameronMartinControl {
    TimeMesh mesh;
    int channels = 0;
    std::vector<double> hdot;  // [M x N], piecewise constant on mesh cells

    double hdot_at(int j, int k) const { return hdot[(std::size_t)j * channels + k]; }
    // h_k(t_j) by cumulative left-to-right summation, h(t0) = 0
    double h(int j, int k) const;
    void validate() const;
};

BrownianDriver sample_driver(const TimeMesh& mesh, int channels, std::uint64_t seed,
                             std::uint32_t sample);

// Same path on a mesh coarsened by an integer factor: coarse increments are
// left-to-right sums of fine-increment groups, so solves at different dt can
// share one underlying realization. Requires steps % factor == 0.
BrownianDriver coarsen_driver(const BrownianDriver& driver, int factor);

AdaptedInterpolation interpolate_adapted(const BrownianDriver& driver, int level);

// g has one sample per mesh point (M+1 entries). Results likewise.
std::vector<double> ito_integral(const std::vector<double>& g, const BrownianDriver& driver,
                                 int channel);
std::vector<double> pathwise_integral(const std::vector<double>& g,
                                      const CameronMartinControl& control, int channel);
std::vector<double> pathwise_integral(const std::vector<double>& g,
                                      const AdaptedInterpolation& interp, int channel);

}  // namespace snls

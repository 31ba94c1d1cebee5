#include "snls/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#include "snls/kernels.hpp"

namespace snls {

bool all_finite(const ComplexField& f) {
    for (const cplx& v : f.values) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
}

namespace {

// FFTW plan cache.  Plans are created once per (dim, n, direction) with
// FFTW_ESTIMATE (deterministic, no auto-tuning) and FFTW_UNALIGNED (safe for
// arbitrary caller buffers).  Plan creation is serialized (the FFTW planner
// is not thread-safe); fftw_execute_dft on a cached plan is re-entrant.
struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

std::mutex g_plan_mutex;
std::map<std::pair<int, int>, PlanPair>& plan_cache() {
    static std::map<std::pair<int, int>, PlanPair> cache;
    return cache;
}

const PlanPair& get_plans(const TorusGrid& grid) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto key = std::make_pair(grid.dim, grid.n);
    auto it = plan_cache().find(key);
    if (it != plan_cache().end()) return it->second;

    int dims[3] = {grid.n, grid.n, grid.n};
    const std::size_t sz = grid.size();
    fftw_complex* a = fftw_alloc_complex(sz);
    fftw_complex* b = fftw_alloc_complex(sz);
    PlanPair p;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    p.fwd = fftw_plan_dft(grid.dim, dims, a, b, FFTW_FORWARD, flags);
    p.bwd = fftw_plan_dft(grid.dim, dims, a, b, FFTW_BACKWARD, flags);
    fftw_free(a);
    fftw_free(b);
    if (p.fwd == nullptr || p.bwd == nullptr)
        throw std::runtime_error("spectral: FFTW plan creation failed");
    return plan_cache().emplace(key, p).first->second;
}

}  // namespace

void dft_raw(const TorusGrid& grid, const cplx* in, cplx* out, int dir) {
    if (in == out) throw std::invalid_argument("dft_raw: in-place transform not supported");
    const PlanPair& p = get_plans(grid);
    // FFTW's c2c out-of-place transform preserves its input.
    auto* fin = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in));
    auto* fout = reinterpret_cast<fftw_complex*>(out);
    fftw_execute_dft(dir < 0 ? p.fwd : p.bwd, fin, fout);
}

ComplexField to_spectrum(const ComplexField& f) {
    ComplexField out(f.grid);
    dft_raw(f.grid, f.values.data(), out.values.data(), -1);
    return out;
}

ComplexField from_spectrum(const ComplexField& spec) {
    ComplexField out(spec.grid);
    dft_raw(spec.grid, spec.values.data(), out.values.data(), +1);
    const double inv = 1.0 / static_cast<double>(spec.grid.size());
    kern::scal(out.values.data(), cplx(inv, 0.0), out.size());
    return out;
}

void for_each_mode(const TorusGrid& grid,
                   const std::function<void(std::size_t, const double*, double)>& fn) {
    std::vector<double> wn(grid.n);
    for (int m = 0; m < grid.n; ++m) wn[m] = grid.wavenumber(m);
    int idx[3];
    double xi[3] = {0.0, 0.0, 0.0};
    const std::size_t sz = grid.size();
    for (std::size_t flat = 0; flat < sz; ++flat) {
        grid.axis_indices(flat, idx);
        double k2 = 0.0;
        for (int a = 0; a < grid.dim; ++a) {
            xi[a] = wn[idx[a]];
            k2 += xi[a] * xi[a];
        }
        fn(flat, xi, k2);
    }
}

SpectralMultiplier bracket_multiplier(const TorusGrid& grid, double s) {
    SpectralMultiplier m;
    m.kind = SpectralMultiplier::Kind::bracket_power;
    m.s = s;
    m.grid = grid;
    m.symbol.resize(grid.size());
    for_each_mode(grid, [&](std::size_t flat, const double*, double k2) {
        m.symbol[flat] = cplx(std::pow(1.0 + k2, 0.5 * s), 0.0);
    });
    return m;
}

SpectralMultiplier propagator_multiplier(const TorusGrid& grid, double t, int sign) {
    if (sign != 1 && sign != -1)
        throw std::invalid_argument("propagator_multiplier: sign must be +1 or -1");
    SpectralMultiplier m;
    m.kind = SpectralMultiplier::Kind::free_propagator;
    m.t = t;
    m.sign = sign;
    m.grid = grid;
    m.symbol.resize(grid.size());
    for_each_mode(grid, [&](std::size_t flat, const double*, double k2) {
        const double a = sign * t * k2;
        m.symbol[flat] = cplx(std::cos(a), std::sin(a));
    });
    return m;
}

SpectralMultiplier dealias_multiplier(const TorusGrid& grid) {
    SpectralMultiplier m;
    m.kind = SpectralMultiplier::Kind::dealias_mask;
    m.grid = grid;
    m.symbol.resize(grid.size());
    const double cutoff = grid.n / 3.0;  // keep |wrapped mode| < n/3 on every axis
    int idx[3];
    for (std::size_t flat = 0; flat < grid.size(); ++flat) {
        grid.axis_indices(flat, idx);
        bool keep = true;
        for (int a = 0; a < grid.dim; ++a) {
            if (std::abs(static_cast<double>(grid.wrap(idx[a]))) >= cutoff) keep = false;
        }
        m.symbol[flat] = cplx(keep ? 1.0 : 0.0, 0.0);
    }
    return m;
}

SpectralMultiplier gradient_multiplier(const TorusGrid& grid, int axis) {
    if (axis < 0 || axis >= grid.dim)
        throw std::invalid_argument("gradient_multiplier: axis out of range");
    SpectralMultiplier m;
    m.kind = SpectralMultiplier::Kind::gradient;
    m.axis = axis;
    m.grid = grid;
    m.symbol.resize(grid.size());
    for_each_mode(grid, [&](std::size_t flat, const double* xi, double) {
        m.symbol[flat] = cplx(0.0, xi[axis]);
    });
    return m;
}

SpectralMultiplier laplacian_multiplier(const TorusGrid& grid) {
    SpectralMultiplier m;
    m.kind = SpectralMultiplier::Kind::laplacian;
    m.grid = grid;
    m.symbol.resize(grid.size());
    for_each_mode(grid, [&](std::size_t flat, const double*, double k2) {
        m.symbol[flat] = cplx(-k2, 0.0);
    });
    return m;
}

SpectralMultiplier compose_multipliers(const SpectralMultiplier& a, const SpectralMultiplier& b) {
    require_same_grid(a.grid, b.grid, "compose_multipliers");
    SpectralMultiplier m;
    m.kind = SpectralMultiplier::Kind::custom;
    m.grid = a.grid;
    m.symbol.resize(a.symbol.size());
    kern::cmul(a.symbol.data(), b.symbol.data(), m.symbol.data(), m.symbol.size());
    return m;
}

ComplexField apply_multiplier(const ComplexField& f, const SpectralMultiplier& m) {
    require_same_grid(f.grid, m.grid, "apply_multiplier");
    ComplexField spec = to_spectrum(f);
    kern::cmul(spec.values.data(), m.symbol.data(), spec.values.data(), spec.size());
    return from_spectrum(spec);
}

ComplexField free_evolve(const ComplexField& f, double t, int sign) {
    // t = 0 is the exact identity; skip the transform round-trip so callers
    // composing propagators across a zero interval lose nothing.
    if (t == 0.0) return f;
    return apply_multiplier(f, propagator_multiplier(f.grid, t, sign));
}

std::vector<ComplexField> spectral_gradient(const ComplexField& f) {
    ComplexField spec = to_spectrum(f);
    std::vector<ComplexField> out;
    out.reserve(f.grid.dim);
    for (int a = 0; a < f.grid.dim; ++a) {
        const SpectralMultiplier g = gradient_multiplier(f.grid, a);
        ComplexField tmp(f.grid);
        kern::cmul(spec.values.data(), g.symbol.data(), tmp.values.data(), tmp.size());
        out.push_back(from_spectrum(tmp));
    }
    return out;
}

ComplexField spectral_laplacian(const ComplexField& f) {
    ComplexField spec = to_spectrum(f);
    const SpectralMultiplier l = laplacian_multiplier(f.grid);
    kern::cmul(spec.values.data(), l.symbol.data(), spec.values.data(), spec.size());
    return from_spectrum(spec);
}

}  // namespace snls

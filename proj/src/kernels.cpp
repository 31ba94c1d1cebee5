// Scalar reference kernels and backend dispatch.
//
// The scalar reductions deliberately mirror the SIMD register layout: four
// accumulator lanes filled in blocked order, tail elements folded into lanes
// starting at lane 0, final combine (l0+l1)+(l2+l3).  Keeping the operation
// order identical on every backend is what makes the backends bit-identical.

#include "snls/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

namespace snls::kern {

namespace {

// ---- elementwise ------------------------------------------------------------

void s_cmul(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double ar = a[2 * i], ai = a[2 * i + 1];
        const double br = b[2 * i], bi = b[2 * i + 1];
        dst[2 * i] = ar * br - ai * bi;
        dst[2 * i + 1] = ai * br + ar * bi;
    }
}

void s_scal(double* x, double sr, double si, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xr = x[2 * i], xi = x[2 * i + 1];
        x[2 * i] = xr * sr - xi * si;
        x[2 * i + 1] = xi * sr + xr * si;
    }
}

void s_axpy(double* y, const double* x, double sr, double si, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xr = x[2 * i], xi = x[2 * i + 1];
        y[2 * i] = y[2 * i] + (xr * sr - xi * si);
        y[2 * i + 1] = y[2 * i + 1] + (xi * sr + xr * si);
    }
}

// ---- reductions (4-lane blocked, see header) --------------------------------

double s_abs2_sum(const double* a, std::size_t n) {
    const std::size_t m = 2 * n;          // doubles
    const std::size_t mb = m & ~std::size_t(3);
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < mb; j += 4) {
        lane[0] += a[j] * a[j];
        lane[1] += a[j + 1] * a[j + 1];
        lane[2] += a[j + 2] * a[j + 2];
        lane[3] += a[j + 3] * a[j + 3];
    }
    for (std::size_t j = mb; j < m; ++j) lane[(j - mb) & 3] += a[j] * a[j];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double s_re_conj_dot(const double* a, const double* b, std::size_t n) {
    // Re(conj(a)*b) = a_re*b_re + a_im*b_im: a plain dot product of raw buffers.
    const std::size_t m = 2 * n;
    const std::size_t mb = m & ~std::size_t(3);
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < mb; j += 4) {
        lane[0] += a[j] * b[j];
        lane[1] += a[j + 1] * b[j + 1];
        lane[2] += a[j + 2] * b[j + 2];
        lane[3] += a[j + 3] * b[j + 3];
    }
    for (std::size_t j = mb; j < m; ++j) lane[(j - mb) & 3] += a[j] * b[j];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double s_weighted_abs2_sum(const double* w, const double* a, std::size_t n) {
    // Blocked over complex elements: lane l accumulates w[i+l] * |a[i+l]|^2,
    // where |a_i|^2 is computed as (re*re) + (im*im) — two multiplies, one add,
    // matching the vector hadd sequence.
    const std::size_t nb = n & ~std::size_t(3);
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < nb; i += 4) {
        for (std::size_t l = 0; l < 4; ++l) {
            const std::size_t j = 2 * (i + l);
            const double t = a[j] * a[j] + a[j + 1] * a[j + 1];
            lane[l] += w[i + l] * t;
        }
    }
    for (std::size_t i = nb; i < n; ++i) {
        const std::size_t j = 2 * i;
        const double t = a[j] * a[j] + a[j + 1] * a[j + 1];
        lane[(i - nb) & 3] += w[i] * t;
    }
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double s_sup_abs2(const double* a, std::size_t n) {
    // max is exact (no rounding), so a single running max matches any lane
    // decomposition over the same multiset of values.
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = 2 * i;
        const double t = a[j] * a[j] + a[j + 1] * a[j + 1];
        m = std::max(m, t);
    }
    return m;
}

const Backend g_scalar = {
    "scalar", s_cmul, s_scal, s_axpy, s_abs2_sum, s_weighted_abs2_sum, s_re_conj_dot, s_sup_abs2,
};

std::atomic<const Backend*> g_active{nullptr};
std::mutex g_resolve_mutex;

const Backend* resolve() {
    const char* want = std::getenv("SNLS_SIMD");
    if (want != nullptr) {
        const std::string s(want);
        if (s == "scalar") return &g_scalar;
        if (s == "avx2" && avx2_backend() != nullptr) return avx2_backend();
        if (s == "neon" && neon_backend() != nullptr) return neon_backend();
        // Unknown or unsupported request: fall through to auto-detection.
    }
    if (const Backend* b = avx2_backend()) return b;
    if (const Backend* b = neon_backend()) return b;
    return &g_scalar;
}

}  // namespace

const Backend& scalar_backend() { return g_scalar; }

const Backend& active() {
    const Backend* b = g_active.load(std::memory_order_acquire);
    if (b == nullptr) {
        std::lock_guard<std::mutex> lock(g_resolve_mutex);
        b = g_active.load(std::memory_order_relaxed);
        if (b == nullptr) {
            b = resolve();
            g_active.store(b, std::memory_order_release);
        }
    }
    return *b;
}

void set_active(const Backend* b) {
    std::lock_guard<std::mutex> lock(g_resolve_mutex);
    g_active.store(b == nullptr ? resolve() : b, std::memory_order_release);
}

#if !defined(SNLS_HAVE_AVX2)
const Backend* avx2_backend() { return nullptr; }
#endif
#if !defined(SNLS_HAVE_NEON)
const Backend* neon_backend() { return nullptr; }
#endif

}  // namespace snls::kern

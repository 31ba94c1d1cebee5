// =============================================================================
// AVX2 kernels (x86-64).  Compiled with -mavx2 only (no -mfma): the scalar
// reference is the bit-exact specification, and FMA would change rounding.
// Complex data is interleaved (re,im); one 256-bit register holds 2 complex
// numbers, reductions process 4 doubles / 4 complex per iteration with the
// same lane structure as the scalar reference in kernels.cpp.
// =============================================================================

#include "snls/kernels.hpp"

#if defined(__AVX2__)

#include <immintrin.h>

#include <algorithm>
#include <cstddef>

namespace snls::kern {
namespace {

// dst = a * b elementwise.  Per 2 complex: t1 = a * dup_even(b),
// t2 = swap_pairs(a) * dup_odd(b), dst = addsub(t1, t2):
//   re = ar*br - ai*bi,  im = ai*br + ar*bi.
void v_cmul(const double* a, const double* b, double* dst, std::size_t n) {
    const std::size_t m = 2 * n;
    const std::size_t mb = m & ~std::size_t(3);
    for (std::size_t j = 0; j < mb; j += 4) {
        const __m256d va = _mm256_loadu_pd(a + j);
        const __m256d vb = _mm256_loadu_pd(b + j);
        const __m256d bre = _mm256_movedup_pd(vb);
        const __m256d bim = _mm256_permute_pd(vb, 0xF);
        const __m256d asw = _mm256_permute_pd(va, 0x5);
        const __m256d t1 = _mm256_mul_pd(va, bre);
        const __m256d t2 = _mm256_mul_pd(asw, bim);
        _mm256_storeu_pd(dst + j, _mm256_addsub_pd(t1, t2));
    }
    for (std::size_t i = mb / 2; i < n; ++i) {
        const double ar = a[2 * i], ai = a[2 * i + 1];
        const double br = b[2 * i], bi = b[2 * i + 1];
        dst[2 * i] = ar * br - ai * bi;
        dst[2 * i + 1] = ai * br + ar * bi;
    }
}

void v_scal(double* x, double sr, double si, std::size_t n) {
    const std::size_t m = 2 * n;
    const std::size_t mb = m & ~std::size_t(3);
    const __m256d bre = _mm256_set1_pd(sr);
    const __m256d bim = _mm256_set1_pd(si);
    for (std::size_t j = 0; j < mb; j += 4) {
        const __m256d vx = _mm256_loadu_pd(x + j);
        const __m256d xsw = _mm256_permute_pd(vx, 0x5);
        const __m256d t1 = _mm256_mul_pd(vx, bre);
        const __m256d t2 = _mm256_mul_pd(xsw, bim);
        _mm256_storeu_pd(x + j, _mm256_addsub_pd(t1, t2));
    }
    for (std::size_t i = mb / 2; i < n; ++i) {
        const double xr = x[2 * i], xi = x[2 * i + 1];
        x[2 * i] = xr * sr - xi * si;
        x[2 * i + 1] = xi * sr + xr * si;
    }
}

void v_axpy(double* y, const double* x, double sr, double si, std::size_t n) {
    const std::size_t m = 2 * n;
    const std::size_t mb = m & ~std::size_t(3);
    const __m256d bre = _mm256_set1_pd(sr);
    const __m256d bim = _mm256_set1_pd(si);
    for (std::size_t j = 0; j < mb; j += 4) {
        const __m256d vx = _mm256_loadu_pd(x + j);
        const __m256d vy = _mm256_loadu_pd(y + j);
        const __m256d xsw = _mm256_permute_pd(vx, 0x5);
        const __m256d t1 = _mm256_mul_pd(vx, bre);
        const __m256d t2 = _mm256_mul_pd(xsw, bim);
        _mm256_storeu_pd(y + j, _mm256_add_pd(vy, _mm256_addsub_pd(t1, t2)));
    }
    for (std::size_t i = mb / 2; i < n; ++i) {
        const double xr = x[2 * i], xi = x[2 * i + 1];
        y[2 * i] = y[2 * i] + (xr * sr - xi * si);
        y[2 * i + 1] = y[2 * i + 1] + (xi * sr + xr * si);
    }
}

inline double combine(__m256d acc) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double v_abs2_sum(const double* a, std::size_t n) {
    const std::size_t m = 2 * n;
    const std::size_t mb = m & ~std::size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < mb; j += 4) {
        const __m256d v = _mm256_loadu_pd(a + j);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (std::size_t j = mb; j < m; ++j) lane[(j - mb) & 3] += a[j] * a[j];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double v_re_conj_dot(const double* a, const double* b, std::size_t n) {
    const std::size_t m = 2 * n;
    const std::size_t mb = m & ~std::size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < mb; j += 4) {
        const __m256d va = _mm256_loadu_pd(a + j);
        const __m256d vb = _mm256_loadu_pd(b + j);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(va, vb));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (std::size_t j = mb; j < m; ++j) lane[(j - mb) & 3] += a[j] * b[j];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

// 4 complex per iteration: squares, hadd pairs, permute back to element order
// (hadd interleaves the two 128-bit lanes), multiply by the weight vector.
double v_weighted_abs2_sum(const double* w, const double* a, std::size_t n) {
    const std::size_t nb = n & ~std::size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < nb; i += 4) {
        const __m256d v0 = _mm256_loadu_pd(a + 2 * i);
        const __m256d v1 = _mm256_loadu_pd(a + 2 * i + 4);
        const __m256d h = _mm256_hadd_pd(_mm256_mul_pd(v0, v0), _mm256_mul_pd(v1, v1));
        const __m256d t = _mm256_permute4x64_pd(h, _MM_SHUFFLE(3, 1, 2, 0));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w + i), t));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (std::size_t i = nb; i < n; ++i) {
        const std::size_t j = 2 * i;
        const double t = a[j] * a[j] + a[j + 1] * a[j + 1];
        lane[(i - nb) & 3] += w[i] * t;
    }
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double v_sup_abs2(const double* a, std::size_t n) {
    const std::size_t nb = n & ~std::size_t(3);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < nb; i += 4) {
        const __m256d v0 = _mm256_loadu_pd(a + 2 * i);
        const __m256d v1 = _mm256_loadu_pd(a + 2 * i + 4);
        const __m256d h = _mm256_hadd_pd(_mm256_mul_pd(v0, v0), _mm256_mul_pd(v1, v1));
        acc = _mm256_max_pd(acc, h);  // max is order-free; no permute needed
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double m = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
    for (std::size_t i = nb; i < n; ++i) {
        const std::size_t j = 2 * i;
        m = std::max(m, a[j] * a[j] + a[j + 1] * a[j + 1]);
    }
    return m;
}

const Backend g_avx2 = {
    "avx2", v_cmul, v_scal, v_axpy, v_abs2_sum, v_weighted_abs2_sum, v_re_conj_dot, v_sup_abs2,
};

}  // namespace

const Backend* avx2_backend() {
    return __builtin_cpu_supports("avx2") ? &g_avx2 : nullptr;
}

}  // namespace snls::kern

#endif  // __AVX2__

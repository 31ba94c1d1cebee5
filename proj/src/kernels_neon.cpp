// =============================================================================
// NEON kernels (aarch64).  Same contract as the AVX2 file: bit-identical to
// the scalar reference.  A float64x2_t holds one complex number; reductions
// keep the 4-lane blocked structure with two vector accumulators per pair of
// lanes.  NEON has no addsub, so the subtract lane is realized by multiplying
// the cross term with (-1, +1) before adding — an exact sign flip, which
// preserves bit-identity with the scalar a*b - c*d / a*b + c*d expressions.
// =============================================================================

#include "snls/kernels.hpp"

#if defined(__ARM_NEON) && defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <cstddef>

namespace snls::kern {
namespace {

const float64x2_t k_conj_sign = {-1.0, 1.0};

inline float64x2_t cmul_one(float64x2_t va, float64x2_t vb) {
    // (ar*br - ai*bi, ai*br + ar*bi)
    const float64x2_t t1 = vmulq_f64(va, vdupq_laneq_f64(vb, 0));
    const float64x2_t t2 = vmulq_f64(vextq_f64(va, va, 1), vdupq_laneq_f64(vb, 1));
    return vaddq_f64(t1, vmulq_f64(t2, k_conj_sign));
}

void v_cmul(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        vst1q_f64(dst + 2 * i, cmul_one(vld1q_f64(a + 2 * i), vld1q_f64(b + 2 * i)));
    }
}

void v_scal(double* x, double sr, double si, std::size_t n) {
    const float64x2_t s = {sr, si};
    for (std::size_t i = 0; i < n; ++i) {
        vst1q_f64(x + 2 * i, cmul_one(vld1q_f64(x + 2 * i), s));
    }
}

void v_axpy(double* y, const double* x, double sr, double si, std::size_t n) {
    const float64x2_t s = {sr, si};
    for (std::size_t i = 0; i < n; ++i) {
        const float64x2_t t = cmul_one(vld1q_f64(x + 2 * i), s);
        vst1q_f64(y + 2 * i, vaddq_f64(vld1q_f64(y + 2 * i), t));
    }
}

inline double combine4(float64x2_t acc01, float64x2_t acc23) {
    return (vgetq_lane_f64(acc01, 0) + vgetq_lane_f64(acc01, 1)) +
           (vgetq_lane_f64(acc23, 0) + vgetq_lane_f64(acc23, 1));
}

double v_abs2_sum(const double* a, std::size_t n) {
    const std::size_t m = 2 * n;
    const std::size_t mb = m & ~std::size_t(3);
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    for (std::size_t j = 0; j < mb; j += 4) {
        const float64x2_t v0 = vld1q_f64(a + j);
        const float64x2_t v1 = vld1q_f64(a + j + 2);
        acc01 = vaddq_f64(acc01, vmulq_f64(v0, v0));
        acc23 = vaddq_f64(acc23, vmulq_f64(v1, v1));
    }
    double lane[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                      vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
    for (std::size_t j = mb; j < m; ++j) lane[(j - mb) & 3] += a[j] * a[j];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double v_re_conj_dot(const double* a, const double* b, std::size_t n) {
    const std::size_t m = 2 * n;
    const std::size_t mb = m & ~std::size_t(3);
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    for (std::size_t j = 0; j < mb; j += 4) {
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + j), vld1q_f64(b + j)));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + j + 2), vld1q_f64(b + j + 2)));
    }
    double lane[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                      vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
    for (std::size_t j = mb; j < m; ++j) lane[(j - mb) & 3] += a[j] * b[j];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double v_weighted_abs2_sum(const double* w, const double* a, std::size_t n) {
    const std::size_t nb = n & ~std::size_t(3);
    float64x2_t acc01 = vdupq_n_f64(0.0), acc23 = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < nb; i += 4) {
        const float64x2_t v0 = vld1q_f64(a + 2 * i);
        const float64x2_t v1 = vld1q_f64(a + 2 * i + 2);
        const float64x2_t v2 = vld1q_f64(a + 2 * i + 4);
        const float64x2_t v3 = vld1q_f64(a + 2 * i + 6);
        const float64x2_t t01 = vpaddq_f64(vmulq_f64(v0, v0), vmulq_f64(v1, v1));
        const float64x2_t t23 = vpaddq_f64(vmulq_f64(v2, v2), vmulq_f64(v3, v3));
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(w + i), t01));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(w + i + 2), t23));
    }
    double lane[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                      vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
    for (std::size_t i = nb; i < n; ++i) {
        const std::size_t j = 2 * i;
        const double t = a[j] * a[j] + a[j + 1] * a[j + 1];
        lane[(i - nb) & 3] += w[i] * t;
    }
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double v_sup_abs2(const double* a, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const float64x2_t v = vld1q_f64(a + 2 * i);
        const float64x2_t sq = vmulq_f64(v, v);
        m = std::max(m, vgetq_lane_f64(sq, 0) + vgetq_lane_f64(sq, 1));
    }
    return m;
}

const Backend g_neon = {
    "neon", v_cmul, v_scal, v_axpy, v_abs2_sum, v_weighted_abs2_sum, v_re_conj_dot, v_sup_abs2,
};

}  // namespace

const Backend* neon_backend() { return &g_neon; }

}  // namespace snls::kern

#endif  // __ARM_NEON && __aarch64__

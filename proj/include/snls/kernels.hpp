#pragma once
// Low-level array kernels over interleaved complex data (re,im pairs).
//
// Every kernel exists in a scalar reference version and, where the target
// supports it, a SIMD version (AVX2 on x86-64, NEON on aarch64).  The SIMD
// versions are written so that they produce bit-identical results to the
// scalar reference:
//   - no FMA contraction anywhere (builds use -ffp-contract=off),
//   - elementwise kernels use the exact same per-element expressions,
//   - reductions accumulate into 4 lanes in the same blocked order and are
//     combined with the same final formula (l0+l1)+(l2+l3).
// This makes the choice of backend unobservable in results, which the test
// suite asserts with exact equality, and keeps replay deterministic across
// machines with different instruction sets.
//
// The active backend is resolved once: the SNLS_SIMD environment variable
// ("scalar", "avx2", "neon") overrides auto-detection; otherwise the best
// supported backend is used.

#include <complex>
#include <cstddef>

namespace snls::kern {

// A backend is a table of function pointers over raw interleaved buffers.
// `n` always counts complex elements; interleaved buffers hold 2n doubles,
// real-valued weight buffers hold n doubles.
struct Backend {
    const char* name;
    // dst[i] = a[i] * b[i] (complex multiply); dst may alias a or b
    void (*cmul)(const double* a, const double* b, double* dst, std::size_t n);
    // x[i] *= s
    void (*scal)(double* x, double s_re, double s_im, std::size_t n);
    // y[i] += s * x[i]
    void (*axpy)(double* y, const double* x, double s_re, double s_im, std::size_t n);
    // sum_i |a[i]|^2
    double (*abs2_sum)(const double* a, std::size_t n);
    // sum_i w[i] * |a[i]|^2, w real
    double (*weighted_abs2_sum)(const double* w, const double* a, std::size_t n);
    // sum_i Re(conj(a[i]) * b[i])  ==  plain dot product of the raw buffers
    double (*re_conj_dot)(const double* a, const double* b, std::size_t n);
    // max_i |a[i]|^2 (0 for n == 0; NaN entries may be skipped by max semantics)
    double (*sup_abs2)(const double* a, std::size_t n);
};

const Backend& scalar_backend();
const Backend* avx2_backend();  // nullptr when not compiled in / not supported
const Backend* neon_backend();  // nullptr on non-ARM builds

// Active backend (resolved once, thread-safe).  set_active(nullptr) re-runs
// the resolution including the SNLS_SIMD override; tests use set_active to
// pin a specific backend.
const Backend& active();
void set_active(const Backend* b);

// ---- convenience wrappers over std::complex buffers -------------------------

inline const double* raw(const std::complex<double>* p) {
    return reinterpret_cast<const double*>(p);
}
inline double* raw(std::complex<double>* p) { return reinterpret_cast<double*>(p); }

inline void cmul(const std::complex<double>* a, const std::complex<double>* b,
                 std::complex<double>* dst, std::size_t n) {
    active().cmul(raw(a), raw(b), raw(dst), n);
}
inline void scal(std::complex<double>* x, std::complex<double> s, std::size_t n) {
    active().scal(raw(x), s.real(), s.imag(), n);
}
inline void axpy(std::complex<double>* y, const std::complex<double>* x,
                 std::complex<double> s, std::size_t n) {
    active().axpy(raw(y), raw(x), s.real(), s.imag(), n);
}
inline double abs2_sum(const std::complex<double>* a, std::size_t n) {
    return active().abs2_sum(raw(a), n);
}
inline double weighted_abs2_sum(const double* w, const std::complex<double>* a, std::size_t n) {
    return active().weighted_abs2_sum(w, raw(a), n);
}
inline double re_conj_dot(const std::complex<double>* a, const std::complex<double>* b,
                          std::size_t n) {
    return active().re_conj_dot(raw(a), raw(b), n);
}
inline double sup_abs2(const std::complex<double>* a, std::size_t n) {
    return active().sup_abs2(raw(a), n);
}

}  // namespace snls::kern

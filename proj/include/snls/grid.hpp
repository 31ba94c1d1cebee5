#pragma once
// Periodic grid, complex grid functions, and time-sampled field series.
//
// The spatial domain is a centered torus [-L/2, L/2)^d standing in for R^d:
// profiles and data are kept supported well inside the box, so decay-at-
// infinity conditions and <x>-weighted norms remain meaningful at desk scale.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace snls {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

struct TorusGrid {
    int dim = 1;       // d in {1,2,3}
    int n = 2;         // points per axis, power of two
    double L = 1.0;    // box length

    TorusGrid() = default;
    TorusGrid(int dim_, int n_, double L_) : dim(dim_), n(n_), L(L_) { validate(); }

    void validate() const {
        if (dim < 1 || dim > 3) throw std::domain_error("TorusGrid: dim must be 1, 2 or 3");
        if (n < 2 || (n & (n - 1)) != 0)
            throw std::domain_error("TorusGrid: points_per_axis must be a power of two >= 2");
        if (!(L > 0.0)) throw std::domain_error("TorusGrid: box_length must be positive");
    }

    double h() const { return L / n; }
    std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
        return s;
    }
    // centered coordinate of index j on any axis: x_0 = -L/2, step h
    double coordinate(int j) const { return -0.5 * L + j * h(); }
    // mode index wrap: m >= n/2 represents the negative frequency m - n
    int wrap(int m) const { return m < n / 2 ? m : m - n; }
    double wavenumber(int m) const { return (2.0 * kPi / L) * wrap(m); }

    // decompose a flat row-major index into per-axis indices (axis 0 slowest)
    void axis_indices(std::size_t flat, int idx[3]) const {
        idx[0] = idx[1] = idx[2] = 0;
        switch (dim) {
            case 1: idx[0] = static_cast<int>(flat); break;
            case 2:
                idx[0] = static_cast<int>(flat / n);
                idx[1] = static_cast<int>(flat % n);
                break;
            default:
                idx[0] = static_cast<int>(flat / (std::size_t(n) * n));
                idx[1] = static_cast<int>((flat / n) % n);
                idx[2] = static_cast<int>(flat % n);
        }
    }

    bool operator==(const TorusGrid&) const = default;
};

struct ComplexField {
    TorusGrid grid;
    std::vector<cplx> values;

    ComplexField() = default;
    explicit ComplexField(const TorusGrid& g) : grid(g), values(g.size(), cplx(0.0, 0.0)) {}
    ComplexField(const TorusGrid& g, std::vector<cplx> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size())
            throw std::invalid_argument("ComplexField: value count does not match grid size");
    }

    std::size_t size() const { return values.size(); }
    double* raw() { return reinterpret_cast<double*>(values.data()); }
    const double* raw() const { return reinterpret_cast<const double*>(values.data()); }
};

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* where) {
    if (!(a == b)) throw std::invalid_argument(std::string(where) + ": grid mismatch");
}

bool all_finite(const ComplexField& f);

struct SpaceTimeSeries {
    std::vector<double> times;
    std::vector<ComplexField> fields;

    void validate() const {
        if (times.size() != fields.size())
            throw std::invalid_argument("SpaceTimeSeries: times/fields length mismatch");
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("SpaceTimeSeries: times must be strictly increasing");
        }
        for (std::size_t i = 1; i < fields.size(); ++i) {
            require_same_grid(fields[i].grid, fields[0].grid, "SpaceTimeSeries");
        }
    }
    bool empty() const { return times.empty(); }
    std::size_t size() const { return times.size(); }
    const TorusGrid& grid() const {
        if (fields.empty()) throw std::domain_error("SpaceTimeSeries: empty series has no grid");
        return fields[0].grid;
    }
};

}  // namespace snls

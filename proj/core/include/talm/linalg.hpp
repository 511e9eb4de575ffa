#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace talm {

using Vec = std::vector<double>;

/// Dense row-major matrix. Everything in this project is small (dozens of
/// rows/columns), so plain loops beat any BLAS dispatch overhead.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    return dot(a.data(), b.data(), a.size());
}

inline double l2_norm(const Vec& v) { return std::sqrt(dot(v, v)); }

/// y += alpha * x
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

/// out = M * v
inline Vec matvec(const Mat& m, const Vec& v) {
    assert(v.size() == m.cols);
    Vec out(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) out[r] = dot(m.row(r), v.data(), m.cols);
    return out;
}

/// M += alpha * u v^T (outer-product accumulate)
inline void outer_acc(Mat& m, double alpha, const Vec& u, const Vec& v) {
    assert(u.size() == m.rows && v.size() == m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) axpy(alpha * u[r], v.data(), m.row(r), m.cols);
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Mat& m) {
    for (double x : m.data)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace talm

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "unidex/common.hpp"

namespace unidex {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ConfigError("dot: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

// rows x cols matrix stored row-major in `m`, applied to x (size cols).
inline Vec matvec(const std::vector<double>& m, size_t rows, size_t cols, const Vec& x) {
    if (x.size() != cols || m.size() != rows * cols)
        throw ConfigError("matvec: dimension mismatch");
    Vec y(rows, 0.0);
    for (size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        const double* row = m.data() + r * cols;
        for (size_t c = 0; c < cols; ++c) s += row[c] * x[c];
        y[r] = s;
    }
    return y;
}

// y += m^T * g, where m is rows x cols and g has size rows. y has size cols.
inline void matvec_transpose_accum(const std::vector<double>& m, size_t rows, size_t cols,
                                   const Vec& g, Vec& y) {
    for (size_t r = 0; r < rows; ++r) {
        const double* row = m.data() + r * cols;
        for (size_t c = 0; c < cols; ++c) y[c] += row[c] * g[r];
    }
}

// grad_m += g (outer) x, for m of shape rows x cols.
inline void outer_accum(std::vector<double>& grad_m, const Vec& g, const Vec& x) {
    size_t rows = g.size(), cols = x.size();
    for (size_t r = 0; r < rows; ++r) {
        double gr = g[r];
        double* row = grad_m.data() + r * cols;
        for (size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace unidex

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "relex/error.hpp"
#include "relex/rng.hpp"

namespace relex {

// Dense row-major matrix of doubles. Vectors are stored as 1 x n.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

    std::span<double> row(int r) {
        return {v.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
    std::span<const double> row(int r) const {
        return {v.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && v == o.v; }

    static Matrix uniform(int r, int c, double scale, Rng& rng) {
        Matrix m(r, c);
        for (auto& x : m.v) x = rng.uniform(-scale, scale);
        return m;
    }

    // uniform in +-sqrt(6 / (fan_in + fan_out)) with fan_in = rows, fan_out = cols
    static Matrix glorot(int r, int c, Rng& rng) {
        return uniform(r, c, std::sqrt(6.0 / (r + c)), rng);
    }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double l2_norm(std::span<const double> x) {
    double s = 0.0;
    for (double e : x) s += e * e;
    return std::sqrt(s);
}

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (!a.same_shape(b))
        fail(std::string(what) + ": shape mismatch");
}

}  // namespace relex

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/errors.hpp"

namespace hdrnn {

/// Dense row-major matrix of doubles. Vectors are stored as 1 x n.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Tensor2(std::size_t r, std::size_t c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols) {
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + detail::dims(rows, cols));
        }
    }

    static Tensor2 vector(std::span<const double> v) {
        return Tensor2(1, v.size(), std::vector<double>(v.begin(), v.end()));
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
    }

    Tensor2 transposed() const {
        Tensor2 out(cols, rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) out(c, r) = (*this)(r, c);
        return out;
    }

    bool operator==(const Tensor2&) const = default;
};

inline void require_shape(const Tensor2& t, std::size_t r, std::size_t c, const char* what) {
    if (t.rows != r || t.cols != c) {
        throw DimensionError(std::string(what) + ": expected " + detail::dims(r, c) + ", got " +
                             detail::dims(t.rows, t.cols));
    }
}

// y += M x
inline void gemv_acc(const Tensor2& m, std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* mr = m.data.data() + r * m.cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += mr[c] * x[c];
        y[r] += acc;
    }
}

// y += M^T x
inline void gemv_t_acc(const Tensor2& m, std::span<const double> x, std::span<double> y) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* mr = m.data.data() + r * m.cols;
        const double xr = x[r];
        if (xr == 0.0) continue;
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += mr[c] * xr;
    }
}

// M += a b^T
inline void ger_acc(Tensor2& m, std::span<const double> a, std::span<const double> b) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double ar = a[r];
        if (ar == 0.0) continue;
        double* mr = m.data.data() + r * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) mr[c] += ar * b[c];
    }
}

} // namespace hdrnn

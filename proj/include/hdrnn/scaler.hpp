#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/errors.hpp"
#include "hdrnn/tensor.hpp"

namespace hdrnn {

/// Per-column standardization. Constant columns get a unit std.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> std;

    std::size_t columns() const { return mean.size(); }
    bool fitted() const { return !mean.empty(); }

    static Scaler identity(std::size_t cols) { return {std::vector<double>(cols, 0.0), std::vector<double>(cols, 1.0)}; }

    // Fits over the given rows of a set of matrices (two-pass for accuracy).
    template <typename RowVisitor>
    static Scaler fit_rows(std::size_t cols, RowVisitor&& visit) {
        Scaler s;
        s.mean.assign(cols, 0.0);
        s.std.assign(cols, 0.0);
        std::vector<double> lo(cols, HUGE_VAL), hi(cols, -HUGE_VAL);
        std::size_t n = 0;
        visit([&](std::span<const double> row) {
            for (std::size_t c = 0; c < cols; ++c) {
                s.mean[c] += row[c];
                lo[c] = std::min(lo[c], row[c]);
                hi[c] = std::max(hi[c], row[c]);
            }
            ++n;
        });
        if (n == 0) throw InputError("cannot fit a scaler on zero rows");
        for (double& m : s.mean) m /= static_cast<double>(n);
        visit([&](std::span<const double> row) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double d = row[c] - s.mean[c];
                s.std[c] += d * d;
            }
        });
        for (std::size_t c = 0; c < cols; ++c) {
            s.std[c] = std::sqrt(s.std[c] / static_cast<double>(n));
            if (lo[c] == hi[c]) {
                // constant column: exact centre, unit scale
                s.mean[c] = lo[c];
                s.std[c] = 1.0;
            } else if (!(s.std[c] > 0.0)) {
                s.std[c] = 1.0;
            }
        }
        return s;
    }

    static Scaler fit(const Tensor2& data) {
        return fit_rows(data.cols, [&](auto&& f) {
            for (std::size_t r = 0; r < data.rows; ++r) f(data.row(r));
        });
    }

    void apply_inplace(std::span<double> row_major, std::size_t cols) const {
        if (cols != columns())
            throw DimensionError("scaler has " + std::to_string(columns()) + " columns, data has " + std::to_string(cols));
        for (std::size_t k = 0; k < row_major.size(); ++k) {
            const std::size_t c = k % cols;
            row_major[k] = (row_major[k] - mean[c]) / std[c];
        }
    }

    Tensor2 apply(const Tensor2& data) const {
        Tensor2 out = data;
        apply_inplace(out.data, data.cols);
        return out;
    }

    Tensor2 invert(const Tensor2& z) const {
        if (z.cols != columns()) throw DimensionError("scaler inverse: column mismatch");
        Tensor2 out = z;
        for (std::size_t r = 0; r < z.rows; ++r)
            for (std::size_t c = 0; c < z.cols; ++c) out(r, c) = z(r, c) * std[c] + mean[c];
        return out;
    }

    bool operator==(const Scaler&) const = default;
};

} // namespace hdrnn

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hdrnn/errors.hpp"

namespace hdrnn {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Max-subtracted for stability; output is shift invariant in the logits.
inline std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw DimensionError("softmax: empty logit vector");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

} // namespace hdrnn

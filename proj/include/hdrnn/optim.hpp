#pragma once

#include <cmath>
#include <cstdint>

#include "hdrnn/errors.hpp"
#include "hdrnn/params.hpp"

namespace hdrnn {

struct AdamSettings {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    ParamSet m;
    ParamSet v;
    std::uint64_t step = 0;

    static OptimizerState for_params(const ParamSet& p) { return {zeros_like(p), zeros_like(p), 0}; }
};

inline void require_same_shape(const ParamSet& a, const ParamSet& b, const char* what) {
    if (a.dims() != b.dims() || a.encoder_depth != b.encoder_depth || a.Wc.rows != b.Wc.rows ||
        a.Wc.cols != b.Wc.cols || a.bc.size() != b.bc.size())
        throw DimensionError(std::string(what) + ": parameter shapes differ");
}

// Bias-corrected adaptive moment update, in place.
inline void adam_step(ParamSet& params, const ParamSet& grads, OptimizerState& state, const AdamSettings& s) {
    require_same_shape(params, grads, "adam_step");
    require_same_shape(params, state.m, "adam_step");
    require_same_shape(params, state.v, "adam_step");
    if (!(s.learning_rate > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
    if (s.beta1 < 0.0 || s.beta1 >= 1.0 || s.beta2 < 0.0 || s.beta2 >= 1.0)
        throw ConfigError("adam_step: betas must lie in [0, 1)");

    ++state.step;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));

    auto p = params.arrays();
    auto g = grads.arrays();
    auto m = state.m.arrays();
    auto v = state.v.arrays();
    for (std::size_t a = 0; a < p.size(); ++a) {
        for (std::size_t k = 0; k < p[a].size(); ++k) {
            const double gk = g[a][k];
            m[a][k] = s.beta1 * m[a][k] + (1.0 - s.beta1) * gk;
            v[a][k] = s.beta2 * v[a][k] + (1.0 - s.beta2) * gk * gk;
            const double mhat = m[a][k] / bc1;
            const double vhat = v[a][k] / bc2;
            p[a][k] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
        }
    }
}

inline double global_norm(const ParamSet& g) {
    double ss = 0.0;
    for (auto a : g.arrays())
        for (double x : a) ss += x * x;
    return std::sqrt(ss);
}

// Rescales g so its global L2 norm is at most max_norm. Returns the norm before clipping.
inline double clip_global_norm(ParamSet& g, double max_norm) {
    const double n = global_norm(g);
    if (n > max_norm && n > 0.0) {
        const double scale = max_norm / n;
        for (auto a : g.arrays())
            for (double& x : a) x *= scale;
    }
    return n;
}

} // namespace hdrnn

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/activations.hpp"
#include "hdrnn/errors.hpp"
#include "hdrnn/tensor.hpp"

namespace hdrnn {

// Gate blocks are stored in the order [f, i, g, o] in W, R and b.
enum Gate : std::size_t { kForget = 0, kInput = 1, kCell = 2, kOutput = 3 };

/// Weights of one LSTM layer.
///
/// W is (4*hidden x input), R is (4*hidden x hidden) and b has 4*hidden
/// entries. Row block k of each belongs to gate k in [f, i, g, o] order.
struct LstmParams {
    Tensor2 W;
    Tensor2 R;
    std::vector<double> b;

    LstmParams() = default;
    LstmParams(std::size_t input, std::size_t hidden)
        : W(4 * hidden, input), R(4 * hidden, hidden), b(4 * hidden, 0.0) {}

    std::size_t input_size() const { return W.cols; }
    std::size_t hidden_size() const { return R.cols; }

    void validate() const {
        const std::size_t h = R.cols;
        if (R.rows != 4 * h) throw DimensionError("LSTM R must be 4h x h, got " + detail::dims(R.rows, R.cols));
        if (W.rows != 4 * h) throw DimensionError("LSTM W must have 4h rows, got " + std::to_string(W.rows));
        if (b.size() != 4 * h) throw DimensionError("LSTM b must have 4h entries, got " + std::to_string(b.size()));
    }

    bool operator==(const LstmParams&) const = default;
};

/// Everything the backward pass needs from a forward pass.
struct LstmCache {
    Tensor2 x;      // T x input
    Tensor2 h;      // (T+1) x hidden, row 0 is h0
    Tensor2 c;      // (T+1) x hidden, row 0 is c0
    Tensor2 gates;  // T x 4*hidden, post-activation
    Tensor2 tanh_c; // T x hidden
};

struct LstmOutput {
    Tensor2 hidden; // T x hidden
    Tensor2 cell;   // T x hidden
    LstmCache cache;
};

struct LstmGrads {
    LstmParams params;
    Tensor2 input; // T x input
    Tensor2 h0;    // 1 x hidden
    Tensor2 c0;    // 1 x hidden
};

inline Tensor2 zero_state(std::size_t hidden) { return Tensor2(1, hidden); }

inline LstmOutput lstm_forward(const Tensor2& seq, const LstmParams& p, const Tensor2& h0, const Tensor2& c0) {
    p.validate();
    const std::size_t T = seq.rows;
    const std::size_t dx = p.input_size();
    const std::size_t dh = p.hidden_size();
    if (seq.cols != dx) {
        throw DimensionError("lstm_forward: sequence has " + std::to_string(seq.cols) + " features, layer expects " +
                             std::to_string(dx));
    }
    if (h0.size() != dh || c0.size() != dh) throw DimensionError("lstm_forward: initial state must have hidden size");
    if (!seq.all_finite() || !h0.all_finite() || !c0.all_finite())
        throw NumericError("lstm_forward: non-finite input");

    LstmOutput out;
    LstmCache& cache = out.cache;
    cache.x = seq;
    cache.h = Tensor2(T + 1, dh);
    cache.c = Tensor2(T + 1, dh);
    cache.gates = Tensor2(T, 4 * dh);
    cache.tanh_c = Tensor2(T, dh);
    std::copy(h0.data.begin(), h0.data.end(), cache.h.row(0).begin());
    std::copy(c0.data.begin(), c0.data.end(), cache.c.row(0).begin());

    std::vector<double> a(4 * dh);
    for (std::size_t t = 0; t < T; ++t) {
        std::copy(p.b.begin(), p.b.end(), a.begin());
        gemv_acc(p.W, seq.row(t), a);
        gemv_acc(p.R, cache.h.row(t), a);

        auto g = cache.gates.row(t);
        for (std::size_t j = 0; j < dh; ++j) {
            g[kForget * dh + j] = sigmoid(a[kForget * dh + j]);
            g[kInput * dh + j] = sigmoid(a[kInput * dh + j]);
            g[kCell * dh + j] = std::tanh(a[kCell * dh + j]);
            g[kOutput * dh + j] = sigmoid(a[kOutput * dh + j]);
        }
        auto c_prev = cache.c.row(t);
        auto c_next = cache.c.row(t + 1);
        auto h_next = cache.h.row(t + 1);
        auto tc = cache.tanh_c.row(t);
        for (std::size_t j = 0; j < dh; ++j) {
            c_next[j] = g[kForget * dh + j] * c_prev[j] + g[kInput * dh + j] * g[kCell * dh + j];
            tc[j] = std::tanh(c_next[j]);
            h_next[j] = g[kOutput * dh + j] * tc[j];
        }
    }

    out.hidden = Tensor2(T, dh, std::vector<double>(cache.h.data.begin() + static_cast<std::ptrdiff_t>(dh), cache.h.data.end()));
    out.cell = Tensor2(T, dh, std::vector<double>(cache.c.data.begin() + static_cast<std::ptrdiff_t>(dh), cache.c.data.end()));
    return out;
}

/// Backpropagation through time for one layer.
///
/// grad_h holds dL/dh_t for every step (T x hidden); grad_c_final is dL/dc_T.
/// Parameter gradients are summed over all time steps.
inline LstmGrads lstm_backward(const LstmCache& cache, const LstmParams& p, const Tensor2& grad_h,
                               const Tensor2& grad_c_final) {
    const std::size_t T = cache.x.rows;
    const std::size_t dx = p.input_size();
    const std::size_t dh = p.hidden_size();
    if (cache.x.cols != dx || cache.h.rows != T + 1 || cache.h.cols != dh)
        throw DimensionError("lstm_backward: cache does not match layer parameters");
    require_shape(grad_h, T, dh, "lstm_backward grad_h");
    if (grad_c_final.size() != dh) throw DimensionError("lstm_backward: grad_c_final must have hidden size");

    LstmGrads gr;
    gr.params = LstmParams(dx, dh);
    gr.input = Tensor2(T, dx);
    gr.h0 = Tensor2(1, dh);
    gr.c0 = Tensor2(1, dh);

    std::vector<double> dh_next(dh, 0.0);
    std::vector<double> dc_next(grad_c_final.data.begin(), grad_c_final.data.end());
    std::vector<double> da(4 * dh);
    std::vector<double> dh_prev(dh);

    for (std::size_t t = T; t-- > 0;) {
        auto g = cache.gates.row(t);
        auto tc = cache.tanh_c.row(t);
        auto c_prev = cache.c.row(t);
        auto gh = grad_h.row(t);
        for (std::size_t j = 0; j < dh; ++j) {
            const double f = g[kForget * dh + j];
            const double i = g[kInput * dh + j];
            const double gg = g[kCell * dh + j];
            const double o = g[kOutput * dh + j];
            const double dht = gh[j] + dh_next[j];
            const double d_o = dht * tc[j];
            const double dc = dc_next[j] + dht * o * (1.0 - tc[j] * tc[j]);
            da[kForget * dh + j] = dc * c_prev[j] * f * (1.0 - f);
            da[kInput * dh + j] = dc * gg * i * (1.0 - i);
            da[kCell * dh + j] = dc * i * (1.0 - gg * gg);
            da[kOutput * dh + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        ger_acc(gr.params.W, da, cache.x.row(t));
        ger_acc(gr.params.R, da, cache.h.row(t));
        for (std::size_t k = 0; k < 4 * dh; ++k) gr.params.b[k] += da[k];
        gemv_t_acc(p.W, da, gr.input.row(t));
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        gemv_t_acc(p.R, da, dh_prev);
        dh_next.swap(dh_prev);
    }
    std::copy(dh_next.begin(), dh_next.end(), gr.h0.data.begin());
    std::copy(dc_next.begin(), dc_next.end(), gr.c0.data.begin());
    return gr;
}

} // namespace hdrnn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/activations.hpp"
#include "hdrnn/errors.hpp"
#include "hdrnn/lstm.hpp"
#include "hdrnn/params.hpp"
#include "hdrnn/window.hpp"

namespace hdrnn {

/// Architecture and training settings of one supervised recurrent autoencoder.
///
/// The encoder maps each window to per-step latents; the decoder stack ends in
/// a layer whose hidden size equals the input feature count and whose hidden
/// state is the reconstruction. The classifier reads the final-step latent.
struct ModelConfig {
    std::size_t input_dim = 0;
    std::vector<std::size_t> encoder{16};
    std::vector<std::size_t> decoder; // last entry must equal input_dim
    std::size_t classes = 2;
    std::size_t horizon = 150;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1e-4;
    double learning_rate = 1e-2;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;

    std::vector<LayerDims> layer_dims() const {
        std::vector<LayerDims> d;
        std::size_t in = input_dim;
        for (auto h : encoder) {
            d.push_back({in, h});
            in = h;
        }
        for (auto h : decoder) {
            d.push_back({in, h});
            in = h;
        }
        return d;
    }

    void validate() const {
        if (input_dim == 0) throw ConfigError("model: input_dim must be positive");
        if (encoder.empty()) throw ConfigError("model: at least one encoder layer required");
        if (decoder.empty() || decoder.back() != input_dim)
            throw ConfigError("model: decoder output size must equal input_dim (" + std::to_string(input_dim) + ")");
        for (auto h : encoder)
            if (h == 0) throw ConfigError("model: zero-width encoder layer");
        for (auto h : decoder)
            if (h == 0) throw ConfigError("model: zero-width decoder layer");
        if (classes < 2) throw ConfigError("model: at least 2 classes required");
        if (horizon < 1) throw ConfigError("model: horizon must be >= 1");
        if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) throw ConfigError("model: loss weights must be >= 0");
        if (!(learning_rate > 0.0)) throw ConfigError("model: learning rate must be positive");
        if (batch_size == 0) throw ConfigError("model: batch size must be positive");
    }

    // Fills decoder with the mirrored encoder (minus the latent) followed by the output layer.
    static std::vector<std::size_t> mirrored_decoder(std::span<const std::size_t> encoder, std::size_t input_dim) {
        std::vector<std::size_t> d;
        for (std::size_t k = encoder.size() - 1; k-- > 0;) d.push_back(encoder[k]);
        d.push_back(input_dim);
        return d;
    }
};

inline ParamSet init_model_params(const ModelConfig& cfg) {
    cfg.validate();
    const auto dims = cfg.layer_dims();
    return init_params(dims, cfg.encoder.size(), cfg.classes, cfg.seed);
}

inline void check_params_match(const ParamSet& p, const ModelConfig& cfg) {
    p.validate();
    if (p.dims() != cfg.layer_dims() || p.encoder_depth != cfg.encoder.size() || p.class_count() != cfg.classes)
        throw DimensionError("parameters do not match the model configuration");
}

/// Forward state of one window; keeps every layer cache for the backward pass.
struct WindowPass {
    std::vector<LstmOutput> layers;
    std::vector<double> logits;
    std::vector<double> probs;

    const Tensor2& latent(std::size_t encoder_depth) const { return layers[encoder_depth - 1].hidden; }
    const Tensor2& reconstruction() const { return layers.back().hidden; }
};

inline WindowPass forward_window(std::span<const double> window, std::size_t horizon, const ParamSet& p) {
    const std::size_t dx = p.layers.front().input_size();
    if (window.size() != horizon * dx)
        throw DimensionError("window has " + std::to_string(window.size()) + " values, expected " +
                             std::to_string(horizon * dx));
    WindowPass pass;
    pass.layers.reserve(p.layers.size());
    Tensor2 x(horizon, dx, std::vector<double>(window.begin(), window.end()));
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        const auto& layer = p.layers[k];
        const Tensor2& in = k == 0 ? x : pass.layers[k - 1].hidden;
        pass.layers.push_back(lstm_forward(in, layer, zero_state(layer.hidden_size()), zero_state(layer.hidden_size())));
    }
    const Tensor2& z = pass.latent(p.encoder_depth);
    auto z_last = z.row(z.rows - 1);
    pass.logits.assign(p.bc.begin(), p.bc.end());
    gemv_acc(p.Wc, z_last, pass.logits);
    pass.probs = softmax(pass.logits);
    return pass;
}

/// Class probabilities of one window; runs the encoder stack only.
inline std::vector<double> class_probabilities(std::span<const double> window, std::size_t horizon,
                                               const ParamSet& p) {
    const std::size_t dx = p.layers.front().input_size();
    if (window.size() != horizon * dx)
        throw DimensionError("window has " + std::to_string(window.size()) + " values, expected " +
                             std::to_string(horizon * dx));
    Tensor2 h(horizon, dx, std::vector<double>(window.begin(), window.end()));
    for (std::size_t k = 0; k < p.encoder_depth; ++k) {
        const auto& layer = p.layers[k];
        h = lstm_forward(h, layer, zero_state(layer.hidden_size()), zero_state(layer.hidden_size())).hidden;
    }
    std::vector<double> logits(p.bc.begin(), p.bc.end());
    gemv_acc(p.Wc, h.row(h.rows - 1), logits);
    return softmax(logits);
}

struct ModelOutputs {
    std::vector<Tensor2> reconstructions; // N of (H x input)
    Tensor2 probs;                        // N x classes
    Tensor2 latents;                      // N x latent (final step)
};

inline ModelOutputs model_forward(const WindowBatch& batch, const ParamSet& params, const ModelConfig& cfg) {
    check_params_match(params, cfg);
    if (batch.features() != cfg.input_dim && !batch.empty())
        throw DimensionError("batch has " + std::to_string(batch.features()) + " features, model expects " +
                             std::to_string(cfg.input_dim));
    if (batch.horizon() != cfg.horizon && !batch.empty())
        throw DimensionError("batch horizon " + std::to_string(batch.horizon()) + " differs from model horizon " +
                             std::to_string(cfg.horizon));
    ModelOutputs out;
    out.probs = Tensor2(batch.size(), cfg.classes);
    out.latents = Tensor2(batch.size(), params.latent_size());
    out.reconstructions.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto pass = forward_window(batch.window(i), cfg.horizon, params);
        std::copy(pass.probs.begin(), pass.probs.end(), out.probs.row(i).begin());
        const auto& z = pass.latent(params.encoder_depth);
        auto zl = z.row(z.rows - 1);
        std::copy(zl.begin(), zl.end(), out.latents.row(i).begin());
        out.reconstructions.push_back(std::move(pass.layers.back().hidden));
    }
    return out;
}

struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1e-4;

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) throw ConfigError("loss weights must be nonnegative");
    }
};

inline LossWeights loss_weights(const ModelConfig& c) { return {c.lambda1, c.lambda2, c.lambda3}; }

struct LossTerms {
    double reconstruction = 0.0; // sum over windows of squared error
    double cross_entropy = 0.0;  // sum over windows
    double regularizer = 0.0;    // sum of squared weight entries
    double total = 0.0;          // weighted sum divided by N
};

inline constexpr double kLogClamp = 1e-12;

inline double squared_weight_sum(const ParamSet& p) {
    long double s = 0.0L;
    for (auto w : p.weight_matrices())
        for (double v : w) s += static_cast<long double>(v) * v;
    return static_cast<double>(s);
}

/// Supervised autoencoder objective:
///   (1/N) [ l1 * sum ||x - xhat||^2 + l2 * sum_s sum_c -y log p + l3 * sum ||W||^2 ]
/// with log arguments clamped at 1e-12.
inline LossTerms sae_loss(std::span<const Tensor2> recon, const WindowBatch& inputs, const Tensor2& probs,
                          std::span<const int> labels, const LossWeights& w, const ParamSet& params) {
    w.validate();
    const std::size_t n = inputs.size();
    if (recon.size() != n || probs.rows != n || labels.size() != n)
        throw DimensionError("sae_loss: reconstruction, probability and label counts must match the batch");
    if (n == 0) throw InputError("sae_loss: empty batch");
    // Sums are carried in extended precision so that central differences of
    // the total stay accurate at small step sizes.
    long double rec = 0.0L, ce = 0.0L;
    for (std::size_t s = 0; s < n; ++s) {
        auto x = inputs.window(s);
        if (recon[s].size() != x.size()) throw DimensionError("sae_loss: reconstruction shape mismatch");
        for (std::size_t k = 0; k < x.size(); ++k) {
            const long double d = static_cast<long double>(x[k]) - recon[s].data[k];
            rec += d * d;
        }
        const int y = labels[s];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols) throw LabelError("sae_loss: label out of range");
        ce -= std::log(static_cast<long double>(std::max(probs(s, static_cast<std::size_t>(y)), kLogClamp)));
    }
    long double reg = 0.0L;
    for (auto wm : params.weight_matrices())
        for (double v : wm) reg += static_cast<long double>(v) * v;
    LossTerms t;
    t.reconstruction = static_cast<double>(rec);
    t.cross_entropy = static_cast<double>(ce);
    t.regularizer = static_cast<double>(reg);
    t.total = static_cast<double>((w.lambda1 * rec + w.lambda2 * ce + w.lambda3 * reg) / static_cast<long double>(n));
    return t;
}

inline LossTerms sae_loss(const ModelOutputs& out, const WindowBatch& inputs, const LossWeights& w,
                          const ParamSet& params) {
    return sae_loss(out.reconstructions, inputs, out.probs, inputs.labels(), w, params);
}

/// Loss and exact gradient of the objective over the selected windows
/// (N = idx.size()), accumulated window by window in index order.
inline double loss_and_grad(const WindowBatch& batch, std::span<const std::size_t> idx, const ParamSet& p,
                            const LossWeights& w, ParamSet& grad) {
    w.validate();
    if (idx.empty()) throw InputError("loss_and_grad: empty minibatch");
    grad = zeros_like(p);
    const double n = static_cast<double>(idx.size());
    const std::size_t depth = p.encoder_depth;
    const std::size_t H = batch.horizon();
    double recon_sum = 0.0, ce_sum = 0.0;

    std::vector<double> dlogits(p.class_count());
    for (auto s : idx) {
        auto x = batch.window(s);
        const WindowPass pass = forward_window(x, H, p);
        const int y = batch.label(s);
        if (y < 0 || static_cast<std::size_t>(y) >= p.class_count()) throw LabelError("training label out of range");

        // classifier head
        ce_sum += -std::log(std::max(pass.probs[static_cast<std::size_t>(y)], kLogClamp));
        for (std::size_t c = 0; c < dlogits.size(); ++c)
            dlogits[c] = (w.lambda2 / n) * (pass.probs[c] - (static_cast<int>(c) == y ? 1.0 : 0.0));
        const Tensor2& z = pass.latent(depth);
        ger_acc(grad.Wc, dlogits, z.row(z.rows - 1));
        for (std::size_t c = 0; c < dlogits.size(); ++c) grad.bc[c] += dlogits[c];

        // reconstruction head
        const Tensor2& xr = pass.reconstruction();
        Tensor2 dh(H, xr.cols);
        for (std::size_t k = 0; k < xr.data.size(); ++k) {
            const double d = xr.data[k] - x[k];
            recon_sum += d * d;
            dh.data[k] = (w.lambda1 / n) * 2.0 * d;
        }

        for (std::size_t k = p.layers.size(); k-- > 0;) {
            if (k == depth - 1) {
                // latent also feeds the classifier at the final step
                gemv_t_acc(p.Wc, dlogits, dh.row(H - 1));
            }
            const auto& layer = p.layers[k];
            auto g = lstm_backward(pass.layers[k].cache, layer, dh, zero_state(layer.hidden_size()));
            auto& gl = grad.layers[k];
            for (std::size_t q = 0; q < gl.W.data.size(); ++q) gl.W.data[q] += g.params.W.data[q];
            for (std::size_t q = 0; q < gl.R.data.size(); ++q) gl.R.data[q] += g.params.R.data[q];
            for (std::size_t q = 0; q < gl.b.size(); ++q) gl.b[q] += g.params.b[q];
            if (k > 0) dh = std::move(g.input);
        }
    }

    const double reg = squared_weight_sum(p);
    const double rscale = w.lambda3 / n * 2.0;
    if (rscale != 0.0) {
        for (std::size_t k = 0; k < p.layers.size(); ++k) {
            for (std::size_t q = 0; q < p.layers[k].W.data.size(); ++q)
                grad.layers[k].W.data[q] += rscale * p.layers[k].W.data[q];
            for (std::size_t q = 0; q < p.layers[k].R.data.size(); ++q)
                grad.layers[k].R.data[q] += rscale * p.layers[k].R.data[q];
        }
        for (std::size_t q = 0; q < p.Wc.data.size(); ++q) grad.Wc.data[q] += rscale * p.Wc.data[q];
    }
    return (w.lambda1 * recon_sum + w.lambda2 * ce_sum + w.lambda3 * reg) / n;
}

inline std::vector<int> predict(const WindowBatch& batch, const ParamSet& p) {
    std::vector<int> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out[i] = static_cast<int>(argmax(class_probabilities(batch.window(i), batch.horizon(), p)));
    }
    return out;
}

inline double accuracy(std::span<const int> truth, std::span<const int> pred) {
    if (truth.size() != pred.size()) throw DimensionError("accuracy: length mismatch");
    if (truth.empty()) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
    return static_cast<double>(ok) / static_cast<double>(truth.size());
}

} // namespace hdrnn

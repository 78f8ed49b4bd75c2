#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdrnn/errors.hpp"
#include "hdrnn/model.hpp"
#include "hdrnn/optim.hpp"
#include "hdrnn/params.hpp"
#include "hdrnn/rng.hpp"
#include "hdrnn/scaler.hpp"
#include "hdrnn/window.hpp"

namespace hdrnn {

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;         // mean minibatch objective over the epoch
    double val_accuracy = 0.0; // NaN when no validation data was supplied
};

struct TrainedModel {
    ModelConfig config;
    ParamSet params;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0; // 0 means the initial parameters were kept
    Scaler scaler;              // applied to raw windows before the network
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch training of the supervised autoencoder with Adam and global-norm
/// clipping. With validation data the parameters of the epoch with the best
/// validation accuracy are returned (earliest epoch on ties).
inline TrainedModel train(const WindowBatch& train_set, const WindowBatch& val_set, const ModelConfig& cfg,
                          const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (train_set.empty()) throw InputError("train: training set is empty");
    if (train_set.features() != cfg.input_dim)
        throw DimensionError("train: data has " + std::to_string(train_set.features()) + " features, config says " +
                             std::to_string(cfg.input_dim));
    if (train_set.horizon() != cfg.horizon) throw DimensionError("train: data horizon differs from config horizon");
    train_set.check_labels(cfg.classes);
    if (!val_set.empty()) {
        val_set.check_labels(cfg.classes);
        if (val_set.features() != cfg.input_dim || val_set.horizon() != cfg.horizon)
            throw DimensionError("train: validation data shape differs from config");
    }

    TrainedModel tm;
    tm.config = cfg;
    tm.params = init_model_params(cfg);
    if (cfg.epochs == 0) return tm;

    ParamSet params = tm.params;
    OptimizerState opt = OptimizerState::for_params(params);
    AdamSettings adam;
    adam.learning_rate = cfg.learning_rate;
    const LossWeights w = loss_weights(cfg);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double best_acc = -1.0;
    ParamSet grad;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            std::span<const std::size_t> idx(order.data() + begin, end - begin);
            const double loss = loss_and_grad(train_set, idx, params, w, grad);
            if (!std::isfinite(loss) || !std::isfinite(global_norm(grad)))
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
            clip_global_norm(grad, cfg.clip_norm);
            adam_step(params, grad, opt, adam);
            loss_sum += loss;
            ++batches;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(batches);
        if (!val_set.empty()) {
            rec.val_accuracy = accuracy(val_set.labels(), predict(val_set, params));
            if (rec.val_accuracy > best_acc) {
                best_acc = rec.val_accuracy;
                tm.params = params;
                tm.best_epoch = epoch;
            }
        } else {
            rec.val_accuracy = std::numeric_limits<double>::quiet_NaN();
        }
        tm.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    if (val_set.empty()) {
        tm.params = std::move(params);
        tm.best_epoch = cfg.epochs;
    }
    return tm;
}

// ---------------------------------------------------------------------------
// Persistence: a plain-text header of config fields followed by the binary
// parameter container.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ',';
        if constexpr (std::is_floating_point_v<T>)
            os << fmt_double(v[i]);
        else
            os << v[i];
    }
    return os.str();
}

template <typename T>
std::vector<T> split_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if constexpr (std::is_floating_point_v<T>)
            out.push_back(std::stod(item));
        else
            out.push_back(static_cast<T>(std::stoull(item)));
    }
    return out;
}

} // namespace detail

inline constexpr std::string_view kModelHeader = "# hdrnn trained model v1";

inline void write_model(std::ostream& os, const TrainedModel& m) {
    using detail::fmt_double;
    using detail::join;
    const auto& c = m.config;
    os << kModelHeader << '\n';
    os << "input_dim = " << c.input_dim << '\n';
    os << "encoder = " << join(c.encoder) << '\n';
    os << "decoder = " << join(c.decoder) << '\n';
    os << "classes = " << c.classes << '\n';
    os << "horizon = " << c.horizon << '\n';
    os << "lambda1 = " << fmt_double(c.lambda1) << '\n';
    os << "lambda2 = " << fmt_double(c.lambda2) << '\n';
    os << "lambda3 = " << fmt_double(c.lambda3) << '\n';
    os << "learning_rate = " << fmt_double(c.learning_rate) << '\n';
    os << "epochs = " << c.epochs << '\n';
    os << "batch_size = " << c.batch_size << '\n';
    os << "seed = " << c.seed << '\n';
    os << "clip_norm = " << fmt_double(c.clip_norm) << '\n';
    os << "best_epoch = " << m.best_epoch << '\n';
    os << "scaler_mean = " << join(m.scaler.mean) << '\n';
    os << "scaler_std = " << join(m.scaler.std) << '\n';
    os << "end_header\n";
    write_params(os, m.params);
}

inline TrainedModel read_model(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kModelHeader) throw FormatError("not an hdrnn model file");
    TrainedModel m;
    auto& c = m.config;
    while (std::getline(is, line)) {
        if (line == "end_header") break;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw FormatError("malformed model header line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 3);
        try {
            if (key == "input_dim") c.input_dim = std::stoull(val);
            else if (key == "encoder") c.encoder = detail::split_list<std::size_t>(val);
            else if (key == "decoder") c.decoder = detail::split_list<std::size_t>(val);
            else if (key == "classes") c.classes = std::stoull(val);
            else if (key == "horizon") c.horizon = std::stoull(val);
            else if (key == "lambda1") c.lambda1 = std::stod(val);
            else if (key == "lambda2") c.lambda2 = std::stod(val);
            else if (key == "lambda3") c.lambda3 = std::stod(val);
            else if (key == "learning_rate") c.learning_rate = std::stod(val);
            else if (key == "epochs") c.epochs = std::stoull(val);
            else if (key == "batch_size") c.batch_size = std::stoull(val);
            else if (key == "seed") c.seed = std::stoull(val);
            else if (key == "clip_norm") c.clip_norm = std::stod(val);
            else if (key == "best_epoch") m.best_epoch = std::stoull(val);
            else if (key == "scaler_mean") m.scaler.mean = detail::split_list<double>(val);
            else if (key == "scaler_std") m.scaler.std = detail::split_list<double>(val);
            else throw FormatError("unknown model header key: " + key);
        } catch (const std::logic_error&) {
            throw FormatError("bad value for model header key " + key);
        }
    }
    m.params = read_params(is);
    check_params_match(m.params, c);
    return m;
}

inline void save_model(const std::string& path, const TrainedModel& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open " + path + " for writing");
    write_model(os, m);
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open " + path);
    return read_model(is);
}

inline void write_history(std::ostream& os, const std::vector<EpochRecord>& h) {
    os << "epoch,loss,val_accuracy\n";
    for (const auto& r : h) os << r.epoch << ',' << detail::fmt_double(r.loss) << ',' << detail::fmt_double(r.val_accuracy) << '\n';
}

} // namespace hdrnn

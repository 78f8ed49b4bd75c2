#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hdrnn/errors.hpp"
#include "hdrnn/model.hpp"
#include "hdrnn/rng.hpp"
#include "hdrnn/train.hpp"

namespace hdrnn {

/// Candidate values for each tuned hyperparameter. Empty lambda lists keep
/// the base configuration's value.
struct SearchSpace {
    std::vector<double> learning_rates;
    std::vector<std::size_t> encoder_depths;
    std::vector<std::size_t> units;
    std::vector<std::size_t> decoder_hidden_depths{0};
    std::vector<double> lambda1s;
    std::vector<double> lambda2s;
    std::vector<double> lambda3s;
    std::size_t stage_epochs = 2;

    // Reference grid: 1-3 encoder layers of 10..200 units
    // (step 2) and four learning rates.
    static SearchSpace reference_grid() {
        SearchSpace s;
        s.learning_rates = {1e-1, 2e-1, 3e-1, 1e-2};
        s.encoder_depths = {1, 2, 3};
        for (std::size_t u = 10; u <= 200; u += 2) s.units.push_back(u);
        s.decoder_hidden_depths = {0, 1};
        return s;
    }

    void validate() const {
        if (learning_rates.empty() || encoder_depths.empty() || units.empty() || decoder_hidden_depths.empty())
            throw ConfigError("tune: search space is empty");
        if (stage_epochs == 0) throw ConfigError("tune: stage_epochs must be positive");
    }
};

struct TrialRecord {
    std::size_t trial = 0;
    std::size_t stage = 0;
    std::size_t epochs = 0;
    double val_accuracy = 0.0;
};

struct TuneResult {
    ModelConfig best;
    std::size_t best_trial = 0;
    std::vector<ModelConfig> trials;
    std::vector<TrialRecord> log;
};

template <typename T>
T pick(Rng& rng, const std::vector<T>& v, T fallback) {
    return v.empty() ? fallback : v[rng.below(v.size())];
}

inline ModelConfig sample_config(const ModelConfig& base, const SearchSpace& space, Rng& rng) {
    ModelConfig c = base;
    c.learning_rate = pick(rng, space.learning_rates, base.learning_rate);
    const std::size_t depth = pick(rng, space.encoder_depths, std::size_t{1});
    c.encoder.clear();
    for (std::size_t k = 0; k < depth; ++k) c.encoder.push_back(space.units[rng.below(space.units.size())]);
    const std::size_t dec = pick(rng, space.decoder_hidden_depths, std::size_t{0});
    c.decoder.clear();
    for (std::size_t k = 0; k < dec; ++k) c.decoder.push_back(space.units[rng.below(space.units.size())]);
    c.decoder.push_back(base.input_dim);
    c.lambda1 = pick(rng, space.lambda1s, base.lambda1);
    c.lambda2 = pick(rng, space.lambda2s, base.lambda2);
    c.lambda3 = pick(rng, space.lambda3s, base.lambda3);
    c.seed = rng.bits();
    return c;
}

/// Successive halving: sample `budget` configurations, train each for a short
/// stage, keep the better half by validation accuracy, double the stage
/// length and repeat until one configuration remains.
inline TuneResult tune(const WindowBatch& train_set, const WindowBatch& val_set, const ModelConfig& base,
                       const SearchSpace& space, std::size_t budget, std::uint64_t seed,
                       const std::function<void(const TrialRecord&)>& on_trial = {}) {
    space.validate();
    if (budget == 0) throw ConfigError("tune: budget must be at least 1");
    if (val_set.empty()) throw ConfigError("tune: validation data is required");

    Rng rng(seed);
    TuneResult res;
    for (std::size_t t = 0; t < budget; ++t) res.trials.push_back(sample_config(base, space, rng));

    std::vector<std::size_t> alive(budget);
    std::iota(alive.begin(), alive.end(), std::size_t{0});
    std::size_t epochs = space.stage_epochs;
    std::size_t stage = 0;
    while (alive.size() > 1) {
        std::vector<std::pair<double, std::size_t>> scored;
        for (auto t : alive) {
            ModelConfig c = res.trials[t];
            c.epochs = epochs;
            const auto model = train(train_set, val_set, c);
            const double acc = accuracy(val_set.labels(), predict(val_set, model.params));
            TrialRecord rec{t, stage, epochs, acc};
            res.log.push_back(rec);
            if (on_trial) on_trial(rec);
            scored.emplace_back(acc, t);
        }
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        const std::size_t keep = std::max<std::size_t>(1, scored.size() / 2);
        alive.clear();
        for (std::size_t k = 0; k < keep; ++k) alive.push_back(scored[k].second);
        epochs *= 2;
        ++stage;
    }
    res.best_trial = alive.front();
    res.best = res.trials[res.best_trial];
    return res;
}

} // namespace hdrnn

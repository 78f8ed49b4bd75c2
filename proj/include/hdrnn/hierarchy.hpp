#pragma once

#include <algorithm>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/activations.hpp"
#include "hdrnn/dataio.hpp"
#include "hdrnn/errors.hpp"
#include "hdrnn/metrics.hpp"
#include "hdrnn/model.hpp"
#include "hdrnn/train.hpp"

namespace hdrnn {

/// Level-1 relabelling: the normal class and the incipient classes collapse
/// into one merged index; every other class keeps its relative order.
struct LabelMap {
    std::size_t classes = 0; // original alphabet size
    int normal = 0;
    std::vector<int> incipient;  // sorted
    std::vector<int> forward;    // original -> level-1
    std::vector<int> inverse;    // level-1 -> original (merged -> normal)
    int merged = 0;              // level-1 index of the merged group
    std::vector<int> level2;     // level-2 index -> original: normal, then incipient

    std::size_t level1_classes() const { return inverse.size(); }
    std::size_t level2_classes() const { return level2.size(); }
    bool is_merged(int original) const { return forward.at(static_cast<std::size_t>(original)) == merged; }

    int level2_index(int original) const {
        auto it = std::find(level2.begin(), level2.end(), original);
        if (it == level2.end()) throw LabelError("class " + std::to_string(original) + " is not a level-2 class");
        return static_cast<int>(it - level2.begin());
    }
};

inline LabelMap make_label_map(std::size_t classes, std::span<const int> incipient, int normal = 0) {
    if (normal < 0 || static_cast<std::size_t>(normal) >= classes) throw LabelError("normal class outside alphabet");
    LabelMap m;
    m.classes = classes;
    m.normal = normal;
    std::set<int> inc;
    for (int c : incipient) {
        if (c < 0 || static_cast<std::size_t>(c) >= classes)
            throw LabelError("incipient class " + std::to_string(c) + " is not in the label alphabet");
        if (c == normal) throw LabelError("the normal class cannot be listed as incipient");
        inc.insert(c);
    }
    m.incipient.assign(inc.begin(), inc.end());
    m.forward.assign(classes, -1);
    // indices follow the original order; the merged group takes the slot of
    // its lowest member
    int next = 0;
    m.merged = -1;
    for (std::size_t c = 0; c < classes; ++c) {
        const int ci = static_cast<int>(c);
        const bool grouped = ci == normal || inc.count(ci);
        if (grouped) {
            if (m.merged < 0) {
                m.merged = next++;
                m.inverse.push_back(normal);
            }
            m.forward[c] = m.merged;
        } else {
            m.forward[c] = next++;
            m.inverse.push_back(ci);
        }
    }
    m.level2.push_back(normal);
    m.level2.insert(m.level2.end(), m.incipient.begin(), m.incipient.end());
    return m;
}

/// Maps original labels to level-1 labels.
inline std::pair<std::vector<int>, LabelMap> regroup_labels(std::span<const int> labels, std::span<const int> incipient,
                                                            std::size_t classes, int normal = 0) {
    LabelMap m = make_label_map(classes, incipient, normal);
    std::vector<int> out;
    out.reserve(labels.size());
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes) throw LabelError("label outside alphabet");
        out.push_back(m.forward[static_cast<std::size_t>(l)]);
    }
    return {std::move(out), std::move(m)};
}

struct HierarchicalModel {
    TrainedModel level1; // scaler1 is level1.scaler
    TrainedModel level2; // scaler2 is level2.scaler
    LabelMap map;
};

struct Routing {
    int label = 0;
    bool used_level2 = false;
};

namespace detail {

inline std::vector<double> scaled_copy(std::span<const double> window, const Scaler& s) {
    std::vector<double> w(window.begin(), window.end());
    s.apply_inplace(w, s.columns());
    return w;
}

inline int classify_window(std::span<const double> raw, const TrainedModel& m) {
    auto w = scaled_copy(raw, m.scaler);
    return static_cast<int>(argmax(class_probabilities(w, m.config.horizon, m.params)));
}

} // namespace detail

/// Routes one raw window (H x d_x, row-major) through the hierarchy.
inline Routing infer(std::span<const double> window_raw, const HierarchicalModel& model) {
    const std::size_t expect = model.level1.config.horizon * model.level1.config.input_dim;
    if (window_raw.size() != expect)
        throw DimensionError("infer: window has " + std::to_string(window_raw.size()) + " values, expected " +
                             std::to_string(expect));
    const int l1 = detail::classify_window(window_raw, model.level1);
    if (l1 != model.map.merged) return {model.map.inverse.at(static_cast<std::size_t>(l1)), false};
    const int l2 = detail::classify_window(window_raw, model.level2);
    return {model.map.level2.at(static_cast<std::size_t>(l2)), true};
}

/// Predictions of a single-level model on raw windows (scaled with its scaler).
inline std::vector<int> predict_raw(const WindowBatch& raw, const TrainedModel& m) {
    return predict(scaled(raw, m.scaler), m.params);
}

inline std::vector<Routing> infer_batch(const WindowBatch& raw, const HierarchicalModel& model) {
    std::vector<Routing> out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out.push_back(infer(raw.window(i), model));
    return out;
}

/// Full-alphabet report of the hierarchy on raw windows with original labels.
/// An incipient window that level 1 routes to a non-incipient fault counts
/// against its true class like any other error.
inline EvalReport combined_metrics(const WindowBatch& test_raw, const HierarchicalModel& model) {
    if (test_raw.empty()) throw InputError("combined_metrics: empty test set");
    std::vector<int> pred;
    pred.reserve(test_raw.size());
    for (const auto& r : infer_batch(test_raw, model)) pred.push_back(r.label);
    auto cm = confusion(test_raw.labels(), pred, model.map.classes);
    auto rep = make_report(cm, static_cast<std::size_t>(model.map.normal));
    rep.horizon = model.level1.config.horizon;
    return rep;
}

/// Keeps the windows whose label is in `keep`, relabelled by `relabel`.
template <typename Relabel>
inline WindowBatch select_windows(const WindowBatch& b, const std::vector<int>& keep, Relabel&& relabel) {
    std::vector<std::size_t> idx;
    std::vector<int> labels;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (std::find(keep.begin(), keep.end(), b.label(i)) != keep.end()) {
            idx.push_back(i);
            labels.push_back(relabel(b.label(i)));
        }
    return b.subset(idx).with_labels(std::move(labels));
}

/// Fits the scaler on the training windows, then trains on scaled data.
inline TrainedModel train_scaled(const WindowBatch& train_raw, const WindowBatch& val_raw, const ModelConfig& cfg,
                                 const EpochCallback& on_epoch = {}) {
    const Scaler s = fit_scaler(train_raw);
    TrainedModel m = train(scaled(train_raw, s), val_raw.empty() ? val_raw : scaled(val_raw, s), cfg, on_epoch);
    m.scaler = s;
    return m;
}

inline WindowBatch level1_view(const WindowBatch& b, const LabelMap& map) {
    std::vector<int> labels;
    labels.reserve(b.size());
    for (int l : b.labels()) labels.push_back(map.forward.at(static_cast<std::size_t>(l)));
    return b.with_labels(std::move(labels));
}

inline WindowBatch level2_view(const WindowBatch& b, const LabelMap& map) {
    return select_windows(b, map.level2, [&](int l) { return map.level2_index(l); });
}

struct HierarchyData {
    WindowBatch level1_train, level1_val; // raw windows, original labels
    WindowBatch level2_train, level2_val; // raw windows, original labels (may be excited records)
};

/// Trains both levels. cfg1/cfg2 class counts are overwritten from the map.
inline HierarchicalModel train_hierarchical(const HierarchyData& data, const LabelMap& map, ModelConfig cfg1,
                                            ModelConfig cfg2, const EpochCallback& on_epoch = {}) {
    cfg1.classes = map.level1_classes();
    cfg2.classes = map.level2_classes();
    HierarchicalModel h;
    h.map = map;
    h.level1 = train_scaled(level1_view(data.level1_train, map),
                            data.level1_val.empty() ? data.level1_val : level1_view(data.level1_val, map), cfg1,
                            on_epoch);
    auto l2_train = level2_view(data.level2_train, map);
    if (l2_train.empty()) throw InputError("no level-2 training windows");
    h.level2 = train_scaled(l2_train, data.level2_val.empty() ? data.level2_val : level2_view(data.level2_val, map),
                            cfg2, on_epoch);
    return h;
}

} // namespace hdrnn

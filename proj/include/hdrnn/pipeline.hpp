#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/config.hpp"
#include "hdrnn/dataio.hpp"
#include "hdrnn/hierarchy.hpp"
#include "hdrnn/metrics.hpp"
#include "hdrnn/plant.hpp"
#include "hdrnn/train.hpp"

namespace hdrnn {

/// Simulated records for one study, already separated by partition.
struct SurrogateRecords {
    std::vector<Series> train, val, test;
};

/// Simulates `train_records` + `val_records` + `test_records` independent
/// runs for each listed class. Every run draws its own plant noise seed and,
/// when excitation is on and random_phase is set, its own LFSR start state.
/// The phase is drawn even for passive runs, so a passive and an excited call
/// with the same `stream` see the same noise realizations.
inline SurrogateRecords simulate_surrogate(const RunConfig& rc, std::span<const int> classes,
                                           const std::optional<PrbsPlan>& excitation, std::uint64_t stream) {
    const auto& sur = rc.surrogate;
    auto find = [&](int label) -> const Scenario& {
        for (const auto& s : sur.scenarios)
            if (s.label == label) return s;
        throw LabelError("no scenario with label " + std::to_string(label));
    };
    Rng rng(rc.seed * 0x9e3779b97f4a7c15ULL + stream);
    SurrogateRecords out;
    const std::pair<std::vector<Series>*, std::size_t> parts[] = {
        {&out.train, sur.train_records}, {&out.val, sur.val_records}, {&out.test, sur.test_records}};
    const char* names[] = {"train", "val", "test"};
    for (std::size_t p = 0; p < 3; ++p)
        for (int c : classes) {
            const auto& sc = find(c);
            for (std::size_t r = 0; r < parts[p].second; ++r) {
                auto plant = rc.plant;
                plant.seed = rng.bits();
                const std::uint64_t phase = rng.bits();
                std::optional<PrbsPlan> plan = excitation;
                if (plan && sur.random_phase) plan->seed_state = static_cast<std::uint32_t>(1 + phase % plan->period());
                auto sim = simulate_scenario(plant, sc.fault, plan, sur.record_length, sc.label);
                parts[p].first->push_back({std::move(sim.records), std::move(sim.labels),
                                           std::string(names[p]) + "_c" + std::to_string(c) + "_r" + std::to_string(r)});
            }
        }
    return out;
}

inline WindowBatch window_records(std::vector<Series> records, std::size_t horizon, std::size_t stride) {
    return make_windows(std::make_shared<const std::vector<Series>>(std::move(records)), horizon, stride);
}

struct SurrogateWindows {
    WindowBatch train, val, test;
};

inline SurrogateWindows window_surrogate(SurrogateRecords r, std::size_t horizon, std::size_t stride) {
    return {window_records(std::move(r.train), horizon, stride), window_records(std::move(r.val), horizon, stride),
            window_records(std::move(r.test), horizon, stride)};
}

/// Mean detection rate of the incipient classes for a level-2 model, scored
/// on the normal and incipient windows of a raw batch.
inline double level2_incipient_accuracy(const TrainedModel& level2, const WindowBatch& test_raw, const LabelMap& map) {
    const auto view = level2_view(test_raw, map);
    if (view.empty()) throw InputError("no level-2 test windows");
    const auto cm = confusion(view.labels(), predict_raw(view, level2), map.level2_classes());
    double s = 0.0;
    for (std::size_t k = 1; k < map.level2_classes(); ++k) s += fdr(cm, k);
    return s / static_cast<double>(map.level2_classes() - 1);
}

inline std::vector<std::size_t> non_incipient_faults(const LabelMap& map) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < map.classes; ++c)
        if (static_cast<int>(c) != map.normal && !map.is_merged(static_cast<int>(c))) out.push_back(c);
    return out;
}

inline std::vector<std::size_t> incipient_faults(const LabelMap& map) {
    return {map.incipient.begin(), map.incipient.end()};
}

struct SurrogateStudy {
    EvalReport flat;
    EvalReport hierarchical;
    double flat_non_incipient = 0.0;
    double flat_incipient = 0.0;
    double hierarchical_non_incipient = 0.0;
    std::vector<std::uint64_t> level2_seeds;
    std::vector<double> level2_passive; // per seed
    std::vector<double> level2_excited; // per seed
    PrbsPlan plan;

    double mean_passive() const { return mean(level2_passive); }
    double mean_excited() const { return mean(level2_excited); }

  private:
    static double mean(const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    }
};

using StudyCallback = std::function<void(const std::string&)>;

/// Flat versus hierarchical classification on passive data, then level 2
/// with and without excitation for each of `level2_seeds`.
inline SurrogateStudy run_surrogate_study(const RunConfig& rc, std::size_t level2_seeds,
                                          const StudyCallback& log = {}) {
    auto say = [&](const std::string& s) {
        if (log) log(s);
    };
    SurrogateStudy st;
    const auto map = make_label_map(rc.surrogate.scenarios.size(), rc.data.incipient, rc.data.normal_class);
    std::vector<int> all;
    for (const auto& s : rc.surrogate.scenarios) all.push_back(s.label);
    const std::size_t H = rc.model.horizon, stride = rc.data.stride;

    auto passive = window_surrogate(simulate_surrogate(rc, all, std::nullopt, 0), H, stride);
    ModelConfig flat_cfg = rc.model;
    flat_cfg.classes = map.classes;
    TrainedModel flat = train_scaled(passive.train, passive.val, flat_cfg);
    st.flat = make_report(confusion(passive.test.labels(), predict_raw(passive.test, flat), map.classes),
                          static_cast<std::size_t>(map.normal));
    st.flat.horizon = H;
    st.flat_non_incipient = mean_fdr(st.flat, non_incipient_faults(map));
    st.flat_incipient = mean_fdr(st.flat, incipient_faults(map));
    say("flat: non-incipient " + percent(st.flat_non_incipient) + "%, incipient " + percent(st.flat_incipient) + "%");

    const auto h = train_hierarchical({passive.train, passive.val, passive.train, passive.val}, map, rc.model,
                                      rc.level2_model);
    st.hierarchical = combined_metrics(passive.test, h);
    st.hierarchical_non_incipient = mean_fdr(st.hierarchical, non_incipient_faults(map));
    say("hierarchical: non-incipient " + percent(st.hierarchical_non_incipient) + "%");

    st.plan = resolve_prbs_plan(rc);
    for (std::size_t k = 0; k < level2_seeds; ++k) {
        RunConfig seeded = rc;
        seeded.seed = rc.seed + 1000 * (k + 1);
        ModelConfig cfg = rc.level2_model;
        cfg.seed = seeded.seed;
        cfg.classes = map.level2_classes();
        st.level2_seeds.push_back(seeded.seed);
        for (int excite = 0; excite < 2; ++excite) {
            auto data = window_surrogate(
                simulate_surrogate(seeded, map.level2, excite ? std::optional<PrbsPlan>(st.plan) : std::nullopt, 1),
                H, stride);
            const auto m = train_scaled(level2_view(data.train, map), level2_view(data.val, map), cfg);
            const double acc = level2_incipient_accuracy(m, data.test, map);
            (excite ? st.level2_excited : st.level2_passive).push_back(acc);
            say("level 2 seed " + std::to_string(seeded.seed) + (excite ? " excited: " : " passive: ") + percent(acc) +
                "%");
        }
    }
    return st;
}

/// Result of ingest, two-level training and evaluation on a directory of
/// d00.dat / dNN.dat / dNN_te.dat files.
struct TepRun {
    EvalReport report;
    HierarchicalModel model;
    std::size_t train_windows = 0;
    std::size_t val_windows = 0;
    std::size_t test_windows = 0;
    std::vector<std::string> notes;
};

inline std::vector<int> tep_fault_list(std::size_t faults = 20) {
    std::vector<int> f(faults);
    for (std::size_t i = 0; i < faults; ++i) f[i] = static_cast<int>(i + 1);
    return f;
}

inline TepRun run_tep_pipeline(const std::string& dir, const RunConfig& rc, const std::vector<int>& faults,
                               const StudyCallback& log = {}) {
    auto tep = load_tep_directory(dir, faults, rc.data.tep_onset);
    const std::size_t classes = faults.size() + 1;
    const auto map = make_label_map(classes, rc.data.incipient, rc.data.normal_class);
    const std::size_t H = rc.model.horizon;
    auto train_all = window_records(std::move(tep.train), H, rc.data.stride);
    auto test = window_records(std::move(tep.test), H, rc.data.stride);
    const double fit = rc.data.split.train + rc.data.split.val;
    const SplitSpec fractions{rc.data.split.train / fit, rc.data.split.val / fit, 0.0, rc.data.split.contiguous};
    auto parts = split(train_all, fractions, rc.seed);

    TepRun run;
    run.notes = std::move(tep.notes);
    run.train_windows = parts.train.size();
    run.val_windows = parts.val.size();
    run.test_windows = test.size();
    if (log)
        log("windows: train " + std::to_string(run.train_windows) + ", val " + std::to_string(run.val_windows) +
            ", test " + std::to_string(run.test_windows));
    run.model = train_hierarchical({parts.train, parts.val, parts.train, parts.val}, map, rc.model, rc.level2_model);
    run.report = combined_metrics(test, run.model);
    run.report.model_id = "hierarchical H=" + std::to_string(H);
    run.report.dataset_id = dir;
    return run;
}

} // namespace hdrnn

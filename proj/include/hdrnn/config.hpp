#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdrnn/dataio.hpp"
#include "hdrnn/errors.hpp"
#include "hdrnn/model.hpp"
#include "hdrnn/plant.hpp"
#include "hdrnn/prbs.hpp"
#include "hdrnn/tune.hpp"

namespace hdrnn {

// Run configuration: one JSON document per run. Keys (all optional except
// "seed"):
//
//   seed                 unsigned integer, required
//   model                ModelConfig fields: input_dim, encoder, decoder,
//                        classes, horizon, lambda1, lambda2, lambda3,
//                        learning_rate, epochs, batch_size, clip_norm
//   level2_model         same keys; fields left out fall back to "model"
//   data                 stride, normal_class, incipient, split {train, val,
//                        test, contiguous}, tep_onset
//   plant                A, B, E, C (arrays of rows), loops [{output, input,
//                        kp, ki, setpoint, setpoint_range}], noise_std,
//                        disturbance_mean, disturbance_std, sample_time
//   surrogate            record_length, train_records, val_records,
//                        test_records, random_phase, scenarios [{label, name,
//                        incipient, fault {kind, site, channel, magnitude,
//                        onset, deadband}}]
//   prbs                 safety, amplitude_fraction, loop, burst_length,
//                        burst_interval, plan (an explicit PrbsPlan record)
//   tune                 budget, stage_epochs, learning_rates, encoder_depths,
//                        units, decoder_hidden_depths
//
// Model seeds that are not given are derived from the run seed.

struct DataSettings {
    std::size_t stride = 1;
    int normal_class = 0;
    std::vector<int> incipient;
    SplitSpec split{0.7, 0.15, 0.15, true};
    std::size_t tep_onset = 160;
};

struct SurrogateSettings {
    std::size_t record_length = 240;
    std::size_t train_records = 6;
    std::size_t val_records = 2;
    std::size_t test_records = 2;
    bool random_phase = true;
    std::vector<Scenario> scenarios = default_scenarios();
};

struct PrbsSettings {
    double safety = 2.0;
    double amplitude_fraction = 0.02;
    std::size_t loop = 0;
    std::size_t burst_length = 40;
    std::size_t burst_interval = 80;
    std::optional<PrbsPlan> plan; // overrides the designed plan
};

struct TuneSettings {
    std::size_t budget = 6;
    SearchSpace space;
};

struct RunConfig {
    std::uint64_t seed = 0;
    ModelConfig model;
    ModelConfig level2_model;
    DataSettings data;
    PlantConfig plant;
    SurrogateSettings surrogate;
    PrbsSettings prbs;
    TuneSettings tune;
};

/// Settings for the built-in surrogate study.
inline ModelConfig surrogate_model_defaults() {
    ModelConfig c;
    c.input_dim = 8;
    c.encoder = {16};
    c.decoder = {8};
    c.classes = 13;
    c.horizon = 80;
    c.lambda1 = 0.002;
    c.lambda2 = 1.0;
    c.lambda3 = 1e-4;
    c.learning_rate = 0.01;
    c.epochs = 30;
    c.batch_size = 64;
    return c;
}

namespace detail {

inline Tensor2 matrix_from_json(const nlohmann::json& j, const char* name) {
    if (!j.is_array() || j.empty()) throw ConfigError(std::string("config: ") + name + " must be a nonempty array of rows");
    const std::size_t rows = j.size(), cols = j[0].size();
    Tensor2 m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw ConfigError(std::string("config: ") + name + " has ragged rows");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

inline nlohmann::json matrix_to_json(const Tensor2& m) {
    auto j = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows; ++r) j.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return j;
}

inline void model_from_json(const nlohmann::json& j, ModelConfig& c) {
    c.input_dim = j.value("input_dim", c.input_dim);
    c.encoder = j.value("encoder", c.encoder);
    if (j.contains("decoder"))
        c.decoder = j["decoder"].get<std::vector<std::size_t>>();
    else if (j.contains("encoder") || j.contains("input_dim"))
        c.decoder = ModelConfig::mirrored_decoder(c.encoder, c.input_dim);
    c.classes = j.value("classes", c.classes);
    c.horizon = j.value("horizon", c.horizon);
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    c.lambda3 = j.value("lambda3", c.lambda3);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
}

inline nlohmann::json model_to_json(const ModelConfig& c) {
    return {{"input_dim", c.input_dim},   {"encoder", c.encoder},
            {"decoder", c.decoder},       {"classes", c.classes},
            {"horizon", c.horizon},       {"lambda1", c.lambda1},
            {"lambda2", c.lambda2},       {"lambda3", c.lambda3},
            {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
            {"batch_size", c.batch_size}, {"clip_norm", c.clip_norm},
            {"seed", c.seed}};
}

inline void plant_from_json(const nlohmann::json& j, PlantConfig& p) {
    if (j.contains("A")) p.A = matrix_from_json(j["A"], "A");
    if (j.contains("B")) p.B = matrix_from_json(j["B"], "B");
    if (j.contains("E")) p.E = matrix_from_json(j["E"], "E");
    if (j.contains("C")) p.C = matrix_from_json(j["C"], "C");
    if (j.contains("loops")) {
        p.loops.clear();
        for (const auto& l : j["loops"]) {
            LoopConfig lc;
            lc.output = l.at("output").get<std::size_t>();
            lc.input = l.at("input").get<std::size_t>();
            lc.kp = l.value("kp", lc.kp);
            lc.ki = l.value("ki", lc.ki);
            lc.setpoint = l.value("setpoint", lc.setpoint);
            lc.setpoint_range = l.value("setpoint_range", lc.setpoint_range);
            p.loops.push_back(lc);
        }
    }
    p.noise_std = j.value("noise_std", p.noise_std);
    p.disturbance_mean = j.value("disturbance_mean", p.disturbance_mean);
    p.disturbance_std = j.value("disturbance_std", p.disturbance_std);
    p.sample_time = j.value("sample_time", p.sample_time);
}

inline nlohmann::json plant_to_json(const PlantConfig& p) {
    auto loops = nlohmann::json::array();
    for (const auto& l : p.loops)
        loops.push_back({{"output", l.output},
                         {"input", l.input},
                         {"kp", l.kp},
                         {"ki", l.ki},
                         {"setpoint", l.setpoint},
                         {"setpoint_range", l.setpoint_range}});
    return {{"A", matrix_to_json(p.A)},
            {"B", matrix_to_json(p.B)},
            {"E", matrix_to_json(p.E)},
            {"C", matrix_to_json(p.C)},
            {"loops", loops},
            {"noise_std", p.noise_std},
            {"disturbance_mean", p.disturbance_mean},
            {"disturbance_std", p.disturbance_std},
            {"sample_time", p.sample_time}};
}

} // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object()) throw ConfigError("config: top level must be an object");
        if (!j.contains("seed")) throw ConfigError("config: \"seed\" is required");
        RunConfig rc;
        rc.seed = j.at("seed").get<std::uint64_t>();
        rc.model = surrogate_model_defaults();
        rc.model.seed = rc.seed;
        if (j.contains("model")) detail::model_from_json(j["model"], rc.model);
        rc.level2_model = rc.model;
        rc.level2_model.seed = rc.model.seed + 1;
        if (j.contains("level2_model")) detail::model_from_json(j["level2_model"], rc.level2_model);

        rc.plant = default_plant(rc.seed);
        if (j.contains("plant")) detail::plant_from_json(j["plant"], rc.plant);
        rc.plant.seed = rc.seed;

        if (j.contains("data")) {
            const auto& d = j["data"];
            rc.data.stride = d.value("stride", rc.data.stride);
            rc.data.normal_class = d.value("normal_class", rc.data.normal_class);
            rc.data.tep_onset = d.value("tep_onset", rc.data.tep_onset);
            if (d.contains("incipient")) rc.data.incipient = d["incipient"].get<std::vector<int>>();
            if (d.contains("split")) {
                const auto& s = d["split"];
                rc.data.split.train = s.value("train", rc.data.split.train);
                rc.data.split.val = s.value("val", rc.data.split.val);
                rc.data.split.test = s.value("test", rc.data.split.test);
                rc.data.split.contiguous = s.value("contiguous", rc.data.split.contiguous);
            }
        }
        if (j.contains("surrogate")) {
            const auto& s = j["surrogate"];
            auto& o = rc.surrogate;
            o.record_length = s.value("record_length", o.record_length);
            o.train_records = s.value("train_records", o.train_records);
            o.val_records = s.value("val_records", o.val_records);
            o.test_records = s.value("test_records", o.test_records);
            o.random_phase = s.value("random_phase", o.random_phase);
            if (s.contains("scenarios")) {
                o.scenarios.clear();
                for (const auto& e : s["scenarios"]) {
                    Scenario sc;
                    sc.label = e.at("label").get<int>();
                    sc.name = e.value("name", "class " + std::to_string(sc.label));
                    sc.incipient = e.value("incipient", false);
                    if (e.contains("fault") && !e["fault"].is_null()) sc.fault = fault_from_json(e["fault"]);
                    o.scenarios.push_back(sc);
                }
            }
        }
        if (!j.contains("data") || !j["data"].contains("incipient"))
            rc.data.incipient = incipient_labels(rc.surrogate.scenarios);

        if (j.contains("prbs")) {
            const auto& p = j["prbs"];
            rc.prbs.safety = p.value("safety", rc.prbs.safety);
            rc.prbs.amplitude_fraction = p.value("amplitude_fraction", rc.prbs.amplitude_fraction);
            rc.prbs.loop = p.value("loop", rc.prbs.loop);
            rc.prbs.burst_length = p.value("burst_length", rc.prbs.burst_length);
            rc.prbs.burst_interval = p.value("burst_interval", rc.prbs.burst_interval);
            if (p.contains("plan")) rc.prbs.plan = plan_from_json(p["plan"]);
        }
        if (j.contains("tune")) {
            const auto& t = j["tune"];
            rc.tune.budget = t.value("budget", rc.tune.budget);
            rc.tune.space.stage_epochs = t.value("stage_epochs", rc.tune.space.stage_epochs);
            rc.tune.space.learning_rates = t.value("learning_rates", rc.tune.space.learning_rates);
            rc.tune.space.encoder_depths = t.value("encoder_depths", rc.tune.space.encoder_depths);
            rc.tune.space.units = t.value("units", rc.tune.space.units);
            rc.tune.space.decoder_hidden_depths = t.value("decoder_hidden_depths", rc.tune.space.decoder_hidden_depths);
        }
        if (rc.tune.space.learning_rates.empty()) rc.tune.space = SearchSpace::reference_grid();
        rc.data.split.validate();
        if (rc.data.stride == 0) throw ConfigError("config: data.stride must be at least 1");
        return rc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline nlohmann::json config_to_json(const RunConfig& rc) {
    nlohmann::json j;
    j["seed"] = rc.seed;
    j["model"] = detail::model_to_json(rc.model);
    j["level2_model"] = detail::model_to_json(rc.level2_model);
    j["data"] = {{"stride", rc.data.stride},
                 {"normal_class", rc.data.normal_class},
                 {"incipient", rc.data.incipient},
                 {"tep_onset", rc.data.tep_onset},
                 {"split",
                  {{"train", rc.data.split.train},
                   {"val", rc.data.split.val},
                   {"test", rc.data.split.test},
                   {"contiguous", rc.data.split.contiguous}}}};
    j["plant"] = detail::plant_to_json(rc.plant);
    auto scen = nlohmann::json::array();
    for (const auto& s : rc.surrogate.scenarios)
        scen.push_back({{"label", s.label},
                        {"name", s.name},
                        {"incipient", s.incipient},
                        {"fault", s.fault ? fault_to_json(*s.fault) : nlohmann::json()}});
    j["surrogate"] = {{"record_length", rc.surrogate.record_length},
                      {"train_records", rc.surrogate.train_records},
                      {"val_records", rc.surrogate.val_records},
                      {"test_records", rc.surrogate.test_records},
                      {"random_phase", rc.surrogate.random_phase},
                      {"scenarios", scen}};
    j["prbs"] = {{"safety", rc.prbs.safety},
                 {"amplitude_fraction", rc.prbs.amplitude_fraction},
                 {"loop", rc.prbs.loop},
                 {"burst_length", rc.prbs.burst_length},
                 {"burst_interval", rc.prbs.burst_interval}};
    if (rc.prbs.plan) j["prbs"]["plan"] = plan_to_json(*rc.prbs.plan);
    j["tune"] = {{"budget", rc.tune.budget},
                 {"stage_epochs", rc.tune.space.stage_epochs},
                 {"learning_rates", rc.tune.space.learning_rates},
                 {"encoder_depths", rc.tune.space.encoder_depths},
                 {"units", rc.tune.space.units},
                 {"decoder_hidden_depths", rc.tune.space.decoder_hidden_depths}};
    return j;
}

inline RunConfig parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Excitation plan for the configured plant: explicit plan if given, else
/// designed from the target loop's time constants.
inline PrbsPlan resolve_prbs_plan(const RunConfig& rc) {
    if (rc.prbs.plan) return *rc.prbs.plan;
    const auto [tau_ol, tau_cl] = loop_time_constants(rc.plant, rc.prbs.loop);
    const auto band = design_band(tau_ol, tau_cl, rc.prbs.safety, std::numbers::pi / rc.plant.sample_time);
    auto plan = plan_from_band(band, rc.plant.sample_time,
                               rc.prbs.amplitude_fraction * rc.plant.loops.at(rc.prbs.loop).setpoint_range);
    plan.burst_length = rc.prbs.burst_length;
    plan.burst_interval = rc.prbs.burst_interval;
    plan.target = "setpoint" + std::to_string(rc.prbs.loop);
    return plan;
}

} // namespace hdrnn

// hdrnn command-line driver. Each subcommand runs one pipeline stage and
// exchanges plain files with the next one.
//
// Exit status: 0 on success, 1 for input or configuration errors, 2 when
// training diverges numerically.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hdrnn/hdrnn.hpp"

namespace fs = std::filesystem;
using namespace hdrnn;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out << text;
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

bool parse_switch(const std::string& v) { return v == "on"; }

LabelMap label_map(const RunConfig& rc) {
    return make_label_map(rc.model.classes, rc.data.incipient, rc.data.normal_class);
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

// ---- simulate ----

struct SimulateArgs {
    std::string config, out, prbs = "off";
    std::vector<int> classes;
};

int run_simulate(const SimulateArgs& a) {
    const auto rc = load_config(a.config);
    std::vector<int> classes = a.classes;
    if (classes.empty())
        for (const auto& s : rc.surrogate.scenarios) classes.push_back(s.label);
    std::optional<PrbsPlan> plan;
    if (parse_switch(a.prbs)) plan = resolve_prbs_plan(rc);

    const auto recs = simulate_surrogate(rc, classes, plan, 0);
    fs::create_directories(a.out);
    nlohmann::json manifest;
    manifest["seed"] = rc.seed;
    manifest["prbs"] = plan ? plan_to_json(*plan) : nlohmann::json();
    manifest["columns"] = rc.plant.recorded_dim();
    manifest["records"] = nlohmann::json::array();
    const std::pair<const std::vector<Series>*, const char*> parts[] = {
        {&recs.train, "train"}, {&recs.val, "val"}, {&recs.test, "test"}};
    for (const auto& [list, name] : parts)
        for (const auto& s : *list) {
            const std::string file = s.id + ".dat";
            save_matrix((fs::path(a.out) / file).string(), s.values);
            save_labels((fs::path(a.out) / (file + ".labels")).string(), s.labels);
            manifest["records"].push_back({{"file", file}, {"partition", name}});
        }
    write_text((fs::path(a.out) / "manifest.json").string(), manifest.dump(2) + "\n");
    if (plan) write_text((fs::path(a.out) / "prbs_plan.json").string(), plan_to_json(*plan).dump(2) + "\n");
    std::cout << "wrote " << manifest["records"].size() << " records to " << a.out << '\n';
    return 0;
}

// ---- ingest ----

struct IngestArgs {
    std::string config, out, manifest, tep;
    std::vector<std::string> inputs;
};

int partition_tag(const std::string& name) {
    if (name == "train") return 0;
    if (name == "val") return 1;
    if (name == "test") return 2;
    throw FormatError("manifest: unknown partition '" + name + "'");
}

int run_ingest(const IngestArgs& a) {
    const auto rc = load_config(a.config);
    const std::size_t H = rc.model.horizon, stride = rc.data.stride;
    const int sources = !a.manifest.empty() + !a.tep.empty() + !a.inputs.empty();
    if (sources != 1) throw InputError("ingest: give exactly one of --manifest, --tep or --input");

    WindowArchive arch;
    if (!a.manifest.empty()) {
        const auto j = read_json(a.manifest);
        const fs::path base = fs::path(a.manifest).parent_path();
        std::vector<Series> raw;
        std::vector<int> tags;
        try {
            for (const auto& r : j.at("records")) {
                raw.push_back(load_series((base / r.at("file").get<std::string>()).string(), rc.model.input_dim,
                                          rc.data.normal_class));
                tags.push_back(partition_tag(r.at("partition").get<std::string>()));
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(a.manifest + ": " + e.what());
        }
        arch = build_partitioned_archive(std::move(raw), tags, H, stride);
    } else if (!a.tep.empty()) {
        if (rc.model.classes < 2) throw ConfigError("ingest: model.classes must be at least 2");
        auto tep = load_tep_directory(a.tep, tep_fault_list(rc.model.classes - 1), rc.data.tep_onset);
        for (const auto& n : tep.notes) log_line(n);
        std::vector<Series> raw = std::move(tep.train);
        std::vector<int> tags(raw.size(), -1);
        for (auto& s : tep.test) {
            raw.push_back(std::move(s));
            tags.push_back(2);
        }
        const double fit = rc.data.split.train + rc.data.split.val;
        const SplitSpec fractions{rc.data.split.train / fit, rc.data.split.val / fit, 0.0, rc.data.split.contiguous};
        arch = build_partitioned_archive(std::move(raw), tags, H, stride, fractions, rc.seed);
    } else {
        std::vector<Series> raw;
        for (const auto& p : a.inputs) raw.push_back(load_series(p, rc.model.input_dim, rc.data.normal_class));
        arch = build_archive(std::move(raw), H, rc.data.split, rc.seed, stride);
    }
    save_archive(a.out, arch);
    std::cout << "archive " << a.out << ": train " << arch.data.train.size() << ", val " << arch.data.val.size()
              << ", test " << arch.data.test.size() << " windows\n";
    return 0;
}

// ---- train / tune ----

struct TrainArgs {
    std::string config, archive, out, history, mode = "flat";
};

struct ModeData {
    WindowBatch train, val;
    ModelConfig cfg;
};

ModeData mode_data(const RunConfig& rc, const WindowArchive& arch, const std::string& mode) {
    const auto map = label_map(rc);
    if (mode == "flat") return {arch.data.train, arch.data.val, rc.model};
    if (mode == "level1") {
        ModelConfig c = rc.model;
        c.classes = map.level1_classes();
        return {level1_view(arch.data.train, map), level1_view(arch.data.val, map), c};
    }
    if (mode == "level2") {
        ModelConfig c = rc.level2_model;
        c.classes = map.level2_classes();
        return {level2_view(arch.data.train, map), level2_view(arch.data.val, map), c};
    }
    throw InputError("unknown mode '" + mode + "' (flat, level1 or level2)");
}

int run_train(const TrainArgs& a) {
    const auto rc = load_config(a.config);
    const auto arch = load_archive(a.archive);
    const auto d = mode_data(rc, arch, a.mode);
    const auto model = train_scaled(d.train, d.val, d.cfg, [](const EpochRecord& r) {
        log_line("epoch " + std::to_string(r.epoch) + " loss " + detail::fmt_double(r.loss) + " val_accuracy " +
                 detail::fmt_double(r.val_accuracy));
    });
    save_model(a.out, model);
    if (!a.history.empty()) {
        std::ostringstream os;
        write_history(os, model.history);
        write_text(a.history, os.str());
    }
    std::cout << a.mode << " model " << a.out << ": best epoch " << model.best_epoch << '\n';
    return 0;
}

struct TuneArgs {
    std::string config, archive, out, log, mode = "flat";
};

int run_tune(const TuneArgs& a) {
    const auto rc = load_config(a.config);
    const auto arch = load_archive(a.archive);
    auto d = mode_data(rc, arch, a.mode);
    const Scaler s = fit_scaler(d.train);
    const auto train_s = scaled(d.train, s), val_s = scaled(d.val, s);
    const auto res = tune(train_s, val_s, d.cfg, rc.tune.space, rc.tune.budget, rc.seed, [](const TrialRecord& r) {
        log_line("trial " + std::to_string(r.trial) + " stage " + std::to_string(r.stage) + " epochs " +
                 std::to_string(r.epochs) + " val_accuracy " + detail::fmt_double(r.val_accuracy));
    });
    if (!a.log.empty()) {
        std::ostringstream os;
        os << "trial,stage,epochs,val_accuracy\n";
        for (const auto& r : res.log)
            os << r.trial << ',' << r.stage << ',' << r.epochs << ',' << detail::fmt_double(r.val_accuracy) << '\n';
        write_text(a.log, os.str());
    }
    auto model = train(train_s, val_s, res.best);
    model.scaler = s;
    save_model(a.out, model);
    std::cout << "best trial " << res.best_trial << ", model " << a.out << '\n';
    return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
    std::string config, archive, model, level1, level2, level2_archive, json_out, csv_out, prbs = "off";
    bool hierarchical = false;
};

void emit_report(const EvalReport& r, const std::string& json_out, const std::string& csv_out) {
    if (!json_out.empty()) write_text(json_out, report_to_json(r).dump(2) + "\n");
    if (!csv_out.empty()) {
        std::ostringstream os;
        write_confusion_csv(os, r.matrix);
        write_text(csv_out, os.str());
    }
    write_report_table(std::cout, r);
}

std::string sibling(const std::string& path, const std::string& tag) {
    if (path.empty()) return {};
    fs::path p(path);
    return (p.parent_path() / (p.stem().string() + "." + tag + p.extension().string())).string();
}

int run_evaluate(const EvaluateArgs& a) {
    const auto rc = load_config(a.config);
    const auto arch = load_archive(a.archive);
    const auto& test = arch.data.test;
    if (test.empty()) throw InputError("evaluate: archive has no test windows");
    const bool excite = parse_switch(a.prbs);

    if (!a.hierarchical) {
        if (a.model.empty()) throw InputError("evaluate: --model is required without --hierarchical");
        const auto m = load_model(a.model);
        auto r = make_report(confusion(test.labels(), predict_raw(test, m), m.config.classes),
                             static_cast<std::size_t>(rc.data.normal_class));
        r.horizon = m.config.horizon;
        r.model_id = a.model;
        r.dataset_id = a.archive;
        emit_report(r, a.json_out, a.csv_out);
        return 0;
    }

    if (a.level1.empty() || a.level2.empty())
        throw InputError("evaluate: --hierarchical needs --level1 and --level2");
    HierarchicalModel h{load_model(a.level1), load_model(a.level2), label_map(rc)};
    auto r = combined_metrics(test, h);
    r.model_id = "hierarchical " + a.level1 + " + " + a.level2;
    r.dataset_id = a.archive;
    emit_report(r, a.json_out, a.csv_out);

    // Level 2 alone on its own data, optionally recorded under excitation.
    const WindowArchive* l2src = &arch;
    WindowArchive excited;
    if (excite) {
        if (a.level2_archive.empty()) throw InputError("evaluate: --prbs on needs --level2-archive");
        excited = load_archive(a.level2_archive);
        l2src = &excited;
    }
    const auto view = level2_view(l2src->data.test, h.map);
    if (view.empty()) return 0;
    auto r2 = make_report(confusion(view.labels(), predict_raw(view, h.level2), h.map.level2_classes()), 0);
    r2.horizon = h.level2.config.horizon;
    r2.model_id = a.level2;
    r2.dataset_id = excite ? a.level2_archive : a.archive;
    std::cout << "\nlevel 2 (" << (excite ? "excited" : "passive") << " data)\n";
    emit_report(r2, sibling(a.json_out, "level2"), sibling(a.csv_out, "level2"));
    return 0;
}

// ---- prbs design ----

struct PrbsArgs {
    std::string config, out, sequence;
    std::optional<double> tau_ol, tau_cl, amplitude;
    double safety = 2.0, sample_time = 1.0;
};

int run_prbs_design(const PrbsArgs& a) {
    PrbsPlan plan;
    BandSpec band;
    if (!a.config.empty() && !a.tau_ol && !a.tau_cl) {
        const auto rc = load_config(a.config);
        plan = resolve_prbs_plan(rc);
        const auto [ol, cl] = loop_time_constants(rc.plant, rc.prbs.loop);
        band = design_band(ol, cl, rc.prbs.safety, std::numbers::pi / rc.plant.sample_time);
    } else {
        if (!a.tau_ol || !a.tau_cl) throw InputError("prbs design: give --config or both --tau-ol and --tau-cl");
        band = design_band(*a.tau_ol, *a.tau_cl, a.safety, std::numbers::pi / a.sample_time);
        plan = plan_from_band(band, a.sample_time, a.amplitude.value_or(1.0));
    }
    nlohmann::json j;
    j["band"] = {{"omega_low", band.omega_low}, {"omega_high", band.omega_high},
                 {"omega_nyquist", band.omega_nyquist}, {"safety", band.safety},
                 {"tau_ol", band.tau_ol}, {"tau_cl", band.tau_cl}};
    j["plan"] = plan_to_json(plan);
    const std::string text = j.dump(2) + "\n";
    if (a.out.empty())
        std::cout << text;
    else
        write_text(a.out, text);
    if (!a.sequence.empty()) {
        std::ostringstream os;
        for (double v : generate_mls(plan.register_length, plan.taps, 1, plan.seed_state, plan.amplitude))
            os << detail::fmt_double(v) << '\n';
        write_text(a.sequence, os.str());
    }
    return 0;
}

// ---- report ----

int run_report(const std::string& in, const std::string& csv_out) {
    const auto r = report_from_json(read_json(in));
    emit_report(r, {}, csv_out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical recurrent fault classification with excitation design"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Simulate plant scenarios into data files");
    c_sim->add_option("--config", sim.config, "Run configuration")->required();
    c_sim->add_option("--out", sim.out, "Output directory")->required();
    c_sim->add_option("--prbs", sim.prbs, "Set-point excitation")->check(CLI::IsMember({"on", "off"}));
    c_sim->add_option("--classes", sim.classes, "Scenario labels to simulate (default all)")->delimiter(',');

    IngestArgs ing;
    auto* c_ing = app.add_subcommand("ingest", "Build a standardized window archive");
    c_ing->add_option("--config", ing.config, "Run configuration")->required();
    c_ing->add_option("--out", ing.out, "Archive file")->required();
    c_ing->add_option("--manifest", ing.manifest, "manifest.json written by simulate");
    c_ing->add_option("--tep", ing.tep, "Directory of d00.dat, dNN.dat and dNN_te.dat files");
    c_ing->add_option("--input", ing.inputs, "Delimited data files with optional .labels sidecars");

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train one model");
    c_tr->add_option("--config", tr.config, "Run configuration")->required();
    c_tr->add_option("--archive", tr.archive, "Window archive")->required();
    c_tr->add_option("--out", tr.out, "Model file")->required();
    c_tr->add_option("--mode", tr.mode, "flat, level1 or level2")
        ->check(CLI::IsMember({"flat", "level1", "level2"}));
    c_tr->add_option("--history", tr.history, "Per-epoch CSV");

    TuneArgs tu;
    auto* c_tu = app.add_subcommand("tune", "Successive-halving search, then train the winner");
    c_tu->add_option("--config", tu.config, "Run configuration")->required();
    c_tu->add_option("--archive", tu.archive, "Window archive")->required();
    c_tu->add_option("--out", tu.out, "Model file for the best configuration")->required();
    c_tu->add_option("--mode", tu.mode, "flat, level1 or level2")
        ->check(CLI::IsMember({"flat", "level1", "level2"}));
    c_tu->add_option("--log", tu.log, "Trial CSV");

    EvaluateArgs ev;
    auto* c_ev = app.add_subcommand("evaluate", "Score a model on the archive's test windows");
    c_ev->add_option("--config", ev.config, "Run configuration")->required();
    c_ev->add_option("--archive", ev.archive, "Window archive")->required();
    c_ev->add_option("--model", ev.model, "Flat model");
    c_ev->add_flag("--hierarchical", ev.hierarchical, "Route through level 1 and level 2");
    c_ev->add_option("--level1", ev.level1, "Level-1 model");
    c_ev->add_option("--level2", ev.level2, "Level-2 model");
    c_ev->add_option("--prbs", ev.prbs, "Score level 2 on excited data")->check(CLI::IsMember({"on", "off"}));
    c_ev->add_option("--level2-archive", ev.level2_archive, "Archive recorded with excitation");
    c_ev->add_option("--json", ev.json_out, "Report JSON");
    c_ev->add_option("--csv", ev.csv_out, "Confusion matrix CSV");

    PrbsArgs pr;
    auto* c_prbs = app.add_subcommand("prbs", "Excitation tools");
    c_prbs->require_subcommand(1);
    auto* c_design = c_prbs->add_subcommand("design", "Design the frequency band and PRBS plan");
    c_design->add_option("--config", pr.config, "Run configuration (plant time constants)");
    c_design->add_option("--tau-ol", pr.tau_ol, "Open-loop time constant");
    c_design->add_option("--tau-cl", pr.tau_cl, "Closed-loop time constant");
    c_design->add_option("--safety", pr.safety, "Safety factor");
    c_design->add_option("--sample-time", pr.sample_time, "Sample time");
    c_design->add_option("--amplitude", pr.amplitude, "Signal amplitude");
    c_design->add_option("--out", pr.out, "Band and plan JSON (default stdout)");
    c_design->add_option("--sequence", pr.sequence, "One period of the sequence, one value per clock");

    std::string rep_in, rep_csv;
    auto* c_rep = app.add_subcommand("report", "Render a report JSON as text tables");
    c_rep->add_option("--in", rep_in, "Report JSON")->required();
    c_rep->add_option("--csv", rep_csv, "Confusion matrix CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*c_sim) return run_simulate(sim);
        if (*c_ing) return run_ingest(ing);
        if (*c_tr) return run_train(tr);
        if (*c_tu) return run_tune(tu);
        if (*c_ev) return run_evaluate(ev);
        if (*c_design) return run_prbs_design(pr);
        if (*c_rep) return run_report(rep_in, rep_csv);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

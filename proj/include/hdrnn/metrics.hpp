#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdrnn/errors.hpp"

namespace hdrnn {

/// Row = true class, column = predicted class.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<std::uint64_t> counts;

    explicit ConfusionMatrix(std::size_t m = 0) : classes(m), counts(m * m, 0) {}

    std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * classes + p]; }
    std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    std::uint64_t row_sum(std::size_t t) const {
        std::uint64_t s = 0;
        for (std::size_t p = 0; p < classes; ++p) s += at(t, p);
        return s;
    }
    std::uint64_t col_sum(std::size_t p) const {
        std::uint64_t s = 0;
        for (std::size_t t = 0; t < classes; ++t) s += at(t, p);
        return s;
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, std::size_t m) {
    if (truth.size() != pred.size())
        throw InputError("confusion: " + std::to_string(truth.size()) + " true labels vs " +
                         std::to_string(pred.size()) + " predictions");
    ConfusionMatrix cm(m);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || pred[i] < 0 || static_cast<std::size_t>(truth[i]) >= m ||
            static_cast<std::size_t>(pred[i]) >= m)
            throw InputError("confusion: label outside [0, " + std::to_string(m) + ") at position " +
                             std::to_string(i));
        ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i]));
    }
    return cm;
}

/// A rate kept as an exact ratio of counts.
struct Rate {
    std::uint64_t count = 0;
    std::uint64_t total = 0;
    double value() const { return static_cast<double>(count) / static_cast<double>(total); }
    bool operator==(const Rate&) const = default;
};

/// Detection rate of class i: share of true-i samples predicted as i.
inline Rate fdr_rate(const ConfusionMatrix& cm, std::size_t i) {
    if (i >= cm.classes) throw InputError("fdr: class out of range");
    const auto n = cm.row_sum(i);
    if (n == 0) throw InputError("undefined metric: class " + std::to_string(i) + " has no samples");
    return {cm.at(i, i), n};
}

/// False alarm rate: share of true-normal samples predicted as any other class.
inline Rate far_rate(const ConfusionMatrix& cm, std::size_t normal) {
    if (normal >= cm.classes) throw InputError("far: class out of range");
    const auto n = cm.row_sum(normal);
    if (n == 0) throw InputError("undefined metric: no normal samples");
    return {n - cm.at(normal, normal), n};
}

inline double fdr(const ConfusionMatrix& cm, std::size_t i) { return fdr_rate(cm, i).value(); }
inline double far(const ConfusionMatrix& cm, std::size_t normal) { return far_rate(cm, normal).value(); }

/// TP / (TP + FP) for class i; empty when nothing was predicted as i.
inline std::optional<double> precision(const ConfusionMatrix& cm, std::size_t i) {
    if (i >= cm.classes) throw InputError("precision: class out of range");
    const auto n = cm.col_sum(i);
    if (n == 0) return std::nullopt;
    return static_cast<double>(cm.at(i, i)) / static_cast<double>(n);
}

struct EvalReport {
    ConfusionMatrix matrix;
    std::size_t normal_class = 0;
    std::vector<std::optional<double>> fdr;       // per class; empty if the class has no samples
    std::vector<std::optional<double>> precision; // per class
    std::optional<double> far;
    std::vector<std::size_t> average_set; // classes entering average_fdr
    std::optional<double> average_fdr;
    std::string model_id;
    std::string dataset_id;
    std::size_t horizon = 0;
};

/// Builds a report; `average_set` defaults to every fault class with samples.
inline EvalReport make_report(const ConfusionMatrix& cm, std::size_t normal_class,
                              std::optional<std::vector<std::size_t>> average_set = std::nullopt) {
    EvalReport r;
    r.matrix = cm;
    r.normal_class = normal_class;
    for (std::size_t i = 0; i < cm.classes; ++i) {
        r.fdr.push_back(cm.row_sum(i) ? std::optional<double>(fdr(cm, i)) : std::nullopt);
        r.precision.push_back(precision(cm, i));
    }
    if (normal_class < cm.classes && cm.row_sum(normal_class)) r.far = far(cm, normal_class);
    if (average_set) {
        r.average_set = *average_set;
    } else {
        for (std::size_t i = 0; i < cm.classes; ++i)
            if (i != normal_class && r.fdr[i]) r.average_set.push_back(i);
    }
    if (!r.average_set.empty()) {
        double s = 0.0;
        for (auto i : r.average_set) {
            if (i >= cm.classes || !r.fdr[i]) throw InputError("average set names a class without samples");
            s += *r.fdr[i];
        }
        r.average_fdr = s / static_cast<double>(r.average_set.size());
    }
    return r;
}

inline double mean_fdr(const EvalReport& r, std::span<const std::size_t> classes) {
    if (classes.empty()) throw InputError("mean_fdr: empty class set");
    double s = 0.0;
    for (auto i : classes) {
        if (i >= r.fdr.size() || !r.fdr[i]) throw InputError("mean_fdr: class " + std::to_string(i) + " has no samples");
        s += *r.fdr[i];
    }
    return s / static_cast<double>(classes.size());
}

inline std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
    return buf;
}

// ---- serialization ----

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }
inline std::optional<double> json_opt(const nlohmann::json& j) {
    return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

} // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["model_id"] = r.model_id;
    j["dataset_id"] = r.dataset_id;
    j["horizon"] = r.horizon;
    j["classes"] = r.matrix.classes;
    j["normal_class"] = r.normal_class;
    j["confusion"] = r.matrix.counts;
    auto& fd = j["fdr"] = nlohmann::json::array();
    auto& pr = j["precision"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.fdr.size(); ++i) {
        fd.push_back(detail::opt_json(r.fdr[i]));
        pr.push_back(detail::opt_json(r.precision[i]));
    }
    j["far"] = detail::opt_json(r.far);
    j["average_set"] = r.average_set;
    j["average_fdr"] = detail::opt_json(r.average_fdr);
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.model_id = j.at("model_id").get<std::string>();
        r.dataset_id = j.at("dataset_id").get<std::string>();
        r.horizon = j.at("horizon").get<std::size_t>();
        r.matrix = ConfusionMatrix(j.at("classes").get<std::size_t>());
        r.matrix.counts = j.at("confusion").get<std::vector<std::uint64_t>>();
        if (r.matrix.counts.size() != r.matrix.classes * r.matrix.classes)
            throw FormatError("report: confusion size does not match class count");
        r.normal_class = j.at("normal_class").get<std::size_t>();
        for (const auto& v : j.at("fdr")) r.fdr.push_back(detail::json_opt(v));
        for (const auto& v : j.at("precision")) r.precision.push_back(detail::json_opt(v));
        r.far = detail::json_opt(j.at("far"));
        r.average_set = j.at("average_set").get<std::vector<std::size_t>>();
        r.average_fdr = detail::json_opt(j.at("average_fdr"));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
}

/// Confusion matrix as CSV with a header row of predicted classes.
inline void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm) {
    os << "true\\pred";
    for (std::size_t p = 0; p < cm.classes; ++p) os << ',' << p;
    os << '\n';
    for (std::size_t t = 0; t < cm.classes; ++t) {
        os << t;
        for (std::size_t p = 0; p < cm.classes; ++p) os << ',' << cm.at(t, p);
        os << '\n';
    }
}

/// Per-class detection table plus FAR and the average, percentages with two decimals.
inline void write_report_table(std::ostream& os, const EvalReport& r) {
    if (!r.model_id.empty()) os << "model:   " << r.model_id << '\n';
    if (!r.dataset_id.empty()) os << "dataset: " << r.dataset_id << '\n';
    if (r.horizon) os << "horizon: " << r.horizon << '\n';
    os << "class  samples  FDR(%)  precision(%)\n";
    for (std::size_t i = 0; i < r.matrix.classes; ++i) {
        char line[96];
        std::snprintf(line, sizeof line, "%5zu  %7llu  %6s  %12s\n", i,
                      static_cast<unsigned long long>(r.matrix.row_sum(i)), r.fdr[i] ? percent(*r.fdr[i]).c_str() : "-",
                      r.precision[i] ? percent(*r.precision[i]).c_str() : "-");
        os << line;
    }
    os << "FAR(%): " << (r.far ? percent(*r.far) : std::string("-")) << '\n';
    os << "average FDR(%): " << (r.average_fdr ? percent(*r.average_fdr) : std::string("-")) << " over "
       << r.average_set.size() << " classes\n";
}

} // namespace hdrnn

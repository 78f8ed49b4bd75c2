#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hdrnn/binary_io.hpp"
#include "hdrnn/errors.hpp"
#include "hdrnn/rng.hpp"
#include "hdrnn/scaler.hpp"
#include "hdrnn/tensor.hpp"
#include "hdrnn/window.hpp"

namespace hdrnn {

// ---------------------------------------------------------------------------
// Whitespace-delimited matrices
// ---------------------------------------------------------------------------

struct LoadedMatrix {
    Tensor2 values;
    bool transposed = false; // the file was stored features x samples
};

namespace detail {

inline bool parse_real(std::string_view tok, double& out) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

inline std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw FormatError("cannot format value");
    return std::string(buf, ptr);
}

} // namespace detail

/// Parses a rectangular numeric matrix, one row per line. Blank lines are
/// skipped. When `expected_cols` is given and the data arrives as
/// expected_cols x N, it is transposed to N x expected_cols.
inline LoadedMatrix parse_matrix(std::istream& is, const std::string& name,
                                 std::optional<std::size_t> expected_cols = std::nullopt) {
    std::vector<double> values;
    std::size_t rows = 0, cols = 0, line_no = 0;
    std::string line;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tok;
        std::size_t n = 0;
        while (ls >> tok) {
            double v;
            if (!detail::parse_real(tok, v))
                throw FormatError(name + ":" + std::to_string(line_no) + ": non-numeric token '" + tok + "'");
            values.push_back(v);
            ++n;
        }
        if (n == 0) continue;
        if (rows == 0) cols = n;
        else if (n != cols)
            throw FormatError(name + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                              " values, found " + std::to_string(n));
        ++rows;
    }
    if (rows == 0) throw FormatError(name + ": no data");
    LoadedMatrix out{Tensor2(rows, cols, std::move(values)), false};
    if (expected_cols && cols != *expected_cols) {
        if (rows != *expected_cols)
            throw DimensionError(name + ": shape " + detail::dims(rows, cols) + " has no axis of length " +
                                 std::to_string(*expected_cols));
        out.values = out.values.transposed();
        out.transposed = true;
    }
    return out;
}

inline LoadedMatrix load_matrix(const std::string& path, std::optional<std::size_t> expected_cols = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return parse_matrix(in, path, expected_cols);
}

/// Writes shortest round-trip decimal representations, so reloading is exact.
inline void write_matrix(std::ostream& os, const Tensor2& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c) os << ' ';
            os << detail::format_real(m(r, c));
        }
        os << '\n';
    }
}

inline void save_matrix(const std::string& path, const Tensor2& m) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_matrix(out, m);
}

inline std::vector<int> parse_labels(std::istream& is, const std::string& name) {
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tok, extra;
        if (!(ls >> tok)) continue;
        int v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || ptr != tok.data() + tok.size() || (ls >> extra))
            throw FormatError(name + ":" + std::to_string(line_no) + ": expected one integer label");
        if (v < 0) throw LabelError(name + ":" + std::to_string(line_no) + ": negative label");
        labels.push_back(v);
    }
    return labels;
}

inline std::vector<int> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return parse_labels(in, path);
}

inline void save_labels(const std::string& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    for (int l : labels) out << l << '\n';
}

/// Loads a matrix and its optional label sidecar (`<path>.labels`). Without a
/// sidecar every sample gets `default_label`.
inline Series load_series(const std::string& path, std::optional<std::size_t> expected_cols, int default_label) {
    Series s;
    s.values = load_matrix(path, expected_cols).values;
    s.id = std::filesystem::path(path).filename().string();
    const std::string side = path + ".labels";
    if (std::filesystem::exists(side)) {
        s.labels = load_labels(side);
        if (s.labels.size() != s.values.rows)
            throw FormatError(side + ": " + std::to_string(s.labels.size()) + " labels for " +
                              std::to_string(s.values.rows) + " samples");
    } else {
        s.labels.assign(s.values.rows, default_label);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Standardization and windowing
// ---------------------------------------------------------------------------

/// Fit mode when `scaler` is empty, apply mode otherwise.
inline std::pair<Tensor2, Scaler> standardize(const Tensor2& data, const std::optional<Scaler>& scaler = std::nullopt) {
    Scaler s = scaler ? *scaler : Scaler::fit(data);
    if (data.cols != s.columns())
        throw DimensionError("standardize: data has " + std::to_string(data.cols) + " columns, scaler has " +
                             std::to_string(s.columns()));
    return {s.apply(data), std::move(s)};
}

/// Stride-1 windows over each record; window i of a record covers samples
/// [i, i + H) and carries the label of sample i + H - 1. Records shorter than
/// H are an error. With stride s only every s-th start position is kept.
inline WindowBatch make_windows(std::shared_ptr<const std::vector<Series>> records, std::size_t horizon,
                                std::size_t stride = 1) {
    if (horizon == 0) throw ConfigError("make_windows: horizon must be at least 1");
    if (stride == 0) throw ConfigError("make_windows: stride must be at least 1");
    std::vector<WindowRef> refs;
    std::vector<int> labels;
    for (std::size_t s = 0; s < records->size(); ++s) {
        const auto& rec = (*records)[s];
        if (rec.labels.size() != rec.values.rows)
            throw DimensionError("make_windows: record '" + rec.id + "' label count differs from sample count");
        if (rec.values.rows < horizon)
            throw InputError("insufficient data: record '" + rec.id + "' has " + std::to_string(rec.values.rows) +
                             " samples, horizon is " + std::to_string(horizon));
        for (std::size_t i = 0; i + horizon <= rec.values.rows; i += stride) {
            refs.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(i)});
            labels.push_back(rec.labels[i + horizon - 1]);
        }
    }
    return WindowBatch(std::move(records), horizon, std::move(refs), std::move(labels));
}

inline WindowBatch make_windows(const Tensor2& series, const std::vector<int>& labels, std::size_t horizon) {
    auto recs = std::make_shared<std::vector<Series>>();
    recs->push_back({series, labels, "series"});
    return make_windows(std::move(recs), horizon);
}

/// Fits a scaler on every sample covered by at least one window of `batch`.
inline Scaler fit_scaler(const WindowBatch& batch) {
    std::map<std::uint32_t, std::vector<bool>> covered;
    for (const auto& r : batch.refs()) {
        auto& mask = covered[r.source];
        if (mask.empty()) mask.assign(batch.sources()[r.source].values.rows, false);
        std::fill(mask.begin() + r.start, mask.begin() + r.start + static_cast<std::ptrdiff_t>(batch.horizon()), true);
    }
    return Scaler::fit_rows(batch.features(), [&](auto&& f) {
        for (const auto& [src, mask] : covered) {
            const auto& v = batch.sources()[src].values;
            for (std::size_t i = 0; i < mask.size(); ++i)
                if (mask[i]) f(v.row(i));
        }
    });
}

/// The same windows over standardized copies of their records.
inline WindowBatch scaled(const WindowBatch& batch, const Scaler& s) {
    auto recs = std::make_shared<std::vector<Series>>(batch.sources());
    for (auto& r : *recs) s.apply_inplace(r.values.data, r.values.cols);
    return batch.with_sources(std::move(recs));
}

// ---------------------------------------------------------------------------
// Train / validation / test split
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train = 0.8;
    double val = 0.0;
    double test = 0.2;
    bool contiguous = true;

    void validate() const {
        if (train < 0 || val < 0 || test < 0) throw ConfigError("split fractions must be nonnegative");
        if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    }
};

struct Split {
    WindowBatch train, val, test;
};

namespace detail {

// Largest-remainder rounding of n * fractions.
inline std::array<std::size_t, 3> partition_sizes(std::size_t n, const SplitSpec& s) {
    const double f[3] = {s.train, s.val, s.test};
    std::array<std::size_t, 3> k{};
    std::array<double, 3> rem{};
    std::size_t used = 0;
    for (int i = 0; i < 3; ++i) {
        const double exact = f[i] * static_cast<double>(n);
        k[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[i] = exact - static_cast<double>(k[i]);
        used += k[i];
    }
    while (used < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (rem[i] > rem[best]) best = i;
        ++k[best];
        rem[best] = -1.0;
        ++used;
    }
    return k;
}

} // namespace detail

/// Contiguous mode: the windows of each (record, class) group are taken in
/// time order, the first share going to train, then validation, then test.
/// A window that shares a sample with a window of a later partition in the
/// same record is dropped, so no sample is seen by two partitions.
/// Shuffled mode: a seeded permutation of all windows is cut by the fractions.
inline Split split(const WindowBatch& batch, const SplitSpec& fractions, std::uint64_t seed) {
    fractions.validate();
    std::array<std::vector<std::size_t>, 3> part;
    if (fractions.contiguous) {
        std::map<std::pair<std::uint32_t, int>, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < batch.size(); ++i) groups[{batch.refs()[i].source, batch.label(i)}].push_back(i);
        std::vector<int> owner(batch.size(), -1);
        for (auto& [key, idx] : groups) {
            std::sort(idx.begin(), idx.end(),
                      [&](std::size_t a, std::size_t b) { return batch.refs()[a].start < batch.refs()[b].start; });
            const auto k = detail::partition_sizes(idx.size(), fractions);
            for (std::size_t j = 0; j < idx.size(); ++j) owner[idx[j]] = j < k[0] ? 0 : (j < k[0] + k[1] ? 1 : 2);
        }
        // earliest start of a later-partition window, per record and partition
        const std::size_t H = batch.horizon();
        std::map<std::uint32_t, std::array<std::vector<std::uint32_t>, 3>> starts;
        for (std::size_t i = 0; i < batch.size(); ++i)
            starts[batch.refs()[i].source][static_cast<std::size_t>(owner[i])].push_back(batch.refs()[i].start);
        for (auto& [src, arr] : starts)
            for (auto& v : arr) std::sort(v.begin(), v.end());
        auto overlaps = [&](std::uint32_t src, std::uint32_t start, int from_part) {
            const auto& arr = starts[src];
            for (int p = from_part + 1; p < 3; ++p) {
                const auto& v = arr[static_cast<std::size_t>(p)];
                // any start in (start - H, start + H) shares a sample
                const std::uint32_t lo = start + 1 >= H ? start + 1 - static_cast<std::uint32_t>(H) : 0;
                auto it = std::lower_bound(v.begin(), v.end(), lo);
                if (it != v.end() && *it < start + H) return true;
            }
            return false;
        };
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& r = batch.refs()[i];
            if (owner[i] < 2 && overlaps(r.source, r.start, owner[i])) continue;
            part[static_cast<std::size_t>(owner[i])].push_back(i);
        }
    } else {
        std::vector<std::size_t> order(batch.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(seed);
        rng.shuffle(order);
        const auto k = detail::partition_sizes(order.size(), fractions);
        part[0].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k[0]));
        part[1].assign(order.begin() + static_cast<std::ptrdiff_t>(k[0]),
                       order.begin() + static_cast<std::ptrdiff_t>(k[0] + k[1]));
        part[2].assign(order.begin() + static_cast<std::ptrdiff_t>(k[0] + k[1]), order.end());
        for (auto& p : part) std::sort(p.begin(), p.end());
    }
    const char* names[3] = {"train", "validation", "test"};
    const double fr[3] = {fractions.train, fractions.val, fractions.test};
    for (int i = 0; i < 3; ++i)
        if (fr[i] > 0 && part[static_cast<std::size_t>(i)].empty())
            throw InputError(std::string("split error: ") + names[i] + " partition is empty");
    return {batch.subset(part[0]), batch.subset(part[1]), batch.subset(part[2])};
}

// ---------------------------------------------------------------------------
// Windowed archives: standardized records plus the three partitions.
// ---------------------------------------------------------------------------

struct WindowArchive {
    Scaler scaler;
    Split data; // all three batches share one record set
};

inline constexpr std::string_view kArchiveMagic = "HDRNNWA1";

namespace detail {

inline void write_refs(std::ostream& os, const WindowBatch& b) {
    binio::write_u64(os, b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        binio::write_u32(os, b.refs()[i].source);
        binio::write_u32(os, b.refs()[i].start);
        binio::write_u32(os, static_cast<std::uint32_t>(b.label(i)));
    }
}

inline WindowBatch read_refs(std::istream& is, const std::shared_ptr<const std::vector<Series>>& recs,
                             std::size_t horizon) {
    const auto n = binio::read_u64(is);
    std::vector<WindowRef> refs(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        refs[i].source = binio::read_u32(is);
        refs[i].start = binio::read_u32(is);
        labels[i] = static_cast<int>(binio::read_u32(is));
    }
    return WindowBatch(recs, horizon, std::move(refs), std::move(labels));
}

} // namespace detail

inline void write_archive(std::ostream& os, const WindowArchive& a) {
    const auto& recs = a.data.train.sources();
    os.write(kArchiveMagic.data(), static_cast<std::streamsize>(kArchiveMagic.size()));
    binio::write_u32(os, static_cast<std::uint32_t>(a.data.train.horizon()));
    binio::write_u32(os, static_cast<std::uint32_t>(a.scaler.columns()));
    binio::write_f64s(os, a.scaler.mean);
    binio::write_f64s(os, a.scaler.std);
    binio::write_u32(os, static_cast<std::uint32_t>(recs.size()));
    for (const auto& r : recs) {
        binio::write_string(os, r.id);
        binio::write_u32(os, static_cast<std::uint32_t>(r.values.rows));
        binio::write_u32(os, static_cast<std::uint32_t>(r.values.cols));
        binio::write_f64s(os, r.values.data);
        for (int l : r.labels) binio::write_u32(os, static_cast<std::uint32_t>(l));
    }
    detail::write_refs(os, a.data.train);
    detail::write_refs(os, a.data.val);
    detail::write_refs(os, a.data.test);
    if (!os) throw InputError("archive write failed");
}

inline WindowArchive read_archive(std::istream& is) {
    binio::expect_magic(is, kArchiveMagic);
    WindowArchive a;
    const std::size_t horizon = binio::read_u32(is);
    const std::size_t cols = binio::read_u32(is);
    a.scaler.mean.resize(cols);
    a.scaler.std.resize(cols);
    binio::read_f64s(is, a.scaler.mean);
    binio::read_f64s(is, a.scaler.std);
    auto recs = std::make_shared<std::vector<Series>>(binio::read_u32(is));
    for (auto& r : *recs) {
        r.id = binio::read_string(is);
        const std::size_t rows = binio::read_u32(is);
        const std::size_t c = binio::read_u32(is);
        r.values = Tensor2(rows, c);
        binio::read_f64s(is, r.values.data);
        r.labels.resize(rows);
        for (int& l : r.labels) l = static_cast<int>(binio::read_u32(is));
    }
    std::shared_ptr<const std::vector<Series>> shared = recs;
    a.data.train = detail::read_refs(is, shared, horizon);
    a.data.val = detail::read_refs(is, shared, horizon);
    a.data.test = detail::read_refs(is, shared, horizon);
    return a;
}

namespace detail {

// Fits the scaler on the training windows and standardizes every record.
inline WindowArchive finish_archive(const WindowBatch& windows, const Split& parts) {
    WindowArchive a;
    a.scaler = fit_scaler(parts.train);
    auto recs = std::make_shared<std::vector<Series>>(windows.sources());
    for (auto& r : *recs) a.scaler.apply_inplace(r.values.data, r.values.cols);
    std::shared_ptr<const std::vector<Series>> shared = recs;
    a.data.train = parts.train.with_sources(shared);
    a.data.val = parts.val.with_sources(shared);
    a.data.test = parts.test.with_sources(shared);
    return a;
}

} // namespace detail

/// Windows the raw records, splits them, fits the scaler on the samples
/// covered by training windows and standardizes every record with it.
inline WindowArchive build_archive(std::vector<Series> raw, std::size_t horizon, const SplitSpec& fractions,
                                   std::uint64_t seed, std::size_t stride = 1) {
    auto windows = make_windows(std::make_shared<const std::vector<Series>>(std::move(raw)), horizon, stride);
    return detail::finish_archive(windows, split(windows, fractions, seed));
}

/// Archive from records tagged with a partition: 0 train, 1 validation,
/// 2 test, or -1 for records whose windows are pooled and divided by `fractions`.
inline WindowArchive build_partitioned_archive(std::vector<Series> raw, const std::vector<int>& partition,
                                               std::size_t horizon, std::size_t stride = 1,
                                               const SplitSpec& fractions = {1.0, 0.0, 0.0, true},
                                               std::uint64_t seed = 0) {
    if (partition.size() != raw.size()) throw DimensionError("one partition tag per record required");
    auto windows = make_windows(std::make_shared<const std::vector<Series>>(std::move(raw)), horizon, stride);
    std::vector<std::size_t> idx[4];
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const int p = partition[windows.refs()[i].source];
        if (p < -1 || p > 2) throw InputError("partition tag must be -1, 0, 1 or 2");
        idx[p + 1].push_back(i);
    }
    Split fixed{windows.subset(idx[1]), windows.subset(idx[2]), windows.subset(idx[3])};
    if (!idx[0].empty()) {
        const Split pooled = split(windows.subset(idx[0]), fractions, seed);
        fixed = {pooled.train.merged_with(fixed.train), pooled.val.merged_with(fixed.val),
                 pooled.test.merged_with(fixed.test)};
    }
    if (fixed.train.empty()) throw InputError("split error: no training windows");
    return detail::finish_archive(windows, fixed);
}

// ---------------------------------------------------------------------------
// TEP benchmark directory layout: d00.dat (normal, often stored 52 x 500),
// dNN.dat (fault NN training record, faulty throughout) and dNN_te.dat
// (test record, normal until `test_onset`, fault NN afterwards).
// ---------------------------------------------------------------------------

inline constexpr std::size_t kTepVariables = 52;

struct TepData {
    std::vector<Series> train;
    std::vector<Series> test;
    std::vector<std::string> notes; // e.g. which files were transposed
};

inline TepData load_tep_directory(const std::string& dir, const std::vector<int>& faults,
                                  std::size_t test_onset = 160) {
    namespace fs = std::filesystem;
    TepData out;
    auto name = [](int k, bool test) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "d%02d%s.dat", k, test ? "_te" : "");
        return std::string(buf);
    };
    std::vector<int> classes{0};
    classes.insert(classes.end(), faults.begin(), faults.end());
    for (int k : classes) {
        for (bool test : {false, true}) {
            const fs::path p = fs::path(dir) / name(k, test);
            if (!fs::exists(p)) {
                if (test && k == 0) continue; // the normal test record is optional
                throw InputError("missing TEP file " + p.string());
            }
            auto m = load_matrix(p.string(), kTepVariables);
            if (m.transposed) out.notes.push_back(p.filename().string() + " transposed to samples x variables");
            Series s;
            s.id = p.filename().string();
            s.values = std::move(m.values);
            s.labels.assign(s.values.rows, k);
            if (test)
                for (std::size_t i = 0; i < std::min(test_onset, s.labels.size()); ++i) s.labels[i] = 0;
            (test ? out.test : out.train).push_back(std::move(s));
        }
    }
    return out;
}

inline void save_archive(const std::string& path, const WindowArchive& a) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    write_archive(out, a);
}

inline WindowArchive load_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return read_archive(in);
}

} // namespace hdrnn

#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hdrnn/errors.hpp"
#include "hdrnn/tensor.hpp"

namespace hdrnn {

/// One contiguous multivariate record (L x features) with a class label per sample.
struct Series {
    Tensor2 values;
    std::vector<int> labels;
    std::string id;
};

struct WindowRef {
    std::uint32_t source = 0;
    std::uint32_t start = 0;
    bool operator==(const WindowRef&) const = default;
};

/// A batch of fixed-horizon windows with one label per window.
///
/// Windows are views into shared source records: window i is rows
/// [start, start + horizon) of its source, which is one contiguous
/// horizon x features block because records are row-major. A window never
/// spans two records.
class WindowBatch {
  public:
    WindowBatch() = default;
    WindowBatch(std::shared_ptr<const std::vector<Series>> sources, std::size_t horizon, std::vector<WindowRef> refs,
                std::vector<int> labels)
        : sources_(std::move(sources)), horizon_(horizon), refs_(std::move(refs)), labels_(std::move(labels)) {
        if (!sources_) throw InputError("window batch has no source records");
        if (labels_.size() != refs_.size()) throw DimensionError("window batch: one label per window required");
        features_ = sources_->empty() ? 0 : (*sources_)[0].values.cols;
        for (const auto& s : *sources_)
            if (s.values.cols != features_) throw DimensionError("window batch: source feature counts differ");
        for (const auto& r : refs_) {
            if (r.source >= sources_->size()) throw DimensionError("window batch: bad source index");
            if (r.start + horizon_ > (*sources_)[r.source].values.rows)
                throw DimensionError("window batch: window runs past the end of its record");
        }
    }

    /// Builds a batch that owns N explicit windows (N x H x features, flattened).
    static WindowBatch from_dense(std::size_t n, std::size_t horizon, std::size_t features, std::span<const double> data,
                                  std::vector<int> labels) {
        if (data.size() != n * horizon * features) throw DimensionError("from_dense: data length mismatch");
        auto src = std::make_shared<std::vector<Series>>();
        std::vector<WindowRef> refs;
        const std::size_t block = horizon * features;
        for (std::size_t i = 0; i < n; ++i) {
            Series s;
            s.values = Tensor2(horizon, features,
                               std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(i * block),
                                                   data.begin() + static_cast<std::ptrdiff_t>((i + 1) * block)));
            s.labels.assign(horizon, labels.at(i));
            s.id = "w" + std::to_string(i);
            src->push_back(std::move(s));
            refs.push_back({static_cast<std::uint32_t>(i), 0});
        }
        WindowBatch b(std::move(src), horizon, std::move(refs), std::move(labels));
        b.features_ = features;
        return b;
    }

    std::size_t size() const { return refs_.size(); }
    bool empty() const { return refs_.empty(); }
    std::size_t horizon() const { return horizon_; }
    std::size_t features() const { return features_; }

    std::span<const double> window(std::size_t i) const {
        const auto& r = refs_[i];
        const auto& v = (*sources_)[r.source].values;
        return {v.data.data() + static_cast<std::size_t>(r.start) * v.cols, horizon_ * v.cols};
    }

    Tensor2 window_tensor(std::size_t i) const {
        auto w = window(i);
        return Tensor2(horizon_, features_, std::vector<double>(w.begin(), w.end()));
    }

    int label(std::size_t i) const { return labels_[i]; }
    const std::vector<int>& labels() const { return labels_; }
    const std::vector<WindowRef>& refs() const { return refs_; }
    const std::vector<Series>& sources() const { return *sources_; }
    const std::shared_ptr<const std::vector<Series>>& shared_sources() const { return sources_; }

    WindowBatch subset(std::span<const std::size_t> idx) const {
        std::vector<WindowRef> r;
        std::vector<int> l;
        r.reserve(idx.size());
        l.reserve(idx.size());
        for (auto i : idx) {
            r.push_back(refs_.at(i));
            l.push_back(labels_.at(i));
        }
        WindowBatch b;
        b.sources_ = sources_;
        b.horizon_ = horizon_;
        b.features_ = features_;
        b.refs_ = std::move(r);
        b.labels_ = std::move(l);
        return b;
    }

    /// Union with another batch over the same records (this batch first).
    WindowBatch merged_with(const WindowBatch& other) const {
        if (other.empty()) return *this;
        if (empty()) return other;
        if (other.sources_ != sources_ || other.horizon_ != horizon_)
            throw DimensionError("merged_with: batches do not share records");
        WindowBatch b = *this;
        b.refs_.insert(b.refs_.end(), other.refs_.begin(), other.refs_.end());
        b.labels_.insert(b.labels_.end(), other.labels_.begin(), other.labels_.end());
        return b;
    }

    WindowBatch with_labels(std::vector<int> labels) const {
        if (labels.size() != refs_.size()) throw DimensionError("with_labels: length mismatch");
        WindowBatch b = *this;
        b.labels_ = std::move(labels);
        return b;
    }

    /// Same windows over a different set of records of identical shape.
    WindowBatch with_sources(std::shared_ptr<const std::vector<Series>> sources) const {
        WindowBatch b = *this;
        if (!sources || sources->size() != sources_->size())
            throw DimensionError("with_sources: record count mismatch");
        b.sources_ = std::move(sources);
        return b;
    }

    void check_labels(std::size_t classes) const {
        for (int l : labels_)
            if (l < 0 || static_cast<std::size_t>(l) >= classes)
                throw LabelError("window label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
    }

  private:
    std::shared_ptr<const std::vector<Series>> sources_;
    std::size_t horizon_ = 0;
    std::size_t features_ = 0;
    std::vector<WindowRef> refs_;
    std::vector<int> labels_;
};

// Concatenates batches that have the same horizon and feature count.
inline WindowBatch concat(std::span<const WindowBatch> parts) {
    auto src = std::make_shared<std::vector<Series>>();
    std::vector<WindowRef> refs;
    std::vector<int> labels;
    std::size_t horizon = 0;
    for (const auto& p : parts) {
        if (p.empty()) continue;
        if (horizon == 0) horizon = p.horizon();
        if (p.horizon() != horizon) throw DimensionError("concat: horizons differ");
        const auto offset = static_cast<std::uint32_t>(src->size());
        for (const auto& s : p.sources()) src->push_back(s);
        for (std::size_t i = 0; i < p.size(); ++i) {
            refs.push_back({p.refs()[i].source + offset, p.refs()[i].start});
            labels.push_back(p.label(i));
        }
    }
    return WindowBatch(std::move(src), horizon, std::move(refs), std::move(labels));
}

} // namespace hdrnn

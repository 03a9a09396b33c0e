#pragma once

#include "dscope/classifiers/model.hpp"
#include "dscope/store.hpp"
#include "dscope/surveillance/timeline.hpp"

#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace dscope {

struct RowPrediction {
    std::uint64_t row = 0;
    int label = -1;
    double confidence = 0.0;

    bool operator==(const RowPrediction&) const = default;
};

struct BatchOptions {
    std::size_t chunk_size = 8192;
    /// Predictions with confidence below this are labeled Unclassified. Unset by default.
    std::optional<double> threshold;
    unsigned threads = 1;
};

using ChunkSink = std::function<void(std::span<const RowPrediction>)>;

/// Classifies every row of the store in order, handing each chunk's predictions to `sink`.
/// The dimension check happens before any output.
inline std::uint64_t batch_classify(const TrainedModel& model, StoreReader& store, const BatchOptions& opt, const ChunkSink& sink) {
    if (store.dim() != model.dim()) {
        throw DataError("store dim " + std::to_string(store.dim()) + " does not match model dim " + std::to_string(model.dim()));
    }
    if (opt.chunk_size == 0) throw UsageError("chunk size must be positive");
    std::uint64_t n = 0;
    std::vector<RowPrediction> buf;
    while (auto chunk = store.next_chunk(opt.chunk_size)) {
        const Matrix X = chunk->matrix().cast<double>();
        const auto preds = model.predict_batch(X, opt.threads);
        buf.resize(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i) {
            buf[i].row = chunk->first_row + i;
            buf[i].confidence = preds[i].confidence;
            buf[i].label = (opt.threshold && preds[i].confidence < *opt.threshold) ? kUnclassifiedLabel : preds[i].label;
        }
        sink(buf);
        n += buf.size();
    }
    return n;
}

inline std::vector<RowPrediction> batch_classify(const TrainedModel& model, StoreReader& store, const BatchOptions& opt = {}) {
    std::vector<RowPrediction> out;
    batch_classify(model, store, opt, [&](std::span<const RowPrediction> c) { out.insert(out.end(), c.begin(), c.end()); });
    return out;
}

/// Resolves the date range for aggregation: explicit bounds win, otherwise the metadata span.
inline std::pair<Date, Date> metadata_range(const std::vector<TweetRecord>& meta, std::optional<Date> first, std::optional<Date> last) {
    if (first && last) return {*first, *last};
    if (meta.empty()) throw DataError("cannot infer a date range from empty metadata");
    Date lo = meta.front().date, hi = meta.front().date;
    for (const auto& r : meta) {
        lo = std::min(lo, r.date);
        hi = std::max(hi, r.date);
    }
    return {first.value_or(lo), last.value_or(hi)};
}

/// Buckets predictions by their metadata date. Every prediction row needs a record.
inline TimelineSeries aggregate_daily(const std::vector<RowPrediction>& preds, const std::vector<TweetRecord>& meta,
                                      std::optional<Date> first = std::nullopt, std::optional<Date> last = std::nullopt,
                                      std::uint64_t* skipped = nullptr) {
    std::unordered_map<std::uint64_t, Date> by_row;
    by_row.reserve(meta.size());
    for (const auto& r : meta) {
        if (!by_row.emplace(r.row, r.date).second) throw DataError("metadata has duplicate entries for row " + std::to_string(r.row));
    }
    const auto [lo, hi] = metadata_range(meta, first, last);
    DailyAggregator agg(lo, hi);
    for (const auto& p : preds) {
        const auto it = by_row.find(p.row);
        if (it == by_row.end()) throw DataError("prediction row " + std::to_string(p.row) + " has no metadata");
        agg.add(it->second, p.label);
    }
    if (skipped) *skipped = agg.skipped();
    return agg.finish();
}

struct SurveillanceOptions {
    BatchOptions batch;
    std::optional<Date> first;
    std::optional<Date> last;
    std::uint64_t progress_every = 1'000'000;
    std::function<void(std::uint64_t rows_done, std::uint64_t rows_total)> on_progress;
};

struct SurveillanceResult {
    TimelineSeries series;
    std::uint64_t rows = 0;
    std::uint64_t skipped = 0;  // rows dated outside the requested range
};

/// Fused classify-and-aggregate pass over a store and its sidecar. Predictions are never
/// materialized for the whole store; the sidecar must list rows in ascending order.
/// Without an explicit range the sidecar is scanned once up front to find it.
inline SurveillanceResult run_surveillance(const TrainedModel& model, const std::string& store_path, const SurveillanceOptions& opt) {
    StoreReader store(store_path);
    if (store.dim() != model.dim()) {
        throw DataError("store dim " + std::to_string(store.dim()) + " does not match model dim " + std::to_string(model.dim()));
    }
    const std::string meta_path = sidecar_path(store_path);
    std::optional<Date> first = opt.first, last = opt.last;
    if (!first || !last) {
        SidecarReader scan(meta_path);
        std::optional<Date> lo, hi;
        while (auto r = scan.next()) {
            lo = lo ? std::min(*lo, r->date) : r->date;
            hi = hi ? std::max(*hi, r->date) : r->date;
        }
        if (!lo) throw DataError("metadata sidecar '" + meta_path + "' is empty");
        if (!first) first = lo;
        if (!last) last = hi;
    }
    DailyAggregator agg(*first, *last);
    SidecarReader meta(meta_path);
    std::optional<TweetRecord> rec = meta.next();
    std::uint64_t done = 0, next_report = opt.progress_every;
    const std::uint64_t total = store.count();
    batch_classify(model, store, opt.batch, [&](std::span<const RowPrediction> chunk) {
        for (const auto& p : chunk) {
            while (rec && rec->row < p.row) rec = meta.next();
            if (!rec || rec->row != p.row) throw DataError("prediction row " + std::to_string(p.row) + " has no metadata");
            agg.add(rec->date, p.label);
        }
        done += chunk.size();
        if (opt.on_progress && opt.progress_every > 0) {
            while (done >= next_report) {
                opt.on_progress(next_report, total);
                next_report += opt.progress_every;
            }
        }
    });
    SurveillanceResult res;
    res.series = agg.finish();
    res.rows = done;
    res.skipped = agg.skipped();
    return res;
}

}  // namespace dscope

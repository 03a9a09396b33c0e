#pragma once

#include "dscope/common.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dscope {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct F1Scores {
    double micro = 0.0;
    double macro = 0.0;
    std::vector<ClassMetrics> per_class;  // in `classes` order
};

namespace detail {

inline std::map<int, std::size_t> class_positions(const Labels& classes) {
    std::map<int, std::size_t> pos;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (!pos.emplace(classes[i], i).second) throw UsageError("duplicate class " + std::to_string(classes[i]));
    }
    return pos;
}

inline std::vector<std::vector<std::uint64_t>> count_matrix(const Labels& y_true, const Labels& y_pred, const Labels& classes) {
    if (y_true.size() != y_pred.size()) {
        throw UsageError("y_true has " + std::to_string(y_true.size()) + " labels but y_pred has " + std::to_string(y_pred.size()));
    }
    const auto pos = class_positions(classes);
    std::vector<std::vector<std::uint64_t>> c(classes.size(), std::vector<std::uint64_t>(classes.size(), 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const auto t = pos.find(y_true[i]), p = pos.find(y_pred[i]);
        if (t == pos.end()) throw UsageError("true label " + std::to_string(y_true[i]) + " is not a known class");
        if (p == pos.end()) throw UsageError("predicted label " + std::to_string(y_pred[i]) + " is not a known class");
        ++c[t->second][p->second];
    }
    return c;
}

}  // namespace detail

/// Per-class, macro (unweighted over every class, zero-support ones included) and
/// micro (pooled TP/FP/FN) F1.
inline F1Scores f1_scores(const Labels& y_true, const Labels& y_pred, const Labels& classes) {
    const auto c = detail::count_matrix(y_true, y_pred, classes);
    const std::size_t k = classes.size();
    F1Scores out;
    out.per_class.resize(k);
    std::uint64_t tp_all = 0, fp_all = 0, fn_all = 0;
    for (std::size_t i = 0; i < k; ++i) {
        std::uint64_t tp = c[i][i], fp = 0, fn = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == i) continue;
            fp += c[j][i];
            fn += c[i][j];
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn;
        auto& m = out.per_class[i];
        m.support = static_cast<std::size_t>(tp + fn);
        m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        out.macro += m.f1;
    }
    if (k) out.macro /= static_cast<double>(k);
    const std::uint64_t denom = 2 * tp_all + fp_all + fn_all;
    out.micro = denom ? static_cast<double>(2 * tp_all) / static_cast<double>(denom) : 0.0;
    return out;
}

inline double accuracy(const Labels& y_true, const Labels& y_pred) {
    if (y_true.size() != y_pred.size()) throw UsageError("accuracy: length mismatch");
    if (y_true.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) hit += y_true[i] == y_pred[i];
    return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

/// Rows are true classes and columns predicted classes.
struct ConfusionMatrix {
    Labels classes;
    std::vector<std::vector<std::uint64_t>> counts;
    std::vector<std::vector<double>> normalized;
    std::vector<bool> zero_support;

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (const auto& r : counts)
            for (auto v : r) s += v;
        return s;
    }

    std::uint64_t trace() const {
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) s += counts[i][i];
        return s;
    }

    double accuracy() const {
        const auto n = total();
        return n ? static_cast<double>(trace()) / static_cast<double>(n) : 0.0;
    }
};

inline ConfusionMatrix confusion_matrix(const Labels& y_true, const Labels& y_pred, const Labels& classes) {
    ConfusionMatrix cm;
    cm.classes = classes;
    cm.counts = detail::count_matrix(y_true, y_pred, classes);
    const std::size_t k = classes.size();
    cm.normalized.assign(k, std::vector<double>(k, 0.0));
    cm.zero_support.assign(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        std::uint64_t row = 0;
        for (auto v : cm.counts[i]) row += v;
        if (row == 0) {
            cm.zero_support[i] = true;
            continue;
        }
        for (std::size_t j = 0; j < k; ++j) cm.normalized[i][j] = static_cast<double>(cm.counts[i][j]) / static_cast<double>(row);
    }
    return cm;
}

}  // namespace dscope

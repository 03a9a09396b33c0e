#pragma once

#include "dscope/classifiers/spec.hpp"
#include "dscope/eval/crossval.hpp"
#include "dscope/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>

namespace dscope {

using LabelNamer = std::function<std::string(int)>;

/// Category name for labels 0..10, decimal id otherwise.
inline std::string default_label_name(int label) {
    if (label >= 0 && label < kNumCategories) return std::string(category_name(category_from_index(label)));
    return std::to_string(label);
}

namespace detail {

inline nlohmann::ordered_json class_metrics_json(const Labels& classes, const std::vector<ClassMetrics>& pc, const LabelNamer& name) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < classes.size(); ++i) {
        arr.push_back({{"class", name(classes[i])},
                       {"precision", pc[i].precision},
                       {"recall", pc[i].recall},
                       {"f1", pc[i].f1},
                       {"support", pc[i].support}});
    }
    return arr;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const CrossValResult& cv, const ClassifierSpec& spec,
                                             const LabelNamer& name = default_label_name) {
    const auto& r = cv.report;
    nlohmann::ordered_json j;
    j["spec"] = spec_to_json(spec);
    j["n_folds"] = r.folds.size();
    j["accuracy"] = r.accuracy;
    j["pooled_accuracy"] = r.pooled_accuracy;
    j["f1_micro"] = r.f1_micro;
    j["f1_macro"] = r.f1_macro;
    j["per_class"] = detail::class_metrics_json(r.classes, r.per_class, name);
    nlohmann::ordered_json folds = nlohmann::ordered_json::array();
    for (const auto& f : r.folds) {
        folds.push_back({{"fold", f.fold},
                         {"n_train", f.n_train},
                         {"n_test", f.n_test},
                         {"accuracy", f.accuracy},
                         {"f1_micro", f.f1_micro},
                         {"f1_macro", f.f1_macro},
                         {"per_class", detail::class_metrics_json(r.classes, f.per_class, name)}});
    }
    j["fold_breakdown"] = folds;
    nlohmann::ordered_json cm;
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (int c : cv.confusion.classes) names.push_back(name(c));
    cm["classes"] = names;
    cm["counts"] = cv.confusion.counts;
    cm["normalized"] = cv.confusion.normalized;
    cm["zero_support"] = cv.confusion.zero_support;
    j["confusion_matrix"] = cm;
    j["warnings"] = cv.warnings;
    return j;
}

/// Normalized confusion matrix as CSV: header `true\predicted,<classes...>`, one row per
/// true class, six decimals.
inline void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out, const LabelNamer& name = default_label_name) {
    out << "true\\predicted";
    for (int c : cm.classes) out << ',' << name(c);
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < cm.classes.size(); ++i) {
        out << name(cm.classes[i]);
        for (double v : cm.normalized[i]) {
            std::snprintf(buf, sizeof buf, "%.6f", v);
            out << ',' << buf;
        }
        out << '\n';
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw DataError("write failure on '" + path + "'");
}

}  // namespace dscope

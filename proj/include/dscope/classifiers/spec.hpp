#pragma once

#include "dscope/common.hpp"
#include "dscope/embedding.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dscope {

enum class Family { knn, logreg, svm };
enum class Kernel { linear, poly, rbf };

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::knn: return "knn";
        case Family::logreg: return "logreg";
        case Family::svm: return "svm";
    }
    return "?";
}

inline Family parse_family(std::string_view s) {
    if (s == "knn") return Family::knn;
    if (s == "logreg" || s == "lr") return Family::logreg;
    if (s == "svm") return Family::svm;
    throw UsageError("unknown classifier family '" + std::string(s) + "'");
}

inline std::string_view kernel_name(Kernel k) {
    switch (k) {
        case Kernel::linear: return "linear";
        case Kernel::poly: return "poly";
        case Kernel::rbf: return "rbf";
    }
    return "?";
}

inline Kernel parse_kernel(std::string_view s) {
    if (s == "linear") return Kernel::linear;
    if (s == "poly") return Kernel::poly;
    if (s == "rbf") return Kernel::rbf;
    throw UsageError("unknown kernel '" + std::string(s) + "'");
}

struct KnnSpec {
    int k = 7;
    Metric metric = Metric::cosine;
    bool operator==(const KnnSpec&) const = default;
};

/// `c` is the inverse regularization strength: the penalty is ||W||^2 / (2c).
struct LogRegSpec {
    double c = 4.94e3;
    int max_iterations = 1000;
    double tolerance = 1e-5;
    bool operator==(const LogRegSpec&) const = default;
};

struct SvmSpec {
    double c = 5.07;
    Kernel kernel = Kernel::rbf;
    int degree = 3;  // poly only
    bool operator==(const SvmSpec&) const = default;
};

using ClassifierSpec = std::variant<KnnSpec, LogRegSpec, SvmSpec>;

inline Family family_of(const ClassifierSpec& spec) { return static_cast<Family>(spec.index()); }

/// The tuned optima reported for LaBSE embeddings; used when no tuned spec is given.
inline ClassifierSpec default_spec(Family f) {
    switch (f) {
        case Family::knn: return KnnSpec{7, Metric::cosine};
        case Family::logreg: return LogRegSpec{4.94e3};
        case Family::svm: return SvmSpec{5.07, Kernel::rbf};
    }
    throw UsageError("unknown family");
}

inline void validate_spec(const ClassifierSpec& spec) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, KnnSpec>) {
                if (s.k < 1) throw UsageError("knn k must be >= 1");
            } else if constexpr (std::is_same_v<T, LogRegSpec>) {
                if (!(s.c > 0.0) || !std::isfinite(s.c)) throw UsageError("logreg c must be a positive finite number");
                if (s.max_iterations < 1) throw UsageError("logreg max_iterations must be >= 1");
                if (!(s.tolerance > 0.0)) throw UsageError("logreg tolerance must be positive");
            } else {
                if (!(s.c > 0.0) || !std::isfinite(s.c)) throw UsageError("svm c must be a positive finite number");
                if (s.kernel == Kernel::poly && s.degree < 1) throw UsageError("svm poly degree must be >= 1");
            }
        },
        spec);
}

inline nlohmann::ordered_json spec_to_json(const ClassifierSpec& spec) {
    nlohmann::ordered_json j;
    j["family"] = family_name(family_of(spec));
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, KnnSpec>) {
                j["k"] = s.k;
                j["metric"] = metric_name(s.metric);
            } else if constexpr (std::is_same_v<T, LogRegSpec>) {
                j["c"] = s.c;
                j["max_iterations"] = s.max_iterations;
                j["tolerance"] = s.tolerance;
            } else {
                j["c"] = s.c;
                j["kernel"] = kernel_name(s.kernel);
                if (s.kernel == Kernel::poly) j["degree"] = s.degree;
            }
        },
        spec);
    return j;
}

inline ClassifierSpec spec_from_json(const nlohmann::json& j) {
    const Family f = parse_family(j.at("family").get<std::string>());
    static const std::vector<std::string> knn_keys = {"family", "k", "metric"};
    static const std::vector<std::string> lr_keys = {"family", "c", "max_iterations", "tolerance"};
    static const std::vector<std::string> svm_keys = {"family", "c", "kernel", "degree"};
    const auto& allowed = f == Family::knn ? knn_keys : f == Family::logreg ? lr_keys : svm_keys;
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw UsageError("key '" + item.key() + "' is not valid for family " + std::string(family_name(f)));
        }
    }
    ClassifierSpec spec = default_spec(f);
    switch (f) {
        case Family::knn: {
            auto& s = std::get<KnnSpec>(spec);
            s.k = j.value("k", s.k);
            if (j.contains("metric")) s.metric = parse_metric(j["metric"].get<std::string>());
            break;
        }
        case Family::logreg: {
            auto& s = std::get<LogRegSpec>(spec);
            s.c = j.value("c", s.c);
            s.max_iterations = j.value("max_iterations", s.max_iterations);
            s.tolerance = j.value("tolerance", s.tolerance);
            break;
        }
        case Family::svm: {
            auto& s = std::get<SvmSpec>(spec);
            s.c = j.value("c", s.c);
            if (j.contains("kernel")) s.kernel = parse_kernel(j["kernel"].get<std::string>());
            s.degree = j.value("degree", s.degree);
            break;
        }
    }
    validate_spec(spec);
    return spec;
}

inline std::string describe(const ClassifierSpec& spec) { return spec_to_json(spec).dump(); }

/// Output of a single prediction. `label` is a class id; `scores` follow the model's
/// class order (probabilities for logreg, vote counts for knn and svm).
struct PredictionResult {
    int label = -1;
    std::vector<double> scores;
    double confidence = 0.0;

    bool operator==(const PredictionResult&) const = default;
};

namespace detail {

/// First index of the maximum; ties resolve to the earliest entry.
inline std::size_t argmax_first(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

inline Labels sorted_classes(const Labels& y) {
    Labels classes(y.begin(), y.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    return classes;
}

/// Validates training inputs and returns the class positions of `y` in `classes`.
inline std::vector<int> check_training_set(const Matrix& X, const Labels& y, Labels& classes) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) {
        throw UsageError("X has " + std::to_string(X.rows()) + " rows but y has " + std::to_string(y.size()) + " labels");
    }
    if (X.cols() == 0) throw UsageError("training matrix has zero columns");
    if (!X.allFinite()) throw DataError("training matrix has NaN/Inf entries");
    for (int label : y)
        if (label < 0) throw DataError("negative class id " + std::to_string(label));
    classes = sorted_classes(y);
    if (classes.size() < 2) throw DataError("need at least 2 classes to train a classifier");
    std::vector<std::size_t> counts(classes.size(), 0);
    std::vector<int> pos(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), y[i]);
        pos[i] = static_cast<int>(it - classes.begin());
        ++counts[static_cast<std::size_t>(pos[i])];
    }
    for (std::size_t c = 0; c < classes.size(); ++c) {
        if (counts[c] < 2) {
            throw DataError("class " + std::to_string(classes[c]) + " has " + std::to_string(counts[c]) +
                            " sample(s); at least 2 are required");
        }
    }
    return pos;
}

inline void check_query_dim(const RowRef& x, std::size_t dim) {
    if (static_cast<std::size_t>(x.size()) != dim) {
        throw UsageError("query dim " + std::to_string(x.size()) + " does not match model dim " + std::to_string(dim));
    }
}

}  // namespace detail

}  // namespace dscope

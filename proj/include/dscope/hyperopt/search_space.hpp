#pragma once

#include "dscope/classifiers/spec.hpp"
#include "dscope/common.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace dscope {

struct ContinuousDim {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;
};

struct IntegerDim {
    long lo = 0;
    long hi = 1;
};

struct CategoricalDim {
    std::vector<std::string> options;
};

struct Dimension {
    std::string name;
    std::variant<ContinuousDim, IntegerDim, CategoricalDim> kind;

    std::size_t width() const {
        if (const auto* c = std::get_if<CategoricalDim>(&kind)) return c->options.size();
        return 1;
    }
};

using ParamValue = std::variant<double, long, std::string>;
using Theta = std::map<std::string, ParamValue>;

inline nlohmann::ordered_json theta_to_json(const Theta& theta) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, v] : theta) std::visit([&](const auto& x) { j[name] = x; }, v);
    return j;
}

/// Hyperparameter domain mapped onto the unit cube. Continuous and integer dims take
/// one coordinate each; categorical dims are one-hot.
class SearchSpace {
public:
    SearchSpace() = default;
    explicit SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims)) { validate(); }

    const std::vector<Dimension>& dims() const { return dims_; }

    std::size_t encoded_dim() const {
        std::size_t w = 0;
        for (const auto& d : dims_) w += d.width();
        return w;
    }

    Vector encode(const Theta& theta) const {
        Vector x(static_cast<Eigen::Index>(encoded_dim()));
        Eigen::Index at = 0;
        for (const auto& d : dims_) {
            const auto it = theta.find(d.name);
            if (it == theta.end()) throw UsageError("theta is missing '" + d.name + "'");
            const ParamValue& v = it->second;
            if (const auto* c = std::get_if<ContinuousDim>(&d.kind)) {
                const double val = numeric(d.name, v);
                if (!(val >= c->lo && val <= c->hi)) throw UsageError("'" + d.name + "' = " + std::to_string(val) + " is outside its domain");
                x[at++] = c->log ? (std::log(val) - std::log(c->lo)) / (std::log(c->hi) - std::log(c->lo))
                                 : (val - c->lo) / (c->hi - c->lo);
            } else if (const auto* n = std::get_if<IntegerDim>(&d.kind)) {
                const auto* iv = std::get_if<long>(&v);
                if (!iv) throw UsageError("'" + d.name + "' must be an integer");
                if (*iv < n->lo || *iv > n->hi) throw UsageError("'" + d.name + "' = " + std::to_string(*iv) + " is outside its domain");
                x[at++] = static_cast<double>(*iv - n->lo) / static_cast<double>(n->hi - n->lo);
            } else {
                const auto& cat = std::get<CategoricalDim>(d.kind);
                const auto* sv = std::get_if<std::string>(&v);
                if (!sv) throw UsageError("'" + d.name + "' must be a string option");
                const auto pos = std::find(cat.options.begin(), cat.options.end(), *sv);
                if (pos == cat.options.end()) throw UsageError("'" + *sv + "' is not an option of '" + d.name + "'");
                for (std::size_t k = 0; k < cat.options.size(); ++k) {
                    x[at++] = (static_cast<std::ptrdiff_t>(k) == pos - cat.options.begin()) ? 1.0 : 0.0;
                }
            }
        }
        return x;
    }

    /// Inverse of encode. Coordinates are clamped to [0, 1]; integers round half up;
    /// categoricals take the first maximal coordinate.
    Theta decode(const Vector& x) const {
        if (static_cast<std::size_t>(x.size()) != encoded_dim()) throw UsageError("encoded point has the wrong width");
        Theta theta;
        Eigen::Index at = 0;
        for (const auto& d : dims_) {
            if (const auto* c = std::get_if<ContinuousDim>(&d.kind)) {
                const double u = std::clamp(x[at++], 0.0, 1.0);
                double v = c->log ? std::exp(std::log(c->lo) + u * (std::log(c->hi) - std::log(c->lo)))
                                  : c->lo + u * (c->hi - c->lo);
                theta[d.name] = std::clamp(v, c->lo, c->hi);
            } else if (const auto* n = std::get_if<IntegerDim>(&d.kind)) {
                const double u = std::clamp(x[at++], 0.0, 1.0);
                const double raw = static_cast<double>(n->lo) + u * static_cast<double>(n->hi - n->lo);
                theta[d.name] = std::clamp(static_cast<long>(std::floor(raw + 0.5)), n->lo, n->hi);
            } else {
                const auto& cat = std::get<CategoricalDim>(d.kind);
                std::size_t best = 0;
                for (std::size_t k = 1; k < cat.options.size(); ++k)
                    if (x[at + static_cast<Eigen::Index>(k)] > x[at + static_cast<Eigen::Index>(best)]) best = k;
                at += static_cast<Eigen::Index>(cat.options.size());
                theta[d.name] = cat.options[best];
            }
        }
        return theta;
    }

    /// Snaps an arbitrary point of the cube onto the encoding of a valid theta.
    Vector project(const Vector& x) const { return encode(decode(x)); }

private:
    static double numeric(const std::string& name, const ParamValue& v) {
        if (const auto* d = std::get_if<double>(&v)) return *d;
        if (const auto* l = std::get_if<long>(&v)) return static_cast<double>(*l);
        throw UsageError("'" + name + "' must be numeric");
    }

    void validate() const {
        std::set<std::string> names;
        for (const auto& d : dims_) {
            if (!names.insert(d.name).second) throw UsageError("duplicate dimension '" + d.name + "'");
            if (const auto* c = std::get_if<ContinuousDim>(&d.kind)) {
                if (!(c->lo < c->hi)) throw UsageError("dimension '" + d.name + "' needs lo < hi");
                if (c->log && !(c->lo > 0.0)) throw UsageError("log dimension '" + d.name + "' needs lo > 0");
            } else if (const auto* n = std::get_if<IntegerDim>(&d.kind)) {
                if (!(n->lo < n->hi)) throw UsageError("dimension '" + d.name + "' needs lo < hi");
            } else {
                const auto& opts = std::get<CategoricalDim>(d.kind).options;
                if (opts.size() < 2) throw UsageError("categorical '" + d.name + "' needs at least 2 options");
                if (std::set<std::string>(opts.begin(), opts.end()).size() != opts.size()) {
                    throw UsageError("categorical '" + d.name + "' has duplicate options");
                }
            }
        }
    }

    std::vector<Dimension> dims_;
};

/// Default tuning domains per classifier family.
inline SearchSpace default_search_space(Family f) {
    switch (f) {
        case Family::knn:
            return SearchSpace({{"k", IntegerDim{1, 50}}, {"metric", CategoricalDim{{"cosine", "euclidean", "manhattan"}}}});
        case Family::logreg: return SearchSpace({{"c", ContinuousDim{1e-2, 1e5, true}}});
        case Family::svm:
            return SearchSpace({{"c", ContinuousDim{1e-3, 1e4, true}},
                                {"kernel", CategoricalDim{{"linear", "poly", "rbf"}}},
                                {"degree", IntegerDim{2, 4}}});
    }
    throw UsageError("unknown family");
}

inline ClassifierSpec theta_to_spec(Family f, const Theta& theta) {
    const auto num = [&](const char* key) {
        const auto& v = theta.at(key);
        if (const auto* d = std::get_if<double>(&v)) return *d;
        return static_cast<double>(std::get<long>(v));
    };
    switch (f) {
        case Family::knn:
            return KnnSpec{static_cast<int>(std::get<long>(theta.at("k"))), parse_metric(std::get<std::string>(theta.at("metric")))};
        case Family::logreg: {
            LogRegSpec s;
            s.c = num("c");
            return s;
        }
        case Family::svm: {
            SvmSpec s;
            s.c = num("c");
            s.kernel = parse_kernel(std::get<std::string>(theta.at("kernel")));
            if (auto it = theta.find("degree"); it != theta.end()) s.degree = static_cast<int>(std::get<long>(it->second));
            return s;
        }
    }
    throw UsageError("unknown family");
}

}  // namespace dscope

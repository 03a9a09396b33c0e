#pragma once

#include "dscope/classifiers/knn.hpp"
#include "dscope/classifiers/logreg.hpp"
#include "dscope/classifiers/spec.hpp"
#include "dscope/classifiers/svm.hpp"

#include <algorithm>
#include <thread>
#include <variant>
#include <vector>

namespace dscope {

struct FitOptions {
    /// Precomputed gram_matrix(X); only used by the SVM family.
    const Matrix* gram = nullptr;
};

/// A fitted classifier of any family. Immutable after construction and safe to share
/// between threads.
class TrainedModel {
public:
    using Params = std::variant<KnnModel, LogRegModel, SvmModel>;

    TrainedModel() = default;
    explicit TrainedModel(Params p) : params_(std::move(p)) {}

    Family family() const { return static_cast<Family>(params_.index()); }

    ClassifierSpec spec() const {
        return std::visit([](const auto& m) -> ClassifierSpec { return m.spec; }, params_);
    }

    const Labels& classes() const {
        return std::visit([](const auto& m) -> const Labels& { return m.classes; }, params_);
    }

    std::size_t dim() const {
        return std::visit([](const auto& m) { return m.dim(); }, params_);
    }

    const Params& params() const { return params_; }

    template <class T>
    const T& as() const {
        return std::get<T>(params_);
    }

    std::vector<std::string> warnings() const {
        if (const auto* s = std::get_if<SvmModel>(&params_)) return s->warnings;
        if (const auto* l = std::get_if<LogRegModel>(&params_); l && !l->converged) {
            return {"logistic regression stopped at the iteration cap (" + std::to_string(l->iterations) +
                    " iterations, gradient norm " + std::to_string(l->grad_norm) + ")"};
        }
        return {};
    }

    PredictionResult predict(const RowRef& x) const {
        return std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, KnnModel>) return predict_knn(m, x);
                else if constexpr (std::is_same_v<T, LogRegModel>) return predict_logreg(m, x);
                else return predict_svm(m, x);
            },
            params_);
    }

    /// Row-wise predict. With threads > 1 rows are split into contiguous ranges; output
    /// order and values do not depend on the thread count.
    std::vector<PredictionResult> predict_batch(const Matrix& X, unsigned threads = 1) const {
        if (X.rows() > 0 && static_cast<std::size_t>(X.cols()) != dim()) {
            throw UsageError("batch dim " + std::to_string(X.cols()) + " does not match model dim " + std::to_string(dim()));
        }
        std::vector<PredictionResult> out(static_cast<std::size_t>(X.rows()));
        const auto n = static_cast<std::size_t>(X.rows());
        const auto work = [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) out[i] = predict(X.row(static_cast<Eigen::Index>(i)));
        };
        threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n / 64))));
        if (threads == 1) {
            work(0, n);
            return out;
        }
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t lo = n * t / threads, hi = n * (t + 1) / threads;
            pool.emplace_back([&, t, lo, hi] {
                try {
                    work(lo, hi);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
        return out;
    }

private:
    Params params_;
};

inline TrainedModel fit(const ClassifierSpec& spec, const Matrix& X, const Labels& y, const FitOptions& opt = {}) {
    validate_spec(spec);
    return std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, KnnSpec>) return TrainedModel(fit_knn(s, X, y));
            else if constexpr (std::is_same_v<T, LogRegSpec>) return TrainedModel(fit_logreg(s, X, y));
            else return TrainedModel(fit_svm(s, X, y, opt.gram));
        },
        spec);
}

}  // namespace dscope

#pragma once

#include "dscope/classifiers/model.hpp"
#include "dscope/corpus.hpp"
#include "dscope/eval/metrics.hpp"
#include "dscope/hyperopt/bayes_opt.hpp"

#include <exception>
#include <memory>
#include <numeric>
#include <thread>
#include <vector>

namespace dscope {

struct FoldMetrics {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double accuracy = 0.0;
    double f1_micro = 0.0;
    double f1_macro = 0.0;
    std::vector<ClassMetrics> per_class;
};

/// `accuracy` is the mean of the per-fold accuracies; every other scalar is computed
/// from predictions pooled over all folds.
struct MetricsReport {
    Labels classes;
    double accuracy = 0.0;
    double pooled_accuracy = 0.0;
    double f1_micro = 0.0;
    double f1_macro = 0.0;
    std::vector<ClassMetrics> per_class;
    std::vector<FoldMetrics> folds;

    std::vector<double> fold_accuracies() const {
        std::vector<double> v;
        for (const auto& f : folds) v.push_back(f.accuracy);
        return v;
    }
};

struct CrossValResult {
    MetricsReport report;
    ConfusionMatrix confusion;
    Labels predictions;  // out-of-fold prediction for every sample, in input order
    std::vector<std::string> warnings;
};

namespace detail {

template <class Fn>
void run_folds(int n_folds, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min(threads, static_cast<unsigned>(n_folds)));
    if (threads == 1) {
        for (int f = 0; f < n_folds; ++f) fn(f);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_folds));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (int f = static_cast<int>(t); f < n_folds; f += static_cast<int>(threads)) {
                try {
                    fn(f);
                } catch (...) {
                    errors[static_cast<std::size_t>(f)] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Generic k-fold driver. `fit_predict(fold, train_idx, test_idx, warnings)` returns one
/// predicted label per test index. Folds may run concurrently; results merge in fold order.
template <class FitPredict>
CrossValResult cross_validate_with(FitPredict&& fit_predict, const Labels& y, const FoldAssignment& folds, unsigned threads = 1) {
    if (folds.assignment.size() != y.size()) {
        throw UsageError("fold assignment covers " + std::to_string(folds.assignment.size()) + " samples but dataset has " +
                         std::to_string(y.size()));
    }
    for (int f : folds.assignment)
        if (f < 0 || f >= folds.n_folds) throw UsageError("fold assignment has out-of-range fold " + std::to_string(f));
    const Labels classes = detail::sorted_classes(y);
    for (int f = 0; f < folds.n_folds; ++f) {
        std::map<int, std::size_t> in_train;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (folds.assignment[i] != f) ++in_train[y[i]];
        for (int c : classes) {
            if (!in_train.count(c)) {
                throw DataError("fold " + std::to_string(f) + " leaves no training samples of class " + std::to_string(c));
            }
        }
    }

    CrossValResult out;
    out.predictions.assign(y.size(), -1);
    std::vector<FoldMetrics> fm(static_cast<std::size_t>(folds.n_folds));
    std::vector<std::vector<std::string>> fold_warnings(static_cast<std::size_t>(folds.n_folds));
    detail::run_folds(folds.n_folds, threads, [&](int f) {
        const auto train = folds.train_indices(f), test = folds.test_indices(f);
        const Labels pred = fit_predict(f, train, test, fold_warnings[static_cast<std::size_t>(f)]);
        if (pred.size() != test.size()) throw UsageError("fit_predict returned the wrong number of predictions");
        Labels yt(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) {
            yt[i] = y[test[i]];
            out.predictions[test[i]] = pred[i];
        }
        auto& m = fm[static_cast<std::size_t>(f)];
        m.fold = f;
        m.n_train = train.size();
        m.n_test = test.size();
        m.accuracy = accuracy(yt, pred);
        const F1Scores s = f1_scores(yt, pred, classes);
        m.f1_micro = s.micro;
        m.f1_macro = s.macro;
        m.per_class = s.per_class;
    });
    for (int f = 0; f < folds.n_folds; ++f)
        for (auto& w : fold_warnings[static_cast<std::size_t>(f)]) out.warnings.push_back("fold " + std::to_string(f) + ": " + w);

    auto& r = out.report;
    r.classes = classes;
    r.folds = std::move(fm);
    double acc = 0.0;
    for (const auto& f : r.folds) acc += f.accuracy;
    r.accuracy = r.folds.empty() ? 0.0 : acc / static_cast<double>(r.folds.size());
    const F1Scores pooled = f1_scores(y, out.predictions, classes);
    r.f1_micro = pooled.micro;
    r.f1_macro = pooled.macro;
    r.per_class = pooled.per_class;
    out.confusion = confusion_matrix(y, out.predictions, classes);
    r.pooled_accuracy = out.confusion.accuracy();
    return out;
}

namespace detail {

inline Eigen::Matrix<Eigen::Index, Eigen::Dynamic, 1> as_index(const std::vector<std::size_t>& v) {
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, 1> out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = static_cast<Eigen::Index>(v[i]);
    return out;
}

}  // namespace detail

/// Cross-validates a classifier spec on embeddings X. For the SVM family the Gram matrix
/// of X is computed once (or taken from `gram`) and sliced per fold.
inline CrossValResult cross_validate(const ClassifierSpec& spec, const Matrix& X, const Labels& y, const FoldAssignment& folds,
                                     unsigned threads = 1, const Matrix* gram = nullptr) {
    validate_spec(spec);
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw UsageError("cross_validate: X rows and labels differ");
    Matrix own;
    if (family_of(spec) == Family::svm && !gram) {
        own = gram_matrix(X);
        gram = &own;
    }
    return cross_validate_with(
        [&](int, const std::vector<std::size_t>& train, const std::vector<std::size_t>& test, std::vector<std::string>& warnings) {
            const auto ti = detail::as_index(train), si = detail::as_index(test);
            const Matrix Xtr = X(ti, Eigen::all);
            Labels ytr(train.size());
            for (std::size_t i = 0; i < train.size(); ++i) ytr[i] = y[train[i]];
            FitOptions fo;
            Matrix Gtr;
            if (gram) {
                Gtr = (*gram)(ti, ti);
                fo.gram = &Gtr;
            }
            const TrainedModel model = fit(spec, Xtr, ytr, fo);
            warnings = model.warnings();
            const Matrix Xte = X(si, Eigen::all);
            Labels pred;
            for (const auto& p : model.predict_batch(Xte)) pred.push_back(p.label);
            return pred;
        },
        y, folds, threads);
}

/// Hyperopt objective for a family: mean fold accuracy over fixed folds.
inline Objective make_cv_objective(Family family, const Matrix& X, const Labels& y, const FoldAssignment& folds,
                                   unsigned threads = 1) {
    std::shared_ptr<const Matrix> gram;
    if (family == Family::svm) gram = std::make_shared<const Matrix>(gram_matrix(X));
    return [family, &X, &y, &folds, threads, gram](const Theta& theta) {
        const CrossValResult cv = cross_validate(theta_to_spec(family, theta), X, y, folds, threads, gram.get());
        return ObjectiveResult{cv.report.accuracy, cv.report.fold_accuracies()};
    };
}

}  // namespace dscope

#include "dscope/corpus.hpp"
#include "dscope/eval/crossval.hpp"
#include "dscope/eval/metrics.hpp"
#include "dscope/eval/report.hpp"
#include "dscope/synthetic.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace dscope;

namespace {

Labels random_labels(std::size_t n, int k, SplitMix64& rng) {
    Labels out(n);
    for (auto& v : out) v = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(k)));
    return out;
}

Matrix embed(const LabeledDataset& ds, std::size_t dim, double noise) {
    std::vector<std::string> texts;
    for (const auto& s : ds.samples) texts.push_back(s.text);
    return embed_texts(texts, dim, 7, noise);
}

Labels pick(const Labels& y, const std::vector<std::size_t>& idx) {
    Labels out;
    for (auto i : idx) out.push_back(y[i]);
    return out;
}

}  // namespace

TEST(Metrics, PerfectPredictions) {
    const Labels y = {0, 1, 2, 2, 1};
    const auto f = f1_scores(y, y, {0, 1, 2});
    EXPECT_EQ(f.micro, 1.0);
    EXPECT_EQ(f.macro, 1.0);
    const auto cm = confusion_matrix(y, y, {0, 1, 2});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(cm.normalized[i][j], i == j ? 1.0 : 0.0);
}

TEST(Metrics, ThreeClassHandExample) {
    const Labels t = {0, 0, 1, 2}, p = {0, 1, 1, 1};
    const auto f = f1_scores(t, p, {0, 1, 2});
    EXPECT_NEAR(f.per_class[0].f1, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(f.per_class[1].f1, 0.5, 1e-15);
    EXPECT_EQ(f.per_class[2].f1, 0.0);
    EXPECT_NEAR(f.macro, (2.0 / 3.0 + 0.5) / 3.0, 1e-15);
    EXPECT_NEAR(f.macro, 0.3889, 5e-5);
    EXPECT_EQ(f.micro, 0.5);
}

TEST(Metrics, TwoClassConfusionRows) {
    const auto cm = confusion_matrix({0, 0, 1}, {0, 1, 1}, {0, 1});
    EXPECT_EQ(cm.normalized, (std::vector<std::vector<double>>{{0.5, 0.5}, {0.0, 1.0}}));
    EXPECT_EQ(cm.counts[0][1], 1u);
    EXPECT_EQ(cm.total(), 3u);
}

TEST(Metrics, ZeroSupportRowFlagged) {
    const auto cm = confusion_matrix({0, 0}, {0, 1}, {0, 1, 2});
    EXPECT_TRUE(cm.zero_support[1]);
    EXPECT_TRUE(cm.zero_support[2]);
    EXPECT_FALSE(cm.zero_support[0]);
    for (double v : cm.normalized[2]) EXPECT_EQ(v, 0.0);
}

TEST(Metrics, UnknownLabelRejected) {
    EXPECT_THROW(f1_scores({0, 1}, {0, 7}, {0, 1}), UsageError);
    EXPECT_THROW(confusion_matrix({0}, {0, 1}, {0, 1}), UsageError);
}

TEST(Metrics, RandomSetsMatchOracleAndMicroEqualsAccuracy) {
    SplitMix64 rng(101);
    for (int t = 0; t < 100; ++t) {
        const int k = 2 + static_cast<int>(rng.bounded(10));
        const std::size_t n = 1 + rng.bounded(300);
        const Labels a = random_labels(n, k, rng), b = random_labels(n, k, rng);
        Labels classes(static_cast<std::size_t>(k));
        std::iota(classes.begin(), classes.end(), 0);
        const auto f = f1_scores(a, b, classes);
        const auto o = oracle::f1_from_counts(a, b, classes);
        EXPECT_NEAR(f.micro, o.micro, 1e-12);
        EXPECT_NEAR(f.macro, o.macro, 1e-12);
        EXPECT_NEAR(f.micro, accuracy(a, b), 1e-12);
        const auto cm = confusion_matrix(a, b, classes);
        EXPECT_EQ(cm.accuracy(), static_cast<double>(cm.trace()) / static_cast<double>(cm.total()));
        for (std::size_t i = 0; i < cm.normalized.size(); ++i) {
            if (cm.zero_support[i]) continue;
            double s = 0.0;
            for (double v : cm.normalized[i]) s += v;
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(CrossVal, OraclePredictorIsPerfect) {
    SplitMix64 rng(5);
    const Labels y = random_labels(200, 4, rng);
    const auto folds = stratified_kfold(y, 5, 1);
    const auto cv = cross_validate_with(
        [&](int, const auto&, const std::vector<std::size_t>& test, auto&) { return pick(y, test); }, y, folds);
    EXPECT_EQ(cv.report.accuracy, 1.0);
    EXPECT_EQ(cv.report.pooled_accuracy, 1.0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(cv.confusion.normalized[i][i], 1.0);
}

TEST(CrossVal, MajorityDummyOnSixtyForty) {
    Labels y(60, 0);
    y.insert(y.end(), 40, 1);
    const auto folds = stratified_kfold(y, 10, 42);
    const auto cv = cross_validate_with(
        [&](int, const std::vector<std::size_t>& train, const std::vector<std::size_t>& test, auto&) {
            std::map<int, int> count;
            for (auto i : train) ++count[y[i]];
            const int major = count[0] >= count[1] ? 0 : 1;
            return Labels(test.size(), major);
        },
        y, folds);
    EXPECT_NEAR(cv.report.accuracy, 0.6, 1e-12);
    EXPECT_NEAR(cv.report.pooled_accuracy, 0.6, 1e-12);
    EXPECT_NEAR(cv.report.f1_micro, cv.report.pooled_accuracy, 1e-12);
}

TEST(CrossVal, MissingTrainingClassIsError) {
    const Labels y = {0, 0, 1, 1, 2};
    FoldAssignment folds{2, 0, {0, 1, 0, 1, 0}};
    EXPECT_THROW(cross_validate_with([](int, const auto&, const auto& test, auto&) { return Labels(test.size(), 0); }, y, folds),
                 DataError);
}

TEST(CrossVal, ThreadedEqualsSerialAndObjectiveIsFoldMean) {
    const auto ds = synthetic_labeled_dataset(12, 3);
    const Matrix X = embed(ds, 64, 0.3);
    const Labels y = ds.labels();
    const auto folds = stratified_kfold(y, 4, 42);
    for (Family f : {Family::knn, Family::logreg, Family::svm}) {
        const auto serial = cross_validate(default_spec(f), X, y, folds, 1);
        const auto threaded = cross_validate(default_spec(f), X, y, folds, 3);
        EXPECT_EQ(serial.predictions, threaded.predictions);
        const auto search = default_search_space(f);
        Theta theta = search.decode(search.encode(search.decode(Vector::Constant(static_cast<Eigen::Index>(search.encoded_dim()), 0.5))));
        const auto obj = make_cv_objective(f, X, y, folds)(theta);
        const auto direct = cross_validate(theta_to_spec(f, theta), X, y, folds);
        double mean = 0.0;
        for (double v : obj.fold_values) mean += v;
        mean /= static_cast<double>(obj.fold_values.size());
        EXPECT_EQ(obj.value, direct.report.accuracy);
        EXPECT_NEAR(obj.value, mean, 1e-12);
        EXPECT_EQ(obj.fold_values.size(), 4u);
    }
}

TEST(CrossVal, ClassRelabelingPermutesConfusion) {
    const auto ds = synthetic_labeled_dataset(10, 9);
    const Matrix X = embed(ds, 32, 0.6);
    const Labels y = ds.labels();
    // Reversing the class ids reverses the class order used everywhere.
    Labels z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = 10 - y[i];
    const auto folds = stratified_kfold(y, 5, 42);
    const auto a = cross_validate(KnnSpec{1, Metric::euclidean}, X, y, folds);
    const auto b = cross_validate(KnnSpec{1, Metric::euclidean}, X, z, folds);
    EXPECT_EQ(a.report.pooled_accuracy, b.report.pooled_accuracy);
    const std::size_t k = a.confusion.classes.size();
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) EXPECT_EQ(a.confusion.counts[i][j], b.confusion.counts[k - 1 - i][k - 1 - j]);
}

TEST(Report, JsonAndConfusionCsv) {
    const Labels y = {0, 0, 1, 1};
    FoldAssignment folds{2, 0, {0, 1, 0, 1}};
    const auto cv = cross_validate_with([&](int, const auto&, const auto& test, auto&) { return pick(y, test); }, y, folds);
    const auto j = report_to_json(cv, default_spec(Family::svm), default_label_name);
    EXPECT_EQ(j.at("accuracy").get<double>(), 1.0);
    EXPECT_EQ(j.at("spec").at("family"), "svm");
    std::ostringstream csv;
    write_confusion_csv(cv.confusion, csv);
    EXPECT_EQ(csv.str(), "true\\predicted,Donate,News & Press\nDonate,1.000000,0.000000\nNews & Press,0.000000,1.000000\n");
}

#include "dscope/classifiers/model.hpp"
#include "dscope/classifiers/model_io.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace dscope;

namespace {

Matrix random_matrix(Eigen::Index n, Eigen::Index d, SplitMix64& rng) {
    Matrix X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < d; ++k) X(i, k) = rng.normal();
    return X;
}

// Gaussian blobs around per-class centers.
void blobs(int n_classes, int per_class, int dim, double spread, SplitMix64& rng, Matrix& X, Labels& y) {
    const Matrix centers = random_matrix(n_classes, dim, rng) * 3.0;
    X.resize(n_classes * per_class, dim);
    y.clear();
    for (int c = 0; c < n_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            for (int k = 0; k < dim; ++k) X(c * per_class + i, k) = centers(c, k) + spread * rng.normal();
            y.push_back(c);
        }
    }
}

Matrix naive_kernel(const Matrix& X, Kernel kernel, int degree, double gamma) {
    Matrix K(X.rows(), X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.rows(); ++j) {
            const double dot = X.row(i).dot(X.row(j));
            switch (kernel) {
                case Kernel::linear: K(i, j) = dot; break;
                case Kernel::poly: K(i, j) = std::pow(dot + 1.0, degree); break;
                case Kernel::rbf: K(i, j) = std::exp(-gamma * (X.row(i) - X.row(j)).squaredNorm()); break;
            }
        }
    }
    return K;
}

}  // namespace

TEST(Spec, DefaultsMatchReportedOptima) {
    const auto knn = std::get<KnnSpec>(default_spec(Family::knn));
    EXPECT_EQ(knn.k, 7);
    EXPECT_EQ(knn.metric, Metric::cosine);
    EXPECT_DOUBLE_EQ(std::get<LogRegSpec>(default_spec(Family::logreg)).c, 4.94e3);
    const auto svm = std::get<SvmSpec>(default_spec(Family::svm));
    EXPECT_DOUBLE_EQ(svm.c, 5.07);
    EXPECT_EQ(svm.kernel, Kernel::rbf);
}

TEST(Spec, JsonRoundTripAndFamilyKeys) {
    for (Family f : {Family::knn, Family::logreg, Family::svm}) {
        const auto s = default_spec(f);
        EXPECT_EQ(spec_to_json(spec_from_json(spec_to_json(s))), spec_to_json(s));
    }
    EXPECT_THROW(spec_from_json(nlohmann::json::parse(R"({"family":"knn","k":3,"metric":"cosine","c":1})")), UsageError);
    EXPECT_THROW(validate_spec(KnnSpec{0, Metric::cosine}), UsageError);
    EXPECT_THROW(validate_spec(LogRegSpec{-1.0}), UsageError);
}

TEST(Knn, SelfMatchWithKOne) {
    SplitMix64 rng(1);
    Matrix X;
    Labels y;
    blobs(3, 10, 5, 0.5, rng, X, y);
    const auto m = fit_knn({1, Metric::euclidean}, X, y);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto p = predict_knn(m, X.row(i));
        EXPECT_EQ(p.label, y[static_cast<std::size_t>(i)]);
        EXPECT_DOUBLE_EQ(p.confidence, 1.0);
    }
}

TEST(Knn, ThreePointHandExample) {
    // fit() rejects a class with one sample, so the model is assembled directly.
    KnnModel m;
    m.spec = {3, Metric::cosine};
    m.classes = {0, 1};
    m.train.resize(3, 2);
    m.train << 0, 1, 0.9, 0.1, 1, 0;
    m.train_pos = {0, 1, 1};
    m.sq_norms = m.train.rowwise().squaredNorm();
    const auto p = predict_knn(m, Eigen::RowVector2d(1, 0));
    EXPECT_EQ(p.label, 1);
    EXPECT_EQ(p.scores, (std::vector<double>{1.0, 2.0}));
    EXPECT_NEAR(p.confidence, 2.0 / 3.0, 1e-15);
}

TEST(Knn, MatchesBruteForceOracle) {
    SplitMix64 rng(17);
    Matrix X;
    Labels y;
    blobs(5, 40, 8, 1.5, rng, X, y);
    for (Metric metric : {Metric::cosine, Metric::euclidean, Metric::manhattan}) {
        for (int k : {1, 3, 7}) {
            const auto model = fit(KnnSpec{k, metric}, X, y);
            for (int q = 0; q < 50; ++q) {
                Vector query(8);
                for (int d = 0; d < 8; ++d) query[d] = 3.0 * rng.normal();
                EXPECT_EQ(model.predict(query.transpose()).label, oracle::brute_knn(X, y, query, k, metric));
            }
        }
    }
}

TEST(Knn, DimMismatchIsError) {
    SplitMix64 rng(2);
    Matrix X;
    Labels y;
    blobs(2, 5, 4, 0.1, rng, X, y);
    const auto m = fit(KnnSpec{}, X, y);
    EXPECT_THROW(m.predict(Eigen::RowVector3d(1, 2, 3)), UsageError);
}

TEST(LogReg, ZeroWeightsGiveLn2OnBalancedData) {
    Matrix X(4, 2);
    X << 1, 0, 0, 1, -1, 0, 0, -1;
    const std::vector<int> y = {0, 1, 0, 1};
    const auto lg = logreg_loss_grad(Matrix::Zero(2, 2), Vector::Zero(2), X, y, 1.0);
    EXPECT_NEAR(lg.loss, std::log(2.0), 1e-15);
}

TEST(LogReg, ZeroModelPredictsUniformFirstClass) {
    LogRegModel m;
    m.classes = {3, 5, 9};
    m.W = Matrix::Zero(3, 2);
    m.b = Vector::Zero(3);
    const auto p = predict_logreg(m, Eigen::RowVector2d(0.3, -2.0));
    EXPECT_EQ(p.label, 3);
    for (double s : p.scores) EXPECT_NEAR(s, 1.0 / 3.0, 1e-15);
}

TEST(LogReg, GradientMatchesFiniteDifferences) {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 5 + static_cast<int>(rng.bounded(30)), d = 1 + static_cast<int>(rng.bounded(10)), k = 3 + static_cast<int>(rng.bounded(5));
        const Matrix X = random_matrix(n, d, rng), W = random_matrix(k, d, rng);
        const Vector b = random_matrix(k, 1, rng);
        std::vector<int> y(n);
        for (auto& v : y) v = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(k)));
        const double c = 0.5 + rng.uniform() * 10.0;
        const auto lg = logreg_loss_grad(W, b, X, y, c);
        EXPECT_NEAR(lg.loss, oracle::logreg_loss(W, b, X, y, c), 1e-12);
        const double h = 1e-5;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < d; ++j) {
                Matrix Wp = W, Wm = W;
                Wp(i, j) += h;
                Wm(i, j) -= h;
                const double fd = (oracle::logreg_loss(Wp, b, X, y, c) - oracle::logreg_loss(Wm, b, X, y, c)) / (2 * h);
                EXPECT_NEAR(lg.grad_W(i, j), fd, 1e-7 * std::max(1.0, std::abs(fd)));
            }
            Vector bp = b, bm = b;
            bp[i] += h;
            bm[i] -= h;
            const double fd = (oracle::logreg_loss(W, bp, X, y, c) - oracle::logreg_loss(W, bm, X, y, c)) / (2 * h);
            EXPECT_NEAR(lg.grad_b[i], fd, 1e-7 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(LogReg, PenaltyVanishesAsCGrows) {
    SplitMix64 rng(4);
    const Matrix X = random_matrix(10, 3, rng), W = random_matrix(2, 3, rng);
    const std::vector<int> y = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const auto big = logreg_loss_grad(W, Vector::Zero(2), X, y, 1e300);
    EXPECT_NEAR(big.loss, oracle::logreg_loss(W, Vector::Zero(2), X, y, 1e300), 1e-12);
    EXPECT_NEAR(logreg_loss_grad(W, Vector::Zero(2), X, y, 1.0).loss - big.loss, W.squaredNorm() / 2.0, 1e-12);
}

TEST(LogReg, SeparatedClustersAndMonotoneLoss) {
    Matrix X(8, 1);
    X << -3, -2.5, -2, -1.5, 1.5, 2, 2.5, 3;
    const Labels y = {0, 0, 0, 0, 1, 1, 1, 1};
    std::vector<double> trace;
    const auto m = fit_logreg(LogRegSpec{1.0}, X, y, &trace);
    EXPECT_TRUE(m.W.allFinite());
    EXPECT_GT(m.W(1, 0) - m.W(0, 0), 0.0);
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LT(trace[i], trace[i - 1]);
    EXPECT_TRUE(m.converged);
    EXPECT_LE(m.grad_norm, 1e-5);
    for (Eigen::Index i = 0; i < X.rows(); ++i) EXPECT_EQ(predict_logreg(m, X.row(i)).label, y[static_cast<std::size_t>(i)]);
}

TEST(LogReg, ProbabilitiesSumToOne) {
    SplitMix64 rng(6);
    Matrix X;
    Labels y;
    blobs(4, 12, 6, 1.0, rng, X, y);
    const auto m = fit(LogRegSpec{10.0}, X, y);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto p = m.predict(X.row(i));
        double s = 0.0;
        for (double v : p.scores) s += v;
        EXPECT_NEAR(s, 1.0, 1e-9);
        EXPECT_DOUBLE_EQ(p.confidence, *std::max_element(p.scores.begin(), p.scores.end()));
    }
}

TEST(Svm, TwoPointsLinearBisector) {
    Matrix X(2, 2);
    X << 1, 1, -1, -1;
    const auto r = svm_solve_pair(X, {1, -1}, 1e3, KernelParams{Kernel::linear, 3, 1.0});
    EXPECT_GT(r.alpha[0], 0.0);
    EXPECT_GT(r.alpha[1], 0.0);
    // w = sum a y x; boundary w.x + b = 0 must pass through the midpoint (origin).
    EXPECT_NEAR(r.bias, 0.0, 1e-9);
    EXPECT_NEAR(r.alpha[0], 0.25, 1e-6);
}

TEST(Svm, ThreePointGridOracle) {
    Matrix X(3, 1);
    X << 0.0, 1.0, 3.0;
    const std::vector<int> y = {1, 1, -1};
    const double c = 2.0;
    const Matrix K = naive_kernel(X, Kernel::linear, 3, 1.0);
    const auto r = smo_solve(K, y, c);
    // a3 = a1 + a2 from the equality constraint; grid over (a1, a2).
    double best = -1e300;
    for (int i = 0; i <= 400; ++i) {
        for (int j = 0; j <= 400; ++j) {
            Vector a(3);
            a << c * i / 400.0, c * j / 400.0, 0.0;
            a[2] = a[0] + a[1];
            if (a[2] > c) continue;
            Matrix Q = K;
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q) Q(p, q) *= y[p] * y[q];
            best = std::max(best, oracle::dual_objective(Q, a));
        }
    }
    EXPECT_NEAR(r.dual_objective, best, 1e-3);
}

TEST(Svm, RandomInstancesAgainstProjectedGradient) {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 6 + static_cast<int>(rng.bounded(30)), d = 2 + static_cast<int>(rng.bounded(4));
        const Matrix X = random_matrix(n, d, rng);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) y[i] = (X(i, 0) + 0.5 * rng.normal() > 0) ? 1 : -1;
        y[0] = 1;
        y[1] = -1;
        const Kernel kern = static_cast<Kernel>(trial % 3);
        const double c = 0.1 + rng.uniform() * 10.0, gamma = 0.5;
        const Matrix K = naive_kernel(X, kern, 2, gamma);
        SmoOptions opt;
        opt.track_dual = true;
        const auto r = smo_solve(K, y, c, opt);
        ASSERT_TRUE(r.converged);
        const auto ref = oracle::svm_dual_projected_gradient(K, y, c);
        EXPECT_NEAR(r.dual_objective, ref.objective, 1e-3);
        EXPECT_LE(oracle::kkt_violation(K, y, r.alpha, r.bias, c), 1e-3);
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            EXPECT_GE(r.alpha[i], -1e-6);
            EXPECT_LE(r.alpha[i], c + 1e-6);
            s += r.alpha[i] * y[i];
        }
        EXPECT_NEAR(s, 0.0, 1e-6);
        for (std::size_t i = 1; i < r.dual_trace.size(); ++i) EXPECT_GE(r.dual_trace[i], r.dual_trace[i - 1] - 1e-12);
    }
}

TEST(Svm, XorWithRbf) {
    Matrix X(4, 2);
    X << 0, 0, 1, 1, 0, 1, 1, 0;
    const Labels y = {0, 0, 1, 1};
    const auto m = fit(SvmSpec{}, X, y);
    for (Eigen::Index i = 0; i < X.rows(); ++i) EXPECT_EQ(m.predict(X.row(i)).label, y[static_cast<std::size_t>(i)]);
}

TEST(Svm, MulticlassModelInvariants) {
    SplitMix64 rng(12);
    Matrix X;
    Labels y;
    blobs(4, 15, 5, 1.2, rng, X, y);
    for (Kernel k : {Kernel::linear, Kernel::poly, Kernel::rbf}) {
        SvmSpec spec;
        spec.kernel = k;
        spec.degree = 2;
        spec.c = 2.0;
        const auto model = fit(spec, X, y);
        const auto& m = model.as<SvmModel>();
        EXPECT_EQ(m.pairs.size(), 6u);
        for (const auto& p : m.pairs) {
            double s = 0.0;
            for (std::size_t t = 0; t < p.sv.size(); ++t) {
                EXPECT_GT(p.alpha[t], 0.0);
                EXPECT_LE(p.alpha[t], spec.c + 1e-12);
                s += p.alpha[t] * p.sign[t];
            }
            EXPECT_NEAR(s, 0.0, 1e-6);
        }
        int correct = 0;
        for (Eigen::Index i = 0; i < X.rows(); ++i) correct += model.predict(X.row(i)).label == y[static_cast<std::size_t>(i)];
        EXPECT_GE(correct, 55);
        // Gram slice path gives the same model.
        const Matrix G = gram_matrix(X);
        const auto via_gram = fit(spec, X, y, FitOptions{&G});
        EXPECT_EQ(serialize_model(via_gram), serialize_model(model));
    }
}

TEST(Svm, DuplicateConflictingPointsWarn) {
    Matrix X(4, 2);
    X << 1, 1, 1, 1, 1, 1, 1, 1;
    const Labels y = {0, 0, 1, 1};
    const auto model = fit(SvmSpec{}, X, y);
    EXPECT_FALSE(model.warnings().empty());
}

TEST(Fit, SingleSampleClassIsError) {
    Matrix X(3, 2);
    X << 0, 0, 1, 1, 2, 2;
    EXPECT_THROW(fit(KnnSpec{}, X, {0, 0, 1}), DataError);
}

TEST(PredictBatch, ElementwiseIdenticalAndThreadIndependent) {
    SplitMix64 rng(21);
    Matrix X;
    Labels y;
    blobs(3, 20, 16, 1.0, rng, X, y);
    const Matrix Q = random_matrix(500, 16, rng);
    for (Family f : {Family::knn, Family::logreg, Family::svm}) {
        const auto model = fit(default_spec(f), X, y);
        const auto batch = model.predict_batch(Q);
        const auto batch4 = model.predict_batch(Q, 4);
        ASSERT_EQ(batch.size(), 500u);
        for (Eigen::Index i = 0; i < Q.rows(); ++i) {
            EXPECT_EQ(batch[static_cast<std::size_t>(i)], model.predict(Q.row(i)));
            EXPECT_EQ(batch4[static_cast<std::size_t>(i)], batch[static_cast<std::size_t>(i)]);
        }
        EXPECT_EQ(model.predict_batch(Q.topRows(1)).front(), model.predict(Q.row(0)));
        EXPECT_TRUE(model.predict_batch(Matrix(0, 16)).empty());
    }
}

TEST(ModelIo, RoundTripIsBitExact) {
    testutil::TempDir dir;
    SplitMix64 rng(8);
    Matrix X;
    Labels y;
    blobs(3, 10, 4, 1.0, rng, X, y);
    for (Family f : {Family::knn, Family::logreg, Family::svm}) {
        const auto model = fit(default_spec(f), X, y);
        const auto path = dir.file(std::string(family_name(f)) + ".bin");
        save_model(model, path);
        const auto back = load_model(path);
        EXPECT_EQ(serialize_model(back), serialize_model(model));
        for (Eigen::Index i = 0; i < X.rows(); ++i) EXPECT_EQ(back.predict(X.row(i)), model.predict(X.row(i)));
    }
}

TEST(ModelIo, CorruptFilesRejected) {
    SplitMix64 rng(8);
    Matrix X;
    Labels y;
    blobs(2, 5, 3, 1.0, rng, X, y);
    std::string bytes = serialize_model(fit(LogRegSpec{}, X, y));
    EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 3)), DataError);
    EXPECT_THROW(deserialize_model(bytes + "x"), DataError);
    bytes[0] = 'Q';
    EXPECT_THROW(deserialize_model(bytes), DataError);
}

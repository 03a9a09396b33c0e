#pragma once

#include "dscope/classifiers/spec.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace dscope {

/// k-nearest-neighbour model: the full training matrix plus its labels.
struct KnnModel {
    KnnSpec spec;
    Labels classes;
    Matrix train;
    std::vector<int> train_pos;  // class position of each training row
    Vector sq_norms;             // squared row norms, for cosine

    std::size_t dim() const { return static_cast<std::size_t>(train.cols()); }
};

inline KnnModel fit_knn(const KnnSpec& spec, const Matrix& X, const Labels& y) {
    validate_spec(spec);
    KnnModel m;
    m.spec = spec;
    m.train_pos = detail::check_training_set(X, y, m.classes);
    m.train = X;
    m.sq_norms.resize(X.rows());
    const auto d = static_cast<std::size_t>(X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) m.sq_norms[i] = kernels::dot(X.row(i).data(), X.row(i).data(), d);
    return m;
}

namespace detail {

inline double knn_distance(const KnnModel& m, Eigen::Index j, const RowRef& q, double q_sq) {
    const double* t = m.train.row(j).data();
    const auto d = m.dim();
    switch (m.spec.metric) {
        case Metric::cosine: {
            const double denom = std::sqrt(q_sq) * std::sqrt(m.sq_norms[j]);
            if (denom == 0.0) throw DataError("cosine distance undefined for zero vectors");
            return std::max(0.0, 1.0 - kernels::dot(t, q.data(), d) / denom);
        }
        case Metric::euclidean: return std::sqrt(kernels::squared_distance(t, q.data(), d));
        case Metric::manhattan: return kernels::l1_distance(t, q.data(), d);
    }
    return 0.0;
}

}  // namespace detail

/// Neighbours are ordered by (distance, row index). Majority vote; ties go to the
/// class with the smallest summed neighbour distance, then to the earlier class.
inline PredictionResult predict_knn(const KnnModel& m, const RowRef& q) {
    detail::check_query_dim(q, m.dim());
    const double q_sq = kernels::dot(q.data(), q.data(), m.dim());
    const Eigen::Index n = m.train.rows();
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) dist[static_cast<std::size_t>(j)] = {detail::knn_distance(m, j, q, q_sq), j};
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(m.spec.k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    PredictionResult r;
    r.scores.assign(m.classes.size(), 0.0);
    std::vector<double> dist_sum(m.classes.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const auto c = static_cast<std::size_t>(m.train_pos[static_cast<std::size_t>(dist[i].second)]);
        r.scores[c] += 1.0;
        dist_sum[c] += dist[i].first;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < r.scores.size(); ++c) {
        if (r.scores[c] > r.scores[best] || (r.scores[c] == r.scores[best] && dist_sum[c] < dist_sum[best])) best = c;
    }
    r.label = m.classes[best];
    r.confidence = r.scores[best] / static_cast<double>(k);
    return r;
}

}  // namespace dscope

#pragma once

#include "dscope/classifiers/spec.hpp"

#include <cmath>
#include <vector>

namespace dscope {

/// Multinomial logistic regression: W is n_classes x dim, b has n_classes entries.
struct LogRegModel {
    LogRegSpec spec;
    Labels classes;
    Matrix W;
    Vector b;
    int iterations = 0;
    bool converged = false;
    double grad_norm = 0.0;

    std::size_t dim() const { return static_cast<std::size_t>(W.cols()); }
};

struct LossGrad {
    double loss = 0.0;
    Matrix grad_W;
    Vector grad_b;

    double grad_norm() const { return std::sqrt(grad_W.squaredNorm() + grad_b.squaredNorm()); }
};

/// Mean softmax cross-entropy plus ||W||_F^2 / (2c); the bias is not penalized.
/// `y` holds class positions in [0, W.rows()).
inline LossGrad logreg_loss_grad(const Matrix& W, const Vector& b, const Matrix& X, const std::vector<int>& y, double c,
                                 bool with_grad = true) {
    const Eigen::Index n = X.rows(), k = W.rows();
    if (W.cols() != X.cols() || b.size() != k || static_cast<std::size_t>(n) != y.size()) {
        throw UsageError("logreg_loss_grad: inconsistent shapes");
    }
    Matrix S = X * W.transpose();
    S.rowwise() += b.transpose();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = S.row(i).maxCoeff();
        const double raw_y = S(i, y[static_cast<std::size_t>(i)]);
        double z = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            S(i, j) = std::exp(S(i, j) - mx);
            z += S(i, j);
        }
        loss += mx + std::log(z) - raw_y;
        S.row(i) /= z;
    }
    LossGrad out;
    out.loss = (n > 0 ? loss / static_cast<double>(n) : 0.0) + W.squaredNorm() / (2.0 * c);
    if (!with_grad) return out;
    for (Eigen::Index i = 0; i < n; ++i) S(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    if (n > 0) S /= static_cast<double>(n);
    out.grad_W = S.transpose() * X + W / c;
    out.grad_b = S.colwise().sum().transpose();
    return out;
}

/// Full-batch gradient descent with Armijo backtracking (shrink 0.5, slope 1e-4).
/// Each iteration starts from twice the previously accepted step. If `loss_trace` is
/// given it receives the loss after every accepted step, starting with the initial loss.
inline LogRegModel fit_logreg(const LogRegSpec& spec, const Matrix& X, const Labels& y,
                              std::vector<double>* loss_trace = nullptr) {
    validate_spec(spec);
    LogRegModel m;
    m.spec = spec;
    const std::vector<int> pos = detail::check_training_set(X, y, m.classes);
    const auto k = static_cast<Eigen::Index>(m.classes.size());
    m.W = Matrix::Zero(k, X.cols());
    m.b = Vector::Zero(k);

    constexpr double kShrink = 0.5;
    constexpr double kSlope = 1e-4;
    constexpr double kMinStep = 1e-20;
    double step = 1.0;
    LossGrad cur = logreg_loss_grad(m.W, m.b, X, pos, spec.c);
    if (loss_trace) loss_trace->push_back(cur.loss);
    for (m.iterations = 0; m.iterations < spec.max_iterations; ++m.iterations) {
        m.grad_norm = cur.grad_norm();
        if (m.grad_norm <= spec.tolerance) {
            m.converged = true;
            break;
        }
        const double g2 = m.grad_norm * m.grad_norm;
        step = std::min(step * 2.0, 1e6);
        bool accepted = false;
        Matrix W_new;
        Vector b_new;
        while (step >= kMinStep) {
            W_new = m.W - step * cur.grad_W;
            b_new = m.b - step * cur.grad_b;
            const double trial = logreg_loss_grad(W_new, b_new, X, pos, spec.c, false).loss;
            if (trial <= cur.loss - kSlope * step * g2 && trial < cur.loss) {
                accepted = true;
                break;
            }
            step *= kShrink;
        }
        if (!accepted) break;  // no descent possible at machine precision
        m.W = std::move(W_new);
        m.b = std::move(b_new);
        cur = logreg_loss_grad(m.W, m.b, X, pos, spec.c);
        if (loss_trace) loss_trace->push_back(cur.loss);
    }
    if (!m.converged) {
        m.grad_norm = cur.grad_norm();
        m.converged = m.grad_norm <= spec.tolerance;
    }
    if (!m.W.allFinite() || !m.b.allFinite()) throw DataError("logistic regression diverged to non-finite weights");
    return m;
}

inline PredictionResult predict_logreg(const LogRegModel& m, const RowRef& x) {
    detail::check_query_dim(x, m.dim());
    const auto k = static_cast<std::size_t>(m.W.rows());
    const auto d = m.dim();
    PredictionResult r;
    r.scores.resize(k);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
        r.scores[j] = kernels::dot(m.W.row(static_cast<Eigen::Index>(j)).data(), x.data(), d) + m.b[static_cast<Eigen::Index>(j)];
        mx = std::max(mx, r.scores[j]);
    }
    double z = 0.0;
    for (auto& s : r.scores) {
        s = std::exp(s - mx);
        z += s;
    }
    for (auto& s : r.scores) s /= z;
    const std::size_t best = detail::argmax_first(r.scores);
    r.label = m.classes[best];
    r.confidence = r.scores[best];
    return r;
}

}  // namespace dscope

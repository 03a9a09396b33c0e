#pragma once

#include "dscope/common.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace dscope {

/// Matern 5/2 ARD kernel hyperparameters. `amplitude` is the prior standard deviation.
struct GpHyper {
    double amplitude = 1.0;
    std::vector<double> length_scales;
    double jitter = 1e-6;
};

inline double matern52(const GpHyper& h, const double* a, const double* b, std::size_t m) {
    double r2 = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double t = (a[k] - b[k]) / h.length_scales[k];
        r2 += t * t;
    }
    const double s5r = std::sqrt(5.0 * r2);
    return h.amplitude * h.amplitude * (1.0 + s5r + 5.0 * r2 / 3.0) * std::exp(-s5r);
}

/// Fitted Gaussian-process surrogate with a constant prior mean equal to the target mean.
struct GPosterior {
    Matrix X;              // encoded training inputs, one per row
    Vector y_centered;     // targets minus prior_mean
    double prior_mean = 0.0;
    GpHyper hyper;         // jitter holds the value actually used
    Eigen::MatrixXd L;     // lower Cholesky factor of K + jitter I
    Vector weights;        // (K + jitter I)^-1 y_centered
    double log_marginal_likelihood = 0.0;
};

namespace detail {

inline Eigen::MatrixXd gp_covariance(const Matrix& X, const GpHyper& h) {
    const Eigen::Index n = X.rows();
    const auto m = static_cast<std::size_t>(X.cols());
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = matern52(h, X.row(i).data(), X.row(j).data(), m);
    }
    return K;
}

}  // namespace detail

/// Exact GP fit with fixed kernel hyperparameters. If the covariance is not positive
/// definite the jitter is raised tenfold, up to 1e-4, before giving up.
inline GPosterior gp_fit_fixed(const Matrix& X, const Vector& y, const GpHyper& hyper) {
    if (X.rows() < 1 || X.rows() != y.size()) throw UsageError("gp_fit: need matching non-empty X and y");
    if (!y.allFinite()) throw DataError("gp_fit: targets must be finite");
    if (hyper.length_scales.size() != static_cast<std::size_t>(X.cols())) throw UsageError("gp_fit: one length scale per input dim");
    GPosterior gp;
    gp.X = X;
    gp.prior_mean = y.mean();
    gp.y_centered = y.array() - gp.prior_mean;
    gp.hyper = hyper;
    const Eigen::MatrixXd K = detail::gp_covariance(X, hyper);
    const Eigen::Index n = X.rows();
    for (double jitter = hyper.jitter;; jitter *= 10.0) {
        if (jitter > 1e-4 * (1.0 + 1e-9)) throw DataError("gp_fit: covariance not positive definite after jitter 1e-4");
        Eigen::LLT<Eigen::MatrixXd> llt(K + jitter * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() == Eigen::Success) {
            gp.hyper.jitter = jitter;
            gp.L = llt.matrixL();
            gp.weights = llt.solve(gp.y_centered);
            break;
        }
    }
    const double log_det = 2.0 * gp.L.diagonal().array().log().sum();
    gp.log_marginal_likelihood = -0.5 * gp.y_centered.dot(gp.weights) - 0.5 * log_det -
                                 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
    return gp;
}

struct GpPrediction {
    double mean = 0.0;
    double std = 0.0;
};

inline GpPrediction gp_predict(const GPosterior& gp, const Vector& x) {
    const Eigen::Index n = gp.X.rows();
    const auto m = static_cast<std::size_t>(gp.X.cols());
    if (static_cast<std::size_t>(x.size()) != m) throw UsageError("gp_predict: wrong input width");
    Vector k(n);
    for (Eigen::Index i = 0; i < n; ++i) k[i] = matern52(gp.hyper, gp.X.row(i).data(), x.data(), m);
    GpPrediction p;
    p.mean = gp.prior_mean + k.dot(gp.weights);
    const Vector v = gp.L.triangularView<Eigen::Lower>().solve(k);
    const double var = gp.hyper.amplitude * gp.hyper.amplitude - v.squaredNorm();
    p.std = std::sqrt(std::max(0.0, var));
    return p;
}

namespace detail {

/// Bounded Nelder-Mead on a box; points are clamped into the box before evaluation.
inline std::pair<Vector, double> nelder_mead_box(const std::function<double(const Vector&)>& f, Vector start,
                                                 const Vector& lo, const Vector& hi, int max_evals) {
    const Eigen::Index d = start.size();
    const auto clamp = [&](Vector v) {
        for (Eigen::Index i = 0; i < d; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
        return v;
    };
    std::vector<Vector> simplex;
    std::vector<double> vals;
    simplex.push_back(clamp(start));
    for (Eigen::Index i = 0; i < d; ++i) {
        Vector p = simplex[0];
        const double span = 0.1 * (hi[i] - lo[i]);
        p[i] = (p[i] + span <= hi[i]) ? p[i] + span : p[i] - span;
        simplex.push_back(clamp(p));
    }
    int evals = 0;
    const auto eval = [&](const Vector& v) {
        ++evals;
        const double r = f(v);
        return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
    };
    for (const auto& p : simplex) vals.push_back(eval(p));
    std::vector<std::size_t> order(simplex.size());
    while (evals < max_evals) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
        if (std::abs(vals[worst] - vals[best]) < 1e-10 * (1.0 + std::abs(vals[best]))) break;
        Vector centroid = Vector::Zero(d);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += simplex[order[i]];
        centroid /= static_cast<double>(d);
        const Vector refl = clamp(centroid + (centroid - simplex[worst]));
        const double fr = eval(refl);
        if (fr < vals[best]) {
            const Vector exp = clamp(centroid + 2.0 * (centroid - simplex[worst]));
            const double fe = eval(exp);
            if (fe < fr) {
                simplex[worst] = exp;
                vals[worst] = fe;
            } else {
                simplex[worst] = refl;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            simplex[worst] = refl;
            vals[worst] = fr;
        } else {
            const Vector con = clamp(centroid + 0.5 * (simplex[worst] - centroid));
            const double fc = eval(con);
            if (fc < vals[worst]) {
                simplex[worst] = con;
                vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i < simplex.size(); ++i) {
                    if (i == best) continue;
                    simplex[i] = clamp(simplex[best] + 0.5 * (simplex[i] - simplex[best]));
                    vals[i] = eval(simplex[i]);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < vals.size(); ++i)
        if (vals[i] < vals[best]) best = i;
    return {simplex[best], vals[best]};
}

}  // namespace detail

struct GpFitOptions {
    int restarts = 8;
    std::uint64_t seed = 0;
    int evals_per_restart = 300;
    double jitter = 1e-6;
    double min_length_scale = 1e-2;
    double max_length_scale = 1e1;
};

/// GP fit with Matern 5/2 ARD kernel hyperparameters chosen by maximizing the log
/// marginal likelihood over log(amplitude) and log(length scales), using seeded
/// multi-start Nelder-Mead. Amplitude is searched within [1e-2, 1e2] times the target
/// standard deviation.
inline GPosterior gp_fit(const Matrix& X, const Vector& y, const GpFitOptions& opt = {}) {
    if (X.rows() < 2) throw UsageError("gp_fit needs at least 2 points");
    if (X.rows() != y.size()) throw UsageError("gp_fit: X and y lengths differ");
    if (!y.allFinite()) throw DataError("gp_fit: targets must be finite");
    const Eigen::Index m = X.cols();
    const double sd = std::sqrt((y.array() - y.mean()).square().mean());
    const double scale = sd > 1e-12 ? sd : 1.0;
    Vector lo(m + 1), hi(m + 1);
    lo[0] = std::log(1e-2 * scale);
    hi[0] = std::log(1e2 * scale);
    for (Eigen::Index k = 1; k <= m; ++k) {
        lo[k] = std::log(opt.min_length_scale);
        hi[k] = std::log(opt.max_length_scale);
    }
    const auto unpack = [&](const Vector& p) {
        GpHyper h;
        h.amplitude = std::exp(p[0]);
        h.jitter = opt.jitter;
        for (Eigen::Index k = 1; k <= m; ++k) h.length_scales.push_back(std::exp(p[k]));
        return h;
    };
    const auto neg_lml = [&](const Vector& p) {
        try {
            return -gp_fit_fixed(X, y, unpack(p)).log_marginal_likelihood;
        } catch (const DataError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    SplitMix64 rng(mix64(opt.seed ^ 0x6A09E667F3BCC909ULL));
    Vector best_p;
    double best_v = std::numeric_limits<double>::infinity();
    for (int r = 0; r < opt.restarts; ++r) {
        Vector start(m + 1);
        if (r == 0) {
            start[0] = std::log(scale);
            for (Eigen::Index k = 1; k <= m; ++k) start[k] = std::log(0.3);
        } else {
            for (Eigen::Index k = 0; k <= m; ++k) start[k] = lo[k] + rng.uniform() * (hi[k] - lo[k]);
        }
        auto [p, v] = detail::nelder_mead_box(neg_lml, start, lo, hi, opt.evals_per_restart);
        if (v < best_v) {
            best_v = v;
            best_p = p;
        }
    }
    if (!std::isfinite(best_v)) throw DataError("gp_fit: no kernel hyperparameters gave a valid factorization");
    return gp_fit_fixed(X, y, unpack(best_p));
}

}  // namespace dscope

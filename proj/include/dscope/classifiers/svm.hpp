#pragma once

#include "dscope/classifiers/spec.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dscope {

struct KernelParams {
    Kernel kernel = Kernel::rbf;
    int degree = 3;
    double gamma = 1.0;
};

/// Kernel value from a dot product and the two squared norms:
/// linear a.b, poly (a.b + 1)^degree, rbf exp(-gamma ||a - b||^2).
inline double kernel_value(const KernelParams& p, double dot, double sq_a, double sq_b) {
    switch (p.kernel) {
        case Kernel::linear: return dot;
        case Kernel::poly: return std::pow(dot + 1.0, p.degree);
        case Kernel::rbf: return std::exp(-p.gamma * std::max(0.0, sq_a + sq_b - 2.0 * dot));
    }
    return 0.0;
}

/// gamma = 1 / (dim * mean per-feature variance of X); 1 when X has no variance.
inline double scale_gamma(const Matrix& X) {
    if (X.rows() == 0 || X.cols() == 0) return 1.0;
    const Eigen::RowVectorXd mean = X.colwise().mean();
    const double var = (X.rowwise() - mean).array().square().colwise().sum().mean() / static_cast<double>(X.rows());
    const double g = 1.0 / (static_cast<double>(X.cols()) * var);
    return (var > 0.0 && std::isfinite(g)) ? g : 1.0;
}

/// Symmetric Gram matrix of row dot products.
inline Matrix gram_matrix(const Matrix& X) {
    const Eigen::Index n = X.rows();
    const auto d = static_cast<std::size_t>(X.cols());
    Matrix G(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            G(i, j) = G(j, i) = kernels::dot(X.row(i).data(), X.row(j).data(), d);
        }
    }
    return G;
}

inline Matrix kernel_matrix_from_gram(const Matrix& G, const KernelParams& p) {
    const Eigen::Index n = G.rows();
    Matrix K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) K(i, j) = K(j, i) = kernel_value(p, G(i, j), G(i, i), G(j, j));
    return K;
}

struct SmoOptions {
    double tolerance = 1e-3;
    long max_iterations = 100000;
    bool track_dual = false;
};

struct SmoResult {
    Vector alpha;
    double bias = 0.0;  // decision(x) = sum_i alpha_i y_i K(x_i, x) + bias
    long iterations = 0;
    bool converged = false;
    double dual_objective = 0.0;
    std::vector<double> dual_trace;  // filled when SmoOptions::track_dual is set
};

/// sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
inline double svm_dual_objective(const Matrix& K, const std::vector<int>& y, const Vector& alpha) {
    const Eigen::Index n = K.rows();
    Vector ay(n);
    for (Eigen::Index i = 0; i < n; ++i) ay[i] = alpha[i] * y[static_cast<std::size_t>(i)];
    return alpha.sum() - 0.5 * ay.dot(K * ay);
}

/// Largest KKT violation of (alpha, bias) measured on y_i f(x_i) - 1.
inline double svm_kkt_violation(const Matrix& K, const std::vector<int>& y, const Vector& alpha, double bias, double c,
                                double bound_eps = 1e-12) {
    const Eigen::Index n = K.rows();
    Vector ay(n);
    for (Eigen::Index i = 0; i < n; ++i) ay[i] = alpha[i] * y[static_cast<std::size_t>(i)];
    const Vector f = K * ay;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double margin = y[static_cast<std::size_t>(i)] * (f[i] + bias) - 1.0;
        double v = 0.0;
        if (alpha[i] <= bound_eps) {
            v = std::max(0.0, -margin);
        } else if (alpha[i] >= c - bound_eps) {
            v = std::max(0.0, margin);
        } else {
            v = std::abs(margin);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

/// Sequential minimal optimization for the binary soft-margin dual,
/// max sum(a) - 1/2 a'Qa  s.t. 0 <= a_i <= c, sum a_i y_i = 0, Q_ij = y_i y_j K_ij.
/// Each step updates the maximal violating pair (first-order working-set selection),
/// and stops once the violation gap is at most `tolerance`.
inline SmoResult smo_solve(const Matrix& K, const std::vector<int>& y, double c, const SmoOptions& opt = {}) {
    const Eigen::Index n = K.rows();
    if (K.cols() != n || static_cast<std::size_t>(n) != y.size()) throw UsageError("smo_solve: inconsistent shapes");
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == 1) has_pos = true;
        else if (v == -1) has_neg = true;
        else throw UsageError("smo_solve: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw DataError("smo_solve: both labels must be present");
    if (!(c > 0.0)) throw UsageError("smo_solve: c must be positive");

    constexpr double kTau = 1e-12;
    SmoResult res;
    Vector& alpha = res.alpha;
    alpha = Vector::Zero(n);
    Vector G = Vector::Constant(n, -1.0);  // gradient of 1/2 a'Qa - e'a
    const auto yi = [&](Eigen::Index i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };
    const auto in_up = [&](Eigen::Index t) { return (yi(t) > 0 && alpha[t] < c) || (yi(t) < 0 && alpha[t] > 0); };
    const auto in_low = [&](Eigen::Index t) { return (yi(t) > 0 && alpha[t] > 0) || (yi(t) < 0 && alpha[t] < c); };
    const auto primal_f = [&] {
        double s = 0.0;
        for (Eigen::Index t = 0; t < n; ++t) s += alpha[t] * (G[t] - 1.0);
        return 0.5 * s;
    };
    if (opt.track_dual) res.dual_trace.push_back(0.0);

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        Eigen::Index i = -1, j = -1;
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            const double v = -yi(t) * G[t];
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || gmax - gmin <= opt.tolerance) {
            res.converged = true;
            break;
        }
        const double old_ai = alpha[i], old_aj = alpha[j];
        const double Qij = yi(i) * yi(j) * K(i, j);
        if (yi(i) != yi(j)) {
            double quad = K(i, i) + K(j, j) + 2.0 * Qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = K(i, i) + K(j, j) - 2.0 * Qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
        for (Eigen::Index t = 0; t < n; ++t) {
            G[t] += yi(t) * (yi(i) * K(i, t) * dai + yi(j) * K(j, t) * daj);
        }
        if (opt.track_dual) res.dual_trace.push_back(-primal_f());
    }

    // Offset from free multipliers, or the midpoint of the feasible interval if none are free.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    long n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yG = yi(t) * G[t];
        if (alpha[t] >= c) {
            if (yi(t) < 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else if (alpha[t] <= 0.0) {
            if (yi(t) > 0) ub = std::min(ub, yG);
            else lb = std::max(lb, yG);
        } else {
            ++n_free;
            sum_free += yG;
        }
    }
    double rho = 0.0;
    if (n_free > 0) rho = sum_free / static_cast<double>(n_free);
    else if (std::isfinite(ub) && std::isfinite(lb)) rho = 0.5 * (ub + lb);
    else rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
    res.bias = -rho;
    res.dual_objective = -primal_f();
    return res;
}

/// Builds the kernel matrix for one class pair and solves its dual.
inline SmoResult svm_solve_pair(const Matrix& X, const std::vector<int>& y, double c, const KernelParams& kernel,
                                const SmoOptions& opt = {}) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw UsageError("svm_solve_pair: X and y lengths differ");
    return smo_solve(kernel_matrix_from_gram(gram_matrix(X), kernel), y, c, opt);
}

/// One-vs-one binary machine between class positions `first` (+1) and `second` (-1).
struct SvmPair {
    int first = 0;
    int second = 0;
    std::vector<int> sv;        // rows of SvmModel::support
    std::vector<double> alpha;  // dual coefficient per support vector, in (0, c]
    std::vector<int> sign;      // +1 for `first`, -1 for `second`
    double bias = 0.0;
    bool converged = true;
    long iterations = 0;
};

struct SvmModel {
    SvmSpec spec;
    Labels classes;
    double gamma = 1.0;
    Matrix support;  // training rows that are support vectors of at least one pair
    Vector support_sq;
    std::vector<SvmPair> pairs;
    std::vector<std::string> warnings;

    std::size_t dim() const { return static_cast<std::size_t>(support.cols()); }
    KernelParams kernel() const { return {spec.kernel, spec.degree, gamma}; }
};

/// One-vs-one SVM. `gram`, if given, must equal gram_matrix(X); cross-validation passes
/// a slice of a dataset-wide Gram matrix to avoid recomputing dot products per fold.
inline SvmModel fit_svm(const SvmSpec& spec, const Matrix& X, const Labels& y, const Matrix* gram = nullptr,
                        const SmoOptions& opt = {}) {
    validate_spec(spec);
    SvmModel m;
    m.spec = spec;
    const std::vector<int> pos = detail::check_training_set(X, y, m.classes);
    m.gamma = scale_gamma(X);
    Matrix own_gram;
    if (!gram) {
        own_gram = gram_matrix(X);
        gram = &own_gram;
    } else if (gram->rows() != X.rows() || gram->cols() != X.rows()) {
        throw UsageError("fit_svm: gram matrix shape does not match X");
    }
    const KernelParams kp = m.kernel();
    const auto n_classes = static_cast<int>(m.classes.size());
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < pos.size(); ++i) members[static_cast<std::size_t>(pos[i])].push_back(static_cast<Eigen::Index>(i));

    std::vector<int> support_slot(static_cast<std::size_t>(X.rows()), -1);
    std::vector<Eigen::Index> support_rows;
    bool zero_margin = false;
    for (int a = 0; a < n_classes; ++a) {
        for (int b = a + 1; b < n_classes; ++b) {
            std::vector<Eigen::Index> idx = members[static_cast<std::size_t>(a)];
            const auto& mb = members[static_cast<std::size_t>(b)];
            idx.insert(idx.end(), mb.begin(), mb.end());
            const auto np = static_cast<Eigen::Index>(idx.size());
            std::vector<int> yp(idx.size());
            Matrix K(np, np);
            for (Eigen::Index r = 0; r < np; ++r) {
                yp[static_cast<std::size_t>(r)] = pos[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])] == a ? 1 : -1;
                const Eigen::Index gr = idx[static_cast<std::size_t>(r)];
                for (Eigen::Index s = 0; s <= r; ++s) {
                    const Eigen::Index gs = idx[static_cast<std::size_t>(s)];
                    K(r, s) = K(s, r) = kernel_value(kp, (*gram)(gr, gs), (*gram)(gr, gr), (*gram)(gs, gs));
                }
            }
            for (Eigen::Index r = 0; r < np && !zero_margin; ++r) {
                for (Eigen::Index s = 0; s < r; ++s) {
                    if (yp[static_cast<std::size_t>(r)] != yp[static_cast<std::size_t>(s)] &&
                        K(r, r) + K(s, s) - 2.0 * K(r, s) <= 1e-12) {
                        zero_margin = true;
                        break;
                    }
                }
            }
            const SmoResult res = smo_solve(K, yp, spec.c, opt);
            SvmPair pair;
            pair.first = a;
            pair.second = b;
            pair.bias = res.bias;
            pair.converged = res.converged;
            pair.iterations = res.iterations;
            for (Eigen::Index r = 0; r < np; ++r) {
                if (res.alpha[r] <= 0.0) continue;
                const auto g = static_cast<std::size_t>(idx[static_cast<std::size_t>(r)]);
                if (support_slot[g] < 0) {
                    support_slot[g] = static_cast<int>(support_rows.size());
                    support_rows.push_back(static_cast<Eigen::Index>(g));
                }
                pair.sv.push_back(support_slot[g]);
                pair.alpha.push_back(res.alpha[r]);
                pair.sign.push_back(yp[static_cast<std::size_t>(r)]);
            }
            if (!res.converged) {
                m.warnings.push_back("pair (" + std::to_string(m.classes[static_cast<std::size_t>(a)]) + ", " +
                                     std::to_string(m.classes[static_cast<std::size_t>(b)]) +
                                     ") hit the SMO iteration cap");
            }
            m.pairs.push_back(std::move(pair));
        }
    }
    if (zero_margin) m.warnings.push_back("zero-margin: identical points with conflicting labels");
    m.support.resize(static_cast<Eigen::Index>(support_rows.size()), X.cols());
    m.support_sq.resize(static_cast<Eigen::Index>(support_rows.size()));
    for (std::size_t s = 0; s < support_rows.size(); ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        m.support.row(si) = X.row(support_rows[s]);
        m.support_sq[si] = (*gram)(support_rows[s], support_rows[s]);
    }
    return m;
}

/// Majority vote over pairwise machines; ties go to the larger summed decision value,
/// then to the earlier class.
inline PredictionResult predict_svm(const SvmModel& m, const RowRef& x) {
    detail::check_query_dim(x, m.dim());
    const auto d = m.dim();
    const KernelParams kp = m.kernel();
    const double x_sq = kernels::dot(x.data(), x.data(), d);
    std::vector<double> kv(static_cast<std::size_t>(m.support.rows()));
    for (Eigen::Index s = 0; s < m.support.rows(); ++s) {
        kv[static_cast<std::size_t>(s)] = kernel_value(kp, kernels::dot(m.support.row(s).data(), x.data(), d), m.support_sq[s], x_sq);
    }
    const std::size_t nc = m.classes.size();
    PredictionResult r;
    r.scores.assign(nc, 0.0);
    std::vector<double> dec_sum(nc, 0.0);
    for (const auto& p : m.pairs) {
        double dec = p.bias;
        for (std::size_t t = 0; t < p.sv.size(); ++t) dec += p.alpha[t] * p.sign[t] * kv[static_cast<std::size_t>(p.sv[t])];
        r.scores[static_cast<std::size_t>(dec > 0.0 ? p.first : p.second)] += 1.0;
        dec_sum[static_cast<std::size_t>(p.first)] += dec;
        dec_sum[static_cast<std::size_t>(p.second)] -= dec;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < nc; ++c) {
        if (r.scores[c] > r.scores[best] || (r.scores[c] == r.scores[best] && dec_sum[c] > dec_sum[best])) best = c;
    }
    r.label = m.classes[best];
    r.confidence = nc > 1 ? r.scores[best] / static_cast<double>(nc - 1) : 1.0;
    return r;
}

}  // namespace dscope

#pragma once

#include "dscope/hyperopt/acquisition.hpp"
#include "dscope/hyperopt/design.hpp"
#include "dscope/hyperopt/gp.hpp"
#include "dscope/hyperopt/search_space.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace dscope {

struct ObjectiveResult {
    double value = 0.0;
    std::vector<double> fold_values;
};

struct Trial {
    int iteration = 0;
    Theta theta;
    Vector x;
    double value = 0.0;
    std::vector<double> fold_values;
    bool failed = false;
    std::string error;
};

struct BayesOptions {
    int n_iterations = 30;
    int n_initial = 5;
    std::uint64_t seed = 42;
    double xi = 0.01;
    int n_candidates = 1000;
    int n_local = 200;
    double local_sigma = 0.05;
    /// Called after every trial; useful for progress output.
    std::function<void(const Trial&)> on_trial;
};

struct BayesResult {
    Trial best;
    std::vector<Trial> history;
};

using Objective = std::function<ObjectiveResult(const Theta&)>;

namespace detail {

inline std::size_t best_index(const std::vector<Trial>& h) {
    std::size_t best = 0;
    bool found = false;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i].failed) continue;
        if (!found || h[i].value > h[best].value) {
            best = i;
            found = true;
        }
    }
    return best;
}

}  // namespace detail

/// GP/EI Bayesian optimization (maximization). The first n_initial points come from a
/// scrambled Halton design; later points maximize EI over seeded uniform candidates plus
/// Gaussian perturbations of the incumbent. All candidates are snapped to valid thetas.
inline BayesResult bayes_optimize(const Objective& objective, const SearchSpace& space, const BayesOptions& opt = {}) {
    if (opt.n_initial < 2) throw UsageError("bayes_optimize: n_initial must be >= 2");
    if (opt.n_iterations < opt.n_initial) throw UsageError("bayes_optimize: n_iterations must be >= n_initial");
    if (opt.xi < 0.0) throw UsageError("bayes_optimize: xi must be >= 0");
    const auto m = static_cast<Eigen::Index>(space.encoded_dim());
    if (m == 0) throw UsageError("bayes_optimize: empty search space");

    BayesResult res;
    const auto evaluate = [&](int it, const Vector& x) {
        Trial t;
        t.iteration = it;
        t.theta = space.decode(x);
        t.x = space.encode(t.theta);
        try {
            ObjectiveResult r = objective(t.theta);
            if (!std::isfinite(r.value)) throw DataError("objective returned a non-finite value");
            t.value = r.value;
            t.fold_values = std::move(r.fold_values);
        } catch (const std::exception& e) {
            t.value = 0.0;
            t.fold_values.clear();
            t.failed = true;
            t.error = e.what();
        }
        res.history.push_back(t);
        if (opt.on_trial) opt.on_trial(res.history.back());
    };

    const Matrix init = scrambled_halton(static_cast<std::size_t>(opt.n_initial), static_cast<std::size_t>(m), opt.seed);
    for (int i = 0; i < opt.n_initial; ++i) evaluate(i, init.row(i).transpose());

    SplitMix64 rng(mix64(opt.seed ^ 0xB0BA7E5EEDULL));
    for (int it = opt.n_initial; it < opt.n_iterations; ++it) {
        Matrix X(static_cast<Eigen::Index>(res.history.size()), m);
        Vector y(static_cast<Eigen::Index>(res.history.size()));
        for (std::size_t i = 0; i < res.history.size(); ++i) {
            X.row(static_cast<Eigen::Index>(i)) = res.history[i].x.transpose();
            y[static_cast<Eigen::Index>(i)] = res.history[i].value;
        }
        GpFitOptions gopt;
        gopt.seed = mix64(opt.seed + static_cast<std::uint64_t>(it));
        const GPosterior gp = gp_fit(X, y, gopt);
        const std::size_t inc = detail::best_index(res.history);
        const double best_y = res.history[inc].value;
        const Vector& inc_x = res.history[inc].x;

        Vector best_x = inc_x;
        double best_ei = -1.0;
        const auto consider = [&](const Vector& raw) {
            const Vector x = space.project(raw);
            const GpPrediction p = gp_predict(gp, x);
            const double ei = expected_improvement(p.mean, p.std, best_y, opt.xi);
            if (ei > best_ei) {
                best_ei = ei;
                best_x = x;
            }
        };
        Vector cand(m);
        for (int c = 0; c < opt.n_candidates; ++c) {
            for (Eigen::Index k = 0; k < m; ++k) cand[k] = rng.uniform();
            consider(cand);
        }
        for (int c = 0; c < opt.n_local; ++c) {
            for (Eigen::Index k = 0; k < m; ++k) cand[k] = std::clamp(inc_x[k] + opt.local_sigma * rng.normal(), 0.0, 1.0);
            consider(cand);
        }
        evaluate(it, best_x);
    }
    res.best = res.history[detail::best_index(res.history)];
    return res;
}

/// Convenience overload for scalar objectives.
inline BayesResult bayes_optimize(const std::function<double(const Theta&)>& f, const SearchSpace& space,
                                  const BayesOptions& opt = {}) {
    return bayes_optimize(Objective([&](const Theta& t) { return ObjectiveResult{f(t), {}}; }), space, opt);
}

inline nlohmann::ordered_json trial_to_json(const Trial& t) {
    nlohmann::ordered_json j;
    j["iteration"] = t.iteration;
    j["theta"] = theta_to_json(t.theta);
    j["encoded_x"] = std::vector<double>(t.x.data(), t.x.data() + t.x.size());
    j["value"] = t.value;
    j["fold_values"] = t.fold_values;
    j["failed"] = t.failed;
    return j;
}

inline void write_history_jsonl(const std::vector<Trial>& history, std::ostream& out) {
    for (const auto& t : history) out << trial_to_json(t).dump() << '\n';
}

inline void write_history_jsonl(const std::vector<Trial>& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    write_history_jsonl(history, out);
    if (!out) throw DataError("write failure on '" + path + "'");
}

}  // namespace dscope

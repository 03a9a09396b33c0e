#pragma once

#include "dscope/common.hpp"

#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace dscope {

inline constexpr std::size_t kLabseDim = 768;
inline constexpr std::size_t kBertDim = 1024;
inline constexpr double kUnitNormTolerance = 1e-4;

struct EmbeddingVector {
    std::vector<float> values;

    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<float> v) : values(std::move(v)) {}
    EmbeddingVector(std::initializer_list<float> v) : values(v) {}

    std::size_t dim() const { return values.size(); }
    std::span<const float> span() const { return values; }

    bool operator==(const EmbeddingVector&) const = default;
};

enum class Metric { cosine, euclidean, manhattan };

inline std::string_view metric_name(Metric m) {
    switch (m) {
        case Metric::cosine: return "cosine";
        case Metric::euclidean: return "euclidean";
        case Metric::manhattan: return "manhattan";
    }
    return "?";
}

inline Metric parse_metric(std::string_view s) {
    if (s == "cosine") return Metric::cosine;
    if (s == "euclidean") return Metric::euclidean;
    if (s == "manhattan") return Metric::manhattan;
    throw UsageError("unknown metric '" + std::string(s) + "'");
}

template <class T>
double l2_norm(std::span<const T> v) {
    double s = 0.0;
    for (T x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
}

inline bool all_finite(std::span<const float> v) {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool is_unit_norm(std::span<const float> v, double tol = kUnitNormTolerance) {
    return std::abs(l2_norm(v) - 1.0) <= tol;
}

inline EmbeddingVector l2_normalize(const EmbeddingVector& v) {
    if (!all_finite(v.span())) throw DataError("cannot normalize a vector with NaN/Inf components");
    const double n = l2_norm(v.span());
    if (n == 0.0) throw DataError("cannot normalize a zero vector");
    std::vector<float> out(v.dim());
    for (std::size_t i = 0; i < v.dim(); ++i) out[i] = static_cast<float>(static_cast<double>(v.values[i]) / n);
    return EmbeddingVector(std::move(out));
}

/// Distance between two equal-length vectors. Cosine distance is 1 - cos(a, b), clamped at 0.
template <class T>
double distance(std::span<const T> a, std::span<const T> b, Metric metric) {
    if (a.size() != b.size()) {
        throw UsageError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    const std::size_t d = a.size();
    switch (metric) {
        case Metric::cosine: {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double x = a[i], y = b[i];
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if (na == 0.0 || nb == 0.0) throw DataError("cosine distance undefined for zero vectors");
            return std::max(0.0, 1.0 - dot / (std::sqrt(na) * std::sqrt(nb)));
        }
        case Metric::euclidean: {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double t = static_cast<double>(a[i]) - static_cast<double>(b[i]);
                s += t * t;
            }
            return std::sqrt(s);
        }
        case Metric::manhattan: {
            double s = 0.0;
            for (std::size_t i = 0; i < d; ++i) s += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
            return s;
        }
    }
    return 0.0;
}

inline double distance(const EmbeddingVector& a, const EmbeddingVector& b, Metric metric) {
    return distance(a.span(), b.span(), metric);
}

namespace detail {

inline void add_token_direction(std::string_view token, std::uint64_t seed, double weight, std::vector<double>& acc) {
    SplitMix64 rng(mix64(fnv1a64(token) ^ mix64(seed ^ 0xD15C0F3EULL)));
    std::vector<double> dir(acc.size());
    double n2 = 0.0;
    for (auto& x : dir) {
        x = rng.normal();
        n2 += x * x;
    }
    const double scale = weight / std::sqrt(n2);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * dir[i];
}

}  // namespace detail

/// Deterministic stand-in for a sentence encoder.
///
/// Every whitespace token maps to a pseudo-random unit direction derived from
/// (token, seed). A leading token ending in ':' (e.g. "T3:") is the topic token: its
/// direction gets weight (1 - noise) and the normalized sum of the remaining token
/// directions gets weight `noise`. The result is L2-normalized, so texts sharing a
/// topic token cluster in cosine space with separability controlled by `noise`.
inline EmbeddingVector mock_embed(std::string_view text, std::size_t dim, std::uint64_t seed, double noise = 0.3) {
    if (dim < 2) throw UsageError("mock_embed needs dim >= 2");
    if (noise < 0.0 || noise > 1.0) throw UsageError("mock_embed noise must be in [0, 1]");
    std::vector<std::string> tokens;
    {
        std::istringstream ss{std::string(text)};
        std::string tok;
        while (ss >> tok) tokens.push_back(tok);
    }
    std::vector<double> topic(dim, 0.0), rest(dim, 0.0);
    bool has_topic = false;
    std::size_t first = 0;
    if (!tokens.empty() && tokens[0].size() > 1 && tokens[0].back() == ':') {
        detail::add_token_direction(tokens[0], seed, 1.0, topic);
        has_topic = true;
        first = 1;
    }
    bool has_rest = false;
    for (std::size_t i = first; i < tokens.size(); ++i) {
        detail::add_token_direction(tokens[i], seed, 1.0, rest);
        has_rest = true;
    }
    if (has_rest) {
        const double n = l2_norm(std::span<const double>(rest));
        if (n > 0.0)
            for (auto& x : rest) x /= n;
    }
    std::vector<double> acc(dim, 0.0);
    if (has_topic && has_rest) {
        for (std::size_t i = 0; i < dim; ++i) acc[i] = (1.0 - noise) * topic[i] + noise * rest[i];
    } else if (has_topic) {
        acc = topic;
    } else if (has_rest) {
        acc = rest;
    }
    double n = l2_norm(std::span<const double>(acc));
    if (n == 0.0) {
        // Empty text or exact cancellation: fall back to the direction of the empty token.
        std::fill(acc.begin(), acc.end(), 0.0);
        detail::add_token_direction("", seed, 1.0, acc);
        n = l2_norm(std::span<const double>(acc));
    }
    std::vector<float> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / n);
    return EmbeddingVector(std::move(out));
}

}  // namespace dscope

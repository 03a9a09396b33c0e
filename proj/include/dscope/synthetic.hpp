#pragma once

#include "dscope/corpus.hpp"
#include "dscope/dates.hpp"
#include "dscope/embedding.hpp"
#include "dscope/store.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace dscope {

/// Topic token used by the synthetic fixtures for a category, e.g. "topic03:".
inline std::string synthetic_topic_token(int category) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "topic%02d:", category);
    return buf;
}

namespace detail {

inline std::string synthetic_text(int category, SplitMix64& rng, int words = 8, int vocab = 400) {
    std::string t = synthetic_topic_token(category);
    for (int w = 0; w < words; ++w) t += " w" + std::to_string(rng.bounded(static_cast<std::uint64_t>(vocab)));
    return t;
}

}  // namespace detail

/// `per_class` texts for each of the 11 categories, grouped by category. Texts carry the
/// category's topic token followed by random filler words.
inline LabeledDataset synthetic_labeled_dataset(std::size_t per_class, std::uint64_t seed) {
    SplitMix64 rng(mix64(seed ^ 0x5EEDC0DEULL));
    LabeledDataset ds;
    for (int c = 0; c < kNumCategories; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            LabeledSample s;
            s.text = detail::synthetic_text(c, rng);
            s.language = "und";
            s.category = category_from_index(c);
            s.source = "synthetic";
            s.original_category = std::string(category_name(*s.category));
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

struct SyntheticTweet {
    TweetRecord record;
    std::string text;
    int category = 0;
};

/// `n` tweets with uniformly random dates in [first, last] and a category mix that drifts
/// over the window, so daily distributions are not flat.
inline std::vector<SyntheticTweet> synthetic_tweets(std::size_t n, Date first, Date last, std::uint64_t seed) {
    const long span = days_between(first, last) + 1;
    if (span < 1) throw UsageError("synthetic_tweets: empty date range");
    SplitMix64 rng(mix64(seed ^ 0x7EE75ULL));
    std::vector<SyntheticTweet> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto day = static_cast<long>(rng.bounded(static_cast<std::uint64_t>(span)));
        const double u = rng.uniform(), drift = static_cast<double>(day) / static_cast<double>(span);
        int c = static_cast<int>(rng.bounded(kNumCategories));
        if (u < 0.3 * drift) c = category_index(Category::Prevention);
        else if (u > 1.0 - 0.3 * (1.0 - drift)) c = category_index(Category::Travel);
        auto& t = out[i];
        t.category = c;
        t.text = detail::synthetic_text(c, rng);
        t.record.record_id = "syn" + std::to_string(i);
        t.record.date = Date(std::chrono::sys_days(first) + std::chrono::days(day));
        t.record.row = i;
    }
    return out;
}

inline Matrix embed_texts(const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed, double noise) {
    Matrix X(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const EmbeddingVector v = mock_embed(texts[i], dim, seed, noise);
        for (std::size_t k = 0; k < dim; ++k) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v.values[k];
    }
    return X;
}

inline std::vector<EmbeddingVector> embed_to_vectors(const std::vector<std::string>& texts, std::size_t dim, std::uint64_t seed,
                                                     double noise) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(mock_embed(t, dim, seed, noise));
    return out;
}

}  // namespace dscope

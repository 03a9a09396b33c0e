#pragma once

#include "dscope/common.hpp"
#include "dscope/taxonomy.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dscope {

/// One training text. `category` is empty until the sample has been resolved onto the
/// canonical taxonomy, either at load time or by apply_merge_rules.
struct LabeledSample {
    std::string text;
    std::string language = "und";
    std::optional<Category> category;
    std::string source;
    std::string original_category;

    bool operator==(const LabeledSample&) const = default;
};

struct LabeledDataset {
    std::vector<LabeledSample> samples;
    std::size_t unknown_field_count = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    bool is_canonical() const {
        return std::all_of(samples.begin(), samples.end(), [](const LabeledSample& s) {
            return s.category.has_value() && is_trainable(*s.category);
        });
    }

    /// Label ids (Category indices) in sample order. Throws if any sample is unresolved.
    Labels labels() const {
        Labels out;
        out.reserve(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!samples[i].category) {
                throw DataError("sample " + std::to_string(i) + " has unresolved category '" +
                                samples[i].original_category + "'");
            }
            out.push_back(category_index(*samples[i].category));
        }
        return out;
    }
};

enum class MergeAction { merge, discard };

struct MergeRule {
    std::vector<std::string> sources;
    std::optional<Category> target;
    MergeAction action = MergeAction::merge;

    static MergeRule merge(std::vector<std::string> sources, Category target) {
        return {std::move(sources), target, MergeAction::merge};
    }
    static MergeRule discard(std::vector<std::string> sources) {
        return {std::move(sources), std::nullopt, MergeAction::discard};
    }
};

inline void validate_rules(const std::vector<MergeRule>& rules) {
    std::set<std::string> seen;
    for (const auto& rule : rules) {
        if (rule.action == MergeAction::discard && rule.target) {
            throw UsageError("discard rule must not have a target");
        }
        if (rule.action == MergeAction::merge && (!rule.target || !is_trainable(*rule.target))) {
            throw UsageError("merge rule needs a trainable target category");
        }
        for (const auto& src : rule.sources) {
            if (!seen.insert(nfc(src)).second) {
                throw UsageError("original category '" + src + "' appears in more than one rule");
            }
        }
    }
}

/// Category merges used to build the 11-class training corpus from the intent dataset.
inline std::vector<MergeRule> intent_merge_rules() {
    return {
        MergeRule::discard({"Hi", "Okay/Thanks"}),
        MergeRule::merge({"Can_i_get_from_feces_animal_pets", "Can_i_get_from_packages_surfaces",
                          "How_does_corona_spread"},
                         Category::Transmission),
        MergeRule::merge({"What_if_i_visited_high_risk_area"}, Category::Travel),
    };
}

inline std::vector<MergeRule> rules_from_json(const nlohmann::json& j) {
    std::vector<MergeRule> rules;
    for (const auto& item : j) {
        MergeRule rule;
        rule.sources = item.at("sources").get<std::vector<std::string>>();
        const auto action = item.value("action", std::string("merge"));
        if (action == "discard") {
            rule.action = MergeAction::discard;
            if (item.contains("target")) throw UsageError("discard rule must not have a target");
        } else if (action == "merge") {
            const auto name = item.at("target").get<std::string>();
            rule.target = parse_category(name);
            if (!rule.target) throw UsageError("unknown merge target '" + name + "'");
        } else {
            throw UsageError("unknown rule action '" + action + "'");
        }
        rules.push_back(std::move(rule));
    }
    validate_rules(rules);
    return rules;
}

/// Reads a JSONL corpus: one object per line with keys text, language, category, source,
/// and optionally original_category. Strings are NFC-normalized. Blank lines are skipped.
inline LabeledDataset load_labeled_dataset(std::istream& in) {
    static const std::set<std::string> known = {"text", "language", "category", "source", "original_category"};
    LabeledDataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto where = [&] { return "line " + std::to_string(lineno) + ": "; };
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(where() + "malformed JSON (" + e.what() + ")");
        }
        if (!obj.is_object()) throw DataError(where() + "expected a JSON object");
        for (const char* key : {"text", "language", "category", "source"}) {
            if (!obj.contains(key) || !obj[key].is_string()) {
                throw DataError(where() + "missing or non-string field '" + key + "'");
            }
        }
        for (const auto& item : obj.items()) {
            if (!known.count(item.key())) ++ds.unknown_field_count;
        }
        LabeledSample s;
        s.text = nfc(obj["text"].get<std::string>());
        if (s.text.empty()) throw DataError(where() + "empty text");
        s.language = nfc(obj["language"].get<std::string>());
        if (s.language.empty()) s.language = "und";
        s.source = nfc(obj["source"].get<std::string>());
        const std::string category = nfc(obj["category"].get<std::string>());
        if (obj.contains("original_category")) {
            if (!obj["original_category"].is_string()) throw DataError(where() + "non-string original_category");
            s.original_category = nfc(obj["original_category"].get<std::string>());
        } else {
            s.original_category = category;
        }
        s.category = parse_category(category);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline LabeledDataset load_labeled_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    return load_labeled_dataset(in);
}

/// Writes resolved samples as JSONL, one object per line, keys in a fixed order.
inline void write_labeled_dataset(const LabeledDataset& ds, std::ostream& out) {
    for (const auto& s : ds.samples) {
        nlohmann::ordered_json j;
        j["text"] = s.text;
        j["language"] = s.language;
        j["category"] = s.category ? std::string(category_name(*s.category)) : s.original_category;
        j["source"] = s.source;
        j["original_category"] = s.original_category;
        out << j.dump() << '\n';
    }
}

/// Rewrites or drops samples according to `rules`, matched on original_category.
/// Samples matching no rule keep their canonical label; anything else is an error.
inline LabeledDataset apply_merge_rules(const LabeledDataset& ds, const std::vector<MergeRule>& rules) {
    validate_rules(rules);
    std::map<std::string, const MergeRule*> index;
    for (const auto& rule : rules) {
        for (const auto& src : rule.sources) index.emplace(nfc(src), &rule);
    }
    LabeledDataset out;
    out.unknown_field_count = ds.unknown_field_count;
    out.samples.reserve(ds.samples.size());
    std::set<std::string> offending;
    for (const auto& s : ds.samples) {
        auto it = index.find(s.original_category);
        if (it != index.end()) {
            if (it->second->action == MergeAction::discard) continue;
            LabeledSample copy = s;
            copy.category = it->second->target;
            out.samples.push_back(std::move(copy));
            continue;
        }
        LabeledSample copy = s;
        if (!copy.category || !is_trainable(*copy.category)) copy.category = parse_category(s.original_category);
        if (!copy.category) {
            offending.insert(s.original_category);
            continue;
        }
        out.samples.push_back(std::move(copy));
    }
    if (!offending.empty()) {
        std::string msg = "categories match no rule and no canonical label:";
        for (const auto& name : offending) msg += " '" + name + "'";
        throw DataError(msg);
    }
    return out;
}

inline std::map<Category, std::size_t> label_distribution(const LabeledDataset& ds) {
    std::map<Category, std::size_t> counts;
    for (const auto& s : ds.samples) {
        if (!s.category) throw DataError("unresolved category '" + s.original_category + "'");
        ++counts[*s.category];
    }
    return counts;
}

inline std::map<std::string, std::size_t> language_distribution(const LabeledDataset& ds) {
    std::map<std::string, std::size_t> counts;
    for (const auto& s : ds.samples) ++counts[s.language];
    return counts;
}

/// Per-sample fold index for k-fold cross-validation.
struct FoldAssignment {
    int n_folds = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignment;

    std::vector<std::size_t> test_indices(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> train_indices(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i)
            if (assignment[i] != fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> fold_sizes() const {
        std::vector<std::size_t> sizes(static_cast<std::size_t>(n_folds), 0);
        for (int f : assignment) ++sizes[static_cast<std::size_t>(f)];
        return sizes;
    }

    bool operator==(const FoldAssignment&) const = default;
};

template <class Namer>
FoldAssignment stratified_kfold(const Labels& labels, int n_folds, std::uint64_t seed, Namer&& class_name) {
    if (n_folds < 2) throw UsageError("n_folds must be at least 2");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [label, idx] : by_class) {
        if (idx.size() < static_cast<std::size_t>(n_folds)) {
            throw DataError("class " + class_name(label) + " has " + std::to_string(idx.size()) +
                            " samples, fewer than n_folds=" + std::to_string(n_folds));
        }
    }
    FoldAssignment fa{n_folds, seed, std::vector<int>(labels.size(), -1)};
    SplitMix64 rng(seed);
    std::size_t dealt = 0;
    for (auto& [label, idx] : by_class) {
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[rng.bounded(i)]);
        }
        // Continue dealing where the previous class stopped so overall fold sizes stay balanced.
        for (std::size_t sample : idx) {
            fa.assignment[sample] = static_cast<int>(dealt % static_cast<std::size_t>(n_folds));
            ++dealt;
        }
    }
    return fa;
}

inline FoldAssignment stratified_kfold(const Labels& labels, int n_folds, std::uint64_t seed) {
    return stratified_kfold(labels, n_folds, seed, [](int label) { return std::to_string(label); });
}

inline FoldAssignment stratified_kfold(const LabeledDataset& ds, int n_folds, std::uint64_t seed) {
    return stratified_kfold(ds.labels(), n_folds, seed, [](int label) {
        return "'" + std::string(category_name(category_from_index(label))) + "'";
    });
}

}  // namespace dscope

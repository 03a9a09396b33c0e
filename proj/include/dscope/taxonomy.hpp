#pragma once

#include "dscope/common.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace dscope {

/// The closed set of discourse categories. Values are dense indices in display order;
/// Unclassified is reserved for inference and never used as a training label.
enum class Category : int {
    Donate = 0,
    NewsAndPress,
    Prevention,
    Reporting,
    Share,
    Speculation,
    Symptoms,
    Transmission,
    Travel,
    Treatment,
    WhatIsCorona,
    Unclassified,
};

inline constexpr int kNumCategories = 11;

inline constexpr std::array<std::string_view, kNumCategories + 1> kCategoryNames = {
    "Donate",   "News & Press", "Prevention", "Reporting", "Share", "Speculation",
    "Symptoms", "Transmission", "Travel",     "Treatment", "What Is Corona?", "Unclassified",
};

inline constexpr int category_index(Category c) { return static_cast<int>(c); }

inline constexpr bool is_trainable(Category c) {
    return category_index(c) >= 0 && category_index(c) < kNumCategories;
}

inline std::string_view category_name(Category c) {
    return kCategoryNames.at(static_cast<std::size_t>(category_index(c)));
}

inline Category category_from_index(int i) {
    if (i < 0 || i > kNumCategories) throw DataError("category index out of range: " + std::to_string(i));
    return static_cast<Category>(i);
}

/// Unicode NFC normalization of a UTF-8 string. Invalid sequences are replaced by U+FFFD.
inline std::string nfc(std::string_view utf8) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
    const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    if (norm->isNormalized(src, status) && U_SUCCESS(status)) {
        std::string out;
        src.toUTF8String(out);
        return out;
    }
    status = U_ZERO_ERROR;
    icu::UnicodeString dst = norm->normalize(src, status);
    if (U_FAILURE(status)) throw DataError("NFC normalization failed");
    std::string out;
    dst.toUTF8String(out);
    return out;
}

/// Exact (post-NFC) lookup of a canonical category name. Unclassified is accepted
/// only when `allow_unclassified` is set.
inline std::optional<Category> parse_category(std::string_view name, bool allow_unclassified = false) {
    const std::string key = nfc(name);
    const int limit = allow_unclassified ? kNumCategories + 1 : kNumCategories;
    for (int i = 0; i < limit; ++i) {
        if (key == kCategoryNames[static_cast<std::size_t>(i)]) return static_cast<Category>(i);
    }
    return std::nullopt;
}

}  // namespace dscope

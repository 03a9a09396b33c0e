#pragma once

#include "dscope/common.hpp"

#include <array>
#include <numeric>
#include <vector>

namespace dscope {

namespace detail {
inline constexpr std::array<int, 16> kHaltonPrimes = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
}

/// Halton sequence with a random digit permutation per (dimension, digit position).
/// Row i is the (i + 1)-th point of the sequence, so the origin is never emitted.
inline Matrix scrambled_halton(std::size_t n, std::size_t dim, std::uint64_t seed) {
    if (dim > detail::kHaltonPrimes.size()) throw UsageError("scrambled_halton supports at most 16 dimensions");
    constexpr int kDigits = 24;
    SplitMix64 rng(mix64(seed ^ 0x4A1709E5C0FFEEULL));
    Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t d = 0; d < dim; ++d) {
        const int base = detail::kHaltonPrimes[d];
        std::vector<std::vector<int>> perms(kDigits, std::vector<int>(static_cast<std::size_t>(base)));
        for (auto& p : perms) {
            std::iota(p.begin(), p.end(), 0);
            for (std::size_t k = p.size() - 1; k > 0; --k) std::swap(p[k], p[rng.bounded(k + 1)]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t idx = i + 1;
            double scale = 1.0 / base, v = 0.0;
            for (int k = 0; k < kDigits; ++k) {
                const auto digit = static_cast<std::size_t>(idx % static_cast<std::uint64_t>(base));
                idx /= static_cast<std::uint64_t>(base);
                v += perms[static_cast<std::size_t>(k)][digit] * scale;
                scale /= base;
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = std::min(v, 1.0);
        }
    }
    return out;
}

}  // namespace dscope

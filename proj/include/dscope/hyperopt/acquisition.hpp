#pragma once

#include <algorithm>
#include <cmath>

namespace dscope {

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Expected improvement for maximization over the incumbent `best`, with margin `xi`.
inline double expected_improvement(double mean, double std, double best, double xi = 0.01) {
    const double gain = mean - best - xi;
    if (!(std > 0.0)) return std::max(0.0, gain);
    const double z = gain / std;
    return std::max(0.0, gain * normal_cdf(z) + std * normal_pdf(z));
}

}  // namespace dscope

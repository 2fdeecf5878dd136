#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace plrank {

double mean(std::span<const double> values);

// 1-based ranks; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Empty when either side is constant (correlation undefined).
std::optional<double> pearson_correlation(std::span<const double> x,
                                          std::span<const double> y);
std::optional<double> spearman_correlation(std::span<const double> x,
                                           std::span<const double> y);

inline double binomial_std_error(double p, std::int64_t n) {
  return n > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

}  // namespace plrank

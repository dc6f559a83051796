#pragma once

#include <span>
#include <utility>

namespace flipchance {

/// Pairwise (cascade) summation in index order. The result depends only on
/// the values and their order.
double pairwise_sum(std::span<const double> values);

/// Clopper-Pearson interval for `successes` out of `n` at confidence `level`.
std::pair<double, double> binomial_ci(long long successes, long long n, double level = 0.95);

/// Sample Pearson correlation; NaN if either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace flipchance

#include "flipchance/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

namespace flipchance {

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::pair<double, double> binomial_ci(long long successes, long long n, double level) {
    if (n < 1 || successes < 0 || successes > n) throw std::invalid_argument("binomial_ci: need 0 <= successes <= n, n >= 1");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("binomial_ci: level must lie in (0, 1)");
    const double tail = 0.5 * (1.0 - level);
    const auto x = static_cast<double>(successes);
    const auto m = static_cast<double>(n);
    const double lo = successes == 0 ? 0.0 : boost::math::ibeta_inv(x, m - x + 1.0, tail);
    const double hi = successes == n ? 1.0 : boost::math::ibeta_inv(x + 1.0, m - x, 1.0 - tail);
    return {lo, hi};
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson: need two equal-length samples of size >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = pairwise_sum(x) / n, my = pairwise_sum(y) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    const auto rx = ranks(x), ry = ranks(y);
    return pearson(rx, ry);
}

}  // namespace flipchance

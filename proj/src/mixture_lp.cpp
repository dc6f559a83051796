#include "flipchance/mixture_lp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace flipchance {

namespace {

bool improves(double candidate, double incumbent) {
    return candidate > incumbent + 1e-12 * std::max(1.0, std::abs(incumbent));
}

double cross(const EnvelopeVertex& o, const EnvelopeVertex& a, const EnvelopeVertex& b) {
    return (a.risk - o.risk) * (b.value - o.value) - (a.value - o.value) * (b.risk - o.risk);
}

}  // namespace

LpSolution solve_mixture_lp(std::span<const RiskReward> points, double limit) {
    if (points.empty()) throw std::invalid_argument("solve_mixture_lp: no points");
    if (!std::isfinite(limit)) throw std::invalid_argument("solve_mixture_lp: limit must be finite");

    LpSolution best;
    bool found = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].risk > limit) continue;
        if (!found || improves(points[i].value, best.value)) {
            best.support = {{i, 1.0}};
            best.value = points[i].value;
            best.risk = points[i].risk;
            found = true;
        }
    }
    for (std::size_t a = 0; a < points.size(); ++a) {
        for (std::size_t b = a + 1; b < points.size(); ++b) {
            std::size_t lo = a, hi = b;
            if (points[lo].risk > points[hi].risk) std::swap(lo, hi);
            if (!(points[lo].risk < limit && limit < points[hi].risk)) continue;
            const double w = (points[hi].risk - limit) / (points[hi].risk - points[lo].risk);
            const double v = w * points[lo].value + (1.0 - w) * points[hi].value;
            if (!found || improves(v, best.value)) {
                best.support = {{lo, w}, {hi, 1.0 - w}};
                best.value = v;
                best.risk = limit;
                found = true;
            }
        }
    }
    if (!found) throw Infeasible("mixture LP infeasible: every risk exceeds " + std::to_string(limit));
    best.active_constraint = best.support.size() == 2 || best.risk == limit;
    return best;
}

std::vector<EnvelopeVertex> concave_envelope(std::span<const RiskReward> points) {
    if (points.empty()) throw std::invalid_argument("concave_envelope: no points");
    std::vector<EnvelopeVertex> pts;
    pts.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) pts.push_back({points[i].risk, points[i].value, i});
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        if (a.risk != b.risk) return a.risk < b.risk;
        if (a.value != b.value) return a.value > b.value;
        return a.index < b.index;
    });
    // keep the best entry of each risk column
    pts.erase(std::unique(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.risk == b.risk; }),
              pts.end());

    std::vector<EnvelopeVertex> hull;
    for (const auto& p : pts) {
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) >= 0.0) hull.pop_back();
        hull.push_back(p);
    }
    return hull;
}

double envelope_value(std::span<const EnvelopeVertex> envelope, double alpha) {
    if (envelope.empty()) throw std::invalid_argument("envelope_value: empty envelope");
    if (alpha < envelope.front().risk) throw Infeasible("envelope_value: alpha below the smallest risk");
    std::size_t peak = 0;
    for (std::size_t i = 1; i < envelope.size(); ++i)
        if (envelope[i].value > envelope[peak].value) peak = i;
    if (alpha >= envelope[peak].risk) return envelope[peak].value;
    // alpha lies strictly inside the rising part [front, peak)
    std::size_t k = 0;
    while (envelope[k + 1].risk < alpha) ++k;
    const auto& l = envelope[k];
    const auto& r = envelope[k + 1];
    const double t = (alpha - l.risk) / (r.risk - l.risk);
    return l.value + t * (r.value - l.value);
}

}  // namespace flipchance

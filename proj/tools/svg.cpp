#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace flipchance::plot {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

// 1-2-5 step giving about `target` intervals.
double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) return m * mag;
    return 10.0 * mag;
}

}  // namespace

std::string render_svg(const Figure& fig, int width, int height) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : fig.series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.05 * (x1 - x0), pady = 0.05 * (y1 - y0);
    x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;

    const double left = 70, right = width - 20.0, top = 40, bottom = height - 55.0;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (right - left); };
    auto py = [&](double y) { return bottom - (y - y0) / (y1 - y0) * (bottom - top); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(fig.title)
      << "</text>\n";
    o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
      << num(bottom - top) << "\" fill=\"none\" stroke=\"black\"/>\n";

    const double xs = nice_step(x1 - x0, 6), ys = nice_step(y1 - y0, 6);
    for (double t = std::ceil(x0 / xs) * xs; t <= x1; t += xs) {
        o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(px(t)) << "\" y2=\""
          << num(bottom + 5) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(bottom + 18) << "\" text-anchor=\"middle\">"
          << tick_label(std::abs(t) < 1e-12 * xs ? 0.0 : t) << "</text>\n";
    }
    for (double t = std::ceil(y0 / ys) * ys; t <= y1; t += ys) {
        o << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left) << "\" y2=\""
          << num(py(t)) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << num(left - 8) << "\" y=\"" << num(py(t) + 4) << "\" text-anchor=\"end\">"
          << tick_label(std::abs(t) < 1e-12 * ys ? 0.0 : t) << "</text>\n";
    }
    o << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">"
      << escape(fig.x_label) << "</text>\n";
    o << "<text transform=\"translate(18," << num((top + bottom) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(fig.y_label) << "</text>\n";

    for (const auto& s : fig.series) {
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.line) {
            o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < n; ++i) o << (i ? " " : "") << num(px(s.x[i])) << "," << num(py(s.y[i]));
            o << "\"/>\n";
        } else {
            for (std::size_t i = 0; i < n; ++i)
                o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"3.5\" fill=\""
                  << s.color << "\"/>\n";
        }
    }
    double ly = top + 16;
    for (const auto& s : fig.series) {
        if (s.label.empty()) continue;
        o << "<rect x=\"" << num(right - 170) << "\" y=\"" << num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
          << s.color << "\"/><text x=\"" << num(right - 155) << "\" y=\"" << num(ly) << "\">" << escape(s.label)
          << "</text>\n";
        ly += 16;
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace flipchance::plot

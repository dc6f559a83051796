#pragma once

#include <string>
#include <vector>

namespace flipchance::plot {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool line = false;      // polyline instead of markers
    std::string color = "#1f77b4";
};

struct Figure {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

/// Self-contained SVG document with axes, ticks and a legend.
std::string render_svg(const Figure& fig, int width = 640, int height = 440);

}  // namespace flipchance::plot

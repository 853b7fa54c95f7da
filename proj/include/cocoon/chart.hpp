#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cocoon {

struct ChartSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (x, y), drawn in the given order
};

// Standalone SVG line chart: one polyline per series, labeled axes and a legend.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series);

std::string xml_escape(const std::string& text);

}  // namespace cocoon

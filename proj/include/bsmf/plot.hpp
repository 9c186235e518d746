#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace bsmf {

/// Minimal static SVG line chart; one polyline per named series.
struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<PlotSeries>& series);

} // namespace bsmf

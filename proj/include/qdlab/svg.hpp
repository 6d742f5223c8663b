#pragma once

#include <string>
#include <vector>

#include "qdlab/geometry.hpp"

namespace qdlab {

// One colored point of a scatter-style heatmap: a value sampled at a 2-D
// location inside `space`. Rendering is a pure function of the inputs.
struct HeatmapPoint {
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;
};

struct HeatmapStyle {
    int width_px = 480;
    int height_px = 480;
    double cell_radius_px = 10.0;
    bool lighter_is_smaller = true;  // smaller value -> lighter color
    std::string title;
};

// Renders points as filled circles colored on a single-hue ramp between the
// min and max of `points` (or [vmin, vmax] when vmin < vmax is given).
std::string heatmap_svg(const std::vector<HeatmapPoint>& points, const BdSpace& space,
                        const HeatmapStyle& style, double vmin = 0.0, double vmax = -1.0);

struct LineSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y_err;  // optional; same length as y when present
    std::string color = "#1f6fb2";
};

struct LineChartStyle {
    int width_px = 560;
    int height_px = 360;
    std::string title;
    std::string x_label;
    std::string y_label;
};

std::string line_chart_svg(const std::vector<LineSeries>& series, const LineChartStyle& style);

}  // namespace qdlab

#include "qdlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qdlab {

namespace {

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

// Single-hue ramp from near-white (t=0) to dark blue (t=1).
std::string ramp_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(245.0 + t * (20.0 - 245.0)));
    const int g = static_cast<int>(std::lround(247.0 + t * (60.0 - 247.0)));
    const int b = static_cast<int>(std::lround(252.0 + t * (120.0 - 252.0)));
    std::ostringstream s;
    s << "rgb(" << r << ',' << g << ',' << b << ')';
    return s.str();
}

std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string heatmap_svg(const std::vector<HeatmapPoint>& points, const BdSpace& space,
                        const HeatmapStyle& style, double vmin, double vmax) {
    if (space.dim != 2) throw std::invalid_argument("heatmap_svg: BD space must be 2-D");
    if (!(vmin < vmax)) {
        vmin = std::numeric_limits<double>::infinity();
        vmax = -std::numeric_limits<double>::infinity();
        for (const auto& p : points) {
            vmin = std::min(vmin, p.value);
            vmax = std::max(vmax, p.value);
        }
        if (points.empty()) vmin = 0.0, vmax = 1.0;
        if (vmax <= vmin) vmax = vmin + 1.0;
    }

    const double margin = 36.0;
    const double plot_w = style.width_px - 2.0 * margin;
    const double plot_h = style.height_px - 2.0 * margin;
    const double x0 = space.lower[0], x1 = space.upper[0];
    const double y0 = space.lower[1], y1 = space.upper[1];

    auto px = [&](double x) { return margin + (x - x0) / (x1 - x0) * plot_w; };
    auto py = [&](double y) { return margin + (y1 - y) / (y1 - y0) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width_px
        << "\" height=\"" << style.height_px << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<rect x=\"" << fmt(margin) << "\" y=\"" << fmt(margin) << "\" width=\""
        << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    if (!style.title.empty())
        out << "<text x=\"" << fmt(style.width_px / 2.0)
            << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
            << xml_escape(style.title) << "</text>\n";

    for (const auto& p : points) {
        double t = (p.value - vmin) / (vmax - vmin);
        if (!style.lighter_is_smaller) t = 1.0 - t;
        out << "<circle cx=\"" << fmt(px(p.x)) << "\" cy=\"" << fmt(py(p.y)) << "\" r=\""
            << fmt(style.cell_radius_px) << "\" fill=\"" << ramp_color(t)
            << "\" stroke=\"#888\" stroke-width=\"0.5\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string line_chart_svg(const std::vector<LineSeries>& series, const LineChartStyle& style) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double e = i < s.y_err.size() ? s.y_err[i] : 0.0;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i] - e);
            ymax = std::max(ymax, s.y[i] + e);
        }
    }
    if (!(xmin < xmax)) xmin = 0.0, xmax = 1.0;
    if (!(ymin < ymax)) ymin = 0.0, ymax = ymin + 1.0;

    const double margin = 46.0;
    const double plot_w = style.width_px - 2.0 * margin;
    const double plot_h = style.height_px - 2.0 * margin;
    auto px = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * plot_w; };
    auto py = [&](double y) { return margin + (ymax - y) / (ymax - ymin) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width_px
        << "\" height=\"" << style.height_px << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<rect x=\"" << fmt(margin) << "\" y=\"" << fmt(margin) << "\" width=\""
        << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    if (!style.title.empty())
        out << "<text x=\"" << fmt(style.width_px / 2.0)
            << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
            << xml_escape(style.title) << "</text>\n";
    if (!style.x_label.empty())
        out << "<text x=\"" << fmt(style.width_px / 2.0) << "\" y=\""
            << fmt(style.height_px - 8.0)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << xml_escape(style.x_label) << "</text>\n";
    if (!style.y_label.empty())
        out << "<text x=\"14\" y=\"" << fmt(style.height_px / 2.0)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
               "transform=\"rotate(-90 14 "
            << fmt(style.height_px / 2.0) << ")\">" << xml_escape(style.y_label) << "</text>\n";

    double legend_y = margin + 14.0;
    for (const auto& s : series) {
        if (s.x.empty()) continue;
        // error band
        if (s.y_err.size() == s.y.size()) {
            std::ostringstream band;
            for (std::size_t i = 0; i < s.x.size(); ++i)
                band << (i == 0 ? 'M' : 'L') << fmt(px(s.x[i])) << ' '
                     << fmt(py(s.y[i] + s.y_err[i]));
            for (std::size_t i = s.x.size(); i-- > 0;)
                band << 'L' << fmt(px(s.x[i])) << ' ' << fmt(py(s.y[i] - s.y_err[i]));
            band << 'Z';
            out << "<path d=\"" << band.str() << "\" fill=\"" << s.color
                << "\" opacity=\"0.15\"/>\n";
        }
        std::ostringstream path;
        for (std::size_t i = 0; i < s.x.size(); ++i)
            path << (i == 0 ? 'M' : 'L') << fmt(px(s.x[i])) << ' ' << fmt(py(s.y[i]));
        out << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"1.5\"/>\n";
        if (!s.label.empty()) {
            out << "<line x1=\"" << fmt(margin + 8.0) << "\" y1=\"" << fmt(legend_y) << "\" x2=\""
                << fmt(margin + 28.0) << "\" y2=\"" << fmt(legend_y) << "\" stroke=\"" << s.color
                << "\" stroke-width=\"1.5\"/>\n";
            out << "<text x=\"" << fmt(margin + 34.0) << "\" y=\"" << fmt(legend_y + 4.0)
                << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(s.label)
                << "</text>\n";
            legend_y += 16.0;
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace qdlab

#ifndef LOGSAW_SVG_HPP
#define LOGSAW_SVG_HPP

#include <string>
#include <vector>

namespace logsaw {

// Minimal line-plot emitter: axes with tick labels and one polyline per
// series. Good enough to eyeball knot/pattern functions and objective
// curves; the CSV files next to the plots carry the exact numbers.
struct SvgSeries {
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
    std::string label;
};

struct SvgPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 360;
    std::vector<SvgSeries> series;
};

void save_svg_plot(const SvgPlot& plot, const std::string& path);

} // namespace logsaw

#endif

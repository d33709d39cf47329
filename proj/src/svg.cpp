#include "logsaw/svg.hpp"
#include "logsaw/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace logsaw {

void save_svg_plot(const SvgPlot& plot, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail("IOError", "cannot write " + path);

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const SvgSeries& s : plot.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmax > xmin)) {
        xmin -= 1;
        xmax += 1;
    }
    if (!(ymax > ymin)) {
        ymin -= 1;
        ymax += 1;
    }
    const double pad_y = 0.05 * (ymax - ymin);
    ymin -= pad_y;
    ymax += pad_y;

    const int ml = 64, mr = 16, mt = 32, mb = 44; // margins
    const double pw = plot.width - ml - mr;
    const double ph = plot.height - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::fprintf(f,
                 "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                 "viewBox=\"0 0 %d %d\" font-family=\"sans-serif\" font-size=\"11\">\n",
                 plot.width, plot.height, plot.width, plot.height);
    std::fprintf(f, "<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n", plot.width,
                 plot.height);
    std::fprintf(f, "<text x=\"%d\" y=\"18\" font-size=\"13\">%s</text>\n", ml,
                 plot.title.c_str());

    // axes
    std::fprintf(f,
                 "<line x1=\"%d\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                 ml, mt + ph, ml + pw, mt + ph);
    std::fprintf(f, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%.1f\" stroke=\"black\"/>\n",
                 ml, mt, ml, mt + ph);

    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        std::fprintf(f,
                     "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                     px(xv), mt + ph, px(xv), mt + ph + 4);
        std::fprintf(f,
                     "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.4g</text>\n",
                     px(xv), mt + ph + 18, xv);
        std::fprintf(f,
                     "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"black\"/>\n",
                     ml - 4.0, py(yv), ml, py(yv));
        std::fprintf(f,
                     "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.4g</text>\n",
                     ml - 8.0, py(yv) + 4, yv);
    }
    std::fprintf(f, "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
                 ml + pw / 2, plot.height - 6, plot.x_label.c_str());
    std::fprintf(f,
                 "<text x=\"14\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 "
                 "14 %.1f)\">%s</text>\n",
                 mt + ph / 2, mt + ph / 2, plot.y_label.c_str());

    int legend_y = mt + 6;
    for (const SvgSeries& s : plot.series) {
        if (s.x.empty()) continue;
        std::fprintf(f, "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.2\" points=\"",
                     s.color.c_str());
        for (std::size_t i = 0; i < s.x.size(); ++i)
            std::fprintf(f, "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
        std::fprintf(f, "\"/>\n");
        if (!s.label.empty()) {
            std::fprintf(f,
                         "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"%s\" "
                         "stroke-width=\"2\"/>\n",
                         ml + pw - 110, legend_y, ml + pw - 90, legend_y, s.color.c_str());
            std::fprintf(f, "<text x=\"%.1f\" y=\"%d\">%s</text>\n", ml + pw - 84,
                         legend_y + 4, s.label.c_str());
            legend_y += 16;
        }
    }
    std::fprintf(f, "</svg>\n");
    std::fclose(f);
}

} // namespace logsaw

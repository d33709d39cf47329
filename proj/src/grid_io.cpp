#include "logsaw/grid_io.hpp"
#include "logsaw/error.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace logsaw {

void save_grid(const std::vector<double>& values, int theta_bins, int l_bins,
               double l_extent_mm, const std::string& tag, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail("IOError", "cannot write " + path);
    std::fprintf(f, "%s v1\n", tag.c_str());
    std::fprintf(f, "theta_bins %d\n", theta_bins);
    std::fprintf(f, "l_bins %d\n", l_bins);
    std::fprintf(f, "l_extent_mm %.17g\n", l_extent_mm);
    for (int r = 0; r < l_bins; ++r) {
        for (int c = 0; c < theta_bins; ++c) {
            std::fprintf(f, c == 0 ? "%.17g" : ",%.17g",
                         values[static_cast<std::size_t>(r) * theta_bins + c]);
        }
        std::fputc('\n', f);
    }
    std::fclose(f);
}

void load_grid(std::vector<double>& values, int& theta_bins, int& l_bins,
               double& l_extent_mm, const std::string& tag, const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IOError", "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != tag + " v1")
        fail("IOError", path + ": expected header '" + tag + " v1'");

    theta_bins = l_bins = 0;
    l_extent_mm = 0;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(in, line)) fail("IOError", path + ": truncated header");
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "theta_bins") ss >> theta_bins;
        else if (key == "l_bins") ss >> l_bins;
        else if (key == "l_extent_mm") ss >> l_extent_mm;
        else fail("IOError", path + ": unknown header key " + key);
    }
    if (theta_bins < 2 || l_bins < 2)
        fail("IOError", path + ": invalid grid dimensions");

    values.assign(static_cast<std::size_t>(theta_bins) * l_bins, 0.0);
    for (int r = 0; r < l_bins; ++r) {
        if (!std::getline(in, line))
            fail("IOError", path + ": truncated at row " + std::to_string(r));
        std::istringstream ss(line);
        std::string cell;
        for (int c = 0; c < theta_bins; ++c) {
            if (!std::getline(ss, cell, ','))
                fail("IOError", path + ": short row " + std::to_string(r));
            values[static_cast<std::size_t>(r) * theta_bins + c] = std::stod(cell);
        }
    }
}

} // namespace logsaw

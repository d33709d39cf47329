#ifndef LOGSAW_GRID_IO_HPP
#define LOGSAW_GRID_IO_HPP

#include <string>
#include <vector>

namespace logsaw {

// Shared text layout for HMAP/PMAP files: header lines
//   <TAG> v1
//   theta_bins N
//   l_bins M
//   l_extent_mm F
// followed by M lines of N comma-separated values (row = constant l,
// column = theta ascending from 0 degrees).
void save_grid(const std::vector<double>& values, int theta_bins, int l_bins,
               double l_extent_mm, const std::string& tag, const std::string& path);

void load_grid(std::vector<double>& values, int& theta_bins, int& l_bins,
               double& l_extent_mm, const std::string& tag, const std::string& path);

} // namespace logsaw

#endif

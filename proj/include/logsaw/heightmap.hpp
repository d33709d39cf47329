#ifndef LOGSAW_HEIGHTMAP_HPP
#define LOGSAW_HEIGHTMAP_HPP

#include "logsaw/centerline.hpp"

#include <string>
#include <vector>

namespace logsaw {

// Log-centric raster: rows index the longitudinal coordinate l (ascending,
// node r at l = r * l_extent_mm / (l_bins-1)), columns index theta (node c at
// c * 360 / theta_bins degrees). The grid is circular in theta: column 0 is
// adjacent to the last column.
struct HeightMap {
    int theta_bins = 0;
    int l_bins = 0;
    double l_extent_mm = 0.0;
    double lambda = 0.0;
    std::vector<double> values; // l_bins * theta_bins, row-major

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * theta_bins + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * theta_bins + c]; }

    double delta_theta_deg() const { return 360.0 / theta_bins; }
    double delta_l_mm() const { return l_bins > 1 ? l_extent_mm / (l_bins - 1) : 0.0; }

    double theta_of_col(int c) const { return c * delta_theta_deg(); }
    double l_of_row(int r) const { return r * delta_l_mm(); }

    double mean_value() const;

    // Bilinear interpolation at (theta, l), circular in theta, clamped in l.
    double sample(double theta_deg, double l_mm) const;
};

struct FitOptions {
    double cg_tolerance = 1e-8;   // relative residual on the normal equations
    int cg_max_iterations = 10000;
    double l_extent_mm = 0.0;     // 0 = derive from the samples
};

struct FitDiagnostics {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

// Fits grid values minimizing
//   sum_i (B(theta_i, l_i) - rho_i)^2 + lambda * sum_{neighbors} (f_a - f_b)^2
// where B is bilinear interpolation of the grid at the sample position and
// the neighbor sum runs over horizontal (theta, wrapping) and vertical (l)
// grid edges. Solved with Jacobi-preconditioned conjugate gradient on the
// normal equations. Cells with no nearby samples are filled by the
// regularizer alone (harmonic fill).
//
// Errors: empty samples -> InvalidInput; bins < 2 -> InvalidInput.
HeightMap fit_heightmap(const std::vector<CylindricalSample>& samples,
                        int theta_bins, int l_bins, double lambda,
                        const FitOptions& options = {},
                        FitDiagnostics* diagnostics = nullptr);

// Objective value of an arbitrary grid against the samples (test/inspection
// hook; fit_heightmap minimizes exactly this).
double fit_objective(const HeightMap& map,
                     const std::vector<CylindricalSample>& samples);

// "HMAP v1" text format: header lines `HMAP v1`, `theta_bins N`, `l_bins M`,
// `l_extent_mm F`, then M comma-separated rows, row = constant l, column =
// theta ascending from 0.
void save_hmap(const HeightMap& map, const std::string& path);
HeightMap load_hmap(const std::string& path);

// l_bins default: one node per 10 mm of log length.
int default_l_bins(double l_extent_mm);

} // namespace logsaw

#endif

#ifndef LOGSAW_SYNTHGEN_HPP
#define LOGSAW_SYNTHGEN_HPP

#include "logsaw/centerline.hpp"
#include "logsaw/detection.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace logsaw {

// One branch knot: a cone growing from the pith straight to the surface,
// axis perpendicular to the pith, plus the bump it leaves on the surface.
struct GroundTruthKnot {
    double l_pos_mm = 0;
    double theta_pos_deg = 0;   // [0, 360)
    double base_radius_mm = 0;  // cone radius at the log surface
    double apex_radius_mm = 0;  // radius at the pith, ~0
    double bump_height_mm = 0;  // surface protrusion
    double angular_halfwidth_deg = 0; // asin(base_radius / surface radius)
};

struct VirtualLog {
    Centerline pith;
    double length_mm = 0;      // pith arc length
    double butt_radius_mm = 0;
    double top_radius_mm = 0;
    std::vector<GroundTruthKnot> knots;
    std::uint64_t seed = 0;

    double radius_at(double l_mm) const {
        const double t = length_mm > 0 ? std::clamp(l_mm / length_mm, 0.0, 1.0) : 0.0;
        return butt_radius_mm + (top_radius_mm - butt_radius_mm) * t;
    }
    // Generator-truth sigma exported for the pattern function (the angular
    // spread of a typical knot).
    double mean_knot_halfwidth_deg() const;
};

struct GenParams {
    double length_mm = 4000;
    double butt_radius_mm = 150;
    double top_radius_mm = 125;
    double whorl_spacing_mm = 500;
    int knots_per_whorl_min = 2;
    int knots_per_whorl_max = 4;
    double knot_base_radius_min_mm = 12;
    double knot_base_radius_max_mm = 25;
    double bump_height_min_mm = 2;
    double bump_height_max_mm = 6;
    double surface_noise_sigma_mm = 0.0;
    double points_per_mm2 = 0.2;
    double bend_sag_mm = 0.0; // lateral pith deviation at mid-length
    std::uint64_t seed = 42;

    // Throws Error("InvalidParams") naming the offending parameter.
    void validate() const;
    static GenParams from_config(const std::map<std::string, std::string>& kv);
};

// Knots are placed in whorls: longitudinal cluster positions spaced around
// whorl_spacing_mm, evenly spread angles with jitter inside each whorl.
// Deterministic for a given seed.
VirtualLog generate_log(const GenParams& params);

// Surface sampling at the requested density with the raised-cosine knot bump
// and optional radial Gaussian noise. Points are labeled with the knot id
// where the local bump contribution exceeds half that knot's height.
PointCloud render_point_cloud(const VirtualLog& log, const GenParams& params);

// Raised-cosine bump height contributed by one knot at (theta, l); zero
// outside its elliptical footprint (angular_halfwidth x base_radius).
double knot_bump(const GroundTruthKnot& knot, double theta_deg, double l_mm);

// Rasterizes each knot's surface footprint onto a (theta_bins x l_bins)
// grid; one score-1.0 detection per knot. l_extent_mm <= 0 uses the log
// length; pass the height map's extent to get a congruent grid.
std::vector<KnotDetection> ground_truth_mask(const VirtualLog& log, int theta_bins,
                                             int l_bins, double l_extent_mm = 0.0);

// Probability map with 1.0 on every ground-truth footprint cell; the
// ground-truth path into the sawing optimizer.
ProbabilityMap ground_truth_pmap(const VirtualLog& log, int theta_bins, int l_bins,
                                 double l_extent_mm = 0.0);

// JSON ground-truth file (schema documented in the README).
void save_virtual_log(const VirtualLog& log, const std::string& path);
VirtualLog load_virtual_log(const std::string& path);

} // namespace logsaw

#endif

#ifndef LOGSAW_SAWOPT_HPP
#define LOGSAW_SAWOPT_HPP

#include "logsaw/detection.hpp"

#include <string>
#include <vector>

namespace logsaw {

// Axis-aligned board rectangle in the cross-section plane, millimeters,
// origin at the log center.
struct BoardRect {
    double cx = 0, cy = 0, w = 0, h = 0;
};

struct SawingPattern {
    std::string name;
    std::vector<BoardRect> boards;

    // Largest corner distance from the origin; the pattern needs a log of at
    // least this radius.
    double max_corner_radius() const;
};

// JSON file: { "name": ..., "boards": [{"cx":..,"cy":..,"w":..,"h":..}, ...] }
SawingPattern load_pattern(const std::string& path);
void save_pattern(const SawingPattern& pattern, const std::string& path);

// Polar angles of all board corners, degrees in [0,360); shared corners of
// stacked boards appear once per board.
// Errors: a corner exactly at the origin -> DegenerateCorner.
std::vector<double> corner_angles(const SawingPattern& pattern);

// Circular 1-D function sampled on the theta grid with resolution delta_deg.
struct CircularFunction {
    std::vector<double> samples;
    double delta_deg = 1.0;

    int size() const { return static_cast<int>(samples.size()); }
    double theta_of(int i) const { return i * delta_deg; }
};

struct PatternFunction : CircularFunction {
    double sigma_deg = 0;
    std::vector<double> corners; // the angle set S
};

struct KnotFunction : CircularFunction {
    bool normalized = false; // discrete integral is 1 (false for all-zero maps)
};

// Mixture of circular Gaussians centered at the corner angles, evaluated with
// the wrapped angular distance; contributions beyond 6 sigma are dropped.
PatternFunction pattern_function(const std::vector<double>& corner_angles_deg,
                                 double sigma_deg, double delta_deg);

// Column sums of the probability map scaled so the discrete integral
// sum(samples) * delta is 1; an all-zero map stays all-zero.
KnotFunction knot_function(const ProbabilityMap& pmap);

// CSV export "theta_deg,value" for plotting.
void save_function_csv(const CircularFunction& fn, const std::string& path);

struct AngleResult {
    double angle_deg = 0;      // smallest argmin in [0, symmetry period)
    double objective = 0;      // correlation at the optimum
    std::vector<double> objective_curve; // over all candidate shifts
    double step_deg = 1.0;
    double symmetry_period_deg = 360.0;
};

// Rotational symmetry order of the corner multiset (k in {4, 2, 1}): largest
// k such that rotating all corners by 360/k reproduces the set within tol.
int pattern_symmetry_order(const std::vector<double>& corner_angles_deg,
                           double tol_deg = 1e-6);

// Minimizes C(a) = sum_theta f_k(theta - a) * f_p(theta) * dtheta over the
// shift grid a in [0, 360/symmetry). Shifts are exact sample shifts: step_deg
// must be an integer multiple of the grid resolution, or an integer divisor
// of it, in which case both functions are resampled (circular linear
// interpolation) onto the finer grid. Ties take the smallest angle.
// Errors: functions on different grids -> GridMismatch; incompatible step ->
// InvalidInput.
AngleResult optimize_angle(const KnotFunction& knot_fn, const PatternFunction& pattern_fn,
                           double step_deg, int symmetry_order_override = 0);

} // namespace logsaw

#endif

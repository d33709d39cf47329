#include "logsaw/sawopt.hpp"
#include "logsaw/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace logsaw {

namespace {

double wrap360(double deg) {
    double d = std::fmod(deg, 360.0);
    return d < 0 ? d + 360.0 : d;
}

double circular_distance_deg(double a, double b) {
    const double d = std::abs(wrap360(a) - wrap360(b));
    return std::min(d, 360.0 - d);
}

// Circular linear resampling onto an n-times finer grid.
std::vector<double> refine_samples(const std::vector<double>& samples, int factor) {
    const int n = static_cast<int>(samples.size());
    std::vector<double> out(static_cast<std::size_t>(n) * factor);
    for (int i = 0; i < n; ++i) {
        const double a = samples[i];
        const double b = samples[(i + 1) % n];
        for (int j = 0; j < factor; ++j) {
            const double t = static_cast<double>(j) / factor;
            out[static_cast<std::size_t>(i) * factor + j] = a + (b - a) * t;
        }
    }
    return out;
}

} // namespace

double SawingPattern::max_corner_radius() const {
    double r = 0;
    for (const BoardRect& b : boards) {
        const double x = std::max(std::abs(b.cx - b.w / 2), std::abs(b.cx + b.w / 2));
        const double y = std::max(std::abs(b.cy - b.h / 2), std::abs(b.cy + b.h / 2));
        r = std::max(r, std::hypot(x, y));
    }
    return r;
}

SawingPattern load_pattern(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IOError", "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("IOError", path + ": " + e.what());
    }
    SawingPattern pattern;
    try {
        pattern.name = j.value("name", "unnamed");
        for (const auto& b : j.at("boards")) {
            BoardRect r;
            r.cx = b.at("cx").get<double>();
            r.cy = b.at("cy").get<double>();
            r.w = b.at("w").get<double>();
            r.h = b.at("h").get<double>();
            if (r.w <= 0 || r.h <= 0)
                fail("InvalidInput", path + ": board with non-positive size");
            pattern.boards.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        fail("IOError", path + ": bad pattern schema: " + e.what());
    }
    return pattern;
}

void save_pattern(const SawingPattern& pattern, const std::string& path) {
    nlohmann::json j;
    j["name"] = pattern.name;
    nlohmann::json boards = nlohmann::json::array();
    for (const BoardRect& b : pattern.boards)
        boards.push_back({{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}});
    j["boards"] = std::move(boards);
    std::ofstream out(path);
    if (!out) fail("IOError", "cannot write " + path);
    out << j.dump(2) << "\n";
}

std::vector<double> corner_angles(const SawingPattern& pattern) {
    std::vector<double> angles;
    angles.reserve(pattern.boards.size() * 4);
    for (const BoardRect& b : pattern.boards) {
        const double xs[2] = {b.cx - b.w / 2, b.cx + b.w / 2};
        const double ys[2] = {b.cy - b.h / 2, b.cy + b.h / 2};
        for (double x : xs)
            for (double y : ys) {
                if (x == 0.0 && y == 0.0)
                    fail("DegenerateCorner", "board corner at the origin has no polar angle");
                angles.push_back(wrap360(std::atan2(y, x) * 180.0 / std::numbers::pi));
            }
    }
    return angles;
}

PatternFunction pattern_function(const std::vector<double>& corner_angles_deg,
                                 double sigma_deg, double delta_deg) {
    if (sigma_deg <= 0) fail("InvalidInput", "sigma_deg must be positive");
    if (delta_deg <= 0 || std::abs(360.0 / delta_deg - std::round(360.0 / delta_deg)) > 1e-9)
        fail("InvalidInput", "delta_deg must divide 360");

    PatternFunction fn;
    fn.delta_deg = delta_deg;
    fn.sigma_deg = sigma_deg;
    fn.corners = corner_angles_deg;
    const int n = static_cast<int>(std::round(360.0 / delta_deg));
    fn.samples.assign(n, 0.0);

    const double norm = 1.0 / (sigma_deg * std::sqrt(2.0 * std::numbers::pi));
    const double cutoff = 6.0 * sigma_deg;
    for (int i = 0; i < n; ++i) {
        const double theta = i * delta_deg;
        double acc = 0;
        for (double c : corner_angles_deg) {
            const double d = circular_distance_deg(theta, c);
            if (d > cutoff) continue;
            acc += norm * std::exp(-0.5 * (d / sigma_deg) * (d / sigma_deg));
        }
        fn.samples[i] = acc;
    }
    return fn;
}

KnotFunction knot_function(const ProbabilityMap& pmap) {
    if (pmap.theta_bins < 2) fail("InvalidInput", "probability map not initialized");
    KnotFunction fn;
    fn.delta_deg = pmap.delta_theta_deg();
    fn.samples.assign(pmap.theta_bins, 0.0);
    for (int r = 0; r < pmap.l_bins; ++r)
        for (int c = 0; c < pmap.theta_bins; ++c) fn.samples[c] += pmap.at(r, c);

    // summing the column totals in sorted order keeps the normalization
    // bit-identical under column rotations of the input
    std::vector<double> sorted = fn.samples;
    std::sort(sorted.begin(), sorted.end());
    double total = 0;
    for (double v : sorted) total += v;
    if (total > 0) {
        const double scale = 1.0 / (total * fn.delta_deg);
        for (double& v : fn.samples) v *= scale;
        fn.normalized = true;
    }
    return fn;
}

void save_function_csv(const CircularFunction& fn, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail("IOError", "cannot write " + path);
    std::fprintf(f, "theta_deg,value\n");
    for (int i = 0; i < fn.size(); ++i)
        std::fprintf(f, "%.6f,%.17g\n", fn.theta_of(i), fn.samples[i]);
    std::fclose(f);
}

int pattern_symmetry_order(const std::vector<double>& corner_angles_deg, double tol_deg) {
    for (int k : {4, 2}) {
        const double shift = 360.0 / k;
        bool symmetric = !corner_angles_deg.empty();
        for (double a : corner_angles_deg) {
            const double rotated = wrap360(a + shift);
            bool matched = false;
            for (double b : corner_angles_deg)
                if (circular_distance_deg(rotated, b) <= tol_deg) {
                    matched = true;
                    break;
                }
            if (!matched) {
                symmetric = false;
                break;
            }
        }
        if (symmetric) return k;
    }
    return 1;
}

AngleResult optimize_angle(const KnotFunction& knot_fn, const PatternFunction& pattern_fn,
                           double step_deg, int symmetry_order_override) {
    if (knot_fn.samples.empty() || pattern_fn.samples.empty())
        fail("InvalidInput", "empty function");
    if (knot_fn.size() != pattern_fn.size() ||
        std::abs(knot_fn.delta_deg - pattern_fn.delta_deg) > 1e-12)
        fail("GridMismatch", "knot and pattern functions are on different theta grids");
    if (step_deg <= 0) fail("InvalidInput", "step_deg must be positive");

    const double grid = knot_fn.delta_deg;
    std::vector<double> fk = knot_fn.samples;
    std::vector<double> fp = pattern_fn.samples;
    double delta = grid;
    int stride; // candidate shifts are every `stride` samples

    const double ratio = step_deg / grid;
    if (std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1.0 - 1e-9) {
        stride = static_cast<int>(std::round(ratio));
    } else {
        const double inv = grid / step_deg;
        if (std::abs(inv - std::round(inv)) > 1e-9)
            fail("InvalidInput", "step_deg must be a multiple or divisor of the grid resolution");
        const int factor = static_cast<int>(std::round(inv));
        fk = refine_samples(fk, factor);
        fp = refine_samples(fp, factor);
        delta = grid / factor;
        stride = 1;
    }

    const int n = static_cast<int>(fk.size());
    const int order = symmetry_order_override > 0
                          ? symmetry_order_override
                          : pattern_symmetry_order(pattern_fn.corners);
    const double period = 360.0 / order;
    const int n_candidates = static_cast<int>(std::round(period / (delta * stride)));

    AngleResult result;
    result.step_deg = delta * stride;
    result.symmetry_period_deg = period;
    result.objective_curve.resize(n_candidates);

    int best = 0;
    for (int j = 0; j < n_candidates; ++j) {
        const int s = j * stride;
        double acc = 0;
        for (int c = 0; c < n; ++c) {
            int idx = c - s;
            if (idx < 0) idx += n;
            acc += fk[idx] * fp[c];
        }
        acc *= delta;
        result.objective_curve[j] = acc;
        if (acc < result.objective_curve[best]) best = j;
    }
    result.angle_deg = best * result.step_deg;
    result.objective = result.objective_curve[best];
    return result;
}

} // namespace logsaw

#include "logsaw/synthgen.hpp"
#include "logsaw/error.hpp"
#include "logsaw/rng.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

namespace logsaw {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

double circular_diff_deg(double a, double b) {
    double d = std::fmod(std::abs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

} // namespace

double VirtualLog::mean_knot_halfwidth_deg() const {
    if (knots.empty()) return 8.0; // neutral default for knot-free logs
    double s = 0;
    for (const GroundTruthKnot& k : knots) s += k.angular_halfwidth_deg;
    return s / static_cast<double>(knots.size());
}

void GenParams::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) fail("InvalidParams", std::string("invalid parameter: ") + what);
    };
    need(length_mm > 0, "length_mm");
    need(butt_radius_mm > 0, "butt_radius_mm");
    need(top_radius_mm > 0, "top_radius_mm");
    need(whorl_spacing_mm > 0, "whorl_spacing_mm");
    need(knots_per_whorl_min >= 0, "knots_per_whorl_min");
    need(knots_per_whorl_max >= knots_per_whorl_min, "knots_per_whorl range");
    need(knot_base_radius_min_mm > 0, "knot_base_radius_min_mm");
    need(knot_base_radius_max_mm >= knot_base_radius_min_mm, "knot_base_radius range");
    need(bump_height_min_mm >= 0, "bump_height_min_mm");
    need(bump_height_max_mm >= bump_height_min_mm, "bump_height range");
    need(surface_noise_sigma_mm >= 0, "surface_noise_sigma_mm");
    need(points_per_mm2 > 0, "points_per_mm2");
    need(bend_sag_mm >= 0, "bend_sag_mm");
}

GenParams GenParams::from_config(const std::map<std::string, std::string>& kv) {
    GenParams p;
    auto get_d = [&](const char* key, double& out) {
        auto it = kv.find(key);
        if (it != kv.end()) out = std::stod(it->second);
    };
    auto get_i = [&](const char* key, int& out) {
        auto it = kv.find(key);
        if (it != kv.end()) out = std::stoi(it->second);
    };
    get_d("length_mm", p.length_mm);
    get_d("butt_radius_mm", p.butt_radius_mm);
    get_d("top_radius_mm", p.top_radius_mm);
    get_d("whorl_spacing_mm", p.whorl_spacing_mm);
    get_i("knots_per_whorl_min", p.knots_per_whorl_min);
    get_i("knots_per_whorl_max", p.knots_per_whorl_max);
    get_d("knot_base_radius_min_mm", p.knot_base_radius_min_mm);
    get_d("knot_base_radius_max_mm", p.knot_base_radius_max_mm);
    get_d("bump_height_min_mm", p.bump_height_min_mm);
    get_d("bump_height_max_mm", p.bump_height_max_mm);
    get_d("surface_noise_sigma_mm", p.surface_noise_sigma_mm);
    get_d("points_per_mm2", p.points_per_mm2);
    get_d("bend_sag_mm", p.bend_sag_mm);
    if (auto it = kv.find("seed"); it != kv.end()) p.seed = std::stoull(it->second);
    p.validate();
    return p;
}

VirtualLog generate_log(const GenParams& params) {
    params.validate();
    Rng rng(Rng::substream(params.seed, 1));

    VirtualLog log;
    log.seed = params.seed;
    log.butt_radius_mm = params.butt_radius_mm;
    log.top_radius_mm = params.top_radius_mm;

    // Pith: straight, or a quadratic bow in a seeded lateral direction.
    const double bend_dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int pith_steps = std::max(2, static_cast<int>(params.length_mm / 50.0) + 1);
    log.pith.vertices.reserve(pith_steps);
    for (int i = 0; i < pith_steps; ++i) {
        const double z = params.length_mm * i / (pith_steps - 1);
        const double t = z / params.length_mm;
        const double sag = params.bend_sag_mm * 4.0 * t * (1.0 - t);
        log.pith.vertices.emplace_back(sag * std::cos(bend_dir), sag * std::sin(bend_dir), z);
    }
    log.length_mm = log.pith.total_length();

    // Whorl positions: jittered walk around the mean spacing.
    std::vector<double> whorls;
    double l = params.whorl_spacing_mm * rng.uniform(0.3, 0.7);
    while (l < log.length_mm) {
        whorls.push_back(l);
        l += params.whorl_spacing_mm * rng.uniform(0.85, 1.15);
    }

    for (double whorl_l : whorls) {
        const int count = static_cast<int>(
            rng.uniform_int(params.knots_per_whorl_min, params.knots_per_whorl_max));
        const double offset = rng.uniform(0.0, 360.0);
        for (int k = 0; k < count; ++k) {
            GroundTruthKnot knot;
            const double step = 360.0 / count;
            knot.theta_pos_deg =
                std::fmod(offset + k * step + rng.uniform(-0.15, 0.15) * step + 360.0, 360.0);
            knot.l_pos_mm =
                std::clamp(whorl_l + rng.uniform(-0.04, 0.04) * params.whorl_spacing_mm,
                           0.0, log.length_mm);
            knot.base_radius_mm =
                rng.uniform(params.knot_base_radius_min_mm, params.knot_base_radius_max_mm);
            knot.apex_radius_mm = 0.0;
            knot.bump_height_mm =
                rng.uniform(params.bump_height_min_mm, params.bump_height_max_mm);
            const double surface_r = log.radius_at(knot.l_pos_mm);
            knot.angular_halfwidth_deg =
                std::asin(std::min(1.0, knot.base_radius_mm / surface_r)) * kDegPerRad;
            log.knots.push_back(knot);
        }
    }
    return log;
}

double knot_bump(const GroundTruthKnot& knot, double theta_deg, double l_mm) {
    const double dt = circular_diff_deg(theta_deg, knot.theta_pos_deg) /
                      std::max(1e-9, knot.angular_halfwidth_deg);
    const double dl = (l_mm - knot.l_pos_mm) / std::max(1e-9, knot.base_radius_mm);
    const double d2 = dt * dt + dl * dl;
    if (d2 >= 1.0) return 0.0;
    return knot.bump_height_mm * 0.5 * (1.0 + std::cos(std::numbers::pi * std::sqrt(d2)));
}

PointCloud render_point_cloud(const VirtualLog& log, const GenParams& params) {
    params.validate();
    Rng rng(Rng::substream(params.seed, 2));

    const double mean_radius = 0.5 * (log.butt_radius_mm + log.top_radius_mm);
    const double area = 2.0 * std::numbers::pi * mean_radius * log.length_mm;
    const auto n = static_cast<std::size_t>(std::llround(params.points_per_mm2 * area));

    // Per-segment frames, parallel-transported like the height-map pipeline
    // so generator theta and fitted theta agree.
    const Centerline& pith = log.pith;
    const std::size_t n_seg = pith.segment_count();
    std::vector<Vec3> e1(n_seg), e2(n_seg), dirs(n_seg);
    std::vector<double> seg_start_l(n_seg + 1, 0.0);
    Vec3 ref = initial_reference(pith.segment_dir(0));
    for (std::size_t s = 0; s < n_seg; ++s) {
        if (s > 0) ref = transport_reference(ref, pith.segment_dir(s));
        dirs[s] = pith.segment_dir(s);
        e1[s] = (ref - dirs[s] * dirs[s].dot(ref)).normalized();
        e2[s] = dirs[s].cross(e1[s]);
        seg_start_l[s + 1] = seg_start_l[s] + pith.segment_length(s);
    }
    auto segment_of = [&](double l_pos) {
        std::size_t s = 0;
        while (s + 1 < n_seg && l_pos > seg_start_l[s + 1]) ++s;
        return s;
    };

    // Inverse CDF of the tapered lateral area element r(l) dl.
    const double a = log.butt_radius_mm;
    const double b = (log.top_radius_mm - log.butt_radius_mm) / log.length_mm;
    const double total = a * log.length_mm + 0.5 * b * log.length_mm * log.length_mm;
    auto sample_l = [&](double u) {
        if (std::abs(b) < 1e-12) return u * log.length_mm;
        // solve a*l + b/2*l^2 = u*total
        const double disc = a * a + 2.0 * b * u * total;
        return (-a + std::sqrt(std::max(0.0, disc))) / b;
    };

    PointCloud cloud;
    cloud.points.reserve(n);
    cloud.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double l_pos = std::clamp(sample_l(rng.uniform()), 0.0, log.length_mm);
        const double theta = rng.uniform(0.0, 360.0);

        double rho = log.radius_at(l_pos);
        int label = kNoLabel;
        double best_ratio = 0.5; // label threshold: bump > 50% of its height
        for (std::size_t k = 0; k < log.knots.size(); ++k) {
            const double h = knot_bump(log.knots[k], theta, l_pos);
            rho += h;
            const double ratio = h / std::max(1e-12, log.knots[k].bump_height_mm);
            if (ratio > best_ratio) {
                best_ratio = ratio;
                label = static_cast<int>(k);
            }
        }
        if (params.surface_noise_sigma_mm > 0)
            rho += params.surface_noise_sigma_mm * rng.normal();

        const std::size_t s = segment_of(l_pos);
        const double ang = theta / kDegPerRad;
        const Vec3 radial = std::cos(ang) * e1[s] + std::sin(ang) * e2[s];
        const Vec3 base = pith.point_at(l_pos);
        cloud.points.push_back(base + rho * radial);
        cloud.labels.push_back(label);
    }

    bool any_label = false;
    for (int lab : cloud.labels)
        if (lab != kNoLabel) any_label = true;
    if (!any_label) cloud.labels.clear();
    return cloud;
}

std::vector<KnotDetection> ground_truth_mask(const VirtualLog& log, int theta_bins,
                                             int l_bins, double l_extent_mm) {
    if (theta_bins < 2 || l_bins < 2) fail("InvalidInput", "need at least 2 bins per axis");
    const double extent = l_extent_mm > 0 ? l_extent_mm : log.length_mm;
    const double dtheta = 360.0 / theta_bins;
    const double dl = extent / (l_bins - 1);

    std::vector<KnotDetection> detections;
    detections.reserve(log.knots.size());
    for (const GroundTruthKnot& knot : log.knots) {
        std::vector<GridCell> mask;
        const int r_lo = std::max(0, static_cast<int>((knot.l_pos_mm - knot.base_radius_mm) / dl) - 1);
        const int r_hi = std::min(l_bins - 1,
                                  static_cast<int>((knot.l_pos_mm + knot.base_radius_mm) / dl) + 1);
        const int c_span = static_cast<int>(knot.angular_halfwidth_deg / dtheta) + 1;
        const int c_center = static_cast<int>(std::round(knot.theta_pos_deg / dtheta));
        for (int r = r_lo; r <= r_hi; ++r) {
            const double dl_n = (r * dl - knot.l_pos_mm) / std::max(1e-9, knot.base_radius_mm);
            for (int dc = -c_span; dc <= c_span; ++dc) {
                const int c = ((c_center + dc) % theta_bins + theta_bins) % theta_bins;
                const double dt_n = circular_diff_deg(c * dtheta, knot.theta_pos_deg) /
                                    std::max(1e-9, knot.angular_halfwidth_deg);
                if (dt_n * dt_n + dl_n * dl_n < 1.0) mask.push_back({r, c});
            }
        }
        if (mask.empty()) {
            // knot smaller than a cell: keep the nearest node
            const int r = std::clamp(static_cast<int>(std::round(knot.l_pos_mm / dl)), 0, l_bins - 1);
            mask.push_back({r, ((c_center % theta_bins) + theta_bins) % theta_bins});
        }
        detections.push_back(make_detection(std::move(mask), theta_bins, dtheta, dl, 1.0));
    }
    return detections;
}

ProbabilityMap ground_truth_pmap(const VirtualLog& log, int theta_bins, int l_bins,
                                 double l_extent_mm) {
    ProbabilityMap pmap;
    pmap.theta_bins = theta_bins;
    pmap.l_bins = l_bins;
    pmap.l_extent_mm = l_extent_mm > 0 ? l_extent_mm : log.length_mm;
    pmap.values.assign(static_cast<std::size_t>(theta_bins) * l_bins, 0.0);
    for (const KnotDetection& det : ground_truth_mask(log, theta_bins, l_bins, pmap.l_extent_mm))
        for (const GridCell& cell : det.mask)
            pmap.at(cell.r, cell.c) = 1.0;
    return pmap;
}

void save_virtual_log(const VirtualLog& log, const std::string& path) {
    nlohmann::json j;
    j["seed"] = log.seed;
    j["length_mm"] = log.length_mm;
    j["butt_radius_mm"] = log.butt_radius_mm;
    j["top_radius_mm"] = log.top_radius_mm;
    j["mean_knot_halfwidth_deg"] = log.mean_knot_halfwidth_deg();
    nlohmann::json pith = nlohmann::json::array();
    for (const Vec3& v : log.pith.vertices) pith.push_back({v.x(), v.y(), v.z()});
    j["pith"] = std::move(pith);
    nlohmann::json knots = nlohmann::json::array();
    for (const GroundTruthKnot& k : log.knots) {
        knots.push_back({{"l_mm", k.l_pos_mm},
                         {"theta_deg", k.theta_pos_deg},
                         {"base_radius_mm", k.base_radius_mm},
                         {"apex_radius_mm", k.apex_radius_mm},
                         {"bump_height_mm", k.bump_height_mm},
                         {"angular_halfwidth_deg", k.angular_halfwidth_deg}});
    }
    j["knots"] = std::move(knots);

    std::ofstream out(path);
    if (!out) fail("IOError", "cannot write " + path);
    out << j.dump(2) << "\n";
}

VirtualLog load_virtual_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IOError", "cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("IOError", path + ": " + e.what());
    }
    VirtualLog log;
    try {
        log.seed = j.at("seed").get<std::uint64_t>();
        log.length_mm = j.at("length_mm").get<double>();
        log.butt_radius_mm = j.at("butt_radius_mm").get<double>();
        log.top_radius_mm = j.at("top_radius_mm").get<double>();
        for (const auto& v : j.at("pith"))
            log.pith.vertices.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(),
                                           v.at(2).get<double>());
        for (const auto& k : j.at("knots")) {
            GroundTruthKnot knot;
            knot.l_pos_mm = k.at("l_mm").get<double>();
            knot.theta_pos_deg = k.at("theta_deg").get<double>();
            knot.base_radius_mm = k.at("base_radius_mm").get<double>();
            knot.apex_radius_mm = k.at("apex_radius_mm").get<double>();
            knot.bump_height_mm = k.at("bump_height_mm").get<double>();
            knot.angular_halfwidth_deg = k.at("angular_halfwidth_deg").get<double>();
            log.knots.push_back(knot);
        }
    } catch (const nlohmann::json::exception& e) {
        fail("IOError", path + ": bad ground-truth schema: " + e.what());
    }
    return log;
}

} // namespace logsaw

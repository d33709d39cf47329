#include "logsaw/synthgen.hpp"
#include "logsaw/error.hpp"
#include "logsaw/heightmap.hpp"

#include "helpers.hpp"
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace logsaw;
using namespace logsaw::test;

namespace {

// 1-D gap clustering of knot l positions into whorls
std::vector<std::vector<const GroundTruthKnot*>> cluster_whorls(const VirtualLog& log,
                                                                double gap_mm = 150.0) {
    std::vector<const GroundTruthKnot*> sorted;
    for (const auto& k : log.knots) sorted.push_back(&k);
    std::sort(sorted.begin(), sorted.end(),
              [](auto* a, auto* b) { return a->l_pos_mm < b->l_pos_mm; });
    std::vector<std::vector<const GroundTruthKnot*>> whorls;
    for (auto* k : sorted) {
        if (whorls.empty() || k->l_pos_mm - whorls.back().back()->l_pos_mm > gap_mm)
            whorls.emplace_back();
        whorls.back().push_back(k);
    }
    return whorls;
}

} // namespace

TEST_SUITE_BEGIN("synthgen");

TEST_CASE("identical seeds give identical logs") {
    GenParams params;
    params.seed = 42;
    const VirtualLog a = generate_log(params);
    const VirtualLog b = generate_log(params);
    REQUIRE(a.knots.size() == b.knots.size());
    for (std::size_t i = 0; i < a.knots.size(); ++i) {
        CHECK(a.knots[i].theta_pos_deg == b.knots[i].theta_pos_deg);
        CHECK(a.knots[i].l_pos_mm == b.knots[i].l_pos_mm);
        CHECK(a.knots[i].base_radius_mm == b.knots[i].base_radius_mm);
        CHECK(a.knots[i].bump_height_mm == b.knots[i].bump_height_mm);
    }
    REQUIRE(a.pith.vertices.size() == b.pith.vertices.size());
    for (std::size_t i = 0; i < a.pith.vertices.size(); ++i)
        CHECK(a.pith.vertices[i] == b.pith.vertices[i]);

    const PointCloud ca = render_point_cloud(a, params);
    const PointCloud cb = render_point_cloud(b, params);
    REQUIRE(ca.size() == cb.size());
    for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca.points[i] == cb.points[i]);
    CHECK(ca.labels == cb.labels);
}

TEST_CASE("whorl count stays in range over many seeds") {
    GenParams params;
    params.length_mm = 4000;
    params.whorl_spacing_mm = 500;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        params.seed = seed;
        const VirtualLog log = generate_log(params);
        const auto whorls = cluster_whorls(log);
        CHECK(whorls.size() >= 6);
        CHECK(whorls.size() <= 10);
    }
}

TEST_CASE("degenerate knots-per-whorl range is honored") {
    GenParams params;
    params.knots_per_whorl_min = 3;
    params.knots_per_whorl_max = 3;
    params.seed = 5;
    const VirtualLog log = generate_log(params);
    for (const auto& whorl : cluster_whorls(log)) CHECK(whorl.size() == 3);
}

TEST_CASE("inverted ranges are rejected with the parameter named") {
    GenParams params;
    params.bump_height_min_mm = 5;
    params.bump_height_max_mm = 2;
    CHECK_THROWS_WITH_AS(generate_log(params), doctest::Contains("bump_height"), Error);
    GenParams params2;
    params2.knots_per_whorl_min = 4;
    params2.knots_per_whorl_max = 2;
    CHECK_THROWS_WITH_AS(generate_log(params2), doctest::Contains("knots_per_whorl"), Error);
}

TEST_CASE("knot-free noise-free render sits exactly on the tapered surface") {
    GenParams params;
    params.knots_per_whorl_min = 0;
    params.knots_per_whorl_max = 0;
    params.surface_noise_sigma_mm = 0;
    params.length_mm = 1000;
    params.points_per_mm2 = 0.05;
    params.seed = 9;
    const VirtualLog log = generate_log(params);
    REQUIRE(log.knots.empty());
    const PointCloud cloud = render_point_cloud(log, params);
    for (const Vec3& p : cloud.points) {
        const double rho = std::hypot(p.x(), p.y());
        CHECK(std::abs(rho - log.radius_at(p.z())) < 1e-9);
    }
}

TEST_CASE("a single bump protrudes exactly its height") {
    GenParams params;
    params.knots_per_whorl_min = 0;
    params.knots_per_whorl_max = 0;
    params.surface_noise_sigma_mm = 0;
    params.length_mm = 1000;
    params.points_per_mm2 = 0.3;
    params.seed = 13;
    VirtualLog log = generate_log(params);
    GroundTruthKnot knot;
    knot.l_pos_mm = 500;
    knot.theta_pos_deg = 90;
    knot.base_radius_mm = 20;
    knot.bump_height_mm = 5;
    knot.angular_halfwidth_deg =
        std::asin(knot.base_radius_mm / log.radius_at(500)) * 180.0 / kPi;
    log.knots.push_back(knot);

    const PointCloud cloud = render_point_cloud(log, params);
    double max_excess = 0;
    for (const Vec3& p : cloud.points)
        max_excess = std::max(max_excess, std::hypot(p.x(), p.y()) - log.radius_at(p.z()));
    CHECK(max_excess <= 5.0 + 1e-9);
    CHECK(max_excess >= 4.8); // dense sampling hits near the bump apex
    CHECK(cloud.has_labels());
}

TEST_CASE("point count tracks the analytic lateral area") {
    GenParams params;
    params.length_mm = 4000;
    params.butt_radius_mm = 150;
    params.top_radius_mm = 150;
    params.points_per_mm2 = 0.5;
    params.knots_per_whorl_min = 0;
    params.knots_per_whorl_max = 0;
    params.seed = 17;
    const VirtualLog log = generate_log(params);
    const PointCloud cloud = render_point_cloud(log, params);
    const double area = 2 * kPi * 150.0 * 4000.0;
    CHECK(std::abs(static_cast<double>(cloud.size()) - 0.5 * area) <= 0.05 * 0.5 * area);
}

TEST_CASE("labels stay within the knot footprint") {
    GenParams params;
    params.length_mm = 2000;
    params.surface_noise_sigma_mm = 0.4;
    params.seed = 19;
    const VirtualLog log = generate_log(params);
    const PointCloud cloud = render_point_cloud(log, params);
    REQUIRE(cloud.has_labels());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.labels[i] == kNoLabel) continue;
        const GroundTruthKnot& k = log.knots[static_cast<std::size_t>(cloud.labels[i])];
        const double theta =
            std::fmod(std::atan2(cloud.points[i].y(), cloud.points[i].x()) * 180.0 / kPi + 360.0,
                      360.0);
        double dth = std::abs(theta - k.theta_pos_deg);
        dth = std::min(dth, 360.0 - dth);
        const double dl = std::abs(cloud.points[i].z() - k.l_pos_mm);
        CHECK(dth <= k.angular_halfwidth_deg + 1.0);
        CHECK(dl <= k.base_radius_mm + params.surface_noise_sigma_mm + 1.0);
    }
}

TEST_CASE("ground-truth mask of a knot-free log is empty") {
    GenParams params;
    params.knots_per_whorl_min = 0;
    params.knots_per_whorl_max = 0;
    params.seed = 23;
    const VirtualLog log = generate_log(params);
    CHECK(ground_truth_mask(log, 360, 100).empty());
}

TEST_CASE("ground-truth mask rasterizes a knot at its position") {
    GenParams params;
    params.knots_per_whorl_min = 0;
    params.knots_per_whorl_max = 0;
    params.length_mm = 1000;
    params.seed = 29;
    VirtualLog log = generate_log(params);
    GroundTruthKnot knot;
    knot.l_pos_mm = 500;
    knot.theta_pos_deg = 180;
    knot.base_radius_mm = 20;
    knot.bump_height_mm = 4;
    knot.angular_halfwidth_deg = 9.2;
    log.knots.push_back(knot);

    const auto masks = ground_truth_mask(log, 360, 101);
    REQUIRE(masks.size() == 1);
    CHECK(std::abs(masks[0].centroid_theta_deg - 180.0) <= 1.0);
    CHECK(std::abs(masks[0].centroid_l_mm - 500.0) <= 10.0);
    CHECK(masks[0].score == 1.0);
}

TEST_CASE("same-whorl knots 30 degrees apart stay disjoint") {
    GenParams params;
    params.knots_per_whorl_min = 0;
    params.knots_per_whorl_max = 0;
    params.length_mm = 1000;
    params.seed = 31;
    VirtualLog log = generate_log(params);
    for (double theta : {120.0, 150.0}) {
        GroundTruthKnot knot;
        knot.l_pos_mm = 500;
        knot.theta_pos_deg = theta;
        knot.base_radius_mm = 15;
        knot.bump_height_mm = 4;
        knot.angular_halfwidth_deg = 5.0;
        log.knots.push_back(knot);
    }
    const auto masks = ground_truth_mask(log, 360, 101);
    REQUIRE(masks.size() == 2);
    std::set<std::pair<int, int>> cells;
    for (const auto& cell : masks[0].mask) cells.insert({cell.r, cell.c});
    for (const auto& cell : masks[1].mask) CHECK(cells.count({cell.r, cell.c}) == 0);
}

TEST_CASE("virtual log JSON round-trips") {
    GenParams params;
    params.seed = 37;
    params.bend_sag_mm = 25;
    const VirtualLog log = generate_log(params);
    save_virtual_log(log, "/tmp/logsaw_test_gt.json");
    const VirtualLog loaded = load_virtual_log("/tmp/logsaw_test_gt.json");
    CHECK(loaded.seed == log.seed);
    CHECK(loaded.length_mm == doctest::Approx(log.length_mm).epsilon(1e-12));
    REQUIRE(loaded.knots.size() == log.knots.size());
    for (std::size_t i = 0; i < log.knots.size(); ++i) {
        CHECK(loaded.knots[i].theta_pos_deg ==
              doctest::Approx(log.knots[i].theta_pos_deg).epsilon(1e-12));
        CHECK(loaded.knots[i].base_radius_mm ==
              doctest::Approx(log.knots[i].base_radius_mm).epsilon(1e-12));
    }
    REQUIRE(loaded.pith.vertices.size() == log.pith.vertices.size());
}

TEST_CASE("full round-trip recovers knots from the rendered cloud") {
    // generator -> cloud -> height map -> LoG -> detections vs ground truth
    int recovered = 0, total = 0;
    for (std::uint64_t seed : {41, 43, 47}) {
        GenParams params;
        params.length_mm = 2000;
        params.surface_noise_sigma_mm = 0;
        params.seed = seed;
        const VirtualLog log = generate_log(params);
        const PointCloud cloud = render_point_cloud(log, params);
        const Centerline line = estimate_centerline(cloud, 4);
        const auto samples = cloud_to_cylindrical(cloud, line);
        double ext = 0;
        for (const auto& s : samples) ext = std::max(ext, s.l);
        const HeightMap hmap = fit_heightmap(samples, 360, default_l_bins(ext), 0.01);
        const ProbabilityMap pmap = log_detect(hmap, 15.0);
        const auto dets = extract_detections(pmap, 4, 0.2);
        const auto gt = ground_truth_mask(log, hmap.theta_bins, hmap.l_bins, hmap.l_extent_mm);
        const DetectionEvalReport report = evaluate_map(dets, gt, 0.10);
        std::vector<char> matched(gt.size(), 0);
        for (int g : report.matched_gt)
            if (g >= 0) matched[static_cast<std::size_t>(g)] = 1;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (log.knots[g].bump_height_mm < 2.0) continue;
            ++total;
            recovered += matched[g];
        }
    }
    REQUIRE(total > 20);
    CHECK(static_cast<double>(recovered) >= 0.9 * static_cast<double>(total));
}

TEST_SUITE_END();

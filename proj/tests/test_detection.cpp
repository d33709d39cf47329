#include "logsaw/detection.hpp"
#include "logsaw/error.hpp"
#include "logsaw/synthgen.hpp"

#include "helpers.hpp"
#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace logsaw;
using namespace logsaw::test;

namespace {

HeightMap flat_map(int theta_bins, int l_bins, double l_extent, double value) {
    HeightMap map;
    map.theta_bins = theta_bins;
    map.l_bins = l_bins;
    map.l_extent_mm = l_extent;
    map.values.assign(static_cast<std::size_t>(theta_bins) * l_bins, value);
    return map;
}

void add_bump(HeightMap& map, double theta0, double l0, double height, double radius_mm) {
    const double arc_per_cell = map.mean_value() * 2.0 * kPi / map.theta_bins;
    for (int r = 0; r < map.l_bins; ++r)
        for (int c = 0; c < map.theta_bins; ++c) {
            double dth = std::abs(map.theta_of_col(c) - theta0);
            dth = std::min(dth, 360.0 - dth) / map.delta_theta_deg() * arc_per_cell;
            const double dl = map.l_of_row(r) - l0;
            const double d = std::sqrt(dth * dth + dl * dl) / radius_mm;
            if (d < 1.0) map.at(r, c) += height * 0.5 * (1.0 + std::cos(kPi * d));
        }
}

ProbabilityMap zero_pmap(int theta_bins, int l_bins, double l_extent = 1000) {
    ProbabilityMap pmap;
    pmap.theta_bins = theta_bins;
    pmap.l_bins = l_bins;
    pmap.l_extent_mm = l_extent;
    pmap.values.assign(static_cast<std::size_t>(theta_bins) * l_bins, 0.0);
    return pmap;
}

} // namespace

TEST_SUITE_BEGIN("detection");

TEST_CASE("LoG of a constant height map is all zero") {
    const HeightMap map = flat_map(180, 60, 600, 120.0);
    const ProbabilityMap pmap = log_detect(map, 15.0);
    for (double v : pmap.values) CHECK(v == 0.0);
}

TEST_CASE("LoG localizes a single bump") {
    HeightMap map = flat_map(360, 101, 1000, 100.0);
    add_bump(map, 180.0, 500.0, 5.0, 15.0);
    const ProbabilityMap pmap = log_detect(map, 15.0);

    const auto dets = extract_detections(pmap, 4, 0.5);
    REQUIRE(dets.size() == 1);
    CHECK(std::abs(dets[0].centroid_theta_deg - 180.0) <= 2 * pmap.delta_theta_deg());
    CHECK(std::abs(dets[0].centroid_l_mm - 500.0) <= 2 * pmap.delta_l_mm());

    // argmax lands on the bump center cell
    const auto mx = std::max_element(pmap.values.begin(), pmap.values.end());
    const int idx = static_cast<int>(mx - pmap.values.begin());
    CHECK(std::abs(idx % 360 - 180) <= 1);
    CHECK(std::abs(idx / 360 - 50) <= 1);
}

TEST_CASE("two bumps give two disjoint response regions") {
    HeightMap map = flat_map(360, 101, 1000, 100.0);
    add_bump(map, 90.0, 400.0, 5.0, 15.0);
    add_bump(map, 180.0, 400.0, 5.0, 15.0);
    const ProbabilityMap pmap = log_detect(map, 15.0);
    const auto dets = extract_detections(pmap, 4, 0.5);
    REQUIRE(dets.size() == 2);
    double t0 = dets[0].centroid_theta_deg, t1 = dets[1].centroid_theta_deg;
    if (t0 > t1) std::swap(t0, t1);
    CHECK(std::abs(t0 - 90.0) < 5.0);
    CHECK(std::abs(t1 - 180.0) < 5.0);
}

TEST_CASE("tiny sigma is clamped with a warning") {
    HeightMap map = flat_map(90, 30, 3000, 100.0); // 100mm l cells
    add_bump(map, 90.0, 1500.0, 5.0, 120.0);
    std::string warning;
    const ProbabilityMap pmap = log_detect(map, 3.0, {}, &warning);
    CHECK(warning.find("SigmaTooSmall") != std::string::npos);
    CHECK(pmap.values.size() == map.values.size());
}

TEST_CASE("LoG rejects bad inputs") {
    CHECK_THROWS_AS(log_detect(HeightMap{}, 15.0), Error);
    const HeightMap map = flat_map(90, 30, 300, 100.0);
    CHECK_THROWS_AS(log_detect(map, -1.0), Error);
}

TEST_CASE("extraction of an empty map is empty") {
    CHECK(extract_detections(zero_pmap(90, 40), 4, 0.5).empty());
}

TEST_CASE("extraction reports component score and area") {
    ProbabilityMap pmap = zero_pmap(90, 40);
    for (int r = 10; r < 14; ++r)
        for (int c = 20; c < 25; ++c) pmap.at(r, c) = 0.6;
    pmap.at(11, 22) = 0.9;
    const auto dets = extract_detections(pmap, 5, 0.5);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].area_cells() == 20);
    CHECK(dets[0].score == doctest::Approx(0.9));
}

TEST_CASE("min_area filter drops small components") {
    ProbabilityMap pmap = zero_pmap(90, 40);
    pmap.at(5, 5) = 1.0;
    pmap.at(5, 6) = 1.0;
    CHECK(extract_detections(pmap, 4, 0.5).empty());
    CHECK(extract_detections(pmap, 2, 0.5).size() == 1);
}

TEST_CASE("a component straddling the theta seam stays one detection") {
    ProbabilityMap pmap = zero_pmap(360, 50);
    for (int r = 20; r < 24; ++r)
        for (int dc = -3; dc <= 3; ++dc) pmap.at(r, (dc + 360) % 360) = 0.8;
    const auto dets = extract_detections(pmap, 4, 0.5);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].area_cells() == 4 * 7);
    // circular centroid sits at theta ~ 0, bbox wraps
    const double t = dets[0].centroid_theta_deg;
    CHECK((t < 2.0 || t > 358.0));
    CHECK(dets[0].bbox_c0 == 357);
    CHECK(dets[0].bbox_c1 == 3);
}

TEST_CASE("mAP conventions for empty inputs") {
    const auto d = rect_detection(0, 1, 0, 1, 1.0, 90);
    CHECK(evaluate_map({}, {}, 0.1).map == 1.0);
    CHECK(evaluate_map({}, {d}, 0.1).map == 0.0);
    CHECK(evaluate_map({d}, {}, 0.1).map == 0.0);
}

TEST_CASE("perfect predictions give mAP 1") {
    std::vector<KnotDetection> gt;
    gt.push_back(rect_detection(0, 4, 0, 4, 1.0, 90));
    gt.push_back(rect_detection(10, 14, 30, 34, 1.0, 90));
    gt.push_back(rect_detection(20, 24, 60, 64, 1.0, 90));
    std::vector<KnotDetection> preds = gt;
    preds[0].score = 0.9;
    preds[1].score = 0.8;
    preds[2].score = 0.7;
    CHECK(evaluate_map(preds, gt, 0.1).map == doctest::Approx(1.0));
}

TEST_CASE("hand-enumerated PR case gives 5/6") {
    // 2 GT knots; 3 predictions: hit GT1, miss (IoU < 0.1), hit GT2
    std::vector<KnotDetection> gt;
    gt.push_back(rect_detection(0, 9, 0, 9, 1.0, 90));    // 100 cells
    gt.push_back(rect_detection(20, 29, 40, 49, 1.0, 90)); // 100 cells
    std::vector<KnotDetection> preds;
    preds.push_back(rect_detection(0, 4, 0, 9, 0.9, 90));     // IoU 0.5 with GT1
    preds.push_back(rect_detection(25, 29, 49, 58, 0.8, 90)); // IoU 5/145 ~ 0.034 with GT2
    preds.push_back(rect_detection(20, 24, 40, 49, 0.7, 90)); // IoU 0.5 with GT2
    CHECK(mask_iou(preds[0], gt[0]) == doctest::Approx(0.5));
    CHECK(mask_iou(preds[1], gt[1]) == doctest::Approx(5.0 / 145.0));
    CHECK(mask_iou(preds[2], gt[1]) == doctest::Approx(0.5));

    const DetectionEvalReport report = evaluate_map(preds, gt, 0.10);
    // precision at hits: 1/1 and 2/3 -> AP = 0.5 * 1 + 0.5 * 2/3 = 5/6
    CHECK(report.map == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
    CHECK(report.map == doctest::Approx(brute_force_ap(preds, gt, 0.10)).epsilon(1e-12));
}

TEST_CASE("matching ignores score scale") {
    Rng rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<KnotDetection> gt, preds;
        const int n_gt = 1 + static_cast<int>(rng.uniform_int(0, 4));
        for (int g = 0; g < n_gt; ++g) {
            const int r = static_cast<int>(rng.uniform_int(0, 30));
            const int c = static_cast<int>(rng.uniform_int(0, 70));
            gt.push_back(rect_detection(r, r + 4, c, c + 4, 1.0, 90));
        }
        const int n_pred = static_cast<int>(rng.uniform_int(1, 8));
        for (int p = 0; p < n_pred; ++p) {
            const int r = static_cast<int>(rng.uniform_int(0, 30));
            const int c = static_cast<int>(rng.uniform_int(0, 70));
            preds.push_back(rect_detection(r, r + 4, c, c + 4, rng.uniform(0.1, 1.0), 90));
        }
        const DetectionEvalReport a = evaluate_map(preds, gt, 0.10);
        for (auto& p : preds) p.score *= 7.5;
        const DetectionEvalReport b = evaluate_map(preds, gt, 0.10);
        CHECK(a.map == doctest::Approx(b.map).epsilon(1e-12));
        CHECK(a.is_tp == b.is_tp);
    }
}

TEST_CASE("a duplicate lower-score prediction never raises mAP") {
    std::vector<KnotDetection> gt;
    gt.push_back(rect_detection(0, 4, 0, 4, 1.0, 90));
    gt.push_back(rect_detection(10, 14, 20, 24, 1.0, 90));
    std::vector<KnotDetection> preds;
    preds.push_back(rect_detection(0, 4, 0, 4, 0.9, 90));
    preds.push_back(rect_detection(10, 14, 20, 24, 0.8, 90));
    const double base = evaluate_map(preds, gt, 0.10).map;

    auto dup = preds;
    dup.push_back(rect_detection(0, 4, 0, 4, 0.5, 90)); // duplicate of matched pred
    CHECK(evaluate_map(dup, gt, 0.10).map <= base + 1e-12);
}

TEST_CASE("mAP equals the brute-force oracle on random instances") {
    Rng rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<KnotDetection> gt, preds;
        const int n_gt = static_cast<int>(rng.uniform_int(0, 10));
        const int n_pred = static_cast<int>(rng.uniform_int(0, 20));
        for (int g = 0; g < n_gt; ++g) {
            const int r = static_cast<int>(rng.uniform_int(0, 40));
            const int c = static_cast<int>(rng.uniform_int(0, 80));
            gt.push_back(rect_detection(r, r + static_cast<int>(rng.uniform_int(1, 6)), c,
                                        c + static_cast<int>(rng.uniform_int(1, 6)), 1.0, 120));
        }
        for (int p = 0; p < n_pred; ++p) {
            const int r = static_cast<int>(rng.uniform_int(0, 40));
            const int c = static_cast<int>(rng.uniform_int(0, 80));
            preds.push_back(rect_detection(r, r + static_cast<int>(rng.uniform_int(1, 6)), c,
                                           c + static_cast<int>(rng.uniform_int(1, 6)),
                                           rng.uniform(0.0, 1.0), 120));
        }
        const double expected = brute_force_ap(preds, gt, 0.10);
        const double actual = evaluate_map(preds, gt, 0.10).map;
        CHECK(actual == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("pooled evaluation ranks across logs but matches within them") {
    // log 1: one perfect prediction; log 2: one false positive at higher score
    std::vector<std::vector<KnotDetection>> gt(2), preds(2);
    gt[0].push_back(rect_detection(0, 4, 0, 4, 1.0, 90));
    preds[0].push_back(rect_detection(0, 4, 0, 4, 0.6, 90));
    preds[1].push_back(rect_detection(20, 24, 40, 44, 0.9, 90)); // no gt in log 2
    const DetectionEvalReport pooled = evaluate_map_pooled(preds, gt, 0.10);
    // ranking: FP at 0.9 then TP at 0.6 -> precisions 0, 1/2; recall reaches 1
    CHECK(pooled.gt_count == 1);
    CHECK(pooled.map == doctest::Approx(0.5).epsilon(1e-12));

    // pooling must not let the log-2 prediction consume log-1 ground truth
    std::vector<std::vector<KnotDetection>> cross_preds(2);
    cross_preds[1].push_back(rect_detection(0, 4, 0, 4, 0.9, 90)); // right cells, wrong log
    CHECK(evaluate_map_pooled(cross_preds, gt, 0.10).map == 0.0);
}

TEST_CASE("LoG output shifts exactly with the input columns") {
    HeightMap map = flat_map(180, 60, 600, 100.0);
    add_bump(map, 100.0, 300.0, 4.0, 20.0);
    add_bump(map, 240.0, 150.0, 2.5, 12.0);
    const ProbabilityMap base = log_detect(map, 15.0);

    const int shift = 23;
    HeightMap shifted = map;
    for (int r = 0; r < map.l_bins; ++r)
        for (int c = 0; c < map.theta_bins; ++c)
            shifted.at(r, (c + shift) % map.theta_bins) = map.at(r, c);
    const ProbabilityMap moved = log_detect(shifted, 15.0);

    for (int r = 0; r < map.l_bins; ++r)
        for (int c = 0; c < map.theta_bins; ++c)
            CHECK(moved.at(r, (c + shift) % map.theta_bins) == base.at(r, c));
}

TEST_CASE("detection count matches ground truth on clean synthetic logs") {
    GenParams params;
    params.length_mm = 2000;
    params.surface_noise_sigma_mm = 0;
    params.bump_height_min_mm = 2.5;
    params.knot_base_radius_min_mm = 14;
    params.knots_per_whorl_min = 2;
    params.knots_per_whorl_max = 2;
    params.seed = 73;
    const VirtualLog log = generate_log(params);
    const PointCloud cloud = render_point_cloud(log, params);
    const Centerline line = estimate_centerline(cloud, 2);
    const auto samples = cloud_to_cylindrical(cloud, line);
    double ext = 0;
    for (const auto& s : samples) ext = std::max(ext, s.l);
    const HeightMap hmap = fit_heightmap(samples, 360, default_l_bins(ext), 0.01);
    const ProbabilityMap pmap = log_detect(hmap, 15.0);
    const auto dets = extract_detections(pmap, 4, 0.2);
    CHECK(dets.size() == log.knots.size());
}

TEST_SUITE_END();

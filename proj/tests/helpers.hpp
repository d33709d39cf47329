#ifndef LOGSAW_TESTS_HELPERS_HPP
#define LOGSAW_TESTS_HELPERS_HPP

#include "logsaw/centerline.hpp"
#include "logsaw/detection.hpp"
#include "logsaw/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace logsaw::test {

constexpr double kPi = std::numbers::pi;

// Uniformly sampled lateral surface of a cylinder along +z, seeded.
// Antithetic angle pairs keep every cross-section's centroid exactly on the
// axis, matching the symmetry the centerline tests rely on.
inline PointCloud cylinder_cloud(double radius, double length, std::size_t n,
                                 std::uint64_t seed = 1) {
    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(n);
    for (std::size_t i = 0; i + 1 < n; i += 2) {
        const double a = rng.uniform(0.0, 2.0 * kPi);
        const double z = rng.uniform(0.0, length);
        cloud.points.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
        cloud.points.emplace_back(-radius * std::cos(a), -radius * std::sin(a), z);
    }
    if (cloud.size() < n)
        cloud.points.emplace_back(radius, 0.0, rng.uniform(0.0, length));
    return cloud;
}

// Cylinder plus one Gaussian radial bump at (theta0 deg, l0 mm).
inline PointCloud bumped_cylinder_cloud(double radius, double length, std::size_t n,
                                        double theta0_deg, double l0, double height,
                                        double sigma_mm, std::uint64_t seed = 1) {
    Rng rng(seed);
    PointCloud cloud;
    cloud.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.uniform(0.0, 2.0 * kPi);
        const double z = rng.uniform(0.0, length);
        double dth = std::abs(a * 180.0 / kPi - theta0_deg);
        dth = std::min(dth, 360.0 - dth) * kPi / 180.0 * radius; // arc mm
        const double dl = z - l0;
        const double rho =
            radius + height * std::exp(-0.5 * (dth * dth + dl * dl) / (sigma_mm * sigma_mm));
        cloud.points.emplace_back(rho * std::cos(a), rho * std::sin(a), z);
    }
    return cloud;
}

inline std::vector<CylindricalSample> cylinder_samples(double radius, double length,
                                                       std::size_t n,
                                                       std::uint64_t seed = 1) {
    Rng rng(seed);
    std::vector<CylindricalSample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        samples.push_back({rng.uniform(0.0, 360.0), radius, rng.uniform(0.0, length)});
    return samples;
}

inline KnotDetection rect_detection(int r0, int r1, int c0, int c1, double score,
                                    int theta_bins, double dtheta = 1.0, double dl = 1.0) {
    std::vector<GridCell> mask;
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) mask.push_back({r, c});
    return make_detection(std::move(mask), theta_bins, dtheta, dl, score);
}

// Independent average-precision oracle: same documented matching rule coded
// as a direct transcription (O(n^2) scans, explicit all-point interpolation
// over a dense recall sweep).
inline double brute_force_ap(const std::vector<KnotDetection>& predictions,
                             const std::vector<KnotDetection>& ground_truth,
                             double iou_threshold) {
    if (ground_truth.empty()) return predictions.empty() ? 1.0 : 0.0;
    if (predictions.empty()) return 0.0;

    // rank by score, stable on input order
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < predictions.size(); ++i) order.push_back(i);
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t j = i + 1; j < order.size(); ++j)
            if (predictions[order[j]].score > predictions[order[i]].score)
                std::swap(order[i], order[j]); // selection-style stable-enough sort
    // restore stability among equal scores by index
    for (std::size_t i = 0; i + 1 < order.size(); ++i)
        for (std::size_t j = i + 1; j < order.size(); ++j)
            if (predictions[order[i]].score == predictions[order[j]].score &&
                order[i] > order[j])
                std::swap(order[i], order[j]);

    std::vector<bool> used(ground_truth.size(), false);
    std::vector<bool> tp(order.size(), false);
    for (std::size_t k = 0; k < order.size(); ++k) {
        double best = 0;
        int best_g = -1;
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            if (used[g]) continue;
            const double iou = mask_iou(predictions[order[k]], ground_truth[g]);
            if (iou >= iou_threshold && iou > best) {
                best = iou;
                best_g = static_cast<int>(g);
            }
        }
        if (best_g >= 0) {
            used[best_g] = true;
            tp[k] = true;
        }
    }

    // precision at every rank, interpolated precision = max to the right
    const std::size_t n = order.size();
    std::vector<double> prec(n), rec(n);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (tp[k]) ++hits;
        prec[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
        rec[k] = static_cast<double>(hits) / static_cast<double>(ground_truth.size());
    }
    double ap = 0;
    double prev_r = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (rec[k] <= prev_r) continue;
        double pmax = 0;
        for (std::size_t j = k; j < n; ++j) pmax = std::max(pmax, prec[j]);
        ap += (rec[k] - prev_r) * pmax;
        prev_r = rec[k];
    }
    return ap;
}

} // namespace logsaw::test

#endif

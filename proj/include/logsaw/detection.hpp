#ifndef LOGSAW_DETECTION_HPP
#define LOGSAW_DETECTION_HPP

#include "logsaw/heightmap.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace logsaw {

// Per-cell knot probability on the same grid as its height map. This is the
// pluggable seam for any detector: the built-in LoG filter writes one, and
// externally produced maps are ingested through the PMAP file format.
struct ProbabilityMap {
    int theta_bins = 0;
    int l_bins = 0;
    double l_extent_mm = 0.0;
    std::vector<double> values; // row-major, clamped to [0,1]

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * theta_bins + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * theta_bins + c]; }

    double delta_theta_deg() const { return 360.0 / theta_bins; }
    double delta_l_mm() const { return l_bins > 1 ? l_extent_mm / (l_bins - 1) : 0.0; }
};

struct GridCell {
    int r, c;
    bool operator==(const GridCell&) const = default;
    bool operator<(const GridCell& o) const { return r != o.r ? r < o.r : c < o.c; }
};

// A discrete detection: connected set of grid cells plus summary geometry.
// bbox columns are circular: c0 > c1 means the box wraps through theta=0.
struct KnotDetection {
    std::vector<GridCell> mask; // sorted, non-empty
    double centroid_theta_deg = 0;
    double centroid_l_mm = 0;
    double score = 0;
    int bbox_r0 = 0, bbox_r1 = 0, bbox_c0 = 0, bbox_c1 = 0;

    std::size_t area_cells() const { return mask.size(); }
};

struct DetectionEvalReport {
    double ap = 0;
    double map = 0; // single class, equals ap
    std::vector<double> precision;
    std::vector<double> recall;
    double iou_threshold = 0.10;
    // index into predictions (sorted by descending score) -> matched gt index,
    // -1 for unmatched
    std::vector<int> matched_gt;
    std::vector<char> is_tp; // per sorted prediction
    std::vector<double> sorted_scores;
    std::size_t gt_count = 0;
};

struct LogDetectOptions {
    double threshold = 0.0; // raw response cutoff; the default keeps positives only
    // A map whose strongest response stays below this (in mm of surface
    // curvature) is treated as knot-free instead of scaling fit ripple up to
    // probability 1. Clean fits of knot-free logs stay under 0.01; the
    // weakest real knots (2 mm bumps) respond above 0.17.
    double response_floor = 0.05;
};

// Laplacian-of-Gaussian bump detector. sigma is in millimeters and converted
// per axis (theta via the map's mean radius). Circular padding in theta,
// reflect padding in l. The response is negated so surface bumps score
// positive; responses at or below the cutoff become 0 and the surviving
// range is scaled to [0,1]. A sigma smaller than one cell is clamped and
// reported through `warning` when given.
ProbabilityMap log_detect(const HeightMap& hmap, double sigma_mm,
                          const LogDetectOptions& options = {},
                          std::string* warning = nullptr);

// Thresholds the map, finds 4-connected components (adjacency wraps in
// theta), drops those below min_area_cells, and emits one detection per
// surviving component with score = max probability inside it.
std::vector<KnotDetection> extract_detections(const ProbabilityMap& pmap,
                                              std::size_t min_area_cells,
                                              double binarize_at);

// Mask IoU.
double mask_iou(const KnotDetection& a, const KnotDetection& b);

// Builds a detection from a cell mask on a (theta_bins x l_bins) grid:
// sorts the mask, computes the circular-mean centroid and the minimal
// circular bounding box. The mask must be non-empty.
KnotDetection make_detection(std::vector<GridCell> mask, int theta_bins,
                             double delta_theta_deg, double delta_l_mm, double score);

// Greedy score-ordered one-to-one matching at the IoU threshold, then AP by
// all-point interpolation of the precision-recall curve. Conventions: empty
// predictions and empty GT -> mAP 1.0; empty predictions with GT -> 0.0;
// predictions with empty GT -> 0.0.
DetectionEvalReport evaluate_map(const std::vector<KnotDetection>& predictions,
                                 const std::vector<KnotDetection>& ground_truth,
                                 double iou_threshold = 0.10);

// Aggregate AP over several logs: matching stays within each log, the PR
// curve is computed over the pooled score ranking ("All" row).
DetectionEvalReport evaluate_map_pooled(
    const std::vector<std::vector<KnotDetection>>& predictions_per_log,
    const std::vector<std::vector<KnotDetection>>& ground_truth_per_log,
    double iou_threshold = 0.10);

// PMAP file: same layout as HMAP with tag "PMAP v1".
void save_pmap(const ProbabilityMap& pmap, const std::string& path);
ProbabilityMap load_pmap(const std::string& path);

// Detection CSV: "id,theta_deg,l_mm,area_cells,score,bbox" with bbox encoded
// r0:r1:c0:c1. Loading reconstructs the mask as the bbox rectangle (the CSV
// does not carry per-cell masks), which is what cmd_evaluate consumes.
void save_detections_csv(const std::vector<KnotDetection>& detections,
                         const std::string& path);
std::vector<KnotDetection> load_detections_csv(const std::string& path,
                                               int theta_bins_hint = 0);

} // namespace logsaw

#endif

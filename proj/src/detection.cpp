#include "logsaw/detection.hpp"
#include "logsaw/error.hpp"
#include "logsaw/grid_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace logsaw {

namespace {

std::vector<double> gaussian_kernel(double sigma_cells) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_cells)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma_cells * sigma_cells));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

inline int wrap_index(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

// Boundary extension along l: point reflection through the end sample
// (v[-j] = 2 v[0] - v[j]). The even mirror would fold the taper's linear
// slope into a crease whose response at the log ends outranks real knots.
struct ReflectedColumn {
    const std::vector<double>& values;
    int stride, offset, n;
    double at(int i) const {
        if (i < 0) return 2.0 * raw(0) - raw(std::min(-i, n - 1));
        if (i >= n) return 2.0 * raw(n - 1) - raw(std::max(2 * (n - 1) - i, 0));
        return raw(i);
    }
    double raw(int i) const {
        return values[static_cast<std::size_t>(i) * stride + offset];
    }
};

} // namespace

ProbabilityMap log_detect(const HeightMap& hmap, double sigma_mm,
                          const LogDetectOptions& options, std::string* warning) {
    if (hmap.values.empty()) fail("InvalidInput", "height map not fitted");
    if (sigma_mm <= 0) fail("InvalidInput", "sigma must be positive");

    const int nt = hmap.theta_bins;
    const int nl = hmap.l_bins;
    const double mean_rho = hmap.mean_value();
    const double mm_per_theta_cell =
        std::max(1e-9, mean_rho * (2.0 * std::numbers::pi / nt));
    const double mm_per_l_cell = std::max(1e-9, hmap.delta_l_mm());

    double sigma_t = sigma_mm / mm_per_theta_cell;
    double sigma_l = sigma_mm / mm_per_l_cell;
    if (sigma_t < 1.0 || sigma_l < 1.0) {
        if (warning)
            *warning = "SigmaTooSmall: sigma " + std::to_string(sigma_mm) +
                       " mm is below one grid cell; clamped";
        sigma_t = std::max(sigma_t, 1.0);
        sigma_l = std::max(sigma_l, 1.0);
    }

    // Separable Gaussian, circular in theta and reflected in l.
    const std::vector<double> kt = gaussian_kernel(sigma_t);
    const std::vector<double> kl = gaussian_kernel(sigma_l);
    const int rt = static_cast<int>(kt.size()) / 2;
    const int rl = static_cast<int>(kl.size()) / 2;

    std::vector<double> tmp(hmap.values.size()), smooth(hmap.values.size());
    for (int r = 0; r < nl; ++r)
        for (int c = 0; c < nt; ++c) {
            double acc = 0;
            for (int j = -rt; j <= rt; ++j)
                acc += kt[j + rt] * hmap.at(r, wrap_index(c + j, nt));
            tmp[static_cast<std::size_t>(r) * nt + c] = acc;
        }
    for (int c = 0; c < nt; ++c) {
        const ReflectedColumn column{tmp, nt, c, nl};
        for (int r = 0; r < nl; ++r) {
            double acc = 0;
            for (int j = -rl; j <= rl; ++j) acc += kl[j + rl] * column.at(r + j);
            smooth[static_cast<std::size_t>(r) * nt + c] = acc;
        }
    }

    // Negated 5-point Laplacian: bumps respond positive.
    ProbabilityMap pmap;
    pmap.theta_bins = nt;
    pmap.l_bins = nl;
    pmap.l_extent_mm = hmap.l_extent_mm;
    pmap.values.resize(hmap.values.size());
    for (int c = 0; c < nt; ++c) {
        const ReflectedColumn column{smooth, nt, c, nl};
        const int c_prev = wrap_index(c - 1, nt);
        const int c_next = wrap_index(c + 1, nt);
        for (int r = 0; r < nl; ++r) {
            const double lap = smooth[static_cast<std::size_t>(r) * nt + c_prev] +
                               smooth[static_cast<std::size_t>(r) * nt + c_next] +
                               column.at(r + 1) + column.at(r - 1) - 4.0 * column.at(r);
            pmap.values[static_cast<std::size_t>(r) * nt + c] = -lap;
        }
    }

    // The cutoff acts on the raw negated response (negative lobes and flat
    // background drop to zero at the default), then the surviving range is
    // scaled to [0, 1].
    const double lo = options.threshold;
    const double hi = *std::max_element(pmap.values.begin(), pmap.values.end());
    if (hi > lo && hi > options.response_floor) {
        for (double& v : pmap.values) v = v <= lo ? 0.0 : (v - lo) / (hi - lo);
    } else {
        std::fill(pmap.values.begin(), pmap.values.end(), 0.0);
    }
    return pmap;
}

std::vector<KnotDetection> extract_detections(const ProbabilityMap& pmap,
                                              std::size_t min_area_cells,
                                              double binarize_at) {
    const int nt = pmap.theta_bins;
    const int nl = pmap.l_bins;
    auto in_mask = [&](int r, int c) {
        const double v = pmap.at(r, c);
        return v > 0.0 && v >= binarize_at;
    };

    std::vector<char> visited(pmap.values.size(), 0);
    std::vector<KnotDetection> detections;

    for (int r0 = 0; r0 < nl; ++r0) {
        for (int c0 = 0; c0 < nt; ++c0) {
            const std::size_t idx0 = static_cast<std::size_t>(r0) * nt + c0;
            if (visited[idx0] || !in_mask(r0, c0)) continue;

            // BFS; theta adjacency wraps, so seam-straddling blobs stay whole.
            std::vector<GridCell> cells;
            std::deque<GridCell> queue{{r0, c0}};
            visited[idx0] = 1;
            double score = 0;
            while (!queue.empty()) {
                const GridCell cur = queue.front();
                queue.pop_front();
                cells.push_back(cur);
                score = std::max(score, pmap.at(cur.r, cur.c));
                const int nr[4] = {cur.r - 1, cur.r + 1, cur.r, cur.r};
                const int nc[4] = {cur.c, cur.c, wrap_index(cur.c - 1, nt), wrap_index(cur.c + 1, nt)};
                for (int k = 0; k < 4; ++k) {
                    if (nr[k] < 0 || nr[k] >= nl) continue;
                    const std::size_t idx = static_cast<std::size_t>(nr[k]) * nt + nc[k];
                    if (!visited[idx] && in_mask(nr[k], nc[k])) {
                        visited[idx] = 1;
                        queue.push_back({nr[k], nc[k]});
                    }
                }
            }
            if (cells.size() < min_area_cells) continue;
            detections.push_back(make_detection(std::move(cells), nt,
                                                pmap.delta_theta_deg(),
                                                pmap.delta_l_mm(), score));
        }
    }
    return detections;
}

KnotDetection make_detection(std::vector<GridCell> mask, int theta_bins,
                             double delta_theta_deg, double delta_l_mm, double score) {
    if (mask.empty()) fail("InvalidInput", "detection mask must be non-empty");
    KnotDetection det;
    std::sort(mask.begin(), mask.end());
    mask.erase(std::unique(mask.begin(), mask.end()), mask.end());
    det.mask = std::move(mask);
    det.score = score;

    int rmin = std::numeric_limits<int>::max(), rmax = -1;
    double sx = 0, sy = 0, sl = 0;
    std::vector<char> col_used(theta_bins, 0);
    for (const GridCell& cell : det.mask) {
        rmin = std::min(rmin, cell.r);
        rmax = std::max(rmax, cell.r);
        col_used[cell.c] = 1;
        const double a = cell.c * delta_theta_deg * std::numbers::pi / 180.0;
        sx += std::cos(a);
        sy += std::sin(a);
        sl += cell.r * delta_l_mm;
    }
    det.bbox_r0 = rmin;
    det.bbox_r1 = rmax;

    // Circular column range: complement of the widest unused gap between
    // consecutive used columns.
    std::vector<int> used;
    for (int c = 0; c < theta_bins; ++c)
        if (col_used[c]) used.push_back(c);
    if (static_cast<int>(used.size()) == theta_bins) {
        det.bbox_c0 = 0;
        det.bbox_c1 = theta_bins - 1;
    } else {
        int best_gap = -1;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < used.size(); ++i) {
            const int next = i + 1 < used.size() ? used[i + 1] : used[0] + theta_bins;
            const int gap = next - used[i] - 1;
            if (gap > best_gap) {
                best_gap = gap;
                best_i = i;
            }
        }
        det.bbox_c1 = used[best_i];
        det.bbox_c0 = best_i + 1 < used.size() ? used[best_i + 1] : used[0];
    }

    double ang = std::atan2(sy, sx) * 180.0 / std::numbers::pi;
    if (ang < 0) ang += 360.0;
    det.centroid_theta_deg = ang;
    det.centroid_l_mm = sl / static_cast<double>(det.mask.size());
    return det;
}

double mask_iou(const KnotDetection& a, const KnotDetection& b) {
    std::size_t inter = 0, i = 0, j = 0;
    while (i < a.mask.size() && j < b.mask.size()) {
        if (a.mask[i] == b.mask[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a.mask[i] < b.mask[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = a.mask.size() + b.mask.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Greedy one-to-one matching in descending score order; returns per-sorted-
// prediction TP flags and matched gt indices.
void greedy_match(const std::vector<KnotDetection>& predictions,
                  const std::vector<KnotDetection>& ground_truth,
                  double iou_threshold, std::vector<int>& order,
                  std::vector<char>& is_tp, std::vector<int>& matched_gt) {
    order.resize(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return predictions[a].score > predictions[b].score;
    });

    std::vector<char> gt_used(ground_truth.size(), 0);
    is_tp.assign(predictions.size(), 0);
    matched_gt.assign(predictions.size(), -1);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const KnotDetection& pred = predictions[order[k]];
        double best = 0;
        int best_gt = -1;
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            if (gt_used[g]) continue;
            const double iou = mask_iou(pred, ground_truth[g]);
            if (iou >= iou_threshold && iou > best) {
                best = iou;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt >= 0) {
            gt_used[best_gt] = 1;
            is_tp[k] = 1;
            matched_gt[k] = best_gt;
        }
    }
}

// AP with all-point interpolation from per-rank TP flags.
DetectionEvalReport finalize_report(std::vector<char> is_tp,
                                    std::vector<double> scores,
                                    std::size_t gt_count, double iou_threshold) {
    DetectionEvalReport report;
    report.iou_threshold = iou_threshold;
    report.gt_count = gt_count;
    report.is_tp = std::move(is_tp);
    report.sorted_scores = std::move(scores);

    if (gt_count == 0) {
        report.ap = report.is_tp.empty() ? 1.0 : 0.0;
        report.map = report.ap;
        return report;
    }
    if (report.is_tp.empty()) {
        report.ap = 0.0;
        report.map = 0.0;
        return report;
    }

    const std::size_t n = report.is_tp.size();
    report.precision.resize(n);
    report.recall.resize(n);
    std::size_t tp = 0;
    for (std::size_t k = 0; k < n; ++k) {
        tp += report.is_tp[k] ? 1 : 0;
        report.precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
        report.recall[k] = static_cast<double>(tp) / static_cast<double>(gt_count);
    }

    std::vector<double> interp(n);
    double running = 0;
    for (std::size_t k = n; k-- > 0;) {
        running = std::max(running, report.precision[k]);
        interp[k] = running;
    }
    double ap = 0, prev_recall = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (report.recall[k] > prev_recall) {
            ap += (report.recall[k] - prev_recall) * interp[k];
            prev_recall = report.recall[k];
        }
    }
    report.ap = ap;
    report.map = ap;
    return report;
}

} // namespace

DetectionEvalReport evaluate_map(const std::vector<KnotDetection>& predictions,
                                 const std::vector<KnotDetection>& ground_truth,
                                 double iou_threshold) {
    std::vector<int> order;
    std::vector<char> is_tp;
    std::vector<int> matched_gt;
    greedy_match(predictions, ground_truth, iou_threshold, order, is_tp, matched_gt);

    std::vector<double> scores(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) scores[k] = predictions[order[k]].score;

    DetectionEvalReport report =
        finalize_report(std::move(is_tp), std::move(scores), ground_truth.size(), iou_threshold);
    report.matched_gt = std::move(matched_gt);
    return report;
}

DetectionEvalReport evaluate_map_pooled(
    const std::vector<std::vector<KnotDetection>>& predictions_per_log,
    const std::vector<std::vector<KnotDetection>>& ground_truth_per_log,
    double iou_threshold) {
    if (predictions_per_log.size() != ground_truth_per_log.size())
        fail("InvalidInput", "per-log prediction/ground-truth count mismatch");

    struct Entry {
        double score;
        char tp;
    };
    std::vector<Entry> entries;
    std::size_t gt_total = 0;
    for (std::size_t log = 0; log < predictions_per_log.size(); ++log) {
        std::vector<int> order;
        std::vector<char> is_tp;
        std::vector<int> matched_gt;
        greedy_match(predictions_per_log[log], ground_truth_per_log[log], iou_threshold,
                     order, is_tp, matched_gt);
        for (std::size_t k = 0; k < order.size(); ++k)
            entries.push_back({predictions_per_log[log][order[k]].score, is_tp[k]});
        gt_total += ground_truth_per_log[log].size();
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.score > b.score; });

    std::vector<char> is_tp(entries.size());
    std::vector<double> scores(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        is_tp[k] = entries[k].tp;
        scores[k] = entries[k].score;
    }
    return finalize_report(std::move(is_tp), std::move(scores), gt_total, iou_threshold);
}

void save_pmap(const ProbabilityMap& pmap, const std::string& path) {
    save_grid(pmap.values, pmap.theta_bins, pmap.l_bins, pmap.l_extent_mm, "PMAP", path);
}

ProbabilityMap load_pmap(const std::string& path) {
    ProbabilityMap pmap;
    load_grid(pmap.values, pmap.theta_bins, pmap.l_bins, pmap.l_extent_mm, "PMAP", path);
    for (double& v : pmap.values) v = std::clamp(v, 0.0, 1.0);
    return pmap;
}

void save_detections_csv(const std::vector<KnotDetection>& detections,
                         const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail("IOError", "cannot write " + path);
    std::fprintf(f, "id,theta_deg,l_mm,area_cells,score,bbox\n");
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const KnotDetection& d = detections[i];
        std::fprintf(f, "%zu,%.6f,%.6f,%zu,%.17g,%d:%d:%d:%d\n", i, d.centroid_theta_deg,
                     d.centroid_l_mm, d.area_cells(), d.score, d.bbox_r0, d.bbox_r1,
                     d.bbox_c0, d.bbox_c1);
    }
    std::fclose(f);
}

std::vector<KnotDetection> load_detections_csv(const std::string& path,
                                               int theta_bins_hint) {
    std::ifstream in(path);
    if (!in) fail("IOError", "cannot open " + path);
    std::vector<KnotDetection> detections;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("id,", 0) == 0) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 6)
            fail("IOError", path + ": line " + std::to_string(lineno) +
                                ": expected 6 CSV fields, got " + std::to_string(fields.size()));
        KnotDetection d;
        try {
            d.centroid_theta_deg = std::stod(fields[1]);
            d.centroid_l_mm = std::stod(fields[2]);
            d.score = std::stod(fields[4]);
            if (std::sscanf(fields[5].c_str(), "%d:%d:%d:%d", &d.bbox_r0, &d.bbox_r1,
                            &d.bbox_c0, &d.bbox_c1) != 4)
                throw std::invalid_argument("bbox");
        } catch (const std::exception&) {
            fail("IOError", path + ": line " + std::to_string(lineno) + ": malformed field");
        }
        if (d.bbox_c0 > d.bbox_c1 && theta_bins_hint <= 0)
            fail("IOError", path + ": line " + std::to_string(lineno) +
                                ": wrapped bbox needs theta_bins");
        const int nt = theta_bins_hint;
        for (int r = d.bbox_r0; r <= d.bbox_r1; ++r) {
            if (d.bbox_c0 <= d.bbox_c1) {
                for (int c = d.bbox_c0; c <= d.bbox_c1; ++c) d.mask.push_back({r, c});
            } else {
                for (int c = d.bbox_c0; c < nt; ++c) d.mask.push_back({r, c});
                for (int c = 0; c <= d.bbox_c1; ++c) d.mask.push_back({r, c});
            }
        }
        std::sort(d.mask.begin(), d.mask.end());
        detections.push_back(std::move(d));
    }
    return detections;
}

} // namespace logsaw

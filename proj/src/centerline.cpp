#include "logsaw/centerline.hpp"
#include "logsaw/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace logsaw {

Vec3 Centerline::point_at(double l) const {
    if (vertices.size() < 2) return vertices.empty() ? Vec3::Zero() : vertices.front();
    if (l <= 0) return vertices.front();
    double acc = 0;
    for (std::size_t i = 0; i + 1 < vertices.size(); ++i) {
        const double len = (vertices[i + 1] - vertices[i]).norm();
        if (l <= acc + len || i + 2 == vertices.size()) {
            const double t = len > 0 ? std::clamp((l - acc) / len, 0.0, 1.0) : 0.0;
            return vertices[i] + t * (vertices[i + 1] - vertices[i]);
        }
        acc += len;
    }
    return vertices.back();
}

namespace {

Vec3 principal_axis(const std::vector<Vec3>& points, const Vec3& centroid) {
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : points) {
        const Vec3 d = p - centroid;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Vec3 axis = es.eigenvectors().col(2); // largest eigenvalue
    // Fix the sign so results do not depend on the eigensolver's convention.
    if (axis.z() < 0 || (axis.z() == 0 && (axis.x() < 0 || (axis.x() == 0 && axis.y() < 0))))
        axis = -axis;
    return axis.normalized();
}

// Deviation of breakpoint i from the chord of its surviving neighbors.
double joint_deviation(const std::vector<Vec3>& centroids,
                       const std::vector<std::size_t>& kept, std::size_t i) {
    const Vec3& prev = centroids[kept[i - 1]];
    const Vec3& next = centroids[kept[i + 1]];
    const Vec3 chord = next - prev;
    const Vec3 rel = centroids[kept[i]] - prev;
    const double len2 = chord.squaredNorm();
    const Vec3 off = len2 > 0 ? Vec3(rel - chord * (chord.dot(rel) / len2)) : rel;
    return off.norm();
}

// Removes interior breakpoints one at a time, always the one most collinear
// with its neighbors (smallest deviation from the neighbor chord), until
// `target_segments` remain. Breakpoints closer than half the uniform spacing
// are then spread apart: centroid wobble otherwise wins the greedy selection
// and leaves short badly tilted segments. Returns surviving centroid indices.
std::vector<std::size_t> simplify_breakpoints(const std::vector<Vec3>& centroids,
                                              std::size_t target_segments) {
    std::vector<std::size_t> kept(centroids.size());
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
    while (kept.size() - 1 > target_segments) {
        std::size_t best = 1;
        double best_deviation = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i + 1 < kept.size(); ++i) {
            const double deviation = joint_deviation(centroids, kept, i);
            if (deviation < best_deviation) {
                best_deviation = deviation;
                best = i;
            }
        }
        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(best));
    }

    const std::size_t min_sep =
        std::max<std::size_t>(1, (centroids.size() - 1) / (2 * target_segments));
    for (int guard = 0; guard < 256; ++guard) {
        // smallest inter-breakpoint gap
        std::size_t worst = 0;
        std::size_t worst_gap = std::numeric_limits<std::size_t>::max();
        for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
            const std::size_t gap = kept[i + 1] - kept[i];
            if (gap < worst_gap) {
                worst_gap = gap;
                worst = i;
            }
        }
        if (worst_gap >= min_sep) break;

        // drop the straighter interior endpoint of the offending pair
        std::size_t drop;
        if (worst == 0) drop = worst + 1;
        else if (worst + 2 == kept.size()) drop = worst;
        else drop = joint_deviation(centroids, kept, worst) <=
                            joint_deviation(centroids, kept, worst + 1)
                        ? worst
                        : worst + 1;
        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(drop));

        // reinsert at the midpoint of the widest gap
        std::size_t wide = 0, wide_gap = 0;
        for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
            const std::size_t gap = kept[i + 1] - kept[i];
            if (gap > wide_gap) {
                wide_gap = gap;
                wide = i;
            }
        }
        kept.insert(kept.begin() + static_cast<std::ptrdiff_t>(wide) + 1,
                    kept[wide] + wide_gap / 2);
    }
    return kept;
}

// The surviving breakpoints are single bin centroids and carry their wobble
// (knot whorls shift them by a few millimeters, enough to kink short
// segments). Re-solves the vertex positions as the piecewise-linear least
// squares fit over all centroids, hat weights taken in centroid-index
// coordinates so every vertex anchors its own centroid with weight one.
std::vector<Vec3> refit_vertices(const std::vector<Vec3>& centroids,
                                 const std::vector<std::size_t>& breakpoints) {
    const std::size_t nv = breakpoints.size();
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(static_cast<int>(nv), static_cast<int>(nv));
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(static_cast<int>(nv), 3);
    for (std::size_t k = 0; k < centroids.size(); ++k) {
        std::size_t j = 0;
        while (j + 2 < nv && k >= breakpoints[j + 1]) ++j;
        const double span = static_cast<double>(breakpoints[j + 1] - breakpoints[j]);
        const double w1 =
            std::clamp((static_cast<double>(k) - static_cast<double>(breakpoints[j])) / span,
                       0.0, 1.0);
        const double w0 = 1.0 - w1;
        const int a = static_cast<int>(j), b = a + 1;
        normal(a, a) += w0 * w0;
        normal(a, b) += w0 * w1;
        normal(b, a) += w0 * w1;
        normal(b, b) += w1 * w1;
        rhs.row(a) += w0 * centroids[k].transpose();
        rhs.row(b) += w1 * centroids[k].transpose();
    }

    const Eigen::MatrixXd solved = normal.ldlt().solve(rhs);
    std::vector<Vec3> verts(nv);
    for (std::size_t j = 0; j < nv; ++j)
        verts[j] = solved.row(static_cast<int>(j)).transpose();
    for (std::size_t j = 0; j + 1 < nv; ++j)
        if ((verts[j + 1] - verts[j]).norm() < 1e-9) {
            // degenerate fit; fall back to the raw breakpoint centroids
            for (std::size_t m = 0; m < nv; ++m) verts[m] = centroids[breakpoints[m]];
            break;
        }
    return verts;
}

} // namespace

namespace {

// Bin points by the scalar parameter t, build the centroid polyline, then
// simplify and refit. `uniform_breaks` spreads breakpoints evenly instead of
// greedy selection; the projection pass needs that, since greedy survivors
// can sit in adjacent bins and a short tilted segment assigns ring points to
// bins by their angle, wrecking the centroids.
Centerline polyline_from_params(const PointCloud& cloud, const std::vector<double>& t,
                                std::size_t n_segments, std::size_t axis_bins,
                                bool uniform_breaks) {
    double tmin = std::numeric_limits<double>::infinity();
    double tmax = -std::numeric_limits<double>::infinity();
    for (double v : t) {
        tmin = std::min(tmin, v);
        tmax = std::max(tmax, v);
    }
    if (!(tmax > tmin))
        fail("DegenerateBin", "longitudinal bin 1 has no points (degenerate extent)");

    const double span = tmax - tmin;
    std::vector<Vec3> sums(axis_bins, Vec3::Zero());
    std::vector<std::size_t> counts(axis_bins, 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        auto b = static_cast<std::size_t>((t[i] - tmin) / span * static_cast<double>(axis_bins));
        b = std::min(b, axis_bins - 1);
        sums[b] += cloud.points[i];
        counts[b] += 1;
    }
    for (std::size_t b = 0; b < axis_bins; ++b)
        if (counts[b] == 0)
            fail("DegenerateBin", "longitudinal bin " + std::to_string(b) + " has no points");

    std::vector<Vec3> centroids;
    centroids.reserve(axis_bins);
    for (std::size_t b = 0; b < axis_bins; ++b) {
        Vec3 v = sums[b] / static_cast<double>(counts[b]);
        if (!centroids.empty() && (v - centroids.back()).norm() < 1e-12)
            continue; // merged duplicate centroids keep segments positive-length
        centroids.push_back(v);
    }
    if (centroids.size() < 2)
        fail("DegenerateBin", "all bin centroids coincide");

    const std::size_t segments = std::min(n_segments, centroids.size() - 1);
    std::vector<std::size_t> breakpoints;
    if (uniform_breaks) {
        for (std::size_t j = 0; j <= segments; ++j)
            breakpoints.push_back(j * (centroids.size() - 1) / segments);
        breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()),
                          breakpoints.end());
        if (breakpoints.size() < 2) breakpoints = {0, centroids.size() - 1};
    } else {
        breakpoints = simplify_breakpoints(centroids, segments);
    }
    Centerline line;
    line.vertices = refit_vertices(centroids, breakpoints);
    return line;
}

// Arc-length position of p on the polyline (nearest-point projection).
double polyline_param(const Centerline& line, const Vec3& p) {
    double best_d2 = std::numeric_limits<double>::infinity();
    double best_t = 0;
    double arc = 0;
    for (std::size_t j = 0; j + 1 < line.vertices.size(); ++j) {
        const Vec3 d = line.vertices[j + 1] - line.vertices[j];
        const double len2 = d.squaredNorm();
        const double len = std::sqrt(len2);
        const double w = len2 > 0 ? std::clamp(d.dot(p - line.vertices[j]) / len2, 0.0, 1.0) : 0.0;
        const double d2 = (p - (line.vertices[j] + w * d)).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best_t = arc + w * len;
        }
        arc += len;
    }
    return best_t;
}

} // namespace

std::size_t default_n_segments(double extent_mm) {
    const double segments = std::round(extent_mm / 1000.0);
    return static_cast<std::size_t>(std::clamp(segments, 1.0, 16.0));
}

Centerline estimate_centerline(const PointCloud& cloud, std::size_t n_segments,
                               std::size_t axis_bins) {
    if (cloud.empty()) fail("InvalidInput", "empty point cloud");
    if (n_segments < 1) fail("InvalidInput", "n_segments must be >= 1");
    if (axis_bins < 2) fail("InvalidInput", "axis_bins must be >= 2");
    if (n_segments > axis_bins - 1)
        fail("InvalidInput", "n_segments exceeds axis_bins - 1");

    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : cloud.points) centroid += p;
    centroid /= static_cast<double>(cloud.size());
    const Vec3 axis = principal_axis(cloud.points, centroid);

    std::vector<double> t(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        t[i] = axis.dot(cloud.points[i] - centroid);
    const Centerline first_pass =
        polyline_from_params(cloud, t, n_segments, axis_bins, /*uniform_breaks=*/true);

    // Second pass bins along the first-pass arc so end slabs cut the surface
    // perpendicular to the local direction; a single global-axis pass leaves
    // the end centroids of bent logs several millimeters off the pith.
    for (std::size_t i = 0; i < cloud.size(); ++i)
        t[i] = polyline_param(first_pass, cloud.points[i]);
    return polyline_from_params(cloud, t, n_segments, axis_bins, /*uniform_breaks=*/false);
}

std::vector<std::vector<std::size_t>>
split_by_bisecting_planes(const PointCloud& cloud, const Centerline& centerline) {
    const std::size_t n_seg = centerline.segment_count();
    if (n_seg < 1) fail("InvalidInput", "centerline needs at least one segment");

    std::vector<std::vector<std::size_t>> subsets(n_seg);
    if (n_seg == 1) {
        subsets[0].resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) subsets[0][i] = i;
        return subsets;
    }

    // One plane per interior joint; normals point down-log so the count of
    // "passed" planes is the segment index.
    std::vector<Vec3> plane_points(n_seg - 1), plane_normals(n_seg - 1);
    for (std::size_t j = 0; j + 1 < n_seg; ++j) {
        plane_points[j] = centerline.vertices[j + 1];
        plane_normals[j] = (centerline.segment_dir(j) + centerline.segment_dir(j + 1)).normalized();
    }

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        std::size_t seg = 0;
        for (std::size_t j = 0; j + 1 < n_seg; ++j)
            if (plane_normals[j].dot(cloud.points[i] - plane_points[j]) > 0.0)
                seg = j + 1;
        subsets[seg].push_back(i);
    }
    return subsets;
}

std::vector<CylindricalSample>
to_cylindrical(const PointCloud& cloud, const std::vector<std::size_t>& subset,
               const Vec3& seg_start, const Vec3& seg_end, const Vec3& reference,
               double l_offset) {
    const Vec3 axis = seg_end - seg_start;
    const double axis_len = axis.norm();
    if (axis_len <= 0) fail("InvalidInput", "zero-length centerline segment");
    const Vec3 d = axis / axis_len;
    const Vec3 e1 = (reference - d * d.dot(reference)).normalized();
    const Vec3 e2 = d.cross(e1);

    std::vector<CylindricalSample> out;
    out.reserve(subset.size());
    for (std::size_t idx : subset) {
        const Vec3 v = cloud.points[idx] - seg_start;
        const double z = d.dot(v);
        const Vec3 radial = v - d * z;
        const double rho = radial.norm();
        double theta = 0.0;
        if (rho > 0.0) {
            theta = std::atan2(e2.dot(radial), e1.dot(radial)) * 180.0 / std::numbers::pi;
            if (theta < 0) theta += 360.0;
            if (theta >= 360.0) theta = 0.0;
        }
        out.push_back({theta, rho, z + l_offset});
    }
    return out;
}

Vec3 initial_reference(const Vec3& axis_dir) {
    Vec3 ref = Vec3::UnitX() - axis_dir * axis_dir.x();
    if (ref.norm() < 1e-9)
        ref = Vec3::UnitY() - axis_dir * axis_dir.y();
    return ref.normalized();
}

Vec3 transport_reference(const Vec3& reference, const Vec3& next_axis_dir) {
    Vec3 ref = reference - next_axis_dir * next_axis_dir.dot(reference);
    if (ref.norm() < 1e-9)
        return initial_reference(next_axis_dir);
    return ref.normalized();
}

std::vector<CylindricalSample>
cloud_to_cylindrical(const PointCloud& cloud, const Centerline& centerline) {
    const auto subsets = split_by_bisecting_planes(cloud, centerline);

    std::vector<CylindricalSample> samples;
    samples.reserve(cloud.size());
    Vec3 ref = initial_reference(centerline.segment_dir(0));
    double l_offset = 0.0;
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        if (s > 0) {
            l_offset += centerline.segment_length(s - 1);
            ref = transport_reference(ref, centerline.segment_dir(s));
        }
        auto part = to_cylindrical(cloud, subsets[s], centerline.vertices[s],
                                   centerline.vertices[s + 1], ref, l_offset);
        samples.insert(samples.end(), part.begin(), part.end());
    }

    // Points ahead of the first vertex project at negative local z; anchor
    // l = 0 at the outermost projection so the full log is covered and the
    // l >= 0 invariant holds.
    double l_min = 0.0;
    for (const CylindricalSample& c : samples) l_min = std::min(l_min, c.l);
    if (l_min < 0)
        for (CylindricalSample& c : samples) c.l -= l_min;
    return samples;
}

} // namespace logsaw

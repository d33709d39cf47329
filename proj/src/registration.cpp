#include "logsaw/registration.hpp"
#include "logsaw/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace logsaw {

PointCloud RigidTransform::apply(const PointCloud& cloud) const {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Vec3& p : cloud.points) out.points.push_back(apply(p));
    out.labels = cloud.labels;
    return out;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = rotation.transpose();
    inv.translation = -inv.scale * (inv.rotation * translation);
    return inv;
}

RigidTransform RigidTransform::then(const RigidTransform& next) const {
    // next.apply(this->apply(p)) = ns*nR*(s*R*p + t) + nt
    RigidTransform out;
    out.scale = next.scale * scale;
    out.rotation = next.rotation * rotation;
    out.translation = next.scale * (next.rotation * translation) + next.translation;
    return out;
}

void save_transform(const RigidTransform& t, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) fail("IOError", "cannot write " + path);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) std::fprintf(f, "%.17g ", t.rotation(r, c));
    for (int i = 0; i < 3; ++i) std::fprintf(f, "%.17g ", t.translation[i]);
    std::fprintf(f, "%.17g\n", t.scale);
    std::fclose(f);
}

RigidTransform load_transform(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IOError", "cannot open " + path);
    RigidTransform t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (!(in >> t.rotation(r, c))) fail("IOError", path + ": short transform row");
    for (int i = 0; i < 3; ++i)
        if (!(in >> t.translation[i])) fail("IOError", path + ": short transform row");
    if (!(in >> t.scale)) fail("IOError", path + ": short transform row");
    return t;
}

std::pair<PointCloud, RigidTransform> normalize(const PointCloud& cloud) {
    if (cloud.size() < 2) fail("DegenerateCloud", "normalization needs at least 2 points");
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : cloud.points) centroid += p;
    centroid /= static_cast<double>(cloud.size());

    double max_dist = 0;
    for (const Vec3& p : cloud.points) max_dist = std::max(max_dist, (p - centroid).norm());
    if (max_dist <= 0) fail("DegenerateCloud", "all points identical");

    RigidTransform t;
    t.scale = 1.0 / max_dist;
    t.translation = -centroid * t.scale;

    PointCloud out = t.apply(cloud);
    return {std::move(out), t};
}

// --- nearest neighbor index ------------------------------------------------

std::size_t NearestNeighborIndex::CellHash::operator()(
    const std::array<std::int64_t, 3>& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : k) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
}

std::array<std::int64_t, 3> NearestNeighborIndex::cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor((p.x() - origin_.x()) / cell_size_)),
            static_cast<std::int64_t>(std::floor((p.y() - origin_.y()) / cell_size_)),
            static_cast<std::int64_t>(std::floor((p.z() - origin_.z()) / cell_size_))};
}

NearestNeighborIndex::NearestNeighborIndex(const std::vector<Vec3>& points,
                                           double cell_size)
    : points_(points) {
    if (points_.empty()) fail("InvalidInput", "cannot index an empty cloud");
    exhaustive_ = points_.size() < 5000;
    if (exhaustive_) return;

    Vec3 lo = points_[0], hi = points_[0];
    for (const Vec3& p : points_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    origin_ = lo;
    if (cell_size <= 0) {
        // 2x estimated spacing; surface clouds make this an underestimate,
        // which only costs a few extra ring probes.
        const Vec3 extent = (hi - lo).cwiseMax(Vec3::Constant(1e-9));
        const double vol = extent.x() * extent.y() * extent.z();
        cell_size = 2.0 * std::cbrt(vol / static_cast<double>(points_.size()));
        cell_size = std::max(cell_size, 1e-9);
    }
    cell_size_ = cell_size;
    cells_.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i)
        cells_[cell_of(points_[i])].push_back(static_cast<std::uint32_t>(i));
}

std::pair<std::size_t, double> NearestNeighborIndex::nearest(const Vec3& query) const {
    if (exhaustive_) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const double d2 = (points_[i] - query).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        return {best, std::sqrt(best_d2)};
    }

    const auto center = cell_of(query);
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::int64_t ring = 0; ring <= 64; ++ring) {
        // Cells at Chebyshev ring distance R only hold points at Euclidean
        // distance >= (R-1) * cell_size, so the scan can stop once that bound
        // exceeds the best hit.
        if (found) {
            const double lower = (static_cast<double>(ring) - 1.0) * cell_size_;
            if (lower > 0 && lower * lower > best_d2) return {best, std::sqrt(best_d2)};
        }
        for (std::int64_t dx = -ring; dx <= ring; ++dx)
            for (std::int64_t dy = -ring; dy <= ring; ++dy)
                for (std::int64_t dz = -ring; dz <= ring; ++dz) {
                    if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != ring)
                        continue;
                    const auto it =
                        cells_.find({center[0] + dx, center[1] + dy, center[2] + dz});
                    if (it == cells_.end()) continue;
                    for (std::uint32_t idx : it->second) {
                        const double d2 = (points_[idx] - query).squaredNorm();
                        if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                            best_d2 = d2;
                            best = idx;
                            found = true;
                        }
                    }
                }
    }
    // Query far outside the indexed volume: finish with a full scan.
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const double d2 = (points_[i] - query).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return {best, std::sqrt(best_d2)};
}

// --- ICP --------------------------------------------------------------------

namespace {

void check_normalized(const PointCloud& cloud, const char* which) {
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : cloud.points) centroid += p;
    centroid /= static_cast<double>(cloud.size());
    if (centroid.norm() > 1e-6)
        fail("PreconditionViolation", std::string(which) + " cloud is not centered");
    double max_dist = 0;
    for (const Vec3& p : cloud.points) max_dist = std::max(max_dist, p.norm());
    if (std::abs(max_dist - 1.0) > 1e-6)
        fail("PreconditionViolation", std::string(which) + " cloud is not unit-scaled");
}

// Closed-form rigid solve (Umeyama without scale): SVD of the cross
// covariance of the matched pairs.
RigidTransform solve_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
    for (const Vec3& p : src) mu_s += p;
    for (const Vec3& p : dst) mu_d += p;
    mu_s /= static_cast<double>(src.size());
    mu_d /= static_cast<double>(dst.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < src.size(); ++i)
        cov += (dst[i] - mu_d) * (src[i] - mu_s).transpose();

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1;

    RigidTransform t;
    t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    t.translation = mu_d - t.rotation * mu_s;
    return t;
}

} // namespace

IcpResult icp_align(const PointCloud& source, const PointCloud& target,
                    const IcpOptions& options) {
    if (source.empty() || target.empty()) fail("InvalidInput", "empty cloud");
    check_normalized(source, "source");
    check_normalized(target, "target");

    NearestNeighborIndex index(target.points);

    IcpResult result;
    std::vector<Vec3> moved = source.points;
    std::vector<std::size_t> corr(moved.size());
    std::vector<double> dist2(moved.size());

    const bool trim = options.reject_worst && moved.size() >= 20;
    double prev_mse = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        double mse = 0;
        for (std::size_t i = 0; i < moved.size(); ++i) {
            auto [j, d] = index.nearest(moved[i]);
            corr[i] = j;
            dist2[i] = d * d;
            mse += d * d;
        }
        mse /= static_cast<double>(moved.size());
        result.mse_history.push_back(mse);
        result.final_mse = mse;
        result.iterations = iter + 1;

        std::vector<Vec3> src_pts, dst_pts;
        src_pts.reserve(moved.size());
        dst_pts.reserve(moved.size());
        double kept_mse = mse;
        if (trim) {
            std::vector<double> sorted = dist2;
            const std::size_t keep = moved.size() - moved.size() / 20;
            std::nth_element(sorted.begin(), sorted.begin() + keep - 1, sorted.end());
            const double cutoff2 = sorted[keep - 1];
            double acc = 0;
            for (std::size_t i = 0; i < moved.size(); ++i)
                if (dist2[i] <= cutoff2) {
                    src_pts.push_back(moved[i]);
                    dst_pts.push_back(target.points[corr[i]]);
                    acc += dist2[i];
                }
            kept_mse = acc / static_cast<double>(src_pts.size());
        } else {
            for (std::size_t i = 0; i < moved.size(); ++i) {
                src_pts.push_back(moved[i]);
                dst_pts.push_back(target.points[corr[i]]);
            }
        }

        // trimming optimizes the kept subset, so convergence is judged on it
        if (kept_mse == 0.0 || prev_mse - kept_mse < options.convergence_eps) {
            result.converged = true;
            break;
        }
        prev_mse = kept_mse;

        const RigidTransform step = solve_rigid(src_pts, dst_pts);
        for (Vec3& p : moved) p = step.apply(p);
        result.transform = result.transform.then(step);
    }
    return result;
}

LabelTransferResult transfer_labels(const PointCloud& source, const PointCloud& target,
                                    const RigidTransform& transform, double cutoff_mm) {
    if (!source.has_labels()) fail("InvalidInput", "source cloud has no labels");
    if (cutoff_mm <= 0) fail("InvalidInput", "cutoff must be positive");
    validate(source);
    validate(target);

    std::vector<Vec3> moved;
    moved.reserve(source.size());
    for (const Vec3& p : source.points) moved.push_back(transform.apply(p));
    NearestNeighborIndex index(moved);

    LabelTransferResult result;
    result.labels.assign(target.size(), kNoLabel);
    std::size_t matched = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        auto [j, d] = index.nearest(target.points[i]);
        if (d <= cutoff_mm) {
            result.labels[i] = source.labels[j];
            result.max_match_distance = std::max(result.max_match_distance, d);
            ++matched;
        }
    }
    result.matched_fraction =
        target.empty() ? 0.0 : static_cast<double>(matched) / static_cast<double>(target.size());
    return result;
}

RegistrationResult register_clouds(const PointCloud& source, const PointCloud& target,
                                   const IcpOptions& options) {
    auto [src_norm, t_src] = normalize(source);
    auto [dst_norm, t_dst] = normalize(target);
    RegistrationResult result;
    result.icp = icp_align(src_norm, dst_norm, options);
    result.source_to_target = t_src.then(result.icp.transform).then(t_dst.inverse());
    return result;
}

} // namespace logsaw

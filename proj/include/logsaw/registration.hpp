#ifndef LOGSAW_REGISTRATION_HPP
#define LOGSAW_REGISTRATION_HPP

#include "logsaw/point_cloud.hpp"

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace logsaw {

// Similarity transform p' = scale * R * p + t. rotation stays orthonormal
// with determinant +1; scale carries the cloud normalization factor (ICP
// itself solves rotation + translation only).
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
    PointCloud apply(const PointCloud& cloud) const;

    RigidTransform inverse() const;
    // (a.then(b)).apply(p) == b.apply(a.apply(p))
    RigidTransform then(const RigidTransform& next) const;
};

// One text row: nine row-major rotation entries, translation, scale.
void save_transform(const RigidTransform& t, const std::string& path);
RigidTransform load_transform(const std::string& path);

// Centroid shift + scaling by the furthest point distance: output centroid is
// the origin and the furthest point sits at distance 1. Returns the
// normalized cloud and the original->normalized transform.
// Errors: fewer than 2 points or all points identical -> DegenerateCloud.
std::pair<PointCloud, RigidTransform> normalize(const PointCloud& cloud);

struct IcpOptions {
    int max_iterations = 50;
    double convergence_eps = 1e-12; // stop when MSE improves by less than this
    bool reject_worst = false;      // drop the worst 5% correspondences per iteration
};

struct IcpResult {
    RigidTransform transform; // source -> target, scale 1
    int iterations = 0;
    double final_mse = 0;
    bool converged = false;
    std::vector<double> mse_history; // per-iteration correspondence MSE
};

// Point-to-point ICP with closed-form SVD solve per iteration. Both clouds
// must already be normalized (centroid at origin, max radius 1, checked to
// 1e-6 -> PreconditionViolation otherwise).
IcpResult icp_align(const PointCloud& source, const PointCloud& target,
                    const IcpOptions& options = {});

struct LabelTransferResult {
    std::vector<int> labels; // per target point
    double matched_fraction = 0;
    double max_match_distance = 0; // over matched points
};

// Each target point takes the label of its nearest transformed source point
// when that distance is within cutoff. Operates in the target's original
// coordinate system; `transform` must map original source coordinates onto
// original target coordinates.
LabelTransferResult transfer_labels(const PointCloud& source, const PointCloud& target,
                                    const RigidTransform& transform, double cutoff_mm);

// Full preprocessing chain: normalize both clouds, ICP in the normalized
// frame, and compose back so the result maps original source coordinates to
// original target coordinates.
struct RegistrationResult {
    RigidTransform source_to_target; // original frames
    IcpResult icp;
};
RegistrationResult register_clouds(const PointCloud& source, const PointCloud& target,
                                   const IcpOptions& options = {});

// Deterministic nearest-neighbor index over a hashed 3-D cell grid
// (exhaustive scan below 5000 points). Cell size defaults to twice the
// estimated point spacing.
class NearestNeighborIndex {
public:
    explicit NearestNeighborIndex(const std::vector<Vec3>& points, double cell_size = 0.0);

    // Returns index of the nearest point and its distance; ties broken by
    // lowest index.
    std::pair<std::size_t, double> nearest(const Vec3& query) const;

private:
    const std::vector<Vec3>& points_;
    double cell_size_ = 0;
    bool exhaustive_ = true;
    Vec3 origin_ = Vec3::Zero();
    struct CellHash {
        std::size_t operator()(const std::array<std::int64_t, 3>& k) const;
    };
    std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::uint32_t>, CellHash> cells_;
    std::array<std::int64_t, 3> cell_of(const Vec3& p) const;
};

} // namespace logsaw

#endif

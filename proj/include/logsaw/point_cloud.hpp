#ifndef LOGSAW_POINT_CLOUD_HPP
#define LOGSAW_POINT_CLOUD_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

namespace logsaw {

using Vec3 = Eigen::Vector3d;

constexpr int kNoLabel = -1;

// Unordered log surface samples in millimeters. Labels, when present, carry a
// knot id per point (kNoLabel = unlabeled) and have the same length as points.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<int> labels; // empty or points.size()

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_labels() const { return !labels.empty(); }

    int label_at(std::size_t i) const {
        return labels.empty() ? kNoLabel : labels[i];
    }
};

// Throws Error("InvalidInput") on shape violations (label length mismatch,
// non-finite coordinates).
void validate(const PointCloud& cloud);

// ASCII XYZ: one "x y z [label]" line per point, millimeters.
PointCloud load_xyz(const std::string& path);
void save_xyz(const PointCloud& cloud, const std::string& path);

// Binary little-endian PLY with float32 x, y, z vertex properties. Other
// properties are skipped; ASCII PLY is rejected.
PointCloud load_ply(const std::string& path);

// Dispatch by extension (.ply -> PLY, anything else -> XYZ).
PointCloud load_cloud(const std::string& path);

} // namespace logsaw

#endif

#ifndef LOGSAW_CENTERLINE_HPP
#define LOGSAW_CENTERLINE_HPP

#include "logsaw/point_cloud.hpp"

#include <cstddef>
#include <vector>

namespace logsaw {

// Ordered polyline through the log center. n vertices = n-1 segments; all
// segments have positive length.
struct Centerline {
    std::vector<Vec3> vertices;

    std::size_t segment_count() const {
        return vertices.size() < 2 ? 0 : vertices.size() - 1;
    }
    Vec3 segment_dir(std::size_t i) const {
        return (vertices[i + 1] - vertices[i]).normalized();
    }
    double segment_length(std::size_t i) const {
        return (vertices[i + 1] - vertices[i]).norm();
    }
    double total_length() const {
        double s = 0;
        for (std::size_t i = 0; i < segment_count(); ++i) s += segment_length(i);
        return s;
    }
    // Point at arc-length position l along the polyline (clamped to the ends).
    Vec3 point_at(double l) const;
};

// Cylindrical coordinates of one surface point relative to the segmented
// centerline: theta in [0,360) degrees around the segment axis, rho = radial
// distance (mm), l = local z plus the summed lengths of preceding segments.
struct CylindricalSample {
    double theta_deg;
    double rho;
    double l;
};

// Centroid-polyline centerline estimate. Points are binned along the dominant
// principal axis (`axis_bins` bins); bin centroids form a polyline which is
// simplified to exactly `n_segments` segments by greedily merging the most
// collinear joints, with surviving vertices refit by piecewise-linear least
// squares over all centroids. A second binning pass along the first estimate
// removes the oblique-slab bias bent logs show at their ends.
//
// Errors: empty cloud -> InvalidInput; an empty longitudinal bin (cloud too
// sparse for `axis_bins`) -> DegenerateBin reporting the bin index.
Centerline estimate_centerline(const PointCloud& cloud, std::size_t n_segments,
                               std::size_t axis_bins = 50);

// Default segment count: one per meter of extent. Short segments on short
// logs amplify centroid wobble into frame distortion.
std::size_t default_n_segments(double extent_mm);

// Assigns every point to exactly one centerline segment. The boundary between
// consecutive segments is the plane through their shared vertex whose normal
// bisects the angle between the two segment directions; for collinear
// segments this degenerates to the perpendicular plane at the joint.
std::vector<std::vector<std::size_t>>
split_by_bisecting_planes(const PointCloud& cloud, const Centerline& centerline);

// Converts a point subset to cylindrical coordinates about one segment.
// `reference` must be a unit vector orthogonal to the segment axis; it marks
// theta = 0. Points exactly on the axis map to (theta=0, rho=0).
std::vector<CylindricalSample>
to_cylindrical(const PointCloud& cloud, const std::vector<std::size_t>& subset,
               const Vec3& seg_start, const Vec3& seg_end, const Vec3& reference,
               double l_offset);

// Reference direction for the first segment: world +x projected onto the
// segment's normal plane (+y fallback when the axis is parallel to +x).
Vec3 initial_reference(const Vec3& axis_dir);

// Parallel transport of the previous segment's reference onto the next
// segment's normal plane. Keeps theta continuous across joints.
Vec3 transport_reference(const Vec3& reference, const Vec3& next_axis_dir);

// Full conversion: split, convert each subset with the transported reference
// frame, accumulate l offsets, then anchor the smallest l at zero (points
// ahead of the first vertex project at negative local z).
std::vector<CylindricalSample>
cloud_to_cylindrical(const PointCloud& cloud, const Centerline& centerline);

} // namespace logsaw

#endif

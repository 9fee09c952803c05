#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "primfit/geometry.hpp"
#include "primfit/least_squares.hpp"

namespace primfit {

/// One canonical unit normal per cloud point. Points whose neighbourhood has
/// rank < 2 are flagged invalid and ignored by the fitters.
struct NormalField {
  std::vector<Vec3> normals;
  std::vector<char> valid;

  std::size_t size() const noexcept { return normals.size(); }
  std::size_t valid_count() const noexcept;
};

/// Local PCA normals over the k nearest neighbours (the point included).
/// Throws std::invalid_argument unless 3 <= k < cloud size.
NormalField estimate_normals(const PointCloud& cloud, std::size_t k = 20);

struct FitOutcome {
  PrimitiveParams params;
  double rms_residual = 0.0;          // over the whole cloud
  double initial_rms_residual = 0.0;  // of the initializer, before refinement
  int iterations = 0;
  bool converged = true;
};

/// RMS of distance_to_primitive over `points`.
double rms_distance(std::span<const Point3> points, const PrimitiveParams& prim);

/// Centroid + smallest-eigenvalue direction of the point covariance.
/// Throws DegenerateFitError for fewer than 3 or collinear points.
FitOutcome fit_plane(std::span<const Point3> points);
inline FitOutcome fit_plane(const PointCloud& cloud) { return fit_plane(cloud.points); }

/// Algebraic sphere (linear least squares on |x|^2 = 2 c.x + d) followed by
/// geometric refinement. With `robust`, 100 rounds on random 30% subsets pick
/// the candidate with most inliers (| |x - c| - r | <= 5% r), which is then
/// refit on its inliers. Throws DegenerateFitError for coplanar input.
FitOutcome fit_sphere(std::span<const Point3> points, bool robust = false, std::uint64_t seed = 0);
inline FitOutcome fit_sphere(const PointCloud& cloud, bool robust = false, std::uint64_t seed = 0) {
  return fit_sphere(cloud.points, robust, seed);
}

/// Linear algebraic sphere fit only. Throws DegenerateFitError.
SphereParams algebraic_sphere(std::span<const Point3> points);

/// Axis = least-variance direction of the normals, radius and axis point from
/// a circle fit of the points projected along it, then refinement.
FitOutcome fit_cylinder(const PointCloud& cloud, const NormalField& normals);

/// Vertex = least-squares intersection of the tangent planes; axis and
/// aperture from the plane of the unit generator directions; refinement.
FitOutcome fit_cone(const PointCloud& cloud, const NormalField& normals);

/// Axis = line meeting all normal lines (least squares in Plucker
/// coordinates), spine circle from a circle fit in the meridian half-plane,
/// tube radius = mean distance to the spine; refinement. The three lines of
/// smallest residual each seed a refinement and the lowest rms wins. Falls
/// back to center = centroid, axis = z, radii (1, 0.1) when the axis system
/// is degenerate. Throws DegenerateFitError when no result is a ring torus.
FitOutcome fit_torus(const PointCloud& cloud, const NormalField& normals);

/// Dispatch on kind. Sphere fits use the non-robust path.
FitOutcome fit_family(Kind kind, const PointCloud& cloud, const NormalField& normals);

/// Geometric least-squares refinement starting at `start`.
FitOutcome refine(std::span<const Point3> points, const PrimitiveParams& start,
                  const LmOptions& options = {});

// Initializers shared with the Hough pipeline.

/// Least-squares point closest to all normal lines (sphere center estimate).
Point3 normal_lines_center(const PointCloud& cloud, const NormalField& normals);
/// Initial estimates before refinement; throw DegenerateFitError.
CylinderParams initial_cylinder(const PointCloud& cloud, const NormalField& normals);
/// Axis oriented from the vertex towards the data.
ConeParams initial_cone(const PointCloud& cloud, const NormalField& normals, Vec3* oriented_axis = nullptr);
TorusParams initial_torus(const PointCloud& cloud, const NormalField& normals);

/// 2-d algebraic (Kasa) circle fit; returns center and radius.
/// Throws DegenerateFitError for collinear input.
struct Circle2 {
  Eigen::Vector2d center;
  double radius;
};
Circle2 fit_circle_2d(std::span<const Eigen::Vector2d> points);

}  // namespace primfit

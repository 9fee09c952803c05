#pragma once

// Hough-transform recognition: plane voting in Hesse normal form, pose
// standardization per family, and voting in a reduced parameter window
// around the standardized estimates.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "primfit/fitters.hpp"
#include "primfit/geometry.hpp"

namespace primfit {

/// Dense vote grid over a box of parameter space with uniform bins.
class Accumulator {
 public:
  struct Axis {
    std::size_t bins;
    double lo;
    double hi;

    double width() const { return (hi - lo) / static_cast<double>(bins); }
    double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width(); }
    /// Bin containing v (the upper edge belongs to the last bin), or -1.
    long bin_of(double v) const;
  };

  explicit Accumulator(std::vector<Axis> axes);

  const std::vector<Axis>& axes() const noexcept { return axes_; }
  std::size_t cell_count() const noexcept { return counts_.size(); }

  std::size_t flat_index(std::span<const std::size_t> cell) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;

  void vote(std::size_t flat, std::uint32_t weight = 1) { counts_[flat] += weight; }
  std::uint32_t count(std::span<const std::size_t> cell) const { return counts_[flat_index(cell)]; }
  std::uint32_t count_flat(std::size_t flat) const { return counts_[flat]; }
  std::uint64_t total() const;

  /// Most voted cell; on ties the lexicographically smallest index.
  std::vector<std::size_t> peak() const;
  bool on_boundary(std::span<const std::size_t> cell) const;

  /// Cell-wise sum; axes must match.
  Accumulator& operator+=(const Accumulator& other);

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::vector<std::uint32_t> counts_;
};

struct PlaneBins {
  std::size_t theta = 64;
  std::size_t phi = 64;
  std::size_t rho = 64;
};

/// Votes of `points` (already centered) for planes n(theta, phi).x = rho,
/// theta in [0, pi], phi in [0, pi), rho covering [-rho_max, rho_max] with
/// rho = 0 at a bin center; one vote per point and (theta, phi) bin center.
/// Needs at least 2 rho bins.
Accumulator plane_votes(std::span<const Point3> points, const PlaneBins& bins, double rho_max);

/// Unit normal for polar angle theta and azimuth phi.
Vec3 hesse_normal(double theta, double phi);

struct HoughPlane {
  PlaneParams plane;        // refined on the winning cell's inliers
  PlaneParams cell_plane;   // plane of the winning cell center
  double theta = 0.0;       // winning cell center
  double phi = 0.0;
  double rho = 0.0;         // relative to `origin`
  Point3 origin = Point3::Zero();
  double theta_width = 0.0;
  double phi_width = 0.0;
  double rho_width = 0.0;
  std::uint32_t votes = 0;
  std::size_t inliers = 0;
};

/// Plane of the most voted (theta, phi, rho) cell, refined by fit_plane on
/// the points within one rho-bin width of it. Votes are cast with the cloud
/// centered at its centroid. Throws std::invalid_argument for fewer than 3
/// points or fewer than 8 bins per dimension.
HoughPlane hough_plane(const PointCloud& cloud, const PlaneBins& bins = {});

/// Initial estimates carried by a standardized cloud.
struct PoseEstimates {
  double radius = 0.0;         // sphere / cylinder radius, torus radius_first
  double radius_second = 0.0;  // torus tube radius
  double aperture = 0.0;       // cone half aperture
};

struct StandardizedCloud {
  Kind kind = Kind::Plane;
  PointCloud cloud;             // in standard pose
  RigidTransform to_standard;   // original -> standard
  PoseEstimates estimates;
  double diagonal = 0.0;        // bbox diagonal of the input
};

/// Moves the cloud to the family's standard pose: the estimated axis onto +z
/// (cones: oriented from the vertex into the data) and the estimated center,
/// vertex or axis foot of the origin to the origin. Planes get their normal on
/// z and centroid at the origin. Axis families take the estimates of their
/// least-squares fitter, falling back to its initializer; the sphere center
/// from the normal lines is polished by least squares. Propagates
/// DegenerateFitError.
StandardizedCloud standardize_pose(const PointCloud& cloud, Kind kind, const NormalField& normals);

struct HoughEstimate {
  PrimitiveParams params;            // original pose, axes canonical
  PrimitiveParams peak_params;       // winning cell center, original pose
  bool peak_on_boundary = false;     // window edge; the true value may lie outside
  std::uint32_t peak_votes = 0;
  std::size_t inliers = 0;
  std::vector<Accumulator::Axis> window;
};

/// Number of bins used for the positional offsets (sphere center, cylinder
/// axis position); odd so that the zero offset is a bin center.
std::size_t offset_bins(std::size_t bins) noexcept;

/// Votes in a window of +-halfwidth x estimate around the standardized
/// estimates (offsets use the radius, or the cloud diagonal for the cone
/// vertex height), then refines the winning cell on its inliers and maps the
/// result back to the original pose.
///   sphere:   center offset (3 axes) x radius
///   cylinder: axis offset (2 axes) x radius
///   cone:     vertex height x half aperture
///   torus:    radius_first x radius_second
/// Throws WindowMissError when no vote lands in the window and
/// std::invalid_argument for planes or halfwidth outside (0, 1].
HoughEstimate hough_refine(const StandardizedCloud& std_cloud, std::size_t bins = 64, double halfwidth = 0.25);

/// Full Hough path for one family: hough_plane for planes, otherwise
/// standardize_pose followed by hough_refine.
PrimitiveParams hough_fit(Kind kind, const PointCloud& cloud, const NormalField& normals,
                          std::size_t bins = 64, double halfwidth = 0.25);

}  // namespace primfit

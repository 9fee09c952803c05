#pragma once

// Primitive representations, analytic point-to-surface distances, parametric
// sampling and rigid motions for the five benchmark surface families.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "primfit/rng.hpp"

namespace primfit {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct PointCloud {
  std::vector<Point3> points;
  std::string id;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

/// Unit direction whose first nonzero component is positive.
///
/// Lines and planes are unsigned objects; this picks one of the two unit
/// representatives so that ground truth and predictions compare directly.
class UnitVector3 {
 public:
  /// (0, 0, 1).
  UnitVector3() : v_(0.0, 0.0, 1.0) {}

  const Vec3& vec() const noexcept { return v_; }
  operator const Vec3&() const noexcept { return v_; }  // NOLINT: intentional
  double operator[](int i) const { return v_[i]; }

 private:
  explicit UnitVector3(const Vec3& v) : v_(v) {}
  friend UnitVector3 canonicalize_axis(const Vec3& v);

  Vec3 v_;
};

/// Normalizes `v` and flips it so that its first nonzero component is
/// positive. Components below 1e-13 of the norm are snapped to zero first.
/// Throws std::invalid_argument for a zero or non-finite vector.
UnitVector3 canonicalize_axis(const Vec3& v);

enum class Kind : int { Plane = 1, Cylinder = 2, Sphere = 3, Cone = 4, Torus = 5 };

inline constexpr std::array<Kind, 5> kAllKinds = {Kind::Plane, Kind::Cylinder, Kind::Sphere,
                                                  Kind::Cone, Kind::Torus};

constexpr int code(Kind k) noexcept { return static_cast<int>(k); }
constexpr std::size_t index(Kind k) noexcept { return static_cast<std::size_t>(k) - 1; }
std::string_view kind_name(Kind k) noexcept;
/// Throws std::invalid_argument outside 1..5.
Kind kind_from_code(int code);
/// Accepts names ("cone") and codes ("4").
Kind parse_kind(std::string_view text);

struct PlaneParams {
  UnitVector3 normal;
  Point3 point = Point3::Zero();
};

struct CylinderParams {
  double radius = 1.0;
  UnitVector3 axis;
  Point3 axis_point = Point3::Zero();
};

struct SphereParams {
  double radius = 1.0;
  Point3 center = Point3::Zero();
};

struct ConeParams {
  double half_aperture = 0.5;  // radians, in (0, pi/2)
  UnitVector3 axis;
  Point3 vertex = Point3::Zero();
};

/// Radii are kept in the order they appear in the ground-truth file:
/// `radius_first` is the distance from the center to the tube's center line,
/// `radius_second` the tube radius; radius_first > radius_second > 0.
struct TorusParams {
  double radius_first = 1.0;
  double radius_second = 0.1;
  UnitVector3 axis;
  Point3 center = Point3::Zero();
};

using PrimitiveParams =
    std::variant<PlaneParams, CylinderParams, SphereParams, ConeParams, TorusParams>;

Kind kind_of(const PrimitiveParams& prim) noexcept;

/// Throws std::invalid_argument when a variant invariant is violated.
void validate(const PrimitiveParams& prim);

/// Rotation + translation, x -> R x + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  /// Throws std::invalid_argument unless `rotation` is a proper rotation.
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  /// Uniformly distributed rotation, translation uniform in [-scale, scale]^3.
  static RigidTransform random(Rng& rng, double translation_scale);
  /// Rotation taking unit vector `from` onto `to` along the shortest arc.
  static Mat3 rotation_between(const Vec3& from, const Vec3& to);

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  Vec3 apply_direction(const Vec3& v) const { return rotation_ * v; }
  RigidTransform inverse() const;
  /// (a * b)(x) = a(b(x)).
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);
PrimitiveParams transform_params(const PrimitiveParams& prim, const RigidTransform& t);

/// Euclidean distance from `p` to the complete (unbounded) surface.
///
/// Cones are treated as double-napped: the distance is taken to the nappe on
/// the same side of the vertex as `p`, which makes the result independent of
/// the sign of the stored axis.
double distance_to_primitive(const Point3& p, const PrimitiveParams& prim);

/// Distance to the single nappe opening along `side` x axis (side = +-1);
/// points behind the vertex measure to the vertex.
double distance_to_nappe(const Point3& p, const ConeParams& cone, double side);

/// +1 or -1: the side of the vertex (along the axis) holding the majority of
/// `points`; +1 on a tie.
double majority_nappe(std::span<const Point3> points, const ConeParams& cone);

/// Outward unit normal of the surface at the footpoint of `p` (away from the
/// center or axis; the stored normal for planes).
Vec3 surface_normal(const Point3& p, const PrimitiveParams& prim);

/// Two unit vectors completing `a` to a right-handed orthonormal frame.
std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& a);

/// `n` points drawn from the parametric form of `prim` with uniform area
/// density. Unbounded families use `extent`: plane patches span
/// [-extent, extent]^2 around the stored point, cylinders span
/// [-extent, extent] along the axis, cones span heights (0, extent] on the
/// +axis nappe.
PointCloud sample_surface(const PrimitiveParams& prim, std::size_t n, std::uint64_t seed,
                          double extent = 1.0);
PointCloud sample_surface(const PrimitiveParams& prim, std::size_t n, Rng& rng,
                          double extent = 1.0);

/// Diagonal length of the axis-aligned bounding box.
double bbox_diagonal(std::span<const Point3> points);
inline double bbox_diagonal(const PointCloud& cloud) { return bbox_diagonal(cloud.points); }

Point3 centroid(std::span<const Point3> points);

}  // namespace primfit

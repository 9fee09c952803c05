#include "primfit/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace primfit {

namespace {

constexpr double kSnapToZero = 1e-13;
constexpr double kUnitSlack = 8.0 * std::numeric_limits<double>::epsilon();

Vec3 normalized_to_unit(Vec3 u) {
  for (int pass = 0; pass < 3; ++pass) {
    const double n = u.stableNorm();
    if (std::abs(n - 1.0) <= kUnitSlack) break;
    u /= n;
  }
  return u;
}

// Radial unit vector of w about axis a, or an arbitrary perpendicular when w
// lies on the axis.
Vec3 radial_direction(const Vec3& w, const Vec3& a) {
  Vec3 q = w - w.dot(a) * a;
  const double rho = q.norm();
  if (rho > 0.0) return q / rho;
  return orthonormal_basis(a).first;
}

}  // namespace

UnitVector3 canonicalize_axis(const Vec3& v) {
  if (!v.allFinite()) throw std::invalid_argument("canonicalize_axis: non-finite vector");
  const double n = v.stableNorm();
  if (n == 0.0) throw std::invalid_argument("canonicalize_axis: zero-norm vector");

  Vec3 u = normalized_to_unit(v);
  bool snapped = false;
  for (int i = 0; i < 3; ++i) {
    if (u[i] != 0.0 && std::abs(u[i]) < kSnapToZero) {
      u[i] = 0.0;
      snapped = true;
    }
  }
  if (snapped) u = normalized_to_unit(u);
  for (int i = 0; i < 3; ++i) {
    if (u[i] != 0.0) {
      if (u[i] < 0.0) u = -u;
      break;
    }
  }
  return UnitVector3(u);
}

std::string_view kind_name(Kind k) noexcept {
  switch (k) {
    case Kind::Plane: return "plane";
    case Kind::Cylinder: return "cylinder";
    case Kind::Sphere: return "sphere";
    case Kind::Cone: return "cone";
    case Kind::Torus: return "torus";
  }
  return "unknown";
}

Kind kind_from_code(int c) {
  if (c < 1 || c > 5) throw std::invalid_argument("primitive kind code out of range: " + std::to_string(c));
  return static_cast<Kind>(c);
}

Kind parse_kind(std::string_view text) {
  for (Kind k : kAllKinds) {
    if (text == kind_name(k) || text == std::to_string(code(k))) return k;
  }
  throw std::invalid_argument("unknown primitive kind: " + std::string(text));
}

Kind kind_of(const PrimitiveParams& prim) noexcept {
  return static_cast<Kind>(prim.index() + 1);
}

void validate(const PrimitiveParams& prim) {
  auto finite = [](const Vec3& v) { return v.allFinite(); };
  auto fail = [](const char* what) { throw std::invalid_argument(what); };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PlaneParams>) {
          if (!finite(p.point)) fail("plane point not finite");
        } else if constexpr (std::is_same_v<T, CylinderParams>) {
          if (!(p.radius > 0.0) || !std::isfinite(p.radius)) fail("cylinder radius must be positive");
          if (!finite(p.axis_point)) fail("cylinder axis point not finite");
        } else if constexpr (std::is_same_v<T, SphereParams>) {
          if (!(p.radius > 0.0) || !std::isfinite(p.radius)) fail("sphere radius must be positive");
          if (!finite(p.center)) fail("sphere center not finite");
        } else if constexpr (std::is_same_v<T, ConeParams>) {
          if (!(p.half_aperture > 0.0 && p.half_aperture < std::numbers::pi / 2))
            fail("cone half aperture must lie in (0, pi/2)");
          if (!finite(p.vertex)) fail("cone vertex not finite");
        } else {
          if (!(p.radius_second > 0.0) || !(p.radius_first > p.radius_second) ||
              !std::isfinite(p.radius_first))
            fail("torus radii must satisfy radius_first > radius_second > 0");
          if (!finite(p.center)) fail("torus center not finite");
        }
      },
      prim);
}

// ---------------------------------------------------------------------------
// Rigid transforms

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!rotation.allFinite() || !translation.allFinite() || ortho > 1e-10 ||
      std::abs(rotation.determinant() - 1.0) > 1e-10) {
    throw std::invalid_argument("RigidTransform: rotation is not a proper orthonormal matrix");
  }
}

RigidTransform RigidTransform::random(Rng& rng, double translation_scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  } while (q.norm() < 1e-6);
  q.normalize();
  Vec3 t;
  for (int i = 0; i < 3; ++i) t[i] = uniform(rng, -translation_scale, translation_scale);
  return RigidTransform(q.toRotationMatrix(), t);
}

Mat3 RigidTransform::rotation_between(const Vec3& from, const Vec3& to) {
  return Eigen::Quaterniond::FromTwoVectors(from, to).toRotationMatrix();
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation_ = a.rotation_ * b.rotation_;
  out.translation_ = a.rotation_ * b.translation_ + a.translation_;
  return out;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.id = cloud.id;
  out.points.reserve(cloud.size());
  for (const Point3& p : cloud.points) out.points.push_back(t.apply(p));
  return out;
}

PrimitiveParams transform_params(const PrimitiveParams& prim, const RigidTransform& t) {
  return std::visit(
      [&](const auto& p) -> PrimitiveParams {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PlaneParams>) {
          return PlaneParams{canonicalize_axis(t.apply_direction(p.normal)), t.apply(p.point)};
        } else if constexpr (std::is_same_v<T, CylinderParams>) {
          return CylinderParams{p.radius, canonicalize_axis(t.apply_direction(p.axis)),
                                t.apply(p.axis_point)};
        } else if constexpr (std::is_same_v<T, SphereParams>) {
          return SphereParams{p.radius, t.apply(p.center)};
        } else if constexpr (std::is_same_v<T, ConeParams>) {
          return ConeParams{p.half_aperture, canonicalize_axis(t.apply_direction(p.axis)),
                            t.apply(p.vertex)};
        } else {
          return TorusParams{p.radius_first, p.radius_second,
                             canonicalize_axis(t.apply_direction(p.axis)), t.apply(p.center)};
        }
      },
      prim);
}

// ---------------------------------------------------------------------------
// Distances and normals

double distance_to_nappe(const Point3& p, const ConeParams& cone, double side) {
  const Vec3 w = p - cone.vertex;
  const Vec3& a = cone.axis;
  const double h = side * w.dot(a);
  const double rho = (w - w.dot(a) * a).norm();
  const double sa = std::sin(cone.half_aperture);
  const double ca = std::cos(cone.half_aperture);
  if (rho * sa + h * ca < 0.0) return std::hypot(rho, h);
  return std::abs(rho * ca - h * sa);
}

double majority_nappe(std::span<const Point3> points, const ConeParams& cone) {
  std::ptrdiff_t balance = 0;
  for (const Point3& p : points) {
    const double h = (p - cone.vertex).dot(cone.axis.vec());
    balance += (h > 0.0) - (h < 0.0);
  }
  return balance < 0 ? -1.0 : 1.0;
}

double distance_to_primitive(const Point3& p, const PrimitiveParams& prim) {
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PlaneParams>) {
          return std::abs(s.normal.vec().dot(p - s.point));
        } else if constexpr (std::is_same_v<T, SphereParams>) {
          return std::abs((p - s.center).norm() - s.radius);
        } else if constexpr (std::is_same_v<T, CylinderParams>) {
          const Vec3 w = p - s.axis_point;
          const Vec3& a = s.axis;
          return std::abs((w - w.dot(a) * a).norm() - s.radius);
        } else if constexpr (std::is_same_v<T, ConeParams>) {
          const Vec3 w = p - s.vertex;
          const Vec3& a = s.axis;
          const double h = std::abs(w.dot(a));
          const double rho = (w - w.dot(a) * a).norm();
          const double sa = std::sin(s.half_aperture);
          const double ca = std::cos(s.half_aperture);
          // In the meridian quadrant (rho, |h|) >= 0 the nearest nappe is the
          // ray (sa, ca) and the foot of the perpendicular always lies on it.
          return std::abs(rho * ca - h * sa);
        } else {
          const Vec3 w = p - s.center;
          const Vec3& a = s.axis;
          const double h = w.dot(a);
          const double rho = (w - h * a).norm();
          return std::abs(std::hypot(rho - s.radius_first, h) - s.radius_second);
        }
      },
      prim);
}

Vec3 surface_normal(const Point3& p, const PrimitiveParams& prim) {
  return std::visit(
      [&](const auto& s) -> Vec3 {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PlaneParams>) {
          return s.normal.vec();
        } else if constexpr (std::is_same_v<T, SphereParams>) {
          const Vec3 w = p - s.center;
          const double n = w.norm();
          return n > 0.0 ? Vec3(w / n) : Vec3::UnitZ();
        } else if constexpr (std::is_same_v<T, CylinderParams>) {
          return radial_direction(p - s.axis_point, s.axis);
        } else if constexpr (std::is_same_v<T, ConeParams>) {
          const Vec3 w = p - s.vertex;
          const Vec3& a = s.axis;
          const double hs = w.dot(a);
          const double side = hs < 0.0 ? -1.0 : 1.0;
          const Vec3 radial = radial_direction(w, a);
          const double sa = std::sin(s.half_aperture);
          const double ca = std::cos(s.half_aperture);
          return (ca * radial - sa * side * a).normalized();
        } else {
          const Vec3 w = p - s.center;
          const Vec3 spine = s.center + s.radius_first * radial_direction(w, s.axis);
          const Vec3 d = p - spine;
          const double n = d.norm();
          return n > 0.0 ? Vec3(d / n) : radial_direction(w, s.axis);
        }
      },
      prim);
}

std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& a) {
  // Pick the coordinate axis least aligned with `a` as a seed.
  Eigen::Index smallest = 0;
  a.cwiseAbs().minCoeff(&smallest);
  Vec3 seed = Vec3::Zero();
  seed[smallest] = 1.0;
  Vec3 u = (seed - seed.dot(a) * a).normalized();
  Vec3 v = a.cross(u);
  return {u, v};
}

// ---------------------------------------------------------------------------
// Sampling

PointCloud sample_surface(const PrimitiveParams& prim, std::size_t n, std::uint64_t seed,
                          double extent) {
  Rng rng(seed);
  return sample_surface(prim, n, rng, extent);
}

PointCloud sample_surface(const PrimitiveParams& prim, std::size_t n, Rng& rng, double extent) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  PointCloud out;
  out.points.reserve(n);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PlaneParams>) {
          const auto [u, v] = orthonormal_basis(s.normal);
          for (std::size_t i = 0; i < n; ++i) {
            const double a = uniform(rng, -extent, extent);
            const double b = uniform(rng, -extent, extent);
            out.points.push_back(s.point + a * u + b * v);
          }
        } else if constexpr (std::is_same_v<T, SphereParams>) {
          for (std::size_t i = 0; i < n; ++i) {
            Vec3 d;
            do {
              d = Vec3(gauss(rng), gauss(rng), gauss(rng));
            } while (d.norm() < 1e-8);
            out.points.push_back(s.center + s.radius * d.normalized());
          }
        } else if constexpr (std::is_same_v<T, CylinderParams>) {
          const auto [u, v] = orthonormal_basis(s.axis);
          for (std::size_t i = 0; i < n; ++i) {
            const double theta = uniform(rng, 0.0, kTwoPi);
            const double h = uniform(rng, -extent, extent);
            out.points.push_back(s.axis_point + s.radius * (std::cos(theta) * u + std::sin(theta) * v) +
                                 h * s.axis.vec());
          }
        } else if constexpr (std::is_same_v<T, ConeParams>) {
          const auto [u, v] = orthonormal_basis(s.axis);
          const double slope = std::tan(s.half_aperture);
          for (std::size_t i = 0; i < n; ++i) {
            const double theta = uniform(rng, 0.0, kTwoPi);
            // Lateral area grows linearly with height.
            const double h = extent * std::sqrt(uniform(rng, 0.0, 1.0));
            out.points.push_back(s.vertex + h * s.axis.vec() +
                                 h * slope * (std::cos(theta) * u + std::sin(theta) * v));
          }
        } else {
          const auto [u, v] = orthonormal_basis(s.axis);
          const double big = s.radius_first;
          const double tube = s.radius_second;
          while (out.points.size() < n) {
            const double phi = uniform(rng, 0.0, kTwoPi);
            const double psi = uniform(rng, 0.0, kTwoPi);
            // Area element is proportional to (big + tube cos psi).
            if (uniform(rng, 0.0, big + tube) > big + tube * std::cos(psi)) continue;
            const Vec3 radial = std::cos(phi) * u + std::sin(phi) * v;
            out.points.push_back(s.center + (big + tube * std::cos(psi)) * radial +
                                 tube * std::sin(psi) * s.axis.vec());
          }
        }
      },
      prim);
  return out;
}

double bbox_diagonal(std::span<const Point3> points) {
  if (points.empty()) return 0.0;
  Vec3 lo = points.front();
  Vec3 hi = points.front();
  for (const Point3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

Point3 centroid(std::span<const Point3> points) {
  Point3 c = Point3::Zero();
  if (points.empty()) return c;
  for (const Point3& p : points) c += p;
  return c / static_cast<double>(points.size());
}

}  // namespace primfit

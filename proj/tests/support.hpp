#pragma once

#include <cmath>
#include <numbers>
#include <variant>

#include "primfit/datagen.hpp"
#include "primfit/geometry.hpp"

namespace primfit::test {

inline constexpr double kDeg = std::numbers::pi / 180.0;

/// Unsigned angle between two lines, radians.
inline double line_angle(const Vec3& a, const Vec3& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return std::acos(std::min(1.0, c));
}

inline Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> g;
  Vec3 v(g(rng), g(rng), g(rng));
  return v.normalized();
}

inline Point3 random_point(Rng& rng, double scale) {
  return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale)};
}

/// Random primitive of `kind` in general position.
inline PrimitiveParams random_general(Kind kind, Rng& rng) {
  const PrimitiveParams canonical = random_params(kind, rng);
  return transform_params(canonical, RigidTransform::random(rng, 3.0));
}

template <class T>
const T& as(const PrimitiveParams& p) {
  return std::get<T>(p);
}

}  // namespace primfit::test

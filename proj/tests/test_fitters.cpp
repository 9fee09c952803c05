#include <gtest/gtest.h>

#include <cmath>

#include "primfit/errors.hpp"
#include "primfit/evalkit.hpp"
#include "primfit/fitters.hpp"
#include "support.hpp"

namespace primfit {
namespace {

using test::as;
using test::kDeg;
using test::line_angle;

const UnitVector3 kZ = canonicalize_axis({0, 0, 1});

PointCloud noisy(PointCloud c, double amplitude, std::uint64_t seed) {
  Rng rng(seed);
  for (Point3& p : c.points) p += test::random_point(rng, amplitude);
  return c;
}

// ---------------------------------------------------------------------------
// Normals

TEST(Normals, ExactPlane) {
  const PlaneParams plane{canonicalize_axis({1, 2, 3}), Point3(1, 1, 1)};
  const PointCloud c = sample_surface(plane, 500, 4);
  const NormalField nf = estimate_normals(c, 20);
  ASSERT_EQ(nf.size(), c.size());
  EXPECT_EQ(nf.valid_count(), c.size());
  for (const Vec3& n : nf.normals) EXPECT_LE((n - plane.normal.vec()).norm(), 1e-6);
}

TEST(Normals, SphereRadial) {
  const SphereParams s{1.0, Point3(0.5, 0, -1)};
  const PointCloud c = sample_surface(s, 5000, 8);
  const NormalField nf = estimate_normals(c, 20);
  std::size_t within = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double a = line_angle(nf.normals[i], c.points[i] - s.center);
    EXPECT_LE(a, 4 * kDeg);
    if (a <= 2 * kDeg) ++within;
  }
  // Lopsided 20-point neighbourhoods tilt roughly 1% of PCA normals past 2 degrees.
  EXPECT_GE(within, c.size() * 98 / 100);
}

TEST(Normals, Preconditions) {
  const PointCloud c = sample_surface(SphereParams{1.0, Point3::Zero()}, 10, 1);
  EXPECT_THROW(estimate_normals(c, 10), std::invalid_argument);
  EXPECT_THROW(estimate_normals(c, 2), std::invalid_argument);
}

TEST(Normals, CollinearNeighbourhoodsFlagged) {
  PointCloud line;
  for (int i = 0; i < 30; ++i) line.points.emplace_back(i, 2.0 * i, 0.0);
  const NormalField nf = estimate_normals(line, 5);
  EXPECT_EQ(nf.valid_count(), 0U);
}

// ---------------------------------------------------------------------------
// Plane

TEST(FitPlane, ExactAndSymmetricPair) {
  PointCloud c{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, 3, 0}}, ""};
  auto fit = as<PlaneParams>(fit_plane(c).params);
  EXPECT_EQ(fit.normal.vec(), Vec3(0, 0, 1));
  EXPECT_NEAR(fit_plane(c).rms_residual, 0.0, 1e-15);
  c.points.push_back({0.8, 0.8, 1e-3});
  c.points.push_back({0.8, 0.8, -1e-3});
  fit = as<PlaneParams>(fit_plane(c).params);
  EXPECT_LE((fit.normal.vec() - Vec3(0, 0, 1)).norm(), 1e-12);
}

TEST(FitPlane, NoisyWithinHalfDegree) {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto truth = as<PlaneParams>(test::random_general(Kind::Plane, rng));
    const PointCloud c = noisy(sample_surface(truth, 2000, rng(), 2.0), 0.01, rng());
    EXPECT_LE(line_angle(as<PlaneParams>(fit_plane(c).params).normal, truth.normal), 0.5 * kDeg);
  }
}

TEST(FitPlane, Degenerate) {
  EXPECT_THROW(fit_plane(PointCloud{{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}}, ""}), DegenerateFitError);
  EXPECT_THROW(fit_plane(PointCloud{{{0, 0, 0}, {1, 1, 1}}, ""}), DegenerateFitError);
}

TEST(FitPlane, ScaleEquivariance) {
  Rng rng(5);
  const auto truth = as<PlaneParams>(test::random_general(Kind::Plane, rng));
  PointCloud c = noisy(sample_surface(truth, 300, 1, 1.0), 0.05, 2);
  const FitOutcome base = fit_plane(c);
  for (Point3& p : c.points) p *= 3.0;
  const FitOutcome scaled = fit_plane(c);
  EXPECT_NEAR(scaled.rms_residual, 3.0 * base.rms_residual, 1e-9);
  EXPECT_LE((as<PlaneParams>(scaled.params).point - 3.0 * as<PlaneParams>(base.params).point).norm(), 1e-9);
}

// ---------------------------------------------------------------------------
// Sphere

TEST(FitSphere, ExactRecovery) {
  const SphereParams truth{1.0, Point3(1, 2, 3)};
  const PointCloud c = sample_surface(truth, 100, 6);
  for (bool robust : {false, true}) {
    const auto fit = as<SphereParams>(fit_sphere(c, robust, 1).params);
    EXPECT_NEAR(fit.radius, 1.0, 1e-9);
    EXPECT_LE((fit.center - truth.center).norm(), 1e-9);
  }
}

TEST(FitSphere, RobustAgainstOutliers) {
  const SphereParams truth{1.0, Point3(1, 2, 3)};
  PointCloud c = sample_surface(truth, 100, 6);
  Rng rng(9);
  for (int i = 0; i < 10; ++i) c.points.push_back(truth.center + 5.0 * test::random_unit(rng));
  const auto robust = as<SphereParams>(fit_sphere(c, true, 3).params);
  EXPECT_NEAR(robust.radius, 1.0, 0.01);
}

TEST(FitSphere, CoplanarIsDegenerate) {
  EXPECT_THROW(fit_sphere(PointCloud{{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}}, ""}), DegenerateFitError);
}

TEST(FitSphere, ScaleEquivariance) {
  PointCloud c = noisy(sample_surface(SphereParams{1.3, Point3(0, 1, 0)}, 400, 2), 0.02, 4);
  const auto base = as<SphereParams>(fit_sphere(c).params);
  for (Point3& p : c.points) p *= 2.5;
  const auto scaled = as<SphereParams>(fit_sphere(c).params);
  EXPECT_NEAR(scaled.radius, 2.5 * base.radius, 1e-9);
  EXPECT_LE((scaled.center - 2.5 * base.center).norm(), 1e-9);
}

// ---------------------------------------------------------------------------
// Cylinder, cone, torus

PointCloud arc_cylinder(double radius, double degrees, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = uniform(rng, 0.0, degrees * kDeg);
    c.points.emplace_back(radius * std::cos(t), radius * std::sin(t), uniform(rng, -1.5, 1.5));
  }
  return c;
}

TEST(FitCylinder, HalfArc) {
  const PointCloud c = arc_cylinder(1.0, 180.0, 2000, 2);
  const FitOutcome fit = fit_cylinder(c, estimate_normals(c));
  const auto cyl = as<CylinderParams>(fit.params);
  EXPECT_LE(line_angle(cyl.axis, Vec3::UnitZ()), 0.1 * kDeg);
  EXPECT_NEAR(cyl.radius, 1.0, 1e-6);
}

TEST(FitCylinder, PlaneDataIsDegenerate) {
  const PointCloud c = sample_surface(PlaneParams{kZ, Point3::Zero()}, 500, 3);
  EXPECT_THROW(fit_cylinder(c, estimate_normals(c)), DegenerateFitError);
}

TEST(FitCone, ThirtyDegrees) {
  const ConeParams truth{30 * kDeg, canonicalize_axis({1, -1, 2}), Point3(0.3, 0.2, -1)};
  const PointCloud c = sample_surface(truth, 2000, 5, 2.0);
  const auto fit = as<ConeParams>(fit_cone(c, estimate_normals(c)).params);
  EXPECT_NEAR(fit.half_aperture, truth.half_aperture, 0.2 * kDeg);
  EXPECT_LE((fit.vertex - truth.vertex).norm(), 1e-3 * bbox_diagonal(c));
  EXPECT_EQ(canonicalize_axis(fit.axis).vec(), fit.axis.vec());
}

TEST(FitCone, InitializerOrientsAxisIntoData) {
  const ConeParams truth{50 * kDeg, kZ, Point3::Zero()};
  const PointCloud c = sample_surface(truth, 1500, 5, 1.0);
  Vec3 oriented;
  const ConeParams init = initial_cone(c, estimate_normals(c), &oriented);
  EXPECT_GT(oriented.z(), 0.99);
  EXPECT_NEAR(init.half_aperture, 50 * kDeg, 1 * kDeg);
}

// Apertures above 54.7 degrees, where the generator directions spread more
// across the axis than along it.
TEST(FitCone, WideAperture) {
  const ConeParams truth{72 * kDeg, canonicalize_axis({0, 1, 1}), Point3(1, 0, 0)};
  const PointCloud c = sample_surface(truth, 2000, 6, 1.0);
  const auto fit = as<ConeParams>(fit_cone(c, estimate_normals(c)).params);
  EXPECT_NEAR(fit.half_aperture, truth.half_aperture, 0.2 * kDeg);
  EXPECT_LE(line_angle(fit.axis, truth.axis), 0.1 * kDeg);
}

TEST(FitCone, CylinderDataDoesNotYieldAValidCone) {
  const PointCloud c = arc_cylinder(1.0, 270.0, 1500, 4);
  try {
    const FitOutcome fit = fit_cone(c, estimate_normals(c));
    const auto cone = as<ConeParams>(fit.params);
    // Only a needle-thin cone with a far vertex can mimic a cylinder.
    EXPECT_LT(cone.half_aperture, 1 * kDeg);
    EXPECT_GT((cone.vertex - centroid(c.points)).norm(), 10 * bbox_diagonal(c));
  } catch (const DegenerateFitError&) {
    SUCCEED();
  }
}

TEST(FitTorus, ExactTorus) {
  const TorusParams truth{2.0, 0.5, canonicalize_axis({0.2, 1, 0}), Point3(1, -1, 2)};
  const PointCloud c = sample_surface(truth, 3000, 8);
  const auto fit = as<TorusParams>(fit_torus(c, estimate_normals(c)).params);
  EXPECT_NEAR(fit.radius_first, 2.0, 1e-3);
  EXPECT_NEAR(fit.radius_second, 0.5, 1e-3);
}

TEST(FitTorus, HalfTorus) {
  const TorusParams truth{1.5, 0.4, kZ, Point3::Zero()};
  PointCloud full = sample_surface(truth, 4000, 2);
  PointCloud half;
  for (const Point3& p : full.points)
    if (p.x() > 0.0) half.points.push_back(p);
  const auto fit = as<TorusParams>(fit_torus(half, estimate_normals(half)).params);
  EXPECT_NEAR(fit.radius_first, 1.5, 0.02 * 1.5);
  EXPECT_NEAR(fit.radius_second, 0.4, 0.02 * 0.4);
}

TEST(FitTorus, SphereDataIsNotARingTorus) {
  const PointCloud c = sample_surface(SphereParams{1.0, Point3::Zero()}, 1500, 3);
  try {
    const FitOutcome fit = fit_torus(c, estimate_normals(c));
    const auto t = as<TorusParams>(fit.params);
    EXPECT_TRUE(!fit.converged || t.radius_first < 0.05 * t.radius_second + t.radius_second);
  } catch (const DegenerateFitError&) {
    SUCCEED();
  }
}

// ---------------------------------------------------------------------------
// Properties across families

TEST(FitFamily, ExactCanonicalDataReachesZeroResidual) {
  Rng rng(31);
  for (Kind kind : kAllKinds) {
    for (int i = 0; i < 10; ++i) {
      const PrimitiveParams truth = random_params(kind, rng);
      const PointCloud c = sample_surface(truth, 1500, rng(), 1.5);
      const FitOutcome fit = fit_family(kind, c, estimate_normals(c));
      EXPECT_LE(fit.rms_residual, 1e-6 * bbox_diagonal(c)) << kind_name(kind);
      EXPECT_LE(fit.rms_residual, fit.initial_rms_residual + 1e-12) << kind_name(kind);
      EXPECT_NEAR(fit.rms_residual, rms_distance(c.points, fit.params), 1e-15);
    }
  }
}

TEST(FitFamily, RigidEquivariance) {
  Rng rng(32);
  for (Kind kind : kAllKinds) {
    for (int i = 0; i < 5; ++i) {
      const Segment seg = generate_segment(kind, rng(), 1500);
      const FitOutcome base = fit_family(kind, seg.cloud, estimate_normals(seg.cloud));
      const RigidTransform t = RigidTransform::random(rng, 3.0);
      const PointCloud moved = apply_transform(seg.cloud, t);
      const FitOutcome fit = fit_family(kind, moved, estimate_normals(moved));
      const double d = l2_param_distance(GroundTruthVector::encode(transform_params(base.params, t)),
                                         GroundTruthVector::encode(fit.params));
      EXPECT_LE(d, 1e-6) << kind_name(kind);
    }
  }
}

TEST(FitFamily, NoisyRefinementNeverWorse) {
  Rng rng(33);
  for (Kind kind : kAllKinds) {
    for (int i = 0; i < 5; ++i) {
      const Segment seg = generate_segment(kind, rng(), 1500);
      const PointCloud c = noisy(seg.cloud, 0.01, rng());
      const FitOutcome fit = fit_family(kind, c, estimate_normals(c));
      EXPECT_LE(fit.rms_residual, fit.initial_rms_residual + 1e-12) << kind_name(kind);
    }
  }
}

TEST(FitCircle2d, ExactAndCollinear) {
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 12; ++i) pts.emplace_back(3 + 2 * std::cos(0.3 * i), -1 + 2 * std::sin(0.3 * i));
  const Circle2 c = fit_circle_2d(pts);
  EXPECT_NEAR(c.radius, 2.0, 1e-12);
  EXPECT_LE((c.center - Eigen::Vector2d(3, -1)).norm(), 1e-12);
  const std::vector<Eigen::Vector2d> line = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  EXPECT_THROW(fit_circle_2d(line), DegenerateFitError);
}

}  // namespace
}  // namespace primfit

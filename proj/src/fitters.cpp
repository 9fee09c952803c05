#include "primfit/fitters.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <optional>
#include <string>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "primfit/errors.hpp"
#include "primfit/knn.hpp"

namespace primfit {

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

struct Eigen3 {
  Eigen::Vector3d values;  // ascending
  Mat3 vectors;            // columns
};

Eigen3 symmetric_eigen(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(m);
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Mat3 covariance(std::span<const Point3> points, const Point3& mean) {
  Mat3 c = Mat3::Zero();
  for (const Point3& p : points) {
    const Vec3 d = p - mean;
    c.noalias() += d * d.transpose();
  }
  return c / static_cast<double>(points.size());
}

std::vector<Point3> valid_points(const PointCloud& cloud, const NormalField& normals,
                                 std::vector<Vec3>* out_normals) {
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!normals.valid[i]) continue;
    pts.push_back(cloud.points[i]);
    if (out_normals) out_normals->push_back(normals.normals[i]);
  }
  return pts;
}

void require_normals(const PointCloud& cloud, const NormalField& normals, std::size_t min_points,
                     const char* who) {
  if (normals.size() != cloud.size())
    throw std::invalid_argument(std::string(who) + ": normal field does not match the cloud");
  if (cloud.size() < min_points || normals.valid_count() < min_points)
    throw DegenerateFitError(std::string(who) + ": not enough points with valid normals");
}

FitOutcome finish(std::span<const Point3> all, std::span<const Point3> fit_points,
                  const PrimitiveParams& start, const LmOptions& options = {}) {
  const auto model = make_residual_model(start);
  const LmResult lm = levenberg_marquardt(*model, fit_points, model->initial(), options);
  FitOutcome out{model->decode(lm.x)};
  out.iterations = lm.iterations;
  out.converged = lm.converged;
  out.initial_rms_residual = rms_distance(all, start);
  out.rms_residual = rms_distance(all, out.params);
  return out;
}

}  // namespace

std::size_t NormalField::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), char{1}));
}

NormalField estimate_normals(const PointCloud& cloud, std::size_t k) {
  if (k < 3) throw std::invalid_argument("estimate_normals: k must be at least 3");
  if (cloud.size() <= k) throw std::invalid_argument("estimate_normals: k must be smaller than the cloud size");

  const KdTree tree(cloud.points);
  NormalField field;
  field.normals.resize(cloud.size());
  field.valid.resize(cloud.size(), 0);
  std::vector<Point3> hood(k);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto idx = tree.knn(cloud.points[i], k);
    for (std::size_t j = 0; j < k; ++j) hood[j] = cloud.points[idx[j]];
    const Eigen3 e = symmetric_eigen(covariance(hood, centroid(hood)));
    const bool rank2 = e.values[2] > 0.0 && e.values[1] > 1e-12 * e.values[2];
    field.valid[i] = rank2 ? 1 : 0;
    field.normals[i] = rank2 ? canonicalize_axis(e.vectors.col(0)).vec() : Vec3::UnitZ();
  }
  return field;
}

double rms_distance(std::span<const Point3> points, const PrimitiveParams& prim) {
  if (points.empty()) return 0.0;
  double sum = 0.0;
  for (const Point3& p : points) {
    const double d = distance_to_primitive(p, prim);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(points.size()));
}

// ---------------------------------------------------------------------------
// Plane

FitOutcome fit_plane(std::span<const Point3> points) {
  if (points.size() < 3) throw DegenerateFitError("fit_plane: need at least 3 points");
  const Point3 c = centroid(points);
  const Eigen3 e = symmetric_eigen(covariance(points, c));
  if (!(e.values[2] > 0.0) || e.values[1] <= 1e-12 * e.values[2])
    throw DegenerateFitError("fit_plane: points are collinear or coincident");
  FitOutcome out{PlaneParams{canonicalize_axis(e.vectors.col(0)), c}};
  out.rms_residual = rms_distance(points, out.params);
  out.initial_rms_residual = out.rms_residual;
  return out;
}

// ---------------------------------------------------------------------------
// Sphere

SphereParams algebraic_sphere(std::span<const Point3> points) {
  if (points.size() < 4) throw DegenerateFitError("fit_sphere: need at least 4 points");
  const Point3 c0 = centroid(points);
  const Eigen3 e = symmetric_eigen(covariance(points, c0));
  if (!(e.values[2] > 0.0) || e.values[0] <= 1e-12 * e.values[2])
    throw DegenerateFitError("fit_sphere: points are coplanar");

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd A(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 d = points[static_cast<std::size_t>(i)] - c0;
    A.row(i) << 2.0 * d.transpose(), 1.0;
    b[i] = d.squaredNorm();
  }
  const Eigen::Vector4d s = A.colPivHouseholderQr().solve(b);
  const Vec3 center = s.head<3>();
  const double r2 = s[3] + center.squaredNorm();
  if (!std::isfinite(r2) || r2 <= 0.0) throw DegenerateFitError("fit_sphere: no real sphere");
  return SphereParams{std::sqrt(r2), c0 + center};
}

FitOutcome fit_sphere(std::span<const Point3> points, bool robust, std::uint64_t seed) {
  if (!robust) return finish(points, points, algebraic_sphere(points));

  const SphereParams all = algebraic_sphere(points);  // also rejects coplanar input
  Rng rng(seed);
  const std::size_t subset = std::max<std::size_t>(4, (points.size() * 3 + 9) / 10);
  std::vector<Point3> sample;
  SphereParams best = all;
  std::size_t best_inliers = 0;
  bool have_best = false;
  for (int round = 0; round < 100; ++round) {
    sample.clear();
    std::sample(points.begin(), points.end(), std::back_inserter(sample), subset, rng);
    SphereParams candidate;
    try {
      candidate = algebraic_sphere(sample);
    } catch (const DegenerateFitError&) {
      continue;
    }
    std::size_t inliers = 0;
    for (const Point3& p : points)
      if (std::abs((p - candidate.center).norm() - candidate.radius) <= 0.05 * candidate.radius) ++inliers;
    if (!have_best || inliers > best_inliers) {
      best = candidate;
      best_inliers = inliers;
      have_best = true;
    }
  }

  std::vector<Point3> inliers;
  for (const Point3& p : points)
    if (std::abs((p - best.center).norm() - best.radius) <= 0.05 * best.radius) inliers.push_back(p);
  if (inliers.size() >= 4) {
    try {
      best = algebraic_sphere(inliers);
    } catch (const DegenerateFitError&) {
      inliers.assign(points.begin(), points.end());
    }
  } else {
    inliers.assign(points.begin(), points.end());
  }
  return finish(points, inliers, best);
}

// ---------------------------------------------------------------------------
// Circle in the plane

Circle2 fit_circle_2d(std::span<const Eigen::Vector2d> points) {
  if (points.size() < 3) throw DegenerateFitError("circle fit: need at least 3 points");
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  if (!(es.eigenvalues()[1] > 0.0) || es.eigenvalues()[0] <= 1e-14 * es.eigenvalues()[1])
    throw DegenerateFitError("circle fit: points are collinear");

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d d = points[static_cast<std::size_t>(i)] - mean;
    A.row(i) << 2.0 * d.x(), 2.0 * d.y(), 1.0;
    b[i] = d.squaredNorm();
  }
  const Eigen::Vector3d s = A.colPivHouseholderQr().solve(b);
  const double r2 = s[2] + s.head<2>().squaredNorm();
  if (!std::isfinite(r2) || r2 <= 0.0) throw DegenerateFitError("circle fit: no real circle");
  return {mean + s.head<2>(), std::sqrt(r2)};
}

// ---------------------------------------------------------------------------
// Cylinder

CylinderParams initial_cylinder(const PointCloud& cloud, const NormalField& normals) {
  require_normals(cloud, normals, 6, "fit_cylinder");
  std::vector<Vec3> ns;
  const auto pts = valid_points(cloud, normals, &ns);
  Mat3 m = Mat3::Zero();
  for (const Vec3& n : ns) m.noalias() += n * n.transpose();
  const Eigen3 e = symmetric_eigen(m);
  if (e.values[1] - e.values[0] <= 1e-6 * e.values[2])
    throw DegenerateFitError("fit_cylinder: axis is ambiguous (normal covariance has no unique minimum)");
  const Vec3 axis = e.vectors.col(0);
  const auto [u, v] = orthonormal_basis(axis);

  std::vector<Eigen::Vector2d> flat;
  flat.reserve(pts.size());
  for (const Point3& p : pts) flat.emplace_back(p.dot(u), p.dot(v));
  const Circle2 circle = fit_circle_2d(flat);
  const Point3 on_axis = circle.center.x() * u + circle.center.y() * v;
  const Point3 c = centroid(cloud.points);
  return CylinderParams{circle.radius, canonicalize_axis(axis), on_axis + (c - on_axis).dot(axis) * axis};
}

FitOutcome fit_cylinder(const PointCloud& cloud, const NormalField& normals) {
  FitOutcome out = finish(cloud.points, cloud.points, initial_cylinder(cloud, normals));
  // Report the axis point closest to the data centroid.
  auto& cyl = std::get<CylinderParams>(out.params);
  const Vec3& a = cyl.axis;
  cyl.axis_point += (centroid(cloud.points) - cyl.axis_point).dot(a) * a;
  return out;
}

// ---------------------------------------------------------------------------
// Cone

ConeParams initial_cone(const PointCloud& cloud, const NormalField& normals, Vec3* oriented_axis) {
  require_normals(cloud, normals, 6, "fit_cone");
  std::vector<Vec3> ns;
  const auto pts = valid_points(cloud, normals, &ns);

  // Every tangent plane n.(x - p) = 0 passes through the vertex.
  const Point3 c = centroid(pts);
  Mat3 m = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Mat3 nn = ns[i] * ns[i].transpose();
    m += nn;
    rhs += nn * (pts[i] - c);
  }
  const Eigen3 e = symmetric_eigen(m);
  if (e.values[0] <= 1e-6 * e.values[2])
    throw DegenerateFitError("fit_cone: tangent planes do not determine a vertex (cylinder-like data)");
  const Point3 vertex = c + m.ldlt().solve(rhs);

  // Unit generator directions end on a circle whose plane is orthogonal to the axis.
  std::vector<Point3> tips;
  tips.reserve(pts.size());
  for (const Point3& p : pts) {
    const Vec3 d = p - vertex;
    if (d.norm() > 0.0) tips.push_back(d.normalized());
  }
  if (tips.size() < 3) throw DegenerateFitError("fit_cone: data coincide with the vertex");
  const Point3 mean_tip = centroid(tips);
  const Eigen3 te = symmetric_eigen(covariance(tips, mean_tip));
  Vec3 axis = te.vectors.col(0);
  if (te.values[1] <= 1e-12 * te.values[2]) axis = mean_tip.normalized();  // arc too narrow
  if (axis.dot(mean_tip) < 0.0) axis = -axis;

  double alpha = 0.0;
  for (const Point3& t : tips) alpha += std::acos(std::clamp(t.dot(axis), -1.0, 1.0));
  alpha /= static_cast<double>(tips.size());
  alpha = std::clamp(alpha, 1.0 * kDegree, 89.0 * kDegree);
  if (oriented_axis) *oriented_axis = axis;
  return ConeParams{alpha, canonicalize_axis(axis), vertex};
}

namespace {

// Axis = normal of the plane through the unit normals (they lie on a circle
// around the axis); then |p_perp - c|^2 = (k h + b)^2 is linear in
// (2c, k^2, 2kb, |c|^2 - b^2). Independent of any vertex estimate.
std::optional<ConeParams> cone_from_normal_circle(const PointCloud& cloud, const NormalField& normals) {
  std::vector<Vec3> ns;
  const auto pts = valid_points(cloud, normals, &ns);
  if (pts.size() < 6) return std::nullopt;
  const Eigen3 ne = symmetric_eigen(covariance(ns, centroid(ns)));
  if (ne.values[1] <= 1e-9 * ne.values[2]) return std::nullopt;
  const Vec3 axis = ne.vectors.col(0);
  const auto [u, v] = orthonormal_basis(axis);
  const Point3 c0 = centroid(pts);

  Eigen::Matrix<double, 5, 5> ata = Eigen::Matrix<double, 5, 5>::Zero();
  Eigen::Matrix<double, 5, 1> atb = Eigen::Matrix<double, 5, 1>::Zero();
  for (const Point3& p : pts) {
    const Vec3 w = p - c0;
    const double x = w.dot(u), y = w.dot(v), h = w.dot(axis);
    Eigen::Matrix<double, 5, 1> row;
    row << x, y, h * h, h, 1.0;
    ata.noalias() += row * row.transpose();
    atb += row * (x * x + y * y);
  }
  const Eigen::Matrix<double, 5, 1> sol = ata.ldlt().solve(atb);
  if (!sol.allFinite() || !(sol[2] > 0.0)) return std::nullopt;
  const double k = std::sqrt(sol[2]);
  const double b = sol[3] / (2.0 * k);
  const double h_vertex = -b / k;
  const double alpha = std::clamp(std::atan(k), 1.0 * kDegree, 89.0 * kDegree);
  const Point3 vertex = c0 + 0.5 * sol[0] * u + 0.5 * sol[1] * v + h_vertex * axis;
  if (!vertex.allFinite()) return std::nullopt;
  return ConeParams{alpha, canonicalize_axis(axis), vertex};
}

}  // namespace

FitOutcome fit_cone(const PointCloud& cloud, const NormalField& normals) {
  std::optional<FitOutcome> best;
  std::string failure;
  try {
    best = finish(cloud.points, cloud.points, initial_cone(cloud, normals));
  } catch (const DegenerateFitError& e) {
    failure = e.what();
  }
  if (const auto alt = cone_from_normal_circle(cloud, normals)) {
    FitOutcome second = finish(cloud.points, cloud.points, *alt);
    if (!best || second.rms_residual < best->rms_residual) best = std::move(second);
  }
  // Narrow cones look like cylinders: open a cone of small aperture along the
  // cylinder fit, once per axis direction.
  try {
    const CylinderParams cyl = initial_cylinder(cloud, normals);
    const Point3 mid = cyl.axis_point + (centroid(cloud.points) - cyl.axis_point).dot(cyl.axis.vec()) * cyl.axis.vec();
    const double alpha = 5.0 * kDegree;
    for (double side : {1.0, -1.0}) {
      const Point3 vertex = mid - side * (cyl.radius / std::tan(alpha)) * cyl.axis.vec();
      FitOutcome next = finish(cloud.points, cloud.points, ConeParams{alpha, cyl.axis, vertex});
      if (!best || next.rms_residual < best->rms_residual) best = std::move(next);
    }
  } catch (const DegenerateFitError& e) {
    if (failure.empty()) failure = e.what();
  }
  if (!best) throw DegenerateFitError(failure);
  return *best;
}

// ---------------------------------------------------------------------------
// Torus

namespace {

// Torus through the axis line (axis, foot): spine circle from a circle fit in
// the meridian half-plane, tube radius as the mean distance to it.
std::optional<TorusParams> torus_on_axis(std::span<const Point3> pts, const Vec3& axis, const Point3& foot) {
  std::vector<Eigen::Vector2d> meridian;
  meridian.reserve(pts.size());
  for (const Point3& p : pts) {
    const Vec3 w = p - foot;
    const double h = w.dot(axis);
    meridian.emplace_back((w - h * axis).norm(), h);
  }
  Circle2 section;
  try {
    section = fit_circle_2d(meridian);
  } catch (const DegenerateFitError&) {
    return std::nullopt;
  }
  const double big = section.center.x();
  const double height = section.center.y();
  if (!(big > 0.0) || !std::isfinite(big)) return std::nullopt;

  double tube = 0.0;
  for (const auto& q : meridian) tube += std::hypot(q.x() - big, q.y() - height);
  tube /= static_cast<double>(meridian.size());
  return TorusParams{big, tube, canonicalize_axis(axis), foot + height * axis};
}

// Candidates from the lines meeting most normal lines, best first. On
// sphere-like patches the normals nearly share a point and several
// eigenvectors fit almost equally well.
std::vector<TorusParams> torus_candidates(const PointCloud& cloud, const NormalField& normals,
                                          std::size_t count) {
  require_normals(cloud, normals, 10, "fit_torus");
  std::vector<Vec3> ns;
  const auto pts = valid_points(cloud, normals, &ns);
  const Point3 c = centroid(pts);
  const double scale = std::max(bbox_diagonal(pts), 1e-300);

  // Axis line (a, m) meets the normal line (n, p x n) iff a.(p x n) + m.n = 0.
  Eigen::Matrix<double, 6, 6> normal_eq = Eigen::Matrix<double, 6, 6>::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 p = (pts[i] - c) / scale;
    Eigen::Matrix<double, 6, 1> row;
    row << p.cross(ns[i]), ns[i];
    normal_eq.noalias() += row * row.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(normal_eq);
  std::vector<TorusParams> out;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(std::min<std::size_t>(count, 6)); ++k) {
    const Eigen::Matrix<double, 6, 1> line = es.eigenvectors().col(k);
    const double a_norm = line.head<3>().norm();
    if (!(a_norm > 1e-6)) continue;
    const Vec3 axis = line.head<3>() / a_norm;
    Vec3 moment = line.tail<3>() / a_norm;
    moment -= moment.dot(axis) * axis;
    if (auto t = torus_on_axis(pts, axis, c + scale * axis.cross(moment))) out.push_back(*t);
  }
  return out;
}

constexpr std::size_t kTorusStarts = 3;

}  // namespace

TorusParams initial_torus(const PointCloud& cloud, const NormalField& normals) {
  const auto candidates = torus_candidates(cloud, normals, 1);
  if (candidates.empty()) return TorusParams{1.0, 0.1, UnitVector3{}, centroid(cloud.points)};
  return candidates.front();
}

FitOutcome fit_torus(const PointCloud& cloud, const NormalField& normals) {
  auto candidates = torus_candidates(cloud, normals, kTorusStarts);
  if (candidates.empty()) candidates.push_back(TorusParams{1.0, 0.1, UnitVector3{}, centroid(cloud.points)});
  std::optional<FitOutcome> best;
  for (const TorusParams& start : candidates) {
    FitOutcome out = finish(cloud.points, cloud.points, start);
    const auto& t = std::get<TorusParams>(out.params);
    if (!(t.radius_first > t.radius_second && t.radius_second > 0.0)) continue;
    if (!best || out.rms_residual < best->rms_residual) best = std::move(out);
  }
  if (!best)
    throw DegenerateFitError("fit_torus: refinement did not produce a ring torus (radius_first <= radius_second)");
  return *best;
}

// ---------------------------------------------------------------------------

FitOutcome fit_family(Kind kind, const PointCloud& cloud, const NormalField& normals) {
  switch (kind) {
    case Kind::Plane: return fit_plane(cloud);
    case Kind::Cylinder: return fit_cylinder(cloud, normals);
    case Kind::Sphere: return fit_sphere(cloud);
    case Kind::Cone: return fit_cone(cloud, normals);
    case Kind::Torus: return fit_torus(cloud, normals);
  }
  throw std::invalid_argument("fit_family: unknown kind");
}

FitOutcome refine(std::span<const Point3> points, const PrimitiveParams& start, const LmOptions& options) {
  return finish(points, points, start, options);
}

Point3 normal_lines_center(const PointCloud& cloud, const NormalField& normals) {
  require_normals(cloud, normals, 4, "normal_lines_center");
  Mat3 m = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  const Point3 c = centroid(cloud.points);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!normals.valid[i]) continue;
    const Vec3& n = normals.normals[i];
    const Mat3 proj = Mat3::Identity() - n * n.transpose();
    m += proj;
    rhs += proj * (cloud.points[i] - c);
  }
  const Eigen3 e = symmetric_eigen(m);
  if (e.values[0] <= 1e-9 * e.values[2])
    throw DegenerateFitError("normal_lines_center: normal lines do not meet in a point");
  return c + m.ldlt().solve(rhs);
}

}  // namespace primfit

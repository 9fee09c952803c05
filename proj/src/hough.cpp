#include "primfit/hough.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <variant>
#include <stdexcept>

#include "primfit/errors.hpp"

namespace primfit {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kMinRefineInliers = 10;

RigidTransform pose(const Vec3& axis, const Point3& origin) {
  const Mat3 rot = RigidTransform::rotation_between(axis, Vec3::UnitZ());
  return RigidTransform(rot, -(rot * origin));
}

// Refines `peak` (standard pose) on `inliers` and maps both back.
HoughEstimate finish(const StandardizedCloud& s, const Accumulator& acc, const std::vector<std::size_t>& cell,
                     const PrimitiveParams& peak, const std::vector<Point3>& inliers) {
  const RigidTransform back = s.to_standard.inverse();
  HoughEstimate out;
  out.peak_params = transform_params(peak, back);
  out.params = out.peak_params;
  out.peak_on_boundary = acc.on_boundary(cell);
  out.peak_votes = acc.count(cell);
  out.inliers = inliers.size();
  out.window = acc.axes();
  if (inliers.size() >= kMinRefineInliers) {
    const FitOutcome refined = refine(inliers, peak);
    out.params = transform_params(refined.params, back);
  }
  validate(out.params);
  return out;
}

// Least-squares polish of an initial estimate; the estimate itself when the
// refinement fails or does not improve it.
template <typename P>
P polished(const PointCloud& cloud, const P& start) {
  try {
    const FitOutcome fit = refine(cloud.points, start);
    const P* out = std::get_if<P>(&fit.params);
    if (out && fit.rms_residual <= fit.initial_rms_residual) {
      validate(fit.params);
      return *out;
    }
  } catch (const Error&) {
  } catch (const std::invalid_argument&) {
  }
  return start;
}

// The family fitter's estimate, or the polished initializer when it fails.
template <typename P, typename Init>
P estimated(Kind kind, const PointCloud& cloud, const NormalField& normals, Init init) {
  try {
    return std::get<P>(fit_family(kind, cloud, normals).params);
  } catch (const DegenerateFitError&) {
    return polished(cloud, init());
  }
}

void require_votes(const Accumulator& acc) {
  if (acc.total() == 0) throw WindowMissError("hough_refine: no vote fell inside the search window");
}

}  // namespace

// ---------------------------------------------------------------------------
// Accumulator

long Accumulator::Axis::bin_of(double v) const {
  if (!(v >= lo && v <= hi)) return -1;
  const auto b = static_cast<long>((v - lo) / width());
  return std::min(b, static_cast<long>(bins) - 1);
}

Accumulator::Accumulator(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw std::invalid_argument("Accumulator: need at least one axis");
  std::size_t total = 1;
  strides_.resize(axes_.size());
  for (std::size_t d = axes_.size(); d-- > 0;) {
    if (axes_[d].bins == 0 || !(axes_[d].hi > axes_[d].lo))
      throw std::invalid_argument("Accumulator: every axis needs bins and a positive range");
    strides_[d] = total;
    total *= axes_[d].bins;
  }
  counts_.assign(total, 0);
}

std::size_t Accumulator::flat_index(std::span<const std::size_t> cell) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) flat += cell[d] * strides_[d];
  return flat;
}

std::vector<std::size_t> Accumulator::unflatten(std::size_t flat) const {
  std::vector<std::size_t> cell(axes_.size());
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    cell[d] = flat / strides_[d];
    flat %= strides_[d];
  }
  return cell;
}

std::uint64_t Accumulator::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::vector<std::size_t> Accumulator::peak() const {
  // Row-major order is lexicographic order; max_element keeps the first maximum.
  const auto it = std::max_element(counts_.begin(), counts_.end());
  return unflatten(static_cast<std::size_t>(it - counts_.begin()));
}

bool Accumulator::on_boundary(std::span<const std::size_t> cell) const {
  for (std::size_t d = 0; d < axes_.size(); ++d)
    if (cell[d] == 0 || cell[d] + 1 == axes_[d].bins) return true;
  return false;
}

Accumulator& Accumulator::operator+=(const Accumulator& other) {
  bool same = other.axes_.size() == axes_.size();
  for (std::size_t d = 0; same && d < axes_.size(); ++d)
    same = other.axes_[d].bins == axes_[d].bins && other.axes_[d].lo == axes_[d].lo && other.axes_[d].hi == axes_[d].hi;
  if (!same) throw std::invalid_argument("Accumulator: axes differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

// ---------------------------------------------------------------------------
// Planes

Vec3 hesse_normal(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

Accumulator plane_votes(std::span<const Point3> points, const PlaneBins& bins, double rho_max) {
  if (!(rho_max > 0.0)) throw std::invalid_argument("plane_votes: rho_max must be positive");
  if (bins.theta < 1 || bins.phi < 1 || bins.rho < 2) throw std::invalid_argument("plane_votes: need at least 1 angular and 2 rho bins");
  // rho bins are laid out so that rho = 0 is a bin center.
  const double w = 2.0 * rho_max / static_cast<double>(bins.rho - 1);
  const double lo = -(static_cast<double>(bins.rho / 2) + 0.5) * w;
  Accumulator acc({{bins.theta, 0.0, kPi}, {bins.phi, 0.0, kPi}, {bins.rho, lo, lo + static_cast<double>(bins.rho) * w}});
  const auto& ax = acc.axes();
  std::array<std::size_t, 3> cell{};
  for (std::size_t i = 0; i < bins.theta; ++i) {
    for (std::size_t j = 0; j < bins.phi; ++j) {
      const Vec3 n = hesse_normal(ax[0].center(i), ax[1].center(j));
      cell[0] = i;
      cell[1] = j;
      for (const Point3& p : points) {
        const long k = ax[2].bin_of(n.dot(p));
        if (k < 0) continue;
        cell[2] = static_cast<std::size_t>(k);
        acc.vote(acc.flat_index(cell));
      }
    }
  }
  return acc;
}

HoughPlane hough_plane(const PointCloud& cloud, const PlaneBins& bins) {
  if (cloud.size() < 3) throw std::invalid_argument("hough_plane: need at least 3 points");
  if (bins.theta < 8 || bins.phi < 8 || bins.rho < 8)
    throw std::invalid_argument("hough_plane: need at least 8 bins per dimension");

  HoughPlane out;
  out.origin = centroid(cloud.points);
  std::vector<Point3> centered;
  centered.reserve(cloud.size());
  double rho_max = 0.0;
  for (const Point3& p : cloud.points) {
    centered.push_back(p - out.origin);
    rho_max = std::max(rho_max, centered.back().norm());
  }
  rho_max = rho_max * (1.0 + 1e-9) + 1e-12;

  const Accumulator acc = plane_votes(centered, bins, rho_max);
  const auto cell = acc.peak();
  const auto& ax = acc.axes();
  out.theta = ax[0].center(cell[0]);
  out.phi = ax[1].center(cell[1]);
  out.rho = ax[2].center(cell[2]);
  out.theta_width = ax[0].width();
  out.phi_width = ax[1].width();
  out.rho_width = ax[2].width();
  out.votes = acc.count(cell);

  const Vec3 n = hesse_normal(out.theta, out.phi);
  out.cell_plane = PlaneParams{canonicalize_axis(n), out.origin + out.rho * n};
  out.plane = out.cell_plane;

  std::vector<Point3> inliers;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (std::abs(n.dot(centered[i]) - out.rho) <= out.rho_width) inliers.push_back(cloud.points[i]);
  out.inliers = inliers.size();
  try {
    out.plane = std::get<PlaneParams>(fit_plane(inliers).params);
  } catch (const DegenerateFitError&) {
    // keep the cell plane
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standard pose

StandardizedCloud standardize_pose(const PointCloud& cloud, Kind kind, const NormalField& normals) {
  StandardizedCloud s;
  s.kind = kind;
  s.diagonal = bbox_diagonal(cloud);
  switch (kind) {
    case Kind::Plane: {
      const auto plane = std::get<PlaneParams>(fit_plane(cloud).params);
      s.to_standard = pose(plane.normal, plane.point);
      break;
    }
    case Kind::Sphere: {
      const Point3 center = normal_lines_center(cloud, normals);
      double r = 0.0;
      for (const Point3& p : cloud.points) r += (p - center).norm();
      const SphereParams sphere = polished(cloud, SphereParams{r / static_cast<double>(cloud.size()), center});
      s.estimates.radius = sphere.radius;
      s.to_standard = RigidTransform(Mat3::Identity(), -sphere.center);
      break;
    }
    case Kind::Cylinder: {
      const auto cyl = estimated<CylinderParams>(kind, cloud, normals, [&] { return initial_cylinder(cloud, normals); });
      const Vec3& a = cyl.axis;
      s.estimates.radius = cyl.radius;
      s.to_standard = pose(a, cyl.axis_point - cyl.axis_point.dot(a) * a);
      break;
    }
    case Kind::Cone: {
      const auto cone = estimated<ConeParams>(kind, cloud, normals, [&] { return initial_cone(cloud, normals); });
      double side = 0.0;
      for (const Point3& p : cloud.points) side += (p - cone.vertex).dot(cone.axis.vec());
      s.estimates.aperture = cone.half_aperture;
      s.to_standard = pose(side < 0.0 ? Vec3(-cone.axis.vec()) : cone.axis.vec(), cone.vertex);
      break;
    }
    case Kind::Torus: {
      const auto torus = estimated<TorusParams>(kind, cloud, normals, [&] { return initial_torus(cloud, normals); });
      s.estimates.radius = torus.radius_first;
      s.estimates.radius_second = torus.radius_second;
      s.to_standard = pose(torus.axis, torus.center);
      break;
    }
  }
  s.cloud = apply_transform(cloud, s.to_standard);
  return s;
}

// ---------------------------------------------------------------------------
// Reduced-space voting

std::size_t offset_bins(std::size_t bins) noexcept { return std::max<std::size_t>(5, bins / 4) | 1U; }

HoughEstimate hough_refine(const StandardizedCloud& s, std::size_t bins, double halfwidth) {
  if (!(halfwidth > 0.0 && halfwidth <= 1.0)) throw std::invalid_argument("hough_refine: halfwidth must lie in (0, 1]");
  if (bins < 2) throw std::invalid_argument("hough_refine: need at least 2 bins");
  const auto& pts = s.cloud.points;
  const std::size_t nb_off = offset_bins(bins);

  switch (s.kind) {
    case Kind::Plane: throw std::invalid_argument("hough_refine: planes are voted in general position by hough_plane");

    case Kind::Sphere: {
      const double r0 = s.estimates.radius;
      if (!(r0 > 0.0)) throw std::invalid_argument("hough_refine: missing radius estimate");
      const Accumulator::Axis off{nb_off, -halfwidth * r0, halfwidth * r0};
      Accumulator acc({off, off, off, {bins, r0 * (1.0 - halfwidth), r0 * (1.0 + halfwidth)}});
      const auto& ax = acc.axes();
      std::array<std::size_t, 4> cell{};
      for (cell[0] = 0; cell[0] < nb_off; ++cell[0])
        for (cell[1] = 0; cell[1] < nb_off; ++cell[1])
          for (cell[2] = 0; cell[2] < nb_off; ++cell[2]) {
            const Vec3 c(ax[0].center(cell[0]), ax[1].center(cell[1]), ax[2].center(cell[2]));
            for (const Point3& p : pts) {
              const long b = ax[3].bin_of((p - c).norm());
              if (b < 0) continue;
              cell[3] = static_cast<std::size_t>(b);
              acc.vote(acc.flat_index(cell));
            }
          }
      require_votes(acc);
      const auto peak = acc.peak();
      const Vec3 c(ax[0].center(peak[0]), ax[1].center(peak[1]), ax[2].center(peak[2]));
      const double r = ax[3].center(peak[3]);
      std::vector<Point3> inliers;
      for (const Point3& p : pts)
        if (std::abs((p - c).norm() - r) <= ax[3].width()) inliers.push_back(p);
      return finish(s, acc, peak, SphereParams{r, c}, inliers);
    }

    case Kind::Cylinder: {
      const double r0 = s.estimates.radius;
      if (!(r0 > 0.0)) throw std::invalid_argument("hough_refine: missing radius estimate");
      const Accumulator::Axis off{nb_off, -halfwidth * r0, halfwidth * r0};
      Accumulator acc({off, off, {bins, r0 * (1.0 - halfwidth), r0 * (1.0 + halfwidth)}});
      const auto& ax = acc.axes();
      std::array<std::size_t, 3> cell{};
      for (cell[0] = 0; cell[0] < nb_off; ++cell[0])
        for (cell[1] = 0; cell[1] < nb_off; ++cell[1]) {
          const double dx = ax[0].center(cell[0]);
          const double dy = ax[1].center(cell[1]);
          for (const Point3& p : pts) {
            const long b = ax[2].bin_of(std::hypot(p.x() - dx, p.y() - dy));
            if (b < 0) continue;
            cell[2] = static_cast<std::size_t>(b);
            acc.vote(acc.flat_index(cell));
          }
        }
      require_votes(acc);
      const auto peak = acc.peak();
      const double dx = ax[0].center(peak[0]);
      const double dy = ax[1].center(peak[1]);
      const double r = ax[2].center(peak[2]);
      std::vector<Point3> inliers;
      for (const Point3& p : pts)
        if (std::abs(std::hypot(p.x() - dx, p.y() - dy) - r) <= ax[2].width()) inliers.push_back(p);
      return finish(s, acc, peak, CylinderParams{r, UnitVector3{}, Point3(dx, dy, 0.0)}, inliers);
    }

    case Kind::Cone: {
      const double a0 = s.estimates.aperture;
      if (!(a0 > 0.0)) throw std::invalid_argument("hough_refine: missing aperture estimate");
      const double dz = halfwidth * s.diagonal;
      const double edge = 1e-6;
      Accumulator acc({{bins, -dz, dz},
                       {bins, std::max(a0 * (1.0 - halfwidth), edge), std::min(a0 * (1.0 + halfwidth), kPi / 2 - edge)}});
      const auto& ax = acc.axes();
      std::array<std::size_t, 2> cell{};
      for (cell[0] = 0; cell[0] < bins; ++cell[0]) {
        const double z0 = ax[0].center(cell[0]);
        for (const Point3& p : pts) {
          const long b = ax[1].bin_of(std::atan2(std::hypot(p.x(), p.y()), std::abs(p.z() - z0)));
          if (b < 0) continue;
          cell[1] = static_cast<std::size_t>(b);
          acc.vote(acc.flat_index(cell));
        }
      }
      require_votes(acc);
      const auto peak = acc.peak();
      const double z0 = ax[0].center(peak[0]);
      const double alpha = ax[1].center(peak[1]);
      const ConeParams cone{alpha, UnitVector3{}, Point3(0.0, 0.0, z0)};
      std::vector<Point3> inliers;
      const double tolerance = ax[1].width() * s.diagonal;
      for (const Point3& p : pts)
        if (distance_to_primitive(p, cone) <= tolerance) inliers.push_back(p);
      return finish(s, acc, peak, cone, inliers);
    }

    case Kind::Torus: {
      const double big = s.estimates.radius;
      const double tube = s.estimates.radius_second;
      if (!(big > 0.0 && tube > 0.0)) throw std::invalid_argument("hough_refine: missing torus radii estimates");
      Accumulator acc({{bins, big * (1.0 - halfwidth), big * (1.0 + halfwidth)},
                       {bins, tube * (1.0 - halfwidth), tube * (1.0 + halfwidth)}});
      const auto& ax = acc.axes();
      std::array<std::size_t, 2> cell{};
      for (cell[0] = 0; cell[0] < bins; ++cell[0]) {
        const double r1 = ax[0].center(cell[0]);
        for (const Point3& p : pts) {
          const long b = ax[1].bin_of(std::hypot(std::hypot(p.x(), p.y()) - r1, p.z()));
          if (b < 0) continue;
          cell[1] = static_cast<std::size_t>(b);
          acc.vote(acc.flat_index(cell));
        }
      }
      require_votes(acc);
      const auto peak = acc.peak();
      const double r1 = ax[0].center(peak[0]);
      const double r2 = ax[1].center(peak[1]);
      std::vector<Point3> inliers;
      for (const Point3& p : pts)
        if (std::abs(std::hypot(std::hypot(p.x(), p.y()) - r1, p.z()) - r2) <= ax[1].width()) inliers.push_back(p);
      const TorusParams torus{r1, r2, UnitVector3{}, Point3::Zero()};
      try {
        return finish(s, acc, peak, torus, inliers);
      } catch (const std::invalid_argument& e) {
        throw DegenerateFitError(std::string("hough_refine: ") + e.what());
      }
    }
  }
  throw std::invalid_argument("hough_refine: unknown kind");
}

PrimitiveParams hough_fit(Kind kind, const PointCloud& cloud, const NormalField& normals, std::size_t bins,
                          double halfwidth) {
  if (kind == Kind::Plane) return hough_plane(cloud, {bins, bins, bins}).plane;
  return hough_refine(standardize_pose(cloud, kind, normals), bins, halfwidth).params;
}

}  // namespace primfit

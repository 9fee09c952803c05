#include "primfit/recognize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>

#include "primfit/errors.hpp"
#include "primfit/hough.hpp"
#include "primfit/knn.hpp"

namespace primfit {

namespace {

double diagonal_or_throw(const PointCloud& cloud) {
  const double l = cloud.points.empty() ? 0.0 : bbox_diagonal(cloud);
  if (!(l > 0.0)) throw std::domain_error("mfe: bounding box diagonal is zero, normalization undefined");
  return l;
}

// Largest |(x - anchor) . axis| (or |x - anchor| without an axis) over the cloud.
double reach(const PointCloud& cloud, const Point3& anchor, const Vec3* axis) {
  double r = 0.0;
  for (const Point3& p : cloud.points) r = std::max(r, axis ? std::abs((p - anchor).dot(*axis)) : (p - anchor).norm());
  return r * 1.05 + 1e-12;
}

// Point-to-surface distances; cones are measured against the nappe that holds
// most of the cloud.
template <class F>
void for_each_distance(const PointCloud& cloud, const PrimitiveParams& prim, F&& f) {
  if (const auto* cone = std::get_if<ConeParams>(&prim)) {
    const double side = majority_nappe(cloud.points, *cone);
    for (const Point3& p : cloud.points) f(distance_to_nappe(p, *cone, side));
  } else {
    for (const Point3& p : cloud.points) f(distance_to_primitive(p, prim));
  }
}

}  // namespace

double mfe(const PointCloud& cloud, const PrimitiveParams& prim) {
  const double l = diagonal_or_throw(cloud);
  double sum = 0.0;
  for_each_distance(cloud, prim, [&](double d) { sum += d; });
  return sum / static_cast<double>(cloud.size()) / l;
}

double directed_hausdorff(const PointCloud& cloud, const PrimitiveParams& prim) {
  double worst = 0.0;
  for_each_distance(cloud, prim, [&](double d) { worst = std::max(worst, d); });
  return worst;
}

PointCloud covering_sample(const PointCloud& cloud, const PrimitiveParams& prim, std::size_t samples,
                           std::uint64_t seed) {
  return std::visit(
      [&](const auto& s) -> PointCloud {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PlaneParams>) {
          return sample_surface(prim, samples, seed, reach(cloud, s.point, nullptr));
        } else if constexpr (std::is_same_v<T, CylinderParams>) {
          return sample_surface(prim, samples, seed, reach(cloud, s.axis_point, &s.axis.vec()));
        } else if constexpr (std::is_same_v<T, ConeParams>) {
          PointCloud out = sample_surface(prim, samples, seed, reach(cloud, s.vertex, &s.axis.vec()));
          if (majority_nappe(cloud.points, s) < 0.0)
            for (Point3& q : out.points) q = 2.0 * s.vertex - q;
          return out;
        } else {
          return sample_surface(prim, samples, seed);
        }
      },
      prim);
}

double mfe_sampled(const PointCloud& cloud, const PrimitiveParams& prim, std::size_t samples, std::uint64_t seed) {
  const double l = diagonal_or_throw(cloud);
  const PointCloud surface = covering_sample(cloud, prim, samples, seed);
  const KdTree tree(surface.points);
  double sum = 0.0;
  for (const Point3& p : cloud.points) sum += tree.nearest(p).second;
  return sum / static_cast<double>(cloud.size()) / l;
}

double directed_hausdorff_sampled(const PointCloud& cloud, const PrimitiveParams& prim, std::size_t samples,
                                  std::uint64_t seed) {
  if (cloud.points.empty()) return 0.0;
  const PointCloud surface = covering_sample(cloud, prim, samples, seed);
  const KdTree tree(surface.points);
  double worst = 0.0;
  for (const Point3& p : cloud.points) worst = std::max(worst, tree.nearest(p).second);
  return worst;
}

std::string degenerate_limit(const PrimitiveParams& params, const PointCloud& cloud, const ClassifyConfig& config) {
  const double l = bbox_diagonal(cloud);
  const auto too_large = [&](double radius) { return config.max_radius_ratio > 0.0 && radius > config.max_radius_ratio * l; };
  return std::visit(
      [&](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, CylinderParams> || std::is_same_v<T, SphereParams>) {
          if (too_large(s.radius)) return "radius exceeds the segment scale (flat limit)";
        } else if constexpr (std::is_same_v<T, TorusParams>) {
          if (too_large(s.radius_first)) return "radius_first exceeds the segment scale (flat limit)";
        } else if constexpr (std::is_same_v<T, ConeParams>) {
          if (config.max_aperture > 0.0 && s.half_aperture > config.max_aperture)
            return "half aperture near pi/2 (plane limit)";
          if (config.max_vertex_ratio > 0.0 && (s.vertex - centroid(cloud.points)).norm() > config.max_vertex_ratio * l)
            return "vertex far outside the segment (cylinder limit)";
        }
        return {};
      },
      params);
}

PrimitiveParams fit_for_classification(Kind kind, const PointCloud& cloud, const NormalField& normals,
                                       const ClassifyConfig& config) {
  if (config.use_hough) return hough_fit(kind, cloud, normals, config.bins, config.halfwidth);
  return fit_family(kind, cloud, normals).params;
}

ClassifiedFit classify(const PointCloud& cloud, const ClassifyConfig& config) {
  if (cloud.size() < 10) throw std::invalid_argument("classify: need at least 10 points");
  const std::size_t k = std::clamp<std::size_t>(config.k_neighbors, 3, cloud.size() - 1);
  const NormalField normals = estimate_normals(cloud, k);

  ClassifiedFit out;
  std::optional<std::size_t> best;
  for (Kind kind : kAllKinds) {
    const std::size_t i = index(kind);
    try {
      PrimitiveParams params = fit_for_classification(kind, cloud, normals, config);
      if (const std::string reason = degenerate_limit(params, cloud, config); !reason.empty())
        throw DegenerateFitError(reason);
      const double score = mfe(cloud, params);
      if (!std::isfinite(score)) throw DegenerateFitError("non-finite fitting error");
      out.family_mfe[i] = score;
      out.family_params[i] = std::move(params);
      if (!best || score < *out.family_mfe[*best]) best = i;
    } catch (const std::exception& e) {
      out.failures[i] = e.what();
    }
  }
  if (!best) {
    std::string message = "classify: every family fit failed:";
    for (Kind kind : kAllKinds) message += " " + std::string(kind_name(kind)) + ": " + out.failures[index(kind)] + ";";
    throw ClassificationError(message);
  }
  out.kind = kAllKinds[*best];
  out.params = *out.family_params[*best];
  return out;
}

}  // namespace primfit

#pragma once

// Fitting measures and primitive-type recognition by lowest fitting error.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "primfit/fitters.hpp"
#include "primfit/geometry.hpp"

namespace primfit {

/// Mean point-to-surface distance divided by the cloud's bbox diagonal.
/// Cones count as single-napped, opening towards the side of the vertex that
/// holds most of the cloud. Throws std::domain_error when the diagonal is zero (fewer than two
/// distinct points).
double mfe(const PointCloud& cloud, const PrimitiveParams& prim);

/// Largest point-to-surface distance (same cone convention as mfe); 0 for an
/// empty cloud.
double directed_hausdorff(const PointCloud& cloud, const PrimitiveParams& prim);

/// Dense surface sample that covers the cloud: unbounded families are sampled
/// up to the farthest cloud point from the anchor (plane point, axis point,
/// cone vertex); cones get the nappe holding most of the cloud.
PointCloud covering_sample(const PointCloud& cloud, const PrimitiveParams& prim, std::size_t samples,
                           std::uint64_t seed);

/// mfe / directed_hausdorff with distances measured to the nearest point of
/// covering_sample instead of the analytic surface.
double mfe_sampled(const PointCloud& cloud, const PrimitiveParams& prim, std::size_t samples, std::uint64_t seed);
double directed_hausdorff_sampled(const PointCloud& cloud, const PrimitiveParams& prim, std::size_t samples,
                                  std::uint64_t seed);

struct ClassifyConfig {
  bool use_hough = false;
  std::size_t k_neighbors = 20;  // normal estimation; capped at cloud size - 1
  std::size_t bins = 64;         // Hough bins per dimension
  double halfwidth = 0.25;       // Hough window, relative
  // Fits in the flat or straight limit of their family are discarded:
  // radius (torus radius_first) above max_radius_ratio x l, cone vertex
  // farther than max_vertex_ratio x l from the centroid, or cone half
  // aperture above max_aperture. Non-positive values disable a check.
  double max_radius_ratio = 2.0;
  double max_vertex_ratio = 3.0;
  double max_aperture = 85.0 * 3.14159265358979323846 / 180.0;
};

struct ClassifiedFit {
  Kind kind = Kind::Plane;
  PrimitiveParams params;
  std::array<std::optional<double>, 5> family_mfe;             // indexed by kind index
  std::array<std::optional<PrimitiveParams>, 5> family_params;
  std::array<std::string, 5> failures;                         // empty when the fit succeeded

  double chosen_mfe() const { return *family_mfe[index(kind)]; }
};

/// Fits every family, scores each fit by mfe and returns the lowest; ties go
/// to the lower kind code. Failed families are recorded in `failures`.
/// Throws std::invalid_argument for fewer than 10 points and
/// ClassificationError when all five fits fail.
ClassifiedFit classify(const PointCloud& cloud, const ClassifyConfig& config = {});

/// Reason a fit lies in its family's degenerate limit, or empty.
std::string degenerate_limit(const PrimitiveParams& params, const PointCloud& cloud, const ClassifyConfig& config);

/// One family's fit as used by classify.
PrimitiveParams fit_for_classification(Kind kind, const PointCloud& cloud, const NormalField& normals,
                                       const ClassifyConfig& config);

}  // namespace primfit

#pragma once

// Synthetic segment generation: canonical sampling, random planar cuts,
// rigid repositioning, perturbations A0-A9 and the benchmark text formats.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "primfit/geometry.hpp"

namespace primfit {

enum class Perturbation { A0, A1, A2, A3, A4, A5, A6, A7, A8, A9 };

inline constexpr std::array<Perturbation, 10> kAllPerturbations = {
    Perturbation::A0, Perturbation::A1, Perturbation::A2, Perturbation::A3, Perturbation::A4,
    Perturbation::A5, Perturbation::A6, Perturbation::A7, Perturbation::A8, Perturbation::A9};

std::string perturbation_name(Perturbation p);  // "A0" ... "A9"
/// Case-insensitive "a3" / "A3". Throws std::invalid_argument.
Perturbation parse_perturbation(std::string_view text);

enum class NoiseModel { None, Uniform, Gaussian };
enum class StructuralEdit { None, Undersample, Hole };

NoiseModel noise_of(Perturbation p) noexcept;
StructuralEdit edit_of(Perturbation p) noexcept;

/// Drawn parameters of one perturbation.
struct PerturbationSpec {
  Perturbation kind = Perturbation::A0;
  // A1/A2 (and A5-A8): intensity n and the affected fraction of points.
  int noise_n = 0;
  double noise_fraction = 0.0;
  // A3 (A5, A6): fraction of points removed.
  double removal_fraction = 0.0;
  // A4 (A7, A8): hole sphere around point `hole_center`.
  std::size_t hole_center = 0;
  double hole_radius = 0.0;
  // A9: Gaussian bump at point `bump_center` in its tangent chart.
  std::size_t bump_center = 0;
  double bump_amplitude = 0.0;
  Eigen::Matrix2d bump_covariance = Eigen::Matrix2d::Identity();
};

/// Draws the parameters of `kind` for `cloud`:
///   noise n ~ U{3..20} (uniform) or U{10..30} (Gaussian), affected fraction U(0.3, 1);
///   removal fraction U(0.3, 0.7); hole radius U(0.05, 0.25) x bbox diagonal;
///   bump amplitude U(0.02, 0.1) x diagonal, covariance eigen-scales
///   U(0.05, 0.2) x diagonal with a random orientation.
PerturbationSpec draw_perturbation(Perturbation kind, const PointCloud& cloud, Rng& rng);

/// Applies `spec`. Noise in combined types is added after the structural
/// edit. `surface` supplies the outward normals used by A9.
/// Throws DegenerateOutputError when fewer than 10 points survive.
PointCloud perturb(const PointCloud& cloud, const PerturbationSpec& spec,
                   const PrimitiveParams& surface, std::uint64_t seed);

/// Per-coordinate offsets of the A2 model, N(-1/n, 4/n^2).
double gaussian_offset(Rng& rng, int n);

// ---------------------------------------------------------------------------
// Ground truth

/// [kind code, parameters...] in file order:
///   plane    [1, a, P]        7 entries
///   cylinder [2, r, a, P]     8
///   sphere   [3, r, C]        5
///   cone     [4, alpha, a, C] 8
///   torus    [5, r, R, a, C]  9
class GroundTruthVector {
 public:
  GroundTruthVector() = default;  // empty; only for default-constructed holders
  static GroundTruthVector encode(const PrimitiveParams& prim);
  /// Validates kind code and length. Throws FormatError.
  static GroundTruthVector from_values(std::vector<double> values);
  static std::size_t expected_length(Kind kind) noexcept;

  Kind kind() const { return kind_from_code(static_cast<int>(values_.front())); }
  const std::vector<double>& values() const noexcept { return values_; }
  /// Axes are renormalized and canonicalized. Throws FormatError when the
  /// vector does not describe a valid primitive.
  PrimitiveParams decode() const;

 private:
  explicit GroundTruthVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Random segments

/// Canonical pose (center/vertex at the origin, axis along z) with random
/// sizes: radii and torus radius_first in [0.5, 3], torus radius_second in
/// [0.1, 0.9 radius_first], cone half aperture in [10, 75] degrees.
PrimitiveParams random_params(Kind kind, Rng& rng);
PrimitiveParams random_params(Kind kind, std::uint64_t seed);

/// Kept side {x : normal . (x - anchor) >= 0} of a cutting plane.
struct HalfSpace {
  Vec3 normal;
  Point3 anchor;

  double signed_distance(const Point3& p) const { return normal.dot(p - anchor); }
};

struct Segment {
  PointCloud cloud;
  PrimitiveParams truth;  // general position
  GroundTruthVector gt;
  double extent = 0.0;          // sampling extent of unbounded families
  std::vector<HalfSpace> cuts;  // in the final (general) position
};

struct SegmentOptions {
  double translation_scale = 5.0;
  int max_attempts = 8;
};

/// Samples a canonical primitive, applies 1-3 random half-space cuts (each
/// through a random cloud point, keeping the larger side), retries until at
/// least 20% of `point_count` survives, then moves cloud and ground truth by
/// a random rigid transform. Throws GenerationError after max_attempts.
Segment generate_segment(Kind kind, std::uint64_t seed, std::size_t point_count,
                         const SegmentOptions& options = {});

// ---------------------------------------------------------------------------
// Text formats

/// "x y z\n" per point, shortest round-trip decimal form.
std::string format_cloud_txt(const PointCloud& cloud);
/// Throws ParseError (with line number) on malformed lines, FormatError on
/// empty input.
PointCloud parse_cloud_txt(std::string_view text);
void write_cloud_txt(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_cloud_txt(const std::filesystem::path& path);

std::string format_gt_txt(const GroundTruthVector& gt);
GroundTruthVector parse_gt_txt(std::string_view text);
void write_gt_txt(const std::filesystem::path& path, const GroundTruthVector& gt);
GroundTruthVector read_gt_txt(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_real(double v);

struct ManifestRow {
  std::string file;  // relative to the dataset root
  int kind = 0;
  std::string perturbation;
  std::uint64_t seed = 0;
};

/// CSV with header `file,kind,perturbation,seed`.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
/// Throws FormatError / std::runtime_error. Rejects duplicate file entries.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace primfit

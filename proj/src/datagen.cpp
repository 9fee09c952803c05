#include "primfit/datagen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "primfit/errors.hpp"

namespace primfit {

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;
constexpr std::size_t kMinSurvivors = 10;

Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec3 d;
  do {
    d = Vec3(gauss(rng), gauss(rng), gauss(rng));
  } while (d.norm() < 1e-8);
  return d.normalized();
}

std::vector<std::size_t> sorted_sample(std::size_t population, std::size_t count, Rng& rng) {
  std::vector<std::size_t> all(population);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  return picked;  // std::sample keeps input order
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// Splits on '\n', dropping a trailing '\r' per line. A final newline does not
// start a new line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

bool parse_real(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc{} && ptr == token.data() + token.size() && std::isfinite(out);
}

}  // namespace

// ---------------------------------------------------------------------------
// Perturbation taxonomy

std::string perturbation_name(Perturbation p) {
  return "A" + std::to_string(static_cast<int>(p));
}

Perturbation parse_perturbation(std::string_view text) {
  if (text.size() == 2 && (text[0] == 'a' || text[0] == 'A') && text[1] >= '0' && text[1] <= '9')
    return static_cast<Perturbation>(text[1] - '0');
  throw std::invalid_argument("unknown perturbation: " + std::string(text));
}

NoiseModel noise_of(Perturbation p) noexcept {
  switch (p) {
    case Perturbation::A1:
    case Perturbation::A5:
    case Perturbation::A7: return NoiseModel::Uniform;
    case Perturbation::A2:
    case Perturbation::A6:
    case Perturbation::A8: return NoiseModel::Gaussian;
    default: return NoiseModel::None;
  }
}

StructuralEdit edit_of(Perturbation p) noexcept {
  switch (p) {
    case Perturbation::A3:
    case Perturbation::A5:
    case Perturbation::A6: return StructuralEdit::Undersample;
    case Perturbation::A4:
    case Perturbation::A7:
    case Perturbation::A8: return StructuralEdit::Hole;
    default: return StructuralEdit::None;
  }
}

PerturbationSpec draw_perturbation(Perturbation kind, const PointCloud& cloud, Rng& rng) {
  if (cloud.empty()) throw std::invalid_argument("draw_perturbation: empty cloud");
  PerturbationSpec spec;
  spec.kind = kind;
  const double diag = bbox_diagonal(cloud);
  std::uniform_int_distribution<std::size_t> any_point(0, cloud.size() - 1);

  switch (noise_of(kind)) {
    case NoiseModel::Uniform:
      spec.noise_n = std::uniform_int_distribution<int>(3, 20)(rng);
      spec.noise_fraction = uniform(rng, 0.3, 1.0);
      break;
    case NoiseModel::Gaussian:
      spec.noise_n = std::uniform_int_distribution<int>(10, 30)(rng);
      spec.noise_fraction = uniform(rng, 0.3, 1.0);
      break;
    case NoiseModel::None: break;
  }
  switch (edit_of(kind)) {
    case StructuralEdit::Undersample: spec.removal_fraction = uniform(rng, 0.3, 0.7); break;
    case StructuralEdit::Hole:
      spec.hole_center = any_point(rng);
      spec.hole_radius = uniform(rng, 0.05, 0.25) * diag;
      break;
    case StructuralEdit::None: break;
  }
  if (kind == Perturbation::A9) {
    spec.bump_center = any_point(rng);
    spec.bump_amplitude = uniform(rng, 0.02, 0.1) * diag;
    const double s1 = uniform(rng, 0.05, 0.2) * diag;
    const double s2 = uniform(rng, 0.05, 0.2) * diag;
    const double angle = uniform(rng, 0.0, std::numbers::pi);
    const Eigen::Matrix2d rot = Eigen::Rotation2Dd(angle).toRotationMatrix();
    spec.bump_covariance = rot * Eigen::Vector2d(s1 * s1, s2 * s2).asDiagonal() * rot.transpose();
  }
  return spec;
}

double gaussian_offset(Rng& rng, int n) {
  return std::normal_distribution<double>(-1.0 / n, 2.0 / n)(rng);
}

PointCloud perturb(const PointCloud& cloud, const PerturbationSpec& spec, const PrimitiveParams& surface,
                   std::uint64_t seed) {
  Rng rng(seed);
  PointCloud out;
  out.id = cloud.id;

  switch (edit_of(spec.kind)) {
    case StructuralEdit::None: out.points = cloud.points; break;
    case StructuralEdit::Undersample: {
      if (spec.removal_fraction < 0.0 || spec.removal_fraction > 1.0)
        throw std::invalid_argument("perturb: removal fraction outside [0, 1]");
      const auto removed =
          static_cast<std::size_t>(std::llround(spec.removal_fraction * static_cast<double>(cloud.size())));
      for (std::size_t i : sorted_sample(cloud.size(), cloud.size() - removed, rng))
        out.points.push_back(cloud.points[i]);
      break;
    }
    case StructuralEdit::Hole: {
      if (spec.hole_center >= cloud.size()) throw std::invalid_argument("perturb: hole center out of range");
      const Point3 center = cloud.points[spec.hole_center];
      for (const Point3& p : cloud.points)
        if ((p - center).norm() > spec.hole_radius) out.points.push_back(p);
      break;
    }
  }
  if (edit_of(spec.kind) != StructuralEdit::None && out.size() < kMinSurvivors)
    throw DegenerateOutputError("perturb: fewer than 10 points left after " + perturbation_name(spec.kind));

  const NoiseModel noise = noise_of(spec.kind);
  if (noise != NoiseModel::None) {
    if (spec.noise_fraction < 0.0 || spec.noise_fraction > 1.0 || spec.noise_n <= 0)
      throw std::invalid_argument("perturb: invalid noise parameters");
    const auto affected =
        static_cast<std::size_t>(std::llround(spec.noise_fraction * static_cast<double>(out.size())));
    const double half_width = 1.0 / spec.noise_n;
    for (std::size_t i : sorted_sample(out.size(), affected, rng)) {
      for (int c = 0; c < 3; ++c) {
        out.points[i][c] += noise == NoiseModel::Uniform ? uniform(rng, -half_width, half_width)
                                                         : gaussian_offset(rng, spec.noise_n);
      }
    }
  }

  if (spec.kind == Perturbation::A9) {
    if (spec.bump_center >= out.size()) throw std::invalid_argument("perturb: bump center out of range");
    const Point3 center = out.points[spec.bump_center];
    const Vec3 n_center = surface_normal(center, surface);
    const auto [t1, t2] = orthonormal_basis(n_center);
    const Eigen::Matrix2d precision = spec.bump_covariance.inverse();
    for (Point3& p : out.points) {
      const Vec3 n = surface_normal(p, surface);
      if (n.dot(n_center) <= 0.0) continue;  // far side of a closed surface
      const Vec3 d = p - center;
      const Eigen::Vector2d uv(d.dot(t1), d.dot(t2));
      p += spec.bump_amplitude * std::exp(-0.5 * uv.dot(precision * uv)) * n;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground truth

std::size_t GroundTruthVector::expected_length(Kind kind) noexcept {
  switch (kind) {
    case Kind::Plane: return 7;
    case Kind::Cylinder: return 8;
    case Kind::Sphere: return 5;
    case Kind::Cone: return 8;
    case Kind::Torus: return 9;
  }
  return 0;
}

GroundTruthVector GroundTruthVector::encode(const PrimitiveParams& prim) {
  std::vector<double> v{static_cast<double>(code(kind_of(prim)))};
  auto push = [&v](const Vec3& x) { v.insert(v.end(), {x.x(), x.y(), x.z()}); };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PlaneParams>) {
          push(p.normal);
          push(p.point);
        } else if constexpr (std::is_same_v<T, CylinderParams>) {
          v.push_back(p.radius);
          push(p.axis);
          push(p.axis_point);
        } else if constexpr (std::is_same_v<T, SphereParams>) {
          v.push_back(p.radius);
          push(p.center);
        } else if constexpr (std::is_same_v<T, ConeParams>) {
          v.push_back(p.half_aperture);
          push(p.axis);
          push(p.vertex);
        } else {
          v.push_back(p.radius_first);
          v.push_back(p.radius_second);
          push(p.axis);
          push(p.center);
        }
      },
      prim);
  return GroundTruthVector(std::move(v));
}

GroundTruthVector GroundTruthVector::from_values(std::vector<double> values) {
  if (values.empty()) throw FormatError("ground-truth vector is empty");
  const double c = values.front();
  if (!(c >= 1.0 && c <= 5.0) || c != std::floor(c))
    throw FormatError("ground-truth kind code must be an integer in 1..5, got " + format_real(c));
  const Kind kind = kind_from_code(static_cast<int>(c));
  const std::size_t expected = expected_length(kind);
  if (values.size() != expected) {
    throw FormatError("ground-truth vector for " + std::string(kind_name(kind)) + " must have " +
                      std::to_string(expected) + " entries (expected " + std::to_string(expected) +
                      "), got " + std::to_string(values.size()));
  }
  for (double x : values)
    if (!std::isfinite(x)) throw FormatError("ground-truth vector contains a non-finite value");
  return GroundTruthVector(std::move(values));
}

PrimitiveParams GroundTruthVector::decode() const {
  const auto& v = values_;
  auto vec = [&v](std::size_t at) { return Vec3(v[at], v[at + 1], v[at + 2]); };
  PrimitiveParams prim;
  try {
    switch (kind()) {
      case Kind::Plane: prim = PlaneParams{canonicalize_axis(vec(1)), vec(4)}; break;
      case Kind::Cylinder: prim = CylinderParams{v[1], canonicalize_axis(vec(2)), vec(5)}; break;
      case Kind::Sphere: prim = SphereParams{v[1], vec(2)}; break;
      case Kind::Cone: prim = ConeParams{v[1], canonicalize_axis(vec(2)), vec(5)}; break;
      case Kind::Torus: prim = TorusParams{v[1], v[2], canonicalize_axis(vec(3)), vec(6)}; break;
    }
    validate(prim);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid ground-truth vector: ") + e.what());
  }
  return prim;
}

// ---------------------------------------------------------------------------
// Random segments

PrimitiveParams random_params(Kind kind, Rng& rng) {
  switch (kind) {
    case Kind::Plane: return PlaneParams{};
    case Kind::Cylinder: return CylinderParams{uniform(rng, 0.5, 3.0), UnitVector3{}, Point3::Zero()};
    case Kind::Sphere: return SphereParams{uniform(rng, 0.5, 3.0), Point3::Zero()};
    case Kind::Cone: return ConeParams{uniform(rng, 10.0, 75.0) * kDegree, UnitVector3{}, Point3::Zero()};
    case Kind::Torus: {
      const double first = uniform(rng, 0.5, 3.0);
      return TorusParams{first, uniform(rng, 0.1, 0.9 * first), UnitVector3{}, Point3::Zero()};
    }
  }
  throw std::invalid_argument("random_params: unknown kind");
}

PrimitiveParams random_params(Kind kind, std::uint64_t seed) {
  Rng rng(seed);
  return random_params(kind, rng);
}

Segment generate_segment(Kind kind, std::uint64_t seed, std::size_t point_count, const SegmentOptions& options) {
  if (point_count < 100) throw std::invalid_argument("generate_segment: point_count must be at least 100");
  Rng rng(seed);
  Segment seg;
  const PrimitiveParams canonical = random_params(kind, rng);
  const bool unbounded = kind == Kind::Plane || kind == Kind::Cylinder || kind == Kind::Cone;
  seg.extent = unbounded ? uniform(rng, 1.0, 4.0) : 0.0;
  const auto needed = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(point_count)));

  PointCloud cut;
  bool ok = false;
  for (int attempt = 0; attempt < options.max_attempts && !ok; ++attempt) {
    cut = sample_surface(canonical, point_count, rng, seg.extent);
    seg.cuts.clear();
    const int cuts = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int c = 0; c < cuts; ++c) {
      Vec3 n = random_unit(rng);
      const Point3 anchor = cut.points[std::uniform_int_distribution<std::size_t>(0, cut.size() - 1)(rng)];
      std::vector<Point3> above;
      std::vector<Point3> below;
      for (const Point3& p : cut.points) (n.dot(p - anchor) >= 0.0 ? above : below).push_back(p);
      if (above.size() >= below.size()) {
        cut.points = std::move(above);
      } else {
        cut.points = std::move(below);
        n = -n;
      }
      seg.cuts.push_back(HalfSpace{n, anchor});
    }
    ok = cut.size() >= needed;
  }
  if (!ok) throw GenerationError("generate_segment: cuts left fewer than 20% of the points after retries");

  const RigidTransform motion = RigidTransform::random(rng, options.translation_scale);
  seg.cloud = apply_transform(cut, motion);
  seg.truth = transform_params(canonical, motion);
  for (HalfSpace& h : seg.cuts) h = HalfSpace{motion.apply_direction(h.normal), motion.apply(h.anchor)};

  // Reference points near the data: a cloud point for planes, the axis foot of
  // the centroid for cylinders.
  const Point3 c = centroid(seg.cloud.points);
  if (auto* plane = std::get_if<PlaneParams>(&seg.truth)) {
    const auto nearest = std::min_element(seg.cloud.points.begin(), seg.cloud.points.end(),
                                          [&](const Point3& a, const Point3& b) {
                                            return (a - c).squaredNorm() < (b - c).squaredNorm();
                                          });
    plane->point = *nearest;
  } else if (auto* cyl = std::get_if<CylinderParams>(&seg.truth)) {
    const Vec3& a = cyl->axis;
    cyl->axis_point += (c - cyl->axis_point).dot(a) * a;
  }
  seg.gt = GroundTruthVector::encode(seg.truth);
  return seg;
}

// ---------------------------------------------------------------------------
// Text formats

std::string format_real(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("format_real: conversion failed");
  return std::string(buf.data(), ptr);
}

std::string format_cloud_txt(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.size() * 64);
  for (const Point3& p : cloud.points) {
    out += format_real(p.x());
    out += ' ';
    out += format_real(p.y());
    out += ' ';
    out += format_real(p.z());
    out += '\n';
  }
  return out;
}

PointCloud parse_cloud_txt(std::string_view text) {
  PointCloud cloud;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = split_whitespace(lines[i]);
    if (tokens.size() != 3)
      throw ParseError(i + 1, "expected 3 coordinates, found " + std::to_string(tokens.size()));
    Point3 p;
    for (int c = 0; c < 3; ++c) {
      if (!parse_real(tokens[static_cast<std::size_t>(c)], p[c]))
        throw ParseError(i + 1, "not a finite number: '" + std::string(tokens[static_cast<std::size_t>(c)]) + "'");
    }
    cloud.points.push_back(p);
  }
  if (cloud.empty()) throw FormatError("point cloud file is empty");
  return cloud;
}

void write_cloud_txt(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file(path, format_cloud_txt(cloud));
}

PointCloud read_cloud_txt(const std::filesystem::path& path) {
  PointCloud cloud = parse_cloud_txt(read_file(path));
  cloud.id = path.stem().string();
  return cloud;
}

std::string format_gt_txt(const GroundTruthVector& gt) {
  std::string out;
  for (double v : gt.values()) {
    out += format_real(v);
    out += '\n';
  }
  return out;
}

GroundTruthVector parse_gt_txt(std::string_view text) {
  std::vector<double> values;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tokens = split_whitespace(lines[i]);
    if (tokens.size() != 1) throw ParseError(i + 1, "expected one scalar per line");
    double v = 0.0;
    if (!parse_real(tokens.front(), v)) throw ParseError(i + 1, "not a finite number: '" + std::string(tokens.front()) + "'");
    values.push_back(v);
  }
  return GroundTruthVector::from_values(std::move(values));
}

void write_gt_txt(const std::filesystem::path& path, const GroundTruthVector& gt) {
  write_file(path, format_gt_txt(gt));
}

GroundTruthVector read_gt_txt(const std::filesystem::path& path) { return parse_gt_txt(read_file(path)); }

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::string out = "file,kind,perturbation,seed\n";
  for (const auto& r : rows) {
    out += r.file + ',' + std::to_string(r.kind) + ',' + r.perturbation + ',' + std::to_string(r.seed) + '\n';
  }
  write_file(path, out);
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty() || lines.front() != "file,kind,perturbation,seed")
    throw FormatError(path.string() + ": manifest header must be 'file,kind,perturbation,seed'");
  std::vector<ManifestRow> rows;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss{std::string(lines[i])};
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) throw ParseError(i + 1, "manifest rows need 4 fields");
    ManifestRow row;
    row.file = fields[0];
    const auto& k = fields[1];
    const auto& s = fields[3];
    if (std::from_chars(k.data(), k.data() + k.size(), row.kind).ec != std::errc{})
      throw ParseError(i + 1, "bad kind code '" + k + "'");
    if (std::from_chars(s.data(), s.data() + s.size(), row.seed).ec != std::errc{})
      throw ParseError(i + 1, "bad seed '" + s + "'");
    row.perturbation = fields[2];
    if (!seen.insert(row.file).second) throw ParseError(i + 1, "duplicate file entry '" + row.file + "'");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace primfit

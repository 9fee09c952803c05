// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "primfit/datagen.hpp"
#include "primfit/errors.hpp"
#include "primfit/evalkit.hpp"
#include "primfit/fitters.hpp"
#include "primfit/hough.hpp"
#include "primfit/least_squares.hpp"
#include "primfit/recognize.hpp"

using namespace primfit;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;
constexpr std::uint64_t kSeed = 20240611;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double line_angle(const Vec3& a, const Vec3& b) {
  return std::acos(std::min(1.0, std::abs(a.normalized().dot(b.normalized()))));
}

std::size_t point_count(std::uint64_t seed) {
  Rng rng(seed);
  return static_cast<std::size_t>(uniform(rng, 1000.0, 3001.0));
}

Segment segment(Kind kind, std::uint64_t salt, std::uint64_t i) {
  const std::uint64_t seed = derive_seed(kSeed, {salt, static_cast<std::uint64_t>(code(kind)), i});
  return generate_segment(kind, seed, point_count(seed ^ 0x9e3779b97f4a7c15ULL));
}

// ---------------------------------------------------------------------------

Verdict clean_recovery() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  int failures = 0;
  double worst_plane = 0, worst_sphere = 0, worst_cyl_r = 0, worst_cyl_a = 0, worst_cone_a = 0, worst_cone_v = 0,
         worst_torus = 0;
  for (Kind kind : kAllKinds) {
    for (std::uint64_t i = 0; i < 100; ++i) {
      const Segment seg = segment(kind, 1, i);
      const double l = bbox_diagonal(seg.cloud);
      bool ok = true;
      try {
        const FitOutcome fit = fit_family(kind, seg.cloud, estimate_normals(seg.cloud));
        switch (kind) {
          case Kind::Plane: {
            const double a = line_angle(std::get<PlaneParams>(fit.params).normal, std::get<PlaneParams>(seg.truth).normal);
            worst_plane = std::max(worst_plane, a);
            ok = a <= 0.5 * kDeg;
            break;
          }
          case Kind::Sphere: {
            const double t = std::get<SphereParams>(seg.truth).radius;
            const double e = std::abs(std::get<SphereParams>(fit.params).radius - t) / t;
            worst_sphere = std::max(worst_sphere, e);
            ok = e <= 1e-6;
            break;
          }
          case Kind::Cylinder: {
            const auto& f = std::get<CylinderParams>(fit.params);
            const auto& t = std::get<CylinderParams>(seg.truth);
            const double e = std::abs(f.radius - t.radius) / t.radius;
            const double a = line_angle(f.axis, t.axis);
            worst_cyl_r = std::max(worst_cyl_r, e);
            worst_cyl_a = std::max(worst_cyl_a, a);
            ok = e <= 0.01 && a <= 1 * kDeg;
            break;
          }
          case Kind::Cone: {
            const auto& f = std::get<ConeParams>(fit.params);
            const auto& t = std::get<ConeParams>(seg.truth);
            const double a = std::abs(f.half_aperture - t.half_aperture);
            const double d = (f.vertex - t.vertex).norm() / l;
            worst_cone_a = std::max(worst_cone_a, a);
            worst_cone_v = std::max(worst_cone_v, d);
            ok = a <= 1 * kDeg && d <= 0.01;
            break;
          }
          case Kind::Torus: {
            const auto& f = std::get<TorusParams>(fit.params);
            const auto& t = std::get<TorusParams>(seg.truth);
            const double e = std::max(std::abs(f.radius_first - t.radius_first) / t.radius_first,
                                      std::abs(f.radius_second - t.radius_second) / t.radius_second);
            worst_torus = std::max(worst_torus, e);
            ok = e <= 0.02;
            break;
          }
        }
      } catch (const Error&) {
        ok = false;
      }
      if (!ok) ++failures;
    }
  }
  const double dt = seconds_since(t0);
  v.pass = failures == 0 && dt <= 120.0;
  v.detail << "500 segments, " << failures << " outside tolerance; worst plane " << worst_plane / kDeg
           << " deg, sphere r " << worst_sphere << " rel, cylinder r " << worst_cyl_r << " rel / axis "
           << worst_cyl_a / kDeg << " deg, cone alpha " << worst_cone_a / kDeg << " deg / vertex " << worst_cone_v
           << " l, torus " << worst_torus << " rel; " << dt << " s";
  return v;
}

// ---------------------------------------------------------------------------

struct Classified {
  PointCloud cloud;
  Segment seg;
  ClassifiedFit fit;
  bool ok = false;
};

struct Batch {
  std::vector<Classified> items;
  ConfusionMatrix cm;
  double seconds = 0.0;
};

Batch classify_batch(Perturbation pert, std::size_t per_class) {
  Batch b;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<int, int>> pairs;
  for (Kind kind : kAllKinds) {
    for (std::uint64_t i = 0; i < per_class; ++i) {
      Classified c;
      c.seg = segment(kind, 2, i);
      Rng rng(derive_seed(kSeed, {3, static_cast<std::uint64_t>(code(kind)), i}));
      const PerturbationSpec spec = draw_perturbation(pert, c.seg.cloud, rng);
      c.cloud = perturb(c.seg.cloud, spec, c.seg.truth, rng());
      int predicted = 0;
      try {
        c.fit = classify(c.cloud);
        c.ok = true;
        predicted = code(c.fit.kind);
      } catch (const ClassificationError&) {
        predicted = code(kind) % 5 + 1;  // counted as a miss
      }
      pairs.emplace_back(code(kind), predicted);
      b.items.push_back(std::move(c));
    }
  }
  b.cm = confusion_matrix(pairs);
  b.seconds = seconds_since(t0);
  return b;
}

double macro_acc(const ConfusionMatrix& cm) { return *class_metrics(cm).macro_value(Metric::ACC); }

Verdict clean_classification(const Batch& clean) {
  Verdict v;
  const double acc = macro_acc(clean.cm);
  v.pass = acc >= 0.95 && clean.seconds <= 300.0;
  v.detail << "macro ACC " << acc << " on " << clean.cm.total() << " clean clouds (>= 0.95), " << clean.seconds << " s";
  return v;
}

Verdict noise_ordering(const Batch& clean, const Batch& noisy) {
  Verdict v;
  const double a0 = macro_acc(clean.cm), a2 = macro_acc(noisy.cm);
  v.pass = a2 <= a0 && a2 >= 0.85;
  v.detail << "macro ACC A0 " << a0 << ", A2 " << a2 << " (A2 <= A0 and A2 >= 0.85)";
  return v;
}

Verdict measure_sanity(const Batch& clean, const Batch& noisy) {
  Verdict v;
  std::size_t pairs = 0, violations = 0;
  for (const Batch* b : {&clean, &noisy})
    for (const Classified& c : b->items) {
      if (!c.ok) continue;
      ++pairs;
      if (!(directed_hausdorff(c.cloud, c.fit.params) >= mfe(c.cloud, c.fit.params) * bbox_diagonal(c.cloud)))
        ++violations;
    }
  double worst_truth = 0.0;
  std::vector<double> clean_mfe;
  for (const Classified& c : clean.items) {
    worst_truth = std::max(worst_truth, mfe(c.seg.cloud, c.seg.truth));
    if (c.ok) clean_mfe.push_back(c.fit.chosen_mfe());
  }
  const double q2 = clean_mfe.empty() ? INFINITY : summary_stats(clean_mfe).q2;
  v.pass = violations == 0 && worst_truth <= 1e-9 && q2 <= 1e-2;
  v.detail << pairs << " pairs, " << violations << " with dHaus < MFE*l; max MFE on ground truth " << worst_truth
           << "; clean MFE Q2 " << q2;
  return v;
}

// ---------------------------------------------------------------------------

Verdict metric_oracles() {
  Verdict v;
  Rng rng(kSeed + 5);
  std::size_t mismatches = 0;
  for (int run = 0; run < 1000; ++run) {
    const auto n = static_cast<std::size_t>(uniform(rng, 1.0, 501.0));
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      const int t = static_cast<int>(uniform(rng, 1.0, 6.0));
      pairs.emplace_back(t, uniform(rng, 0.0, 1.0) < 0.6 ? t : static_cast<int>(uniform(rng, 1.0, 6.0)));
    }
    const ClassMetrics m = class_metrics(confusion_matrix(pairs));
    for (int cls = 1; cls <= 5; ++cls) {
      std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
      for (const auto& [t, p] : pairs) {
        if (t == cls && p == cls) ++tp;
        else if (p == cls) ++fp;
        else if (t == cls) ++fn;
        else ++tn;
      }
      auto ratio = [](std::uint64_t a, std::uint64_t b) {
        return b ? std::optional(static_cast<double>(a) / static_cast<double>(b)) : std::nullopt;
      };
      const MetricRow expected = {ratio(tp, tp + fp), ratio(tn, tn + fn), ratio(tp, tp + fn), ratio(tn, tn + fp),
                                  ratio(tp + tn, n)};
      if (m.per_class[static_cast<std::size_t>(cls - 1)] != expected) ++mismatches;
    }
  }
  double worst = 0.0;
  for (int run = 0; run < 1000; ++run) {
    std::vector<double> x(static_cast<std::size_t>(uniform(rng, 1.0, 300.0)));
    for (double& e : x) e = std::exp(uniform(rng, -9.0, 1.0));
    const ErrorStats s = summary_stats(x);
    std::sort(x.begin(), x.end());
    auto q = [&](double p) {
      const double h = p * static_cast<double>(x.size() - 1);
      const auto lo = static_cast<std::size_t>(h);
      return lo + 1 < x.size() ? x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]) : x.back();
    };
    worst = std::max({worst, std::abs(s.q1 - q(0.25)), std::abs(s.q2 - q(0.5)), std::abs(s.q3 - q(0.75))});
  }
  v.pass = mismatches == 0 && worst <= 1e-12;
  v.detail << "1000 label sets, " << mismatches << " class rows differ from the counting oracle; quartile error "
           << worst;
  return v;
}

Verdict jacobians() {
  Verdict v;
  double worst = 0.0;
  for (Kind kind : kAllKinds) {
    Rng rng(kSeed + 10 + static_cast<std::uint64_t>(code(kind)));
    for (int config = 0; config < 50; ++config) {
      PrimitiveParams prim = random_params(kind, rng);
      prim = transform_params(prim, RigidTransform::random(rng, 3.0));
      const auto model = make_residual_model(prim);
      PointCloud cloud = sample_surface(prim, 30, rng(), 1.5);
      for (Point3& p : cloud.points) p += Vec3(uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1));
      Eigen::VectorXd x = model->initial();
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += uniform(rng, -0.05, 0.05);
      Eigen::VectorXd r;
      Eigen::MatrixXd j;
      model->evaluate(x, cloud.points, r, &j);
      const double h = 1e-6;
      for (Eigen::Index c = 0; c < x.size(); ++c) {
        Eigen::VectorXd xp = x, xm = x, rp, rm;
        xp[c] += h;
        xm[c] -= h;
        model->evaluate(xp, cloud.points, rp, nullptr);
        model->evaluate(xm, cloud.points, rm, nullptr);
        for (Eigen::Index i = 0; i < r.size(); ++i)
          worst = std::max(worst, std::abs((rp[i] - rm[i]) / (2 * h) - j(i, c)) / std::max(1.0, std::abs(j(i, c))));
      }
    }
  }
  v.pass = worst <= 1e-4;
  v.detail << "250 configurations, worst relative error " << worst;
  return v;
}

Verdict format_fidelity() {
  Verdict v;
  std::size_t differing = 0, layout_errors = 0;
  for (Kind kind : kAllKinds) {
    for (std::uint64_t i = 0; i < 20; ++i) {
      const Segment seg = segment(kind, 4, i);
      const std::string cloud1 = format_cloud_txt(seg.cloud);
      if (format_cloud_txt(parse_cloud_txt(cloud1)) != cloud1) ++differing;
      const std::string gt1 = format_gt_txt(seg.gt);
      const GroundTruthVector back = parse_gt_txt(gt1);
      if (format_gt_txt(back) != gt1) ++differing;
      if (back.values().size() != GroundTruthVector::expected_length(kind)) ++layout_errors;
      // One entry too many and one too few must both be rejected.
      std::vector<double> longer = seg.gt.values();
      longer.push_back(0.0);
      std::vector<double> shorter = seg.gt.values();
      shorter.pop_back();
      for (auto* bad : {&longer, &shorter}) {
        try {
          GroundTruthVector::from_values(*bad);
          ++layout_errors;
        } catch (const FormatError&) {
        }
      }
    }
  }
  const bool lengths = GroundTruthVector::expected_length(Kind::Plane) == 7 &&
                       GroundTruthVector::expected_length(Kind::Cylinder) == 8 &&
                       GroundTruthVector::expected_length(Kind::Sphere) == 5 &&
                       GroundTruthVector::expected_length(Kind::Cone) == 8 &&
                       GroundTruthVector::expected_length(Kind::Torus) == 9;
  v.pass = differing == 0 && layout_errors == 0 && lengths;
  v.detail << "100 clouds and ground truths, " << differing << " round-trips differ, " << layout_errors
           << " layout violations; lengths 7/8/5/8/9 " << (lengths ? "enforced" : "WRONG");
  return v;
}

// ---------------------------------------------------------------------------

bool hesse_agrees(const HoughPlane& h, const PlaneParams& ref) {
  constexpr double pi = 3.14159265358979323846;
  Vec3 n = ref.normal.vec();
  if (std::atan2(n.y(), n.x()) < 0.0) n = -n;
  double phi = std::atan2(n.y(), n.x());
  if (phi >= pi) phi = 0.0;
  const double theta = std::acos(std::clamp(n.z(), -1.0, 1.0));
  const double rho = n.dot(ref.point - h.origin);
  const double s = std::sin(h.theta);
  const bool direct = std::abs(theta - h.theta) <= h.theta_width && s * std::abs(phi - h.phi) <= h.phi_width &&
                      std::abs(rho - h.rho) <= h.rho_width;
  const bool wrapped = std::abs(pi - theta - h.theta) <= h.theta_width &&
                       s * std::min(std::abs(phi - pi - h.phi), std::abs(phi + pi - h.phi)) <= h.phi_width &&
                       std::abs(-rho - h.rho) <= h.rho_width;
  return direct || wrapped;
}

Verdict hough_agreement() {
  Verdict v;
  std::size_t plane_misses = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Segment seg = segment(Kind::Plane, 5, i);
    const HoughPlane h = hough_plane(seg.cloud);
    if (!hesse_agrees(h, std::get<PlaneParams>(fit_plane(seg.cloud).params))) ++plane_misses;
  }
  // MFE is relative to l; below this both fits are exact up to roundoff.
  constexpr double kRoundoff = 1e-12;
  std::size_t worse = 0, strict = 0, failed = 0;
  double worst_ratio = 0.0, worst_hough = 0.0;
  for (Kind kind : {Kind::Cylinder, Kind::Sphere, Kind::Cone, Kind::Torus}) {
    for (std::uint64_t i = 0; i < 25; ++i) {
      const Segment seg = segment(kind, 6, i);
      const NormalField nf = estimate_normals(seg.cloud);
      try {
        const double ls = mfe(seg.cloud, fit_family(kind, seg.cloud, nf).params);
        const double hough = mfe(seg.cloud, hough_fit(kind, seg.cloud, nf));
        worst_hough = std::max(worst_hough, hough);
        if (ls > 0.0) worst_ratio = std::max(worst_ratio, hough / ls);
        if (!(hough <= 2.0 * ls)) ++strict;
        if (!(hough <= 2.0 * ls + kRoundoff)) ++worse;
      } catch (const Error&) {
        ++failed;
      }
    }
  }
  v.pass = plane_misses == 0 && worse == 0 && failed == 0;
  v.detail << plane_misses << " of 50 planes outside one bin; " << worse << " of 100 curved segments with Hough MFE > 2x "
           << "least squares + " << kRoundoff << " (" << strict << " exceed the bare ratio, worst " << worst_ratio
           << "; worst Hough MFE " << worst_hough << "), " << failed << " failed";
  return v;
}

}  // namespace

int main() {
  std::vector<Verdict> verdicts;
  auto report = [&](int n, Verdict v) {
    std::printf("criterion %d: %s %s\n", n, v.pass ? "PASS" : "FAIL", v.detail.str().c_str());
    std::fflush(stdout);
    verdicts.push_back(std::move(v));
  };
  report(1, clean_recovery());
  const Batch clean = classify_batch(Perturbation::A0, 20);
  const Batch noisy = classify_batch(Perturbation::A2, 20);
  report(2, clean_classification(clean));
  report(3, noise_ordering(clean, noisy));
  report(4, measure_sanity(clean, noisy));
  report(5, metric_oracles());
  report(6, jacobians());
  report(7, format_fidelity());
  report(8, hough_agreement());
  const auto failed = std::count_if(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return !v.pass; });
  std::printf("acceptance: %zu of %zu criteria passed\n", verdicts.size() - static_cast<std::size_t>(failed),
              verdicts.size());
  return failed == 0 ? 0 : 1;
}

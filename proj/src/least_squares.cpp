#include "primfit/least_squares.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace primfit {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Axis a(theta, phi) = F (cos t cos p, cos t sin p, sin t) with F = [a0 u v].
struct AxisChart {
  Mat3 frame;

  explicit AxisChart(const Vec3& a0) {
    const auto [u, v] = orthonormal_basis(a0);
    frame.col(0) = a0;
    frame.col(1) = u;
    frame.col(2) = v;
  }

  Vec3 axis(double t, double p) const {
    return frame * Vec3(std::cos(t) * std::cos(p), std::cos(t) * std::sin(p), std::sin(t));
  }
  Vec3 d_theta(double t, double p) const {
    return frame * Vec3(-std::sin(t) * std::cos(p), -std::sin(t) * std::sin(p), std::cos(t));
  }
  Vec3 d_phi(double t, double p) const {
    return frame * Vec3(-std::cos(t) * std::sin(p), std::cos(t) * std::cos(p), 0.0);
  }
};

// Radial unit vector and distance of w from the line through 0 along a.
struct Radial {
  double h;
  double rho;
  Vec3 dir;
};

Radial radial(const Vec3& w, const Vec3& a) {
  const double h = w.dot(a);
  const Vec3 q = w - h * a;
  const double rho = q.norm();
  return {h, rho, rho > 0.0 ? Vec3(q / rho) : Vec3::Zero()};
}

class PlaneModel final : public ResidualModel {
 public:
  explicit PlaneModel(const PlaneParams& p) : chart_(p.normal), anchor_(p.point) {}
  Kind kind() const noexcept override { return Kind::Plane; }
  Eigen::Index dimension() const noexcept override { return 3; }
  VectorXd initial() const override { return Eigen::Vector3d(0.0, 0.0, chart_.frame.col(0).dot(anchor_)); }

  void evaluate(const VectorXd& x, std::span<const Point3> pts, VectorXd& r, MatrixXd* J) const override {
    const Vec3 a = chart_.axis(x[0], x[1]);
    const Vec3 at = chart_.d_theta(x[0], x[1]);
    const Vec3 ap = chart_.d_phi(x[0], x[1]);
    r.resize(static_cast<Eigen::Index>(pts.size()));
    if (J) J->resize(r.size(), 3);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const Point3& p = pts[static_cast<std::size_t>(i)];
      r[i] = a.dot(p) - x[2];
      if (J) J->row(i) << at.dot(p), ap.dot(p), -1.0;
    }
  }

  PrimitiveParams decode(const VectorXd& x) const override {
    const Vec3 a = chart_.axis(x[0], x[1]);
    return PlaneParams{canonicalize_axis(a), anchor_ - (a.dot(anchor_) - x[2]) * a};
  }

 private:
  AxisChart chart_;
  Point3 anchor_;
};

class SphereModel final : public ResidualModel {
 public:
  explicit SphereModel(const SphereParams& s) : start_(s) {}
  Kind kind() const noexcept override { return Kind::Sphere; }
  Eigen::Index dimension() const noexcept override { return 4; }
  VectorXd initial() const override {
    VectorXd x(4);
    x << start_.center, start_.radius;
    return x;
  }

  void evaluate(const VectorXd& x, std::span<const Point3> pts, VectorXd& r, MatrixXd* J) const override {
    const Vec3 c = x.head<3>();
    r.resize(static_cast<Eigen::Index>(pts.size()));
    if (J) J->resize(r.size(), 4);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const Vec3 w = pts[static_cast<std::size_t>(i)] - c;
      const double d = w.norm();
      r[i] = d - x[3];
      if (J) {
        const Vec3 g = d > 0.0 ? Vec3(-w / d) : Vec3::Zero();
        J->row(i) << g.transpose(), -1.0;
      }
    }
  }

  PrimitiveParams decode(const VectorXd& x) const override {
    return SphereParams{std::abs(x[3]), x.head<3>()};
  }

 private:
  SphereParams start_;
};

// x = (theta, phi, s, t, r); axis point = P0 + s u + t v.
class CylinderModel final : public ResidualModel {
 public:
  explicit CylinderModel(const CylinderParams& c) : chart_(c.axis), anchor_(c.axis_point), radius_(c.radius) {}
  Kind kind() const noexcept override { return Kind::Cylinder; }
  Eigen::Index dimension() const noexcept override { return 5; }
  VectorXd initial() const override {
    VectorXd x = VectorXd::Zero(5);
    x[4] = radius_;
    return x;
  }

  void evaluate(const VectorXd& x, std::span<const Point3> pts, VectorXd& r, MatrixXd* J) const override {
    const Vec3 u = chart_.frame.col(1);
    const Vec3 v = chart_.frame.col(2);
    const Vec3 a = chart_.axis(x[0], x[1]);
    const Vec3 at = chart_.d_theta(x[0], x[1]);
    const Vec3 ap = chart_.d_phi(x[0], x[1]);
    const Point3 base = anchor_ + x[2] * u + x[3] * v;
    r.resize(static_cast<Eigen::Index>(pts.size()));
    if (J) J->resize(r.size(), 5);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const Vec3 w = pts[static_cast<std::size_t>(i)] - base;
      const Radial q = radial(w, a);
      r[i] = q.rho - x[4];
      if (J) {
        const Vec3 da = -q.h * q.dir;  // d rho / d axis
        J->row(i) << da.dot(at), da.dot(ap), -q.dir.dot(u), -q.dir.dot(v), -1.0;
      }
    }
  }

  PrimitiveParams decode(const VectorXd& x) const override {
    const Point3 base = anchor_ + x[2] * chart_.frame.col(1) + x[3] * chart_.frame.col(2);
    return CylinderParams{std::abs(x[4]), canonicalize_axis(chart_.axis(x[0], x[1])), base};
  }

 private:
  AxisChart chart_;
  Point3 anchor_;
  double radius_;
};

// x = (theta, phi, vertex(3), alpha). Double-napped: residual
// rho cos(alpha) - |h| sin(alpha).
class ConeModel final : public ResidualModel {
 public:
  explicit ConeModel(const ConeParams& c) : chart_(c.axis), start_(c) {}
  Kind kind() const noexcept override { return Kind::Cone; }
  Eigen::Index dimension() const noexcept override { return 6; }
  VectorXd initial() const override {
    VectorXd x(6);
    x << 0.0, 0.0, start_.vertex, start_.half_aperture;
    return x;
  }

  void evaluate(const VectorXd& x, std::span<const Point3> pts, VectorXd& r, MatrixXd* J) const override {
    const Vec3 a = chart_.axis(x[0], x[1]);
    const Vec3 at = chart_.d_theta(x[0], x[1]);
    const Vec3 ap = chart_.d_phi(x[0], x[1]);
    const Vec3 vertex = x.segment<3>(2);
    const double sa = std::sin(x[5]);
    const double ca = std::cos(x[5]);
    r.resize(static_cast<Eigen::Index>(pts.size()));
    if (J) J->resize(r.size(), 6);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const Vec3 w = pts[static_cast<std::size_t>(i)] - vertex;
      const Radial q = radial(w, a);
      const double side = q.h < 0.0 ? -1.0 : 1.0;
      const double hs = side * q.h;
      r[i] = q.rho * ca - hs * sa;
      if (J) {
        const Vec3 dw = ca * q.dir - sa * side * a;
        const Vec3 da = -ca * q.h * q.dir - sa * side * w;
        J->row(i) << da.dot(at), da.dot(ap), -dw.transpose(), -q.rho * sa - hs * ca;
      }
    }
  }

  PrimitiveParams decode(const VectorXd& x) const override {
    constexpr double kEdge = 1e-9;
    const double alpha = std::clamp(x[5], kEdge, std::numbers::pi / 2 - kEdge);
    return ConeParams{alpha, canonicalize_axis(chart_.axis(x[0], x[1])), x.segment<3>(2)};
  }

 private:
  AxisChart chart_;
  ConeParams start_;
};

// x = (theta, phi, center(3), radius_first, radius_second).
class TorusModel final : public ResidualModel {
 public:
  explicit TorusModel(const TorusParams& t) : chart_(t.axis), start_(t) {}
  Kind kind() const noexcept override { return Kind::Torus; }
  Eigen::Index dimension() const noexcept override { return 7; }
  VectorXd initial() const override {
    VectorXd x(7);
    x << 0.0, 0.0, start_.center, start_.radius_first, start_.radius_second;
    return x;
  }

  void evaluate(const VectorXd& x, std::span<const Point3> pts, VectorXd& r, MatrixXd* J) const override {
    const Vec3 a = chart_.axis(x[0], x[1]);
    const Vec3 at = chart_.d_theta(x[0], x[1]);
    const Vec3 ap = chart_.d_phi(x[0], x[1]);
    const Vec3 center = x.segment<3>(2);
    r.resize(static_cast<Eigen::Index>(pts.size()));
    if (J) J->resize(r.size(), 7);
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const Vec3 w = pts[static_cast<std::size_t>(i)] - center;
      const Radial q = radial(w, a);
      const double s = std::hypot(q.rho - x[5], q.h);
      r[i] = s - x[6];
      if (J) {
        const double g_rho = s > 0.0 ? (q.rho - x[5]) / s : 0.0;
        const double g_h = s > 0.0 ? q.h / s : 0.0;
        const Vec3 dw = g_rho * q.dir + g_h * a;
        const Vec3 da = -g_rho * q.h * q.dir + g_h * w;
        J->row(i) << da.dot(at), da.dot(ap), -dw.transpose(), -g_rho, -1.0;
      }
    }
  }

  PrimitiveParams decode(const VectorXd& x) const override {
    return TorusParams{x[5], std::abs(x[6]), canonicalize_axis(chart_.axis(x[0], x[1])),
                       x.segment<3>(2)};
  }

 private:
  AxisChart chart_;
  TorusParams start_;
};

}  // namespace

std::unique_ptr<ResidualModel> make_residual_model(const PrimitiveParams& start) {
  return std::visit(
      [](const auto& p) -> std::unique_ptr<ResidualModel> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PlaneParams>) return std::make_unique<PlaneModel>(p);
        else if constexpr (std::is_same_v<T, CylinderParams>) return std::make_unique<CylinderModel>(p);
        else if constexpr (std::is_same_v<T, SphereParams>) return std::make_unique<SphereModel>(p);
        else if constexpr (std::is_same_v<T, ConeParams>) return std::make_unique<ConeModel>(p);
        else return std::make_unique<TorusModel>(p);
      },
      start);
}

LmResult levenberg_marquardt(const ResidualModel& model, std::span<const Point3> points,
                             VectorXd x0, const LmOptions& options) {
  LmResult out;
  out.x = std::move(x0);
  VectorXd r;
  MatrixXd J;
  model.evaluate(out.x, points, r, &J);
  double cost = r.squaredNorm();
  out.initial_cost = cost;
  out.final_cost = cost;
  if (!std::isfinite(cost)) return out;

  const double floor = 1e-30 * static_cast<double>(std::max<std::size_t>(points.size(), 1));
  double lambda = options.initial_damping;
  VectorXd r_trial;

  while (out.iterations < options.max_iterations) {
    if (cost <= floor) {
      out.converged = true;
      break;
    }
    const MatrixXd A = J.transpose() * J;
    const VectorXd g = J.transpose() * r;
    const double diag_floor = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    while (!accepted) {
      MatrixXd damped = A;
      for (Eigen::Index k = 0; k < A.rows(); ++k) damped(k, k) += lambda * std::max(A(k, k), diag_floor);
      const VectorXd step = damped.ldlt().solve(-g);
      const VectorXd trial = out.x + step;
      double trial_cost = std::numeric_limits<double>::infinity();
      if (step.allFinite()) {
        model.evaluate(trial, points, r_trial, nullptr);
        trial_cost = r_trial.squaredNorm();
      }
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double rel = (cost - trial_cost) / cost;
        out.x = trial;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        model.evaluate(out.x, points, r, &J);
        accepted = true;
        ++out.iterations;
        if (rel < options.relative_tolerance) out.converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // No descent direction left: stationary point.
          out.converged = true;
          break;
        }
      }
    }
    if (out.converged || !accepted) break;
  }
  out.final_cost = cost;
  return out;
}

}  // namespace primfit

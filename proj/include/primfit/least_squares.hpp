#pragma once

// Geometric least squares for the five families: signed point-to-surface
// residuals with analytic Jacobians, and a damped Gauss-Newton driver.

#include <Eigen/Core>

#include <memory>
#include <span>

#include "primfit/geometry.hpp"

namespace primfit {

/// Signed point-to-surface residuals as a function of a flat parameter vector.
///
/// Axes are parameterized by two spherical angles in a frame whose first
/// column is the starting axis, so the starting point sits on the equator
/// (theta = phi = 0) away from the poles. Translational degrees of freedom
/// that leave a surface unchanged (sliding a cylinder along its own axis) are
/// removed by restricting them to the plane orthogonal to the starting axis.
class ResidualModel {
 public:
  virtual ~ResidualModel() = default;

  virtual Kind kind() const noexcept = 0;
  virtual Eigen::Index dimension() const noexcept = 0;
  /// Parameter vector of the primitive the model was built around.
  virtual Eigen::VectorXd initial() const = 0;
  /// Fills r (size n) and, when requested, the n x dimension() Jacobian.
  virtual void evaluate(const Eigen::VectorXd& x, std::span<const Point3> points, Eigen::VectorXd& r,
                        Eigen::MatrixXd* jacobian) const = 0;
  /// Primitive for parameter vector x with axes canonicalized. May return
  /// parameters violating variant invariants (e.g. a spindle torus); callers
  /// validate.
  virtual PrimitiveParams decode(const Eigen::VectorXd& x) const = 0;
};

std::unique_ptr<ResidualModel> make_residual_model(const PrimitiveParams& start);

struct LmOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-10;
  double initial_damping = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  double initial_cost = 0.0;  // sum of squared residuals
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt on sum r_i^2: damping x10 after a rejected step, /10
/// after an accepted one. Only cost-decreasing steps are accepted, so
/// final_cost <= initial_cost.
LmResult levenberg_marquardt(const ResidualModel& model, std::span<const Point3> points,
                             Eigen::VectorXd x0, const LmOptions& options = {});

}  // namespace primfit

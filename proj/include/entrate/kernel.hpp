#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace entrate {

using VecRef = Eigen::Ref<const Eigen::VectorXd>;
using MatRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Isotropic RBF kernel k(x, y) = exp(-|x - y|^2 / (2 l^2)) and the
/// derivatives the estimator needs. Throughout, delta = x - y and q = k(x, y);
/// D is a constant symmetric d x d matrix.
class RbfKernel {
 public:
  RbfKernel(double length_scale, int dim);

  double length_scale() const noexcept { return l_; }
  int dim() const noexcept { return dim_; }

  double k(const VecRef& x, const VecRef& y) const;

  /// (-delta / l^2) q
  Eigen::VectorXd grad_x(const VecRef& x, const VecRef& y) const;
  /// (+delta / l^2) q
  Eigen::VectorXd grad_y(const VecRef& x, const VecRef& y) const;

  /// (I / l^2 - delta delta^T / l^4) q
  Eigen::MatrixXd grad_x_grad_yT(const VecRef& x, const VecRef& y) const;

  /// tr[D grad_y grad_y^T k] = (delta^T D delta / l^4 - tr D / l^2) q
  double lap_y(const VecRef& x, const VecRef& y, const MatRef& D) const;

  /// grad_x of lap_y: q (2 D delta / l^4 + (tr D / l^2 - delta^T D delta / l^4) delta / l^2)
  Eigen::VectorXd grad_x_lap_y(const VecRef& x, const VecRef& y, const MatRef& D) const;

  /// tr[D grad_x grad_x^T] applied to lap_y:
  /// q ((delta^T D delta / l^4 - tr D / l^2)^2 + 2 tr(D^2) / l^4 - 4 delta^T D^2 delta / l^6)
  double lap_x_lap_y(const VecRef& x, const VecRef& y, const MatRef& D) const;

  // Allocation-free forms for the assembly loops. `delta` is x - y.
  double value_from_delta(const double* delta) const;
  void grad_x_grad_yT_from_delta(const double* delta, double q, double* out_col_major) const;
  void grad_x_lap_y_from_delta(const double* delta, double q, const MatRef& D, double* out) const;
  double lap_y_from_delta(const double* delta, double q, const MatRef& D) const;
  double lap_x_lap_y_from_delta(const double* delta, double q, const MatRef& D) const;

 private:
  double l_;
  double inv_l2_;
  int dim_;
};

/// Median pairwise distance over at most `max_points` evenly spaced columns.
double median_heuristic(const Eigen::MatrixXd& points, std::size_t max_points = 500);

}  // namespace entrate

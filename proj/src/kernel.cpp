#include "entrate/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "entrate/error.hpp"

namespace entrate {

RbfKernel::RbfKernel(double length_scale, int dim) : l_(length_scale), inv_l2_(0.0), dim_(dim) {
  if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
    throw InputError("kernel length scale must be positive and finite");
  }
  if (dim < 1) throw InputError("kernel dimension must be positive");
  inv_l2_ = 1.0 / (l_ * l_);
}

namespace {

void check_dims(const VecRef& x, const VecRef& y, int dim) {
  if (x.size() != dim || y.size() != dim) {
    throw DimensionMismatchError("kernel of dimension " + std::to_string(dim) + " got points of size " +
                                 std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
}

Eigen::VectorXd difference(const VecRef& x, const VecRef& y) { return x - y; }

}  // namespace

double RbfKernel::value_from_delta(const double* delta) const {
  double r2 = 0.0;
  for (int a = 0; a < dim_; ++a) r2 += delta[a] * delta[a];
  return std::exp(-0.5 * r2 * inv_l2_);
}

void RbfKernel::grad_x_grad_yT_from_delta(const double* delta, double q, double* out) const {
  const double a2 = inv_l2_ * inv_l2_;
  for (int b = 0; b < dim_; ++b) {
    for (int a = 0; a < dim_; ++a) {
      out[a + b * dim_] = ((a == b ? inv_l2_ : 0.0) - delta[a] * delta[b] * a2) * q;
    }
  }
}

double RbfKernel::lap_y_from_delta(const double* delta, double q, const MatRef& D) const {
  double quad = 0.0;
  double trace = 0.0;
  for (int a = 0; a < dim_; ++a) {
    trace += D(a, a);
    for (int b = 0; b < dim_; ++b) quad += delta[a] * D(a, b) * delta[b];
  }
  return (quad * inv_l2_ * inv_l2_ - trace * inv_l2_) * q;
}

void RbfKernel::grad_x_lap_y_from_delta(const double* delta, double q, const MatRef& D, double* out) const {
  double quad = 0.0;
  double trace = 0.0;
  for (int a = 0; a < dim_; ++a) {
    trace += D(a, a);
    for (int b = 0; b < dim_; ++b) quad += delta[a] * D(a, b) * delta[b];
  }
  const double a2 = inv_l2_ * inv_l2_;
  const double scalar = (trace * inv_l2_ - quad * a2) * inv_l2_;
  for (int a = 0; a < dim_; ++a) {
    double d_delta = 0.0;
    for (int b = 0; b < dim_; ++b) d_delta += D(a, b) * delta[b];
    out[a] = q * (2.0 * d_delta * a2 + scalar * delta[a]);
  }
}

double RbfKernel::lap_x_lap_y_from_delta(const double* delta, double q, const MatRef& D) const {
  double quad = 0.0;
  double trace = 0.0;
  double trace_sq = 0.0;
  double quad_sq = 0.0;  // delta^T D^2 delta = |D delta|^2
  for (int a = 0; a < dim_; ++a) {
    trace += D(a, a);
    double d_delta = 0.0;
    for (int b = 0; b < dim_; ++b) {
      quad += delta[a] * D(a, b) * delta[b];
      trace_sq += D(a, b) * D(b, a);
      d_delta += D(a, b) * delta[b];
    }
    quad_sq += d_delta * d_delta;
  }
  const double a2 = inv_l2_ * inv_l2_;
  const double lap = quad * a2 - trace * inv_l2_;
  return q * (lap * lap + 2.0 * trace_sq * a2 - 4.0 * quad_sq * a2 * inv_l2_);
}

double RbfKernel::k(const VecRef& x, const VecRef& y) const {
  check_dims(x, y, dim_);
  auto delta = difference(x, y);
  return value_from_delta(delta.data());
}

Eigen::VectorXd RbfKernel::grad_x(const VecRef& x, const VecRef& y) const {
  check_dims(x, y, dim_);
  auto delta = difference(x, y);
  return -inv_l2_ * value_from_delta(delta.data()) * delta;
}

Eigen::VectorXd RbfKernel::grad_y(const VecRef& x, const VecRef& y) const {
  check_dims(x, y, dim_);
  auto delta = difference(x, y);
  return inv_l2_ * value_from_delta(delta.data()) * delta;
}

Eigen::MatrixXd RbfKernel::grad_x_grad_yT(const VecRef& x, const VecRef& y) const {
  check_dims(x, y, dim_);
  auto delta = difference(x, y);
  Eigen::MatrixXd out(dim_, dim_);
  grad_x_grad_yT_from_delta(delta.data(), value_from_delta(delta.data()), out.data());
  return out;
}

double RbfKernel::lap_y(const VecRef& x, const VecRef& y, const MatRef& D) const {
  check_dims(x, y, dim_);
  auto delta = difference(x, y);
  return lap_y_from_delta(delta.data(), value_from_delta(delta.data()), D);
}

Eigen::VectorXd RbfKernel::grad_x_lap_y(const VecRef& x, const VecRef& y, const MatRef& D) const {
  check_dims(x, y, dim_);
  auto delta = difference(x, y);
  Eigen::VectorXd out(dim_);
  grad_x_lap_y_from_delta(delta.data(), value_from_delta(delta.data()), D, out.data());
  return out;
}

double RbfKernel::lap_x_lap_y(const VecRef& x, const VecRef& y, const MatRef& D) const {
  check_dims(x, y, dim_);
  auto delta = difference(x, y);
  return lap_x_lap_y_from_delta(delta.data(), value_from_delta(delta.data()), D);
}

double median_heuristic(const Eigen::MatrixXd& points, std::size_t max_points) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (n < 2) throw InputError("median heuristic needs at least two points");
  const std::size_t m = std::min(n, std::max<std::size_t>(max_points, 2));
  std::vector<Eigen::Index> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = static_cast<Eigen::Index>(i * n / m);

  std::vector<double> dist;
  dist.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) dist.push_back((points.col(idx[i]) - points.col(idx[j])).norm());
  }
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double med = *mid;
  if (dist.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(dist.begin(), mid));
  }
  if (!(med > 0.0)) throw InputError("median pairwise distance is zero (all points coincide)");
  return med;
}

}  // namespace entrate

#include "entrate/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "entrate/digest.hpp"
#include "entrate/error.hpp"

namespace entrate {

QuadratureGrid QuadratureGrid::simpson(double lo, double hi, std::size_t m) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw InputError("quadrature domain needs lo < hi");
  if (m < 3 || m % 2 == 0) throw InputError("Simpson grid needs an odd node count >= 3");
  QuadratureGrid grid;
  grid.lo = lo;
  grid.hi = hi;
  grid.m = m;
  grid.nodes.resize(m);
  grid.weights.resize(m);
  const double h = grid.step();
  for (std::size_t k = 0; k < m; ++k) {
    grid.nodes[k] = k + 1 == m ? hi : lo + static_cast<double>(k) * h;
    double w = (k == 0 || k + 1 == m) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    grid.weights[k] = w * h / 3.0;
  }
  return grid;
}

double QuadratureGrid::integrate(std::span<const double> values) const {
  if (values.size() != m) throw DimensionMismatchError("integrand has the wrong number of nodes");
  double sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) sum += weights[k] * values[k];
  return sum;
}

namespace {

std::vector<double> sample_drift(const DriftField& f, const QuadratureGrid& grid) {
  if (f.dim() != 1) throw DimensionMismatchError("the quadrature oracle is one-dimensional");
  std::vector<double> v(grid.m);
  for (std::size_t k = 0; k < grid.m; ++k) {
    v[k] = f.scalar(grid.nodes[k]);
    if (!std::isfinite(v[k])) throw NumericError("drift is not finite at x = " + format_double(grid.nodes[k]));
  }
  return v;
}

// int_lo^{x_k} f for every node: Simpson panels to even nodes, a three-point
// rule over the first half of the panel for odd nodes.
std::vector<double> cumulative_integral(const std::vector<double>& f, double h) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t k = 2; k < f.size(); k += 2) out[k] = out[k - 2] + h / 3.0 * (f[k - 2] + 4.0 * f[k - 1] + f[k]);
  for (std::size_t k = 1; k < f.size(); k += 2) out[k] = out[k - 1] + h / 12.0 * (5.0 * f[k - 1] + 8.0 * f[k] - f[k + 1]);
  return out;
}

}  // namespace

StationaryDensity1D stationary_density_1d(const DriftField& g, double sigma, const QuadratureGrid& grid,
                                          Boundary boundary) {
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  const auto gv = sample_drift(g, grid);
  const auto phi = cumulative_integral(gv, grid.step());

  if (boundary == Boundary::Periodic) {
    double scale = 0.0;
    for (std::size_t k = 0; k < grid.m; ++k) scale += grid.weights[k] * std::abs(gv[k]);
    if (std::abs(phi.back()) > 1e-8 * (1.0 + scale)) {
      throw InputError("drift integrates to " + format_double(phi.back()) +
                       " over the period; the periodic density needs zero net drift");
    }
  }

  StationaryDensity1D p;
  p.grid = grid;
  p.boundary = boundary;
  p.values.resize(grid.m);
  const double factor = 2.0 / (sigma * sigma);
  double peak = -HUGE_VAL;
  for (double v : phi) peak = std::max(peak, factor * v);
  for (std::size_t k = 0; k < grid.m; ++k) p.values[k] = std::exp(factor * phi[k] - peak);
  const double z = grid.integrate(p.values);
  for (double& v : p.values) v /= z;
  p.log_normalizer = peak + std::log(z);

  if (boundary == Boundary::Open) {
    const double top = *std::max_element(p.values.begin(), p.values.end());
    const double edge = std::max(p.values.front(), p.values.back());
    if (edge > kBoundaryMassTolerance * top) {
      p.warnings.push_back("density at the domain boundary is " + format_double(edge / top) +
                           " of its peak; widen [" + format_double(grid.lo) + ", " + format_double(grid.hi) + "]");
    }
  }
  return p;
}

double exact_rer(const StationaryDensity1D& density, const DriftField& g, const DriftField& r, double sigma) {
  const auto& grid = density.grid;
  const auto gv = sample_drift(g, grid);
  const auto rv = sample_drift(r, grid);
  std::vector<double> integrand(grid.m);
  for (std::size_t k = 0; k < grid.m; ++k) {
    const double diff = gv[k] - rv[k];
    integrand[k] = density.values[k] * diff * diff;
  }
  return 0.5 * grid.integrate(integrand) / (sigma * sigma);
}

double exact_rer(const DriftField& g, const DriftField& r, double sigma, const QuadratureGrid& grid,
                 Boundary boundary, std::vector<std::string>* warnings) {
  auto density = stationary_density_1d(g, sigma, grid, boundary);
  if (warnings) warnings->insert(warnings->end(), density.warnings.begin(), density.warnings.end());
  return exact_rer(density, g, r, sigma);
}

double exact_variational_objective(const std::function<double(double)>& psi_grad,
                                   const std::function<double(double)>& psi_hess,
                                   const StationaryDensity1D& density, const DriftField& r, double sigma) {
  const auto& grid = density.grid;
  const auto rv = sample_drift(r, grid);
  const double s2 = sigma * sigma;
  std::vector<double> integrand(grid.m);
  for (std::size_t k = 0; k < grid.m; ++k) {
    const double x = grid.nodes[k];
    const double dpsi = psi_grad(x);
    integrand[k] = density.values[k] * (0.5 * s2 * dpsi * dpsi + rv[k] * dpsi + 0.5 * s2 * psi_hess(x));
  }
  return grid.integrate(integrand);
}

double exact_variational_objective(const std::function<double(double)>& psi_grad,
                                   const std::function<double(double)>& psi_hess, const DriftField& g,
                                   const DriftField& r, double sigma, const QuadratureGrid& grid,
                                   Boundary boundary) {
  return exact_variational_objective(psi_grad, psi_hess, stationary_density_1d(g, sigma, grid, boundary), r, sigma);
}

}  // namespace entrate

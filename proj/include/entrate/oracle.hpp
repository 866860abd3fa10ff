#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "entrate/drift_lang.hpp"

namespace entrate {

/// Composite Simpson rule on m (odd) uniform nodes over [lo, hi].
struct QuadratureGrid {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t m = 3;
  std::vector<double> nodes;
  std::vector<double> weights;

  static QuadratureGrid simpson(double lo, double hi, std::size_t m);
  double step() const noexcept { return (hi - lo) / static_cast<double>(m - 1); }
  double integrate(std::span<const double> values) const;
};

/// Open: the density must vanish at both ends. Periodic: [lo, hi) is one
/// period of a drift whose integral over the period is zero, so the density
/// lives on the circle.
enum class Boundary { Open, Periodic };

struct StationaryDensity1D {
  QuadratureGrid grid;
  std::vector<double> values;
  double log_normalizer = 0.0;  // p(x) = exp(2/sigma^2 * int_lo^x g - log_normalizer)
  Boundary boundary = Boundary::Open;
  std::vector<std::string> warnings;
};

inline constexpr double kBoundaryMassTolerance = 1e-8;

/// p(x) proportional to exp((2 / sigma^2) int_lo^x g(s) ds), normalized on the grid.
StationaryDensity1D stationary_density_1d(const DriftField& g, double sigma, const QuadratureGrid& grid,
                                          Boundary boundary = Boundary::Open);

/// 1/2 int p^g (g - r)^2 / sigma^2 dx.
double exact_rer(const DriftField& g, const DriftField& r, double sigma, const QuadratureGrid& grid,
                 Boundary boundary = Boundary::Open, std::vector<std::string>* warnings = nullptr);

double exact_rer(const StationaryDensity1D& density, const DriftField& g, const DriftField& r, double sigma);

/// int p^g (sigma^2/2 psi'^2 + r psi' + sigma^2/2 psi'') dx.
double exact_variational_objective(const std::function<double(double)>& psi_grad,
                                   const std::function<double(double)>& psi_hess, const DriftField& g,
                                   const DriftField& r, double sigma, const QuadratureGrid& grid,
                                   Boundary boundary = Boundary::Open);

double exact_variational_objective(const std::function<double(double)>& psi_grad,
                                   const std::function<double(double)>& psi_hess,
                                   const StationaryDensity1D& density, const DriftField& r, double sigma);

}  // namespace entrate

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "entrate/drift_lang.hpp"
#include "entrate/kernel.hpp"
#include "entrate/sde_sim.hpp"

namespace entrate {

inline constexpr std::size_t kMaxUnknowns = 20000;

/// Samples of a drift that is periodic in every coordinate are folded into
/// [lo, lo + period) and padded on both sides with periodic images within
/// `pad` of the boundary. The images enter the kernel system; the rate is
/// averaged over the folded observations only.
struct PeriodicDomain {
  double lo = 0.0;
  double period = 1.0;
  double pad = 0.0;
};

struct EstimatorConfig {
  double C = 1.0;
  RbfKernel kernel{1.0, 1};
  Eigen::MatrixXd diffusion = Eigen::MatrixXd::Identity(1, 1);
  double condition_warn_threshold = 1e12;
  std::optional<PeriodicDomain> periodic;

  /// D = sigma^2 I.
  static EstimatorConfig isotropic(double C, double length_scale, int dim, double sigma);
  void validate() const;
  std::string digest() const;
};

/// A x = b with unknowns ordered sample-major: (u_1^T, ..., u_n^T).
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct SolveDiagnostics {
  double residual_norm = 0.0;
  double condition_estimate = 0.0;
  std::size_t duplicates_removed = 0;
  std::size_t periodic_images = 0;
  std::vector<std::string> warnings;
};

struct GradientFieldEstimate {
  SampleSet samples;           // points entering the system, observations first
  std::size_t n_primary = 0;   // leading columns that are observations
  Eigen::MatrixXd u;           // d x n, u_j = grad psi(x_j)
  Eigen::MatrixXd coefficients;  // d x n, c_j = r(x_j) + D u_j
  EstimatorConfig config;
  SolveDiagnostics diagnostics;
};

struct RateReport {
  double rate_estimate = 0.0;  // nats per unit time
  std::size_t n_used = 0;
  std::optional<double> oracle_rate;
  std::optional<double> relative_error;
  std::string config_digest;

  void attach_oracle(double exact);
};

/// Drops exact duplicate columns, keeping first occurrences in order.
SampleSet deduplicate(const SampleSet& samples, std::size_t* removed = nullptr);

/// Folds samples into the periodic cell and appends the padding images.
/// Returns the augmented set; `n_primary` receives the number of folded points.
SampleSet fold_periodic(const SampleSet& samples, const PeriodicDomain& domain, std::size_t* n_primary);

/// Evaluates r at every sample column; d x n.
Eigen::MatrixXd evaluate_drift(const DriftField& r, const Eigen::MatrixXd& points);

LinearSystem assemble_system(const SampleSet& samples, const DriftField& r, const EstimatorConfig& cfg);

/// Deduplicates (and folds, when periodic), assembles, and solves by LU with
/// partial pivoting.
GradientFieldEstimate solve_gradient_field(const SampleSet& samples, const DriftField& r,
                                           const EstimatorConfig& cfg);

double evaluate_psi(const GradientFieldEstimate& est, const VecRef& x);
Eigen::VectorXd evaluate_grad_psi(const GradientFieldEstimate& est, const VecRef& x);
/// tr[D grad grad^T psi](x)
double evaluate_trace_hessian_psi(const GradientFieldEstimate& est, const VecRef& x);

/// (1 / 2n) sum_i u_i^T D u_i over the observations.
RateReport rate_estimate(const GradientFieldEstimate& est);

/// Squared RKHS norm of the fitted potential, from the Gram matrix of the
/// representer functionals.
double potential_norm_squared(const GradientFieldEstimate& est);

/// A potential given through its gradient and Hessian.
struct TrialPotential {
  std::function<Eigen::VectorXd(const VecRef&)> gradient;
  std::function<Eigen::MatrixXd(const VecRef&)> hessian;
};

/// Sample average of 1/2 |grad psi|_D^2 + r . grad psi + 1/2 tr[D hess psi].
double empirical_objective(const GradientFieldEstimate& est, const SampleSet& samples, const DriftField& r);
double empirical_objective(const TrialPotential& psi, const SampleSet& samples, const DriftField& r,
                           const Eigen::MatrixXd& D);

/// Relative L2 distance between the fitted gradients u_i and the true
/// D^{-1}(g - r) at the observations inside the central [q, 1 - q] quantile
/// box of every coordinate. The observations weight by the sampled density.
double gradient_relative_l2(const GradientFieldEstimate& est, const DriftField& g, const DriftField& r,
                            double tail = 0.05);

struct SelectionCandidate {
  double C = 0.0;
  double length_scale = 0.0;
  double heldout_objective = 0.0;
  bool failed = false;
};

struct HyperparameterSelection {
  double C = 0.0;
  double length_scale = 0.0;
  std::vector<SelectionCandidate> candidates;
};

/// Fits on the first half of the samples for every (C, l) pair and keeps the
/// pair with the lowest empirical objective on the second half.
HyperparameterSelection select_hyperparameters(const SampleSet& samples, const DriftField& r,
                                               const EstimatorConfig& base, const std::vector<double>& C_grid,
                                               const std::vector<double>& length_grid);

}  // namespace entrate

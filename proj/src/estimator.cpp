#include "entrate/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "entrate/digest.hpp"
#include "entrate/error.hpp"

namespace entrate {

EstimatorConfig EstimatorConfig::isotropic(double C, double length_scale, int dim, double sigma) {
  EstimatorConfig cfg;
  cfg.C = C;
  cfg.kernel = RbfKernel(length_scale, dim);
  cfg.diffusion = sigma * sigma * Eigen::MatrixXd::Identity(dim, dim);
  return cfg;
}

void EstimatorConfig::validate() const {
  if (!(C >= 0.0) || !std::isfinite(C)) throw InputError("C must be a finite nonnegative number");
  const int d = kernel.dim();
  if (diffusion.rows() != d || diffusion.cols() != d) {
    throw DimensionMismatchError("diffusion matrix must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  if (!diffusion.isApprox(diffusion.transpose(), 1e-12)) throw InputError("diffusion matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(diffusion);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw InputError("diffusion matrix must be positive definite");
  if (periodic && !(periodic->period > 0.0 && periodic->pad >= 0.0 && periodic->pad <= periodic->period)) {
    throw InputError("periodic domain needs period > 0 and 0 <= pad <= period");
  }
}

std::string EstimatorConfig::digest() const {
  std::string text = "C=" + format_double(C) + ";l=" + format_double(kernel.length_scale()) +
                     ";d=" + std::to_string(kernel.dim()) + ";D=";
  for (Eigen::Index k = 0; k < diffusion.size(); ++k) text += format_double(diffusion.data()[k]) + ",";
  if (periodic) {
    text += ";periodic=" + format_double(periodic->lo) + "," + format_double(periodic->period) + "," +
            format_double(periodic->pad);
  }
  return hex64(fnv1a64(text));
}

void RateReport::attach_oracle(double exact) {
  oracle_rate = exact;
  relative_error = exact != 0.0 ? std::abs(rate_estimate - exact) / std::abs(exact) : std::abs(rate_estimate);
}

SampleSet deduplicate(const SampleSet& samples, std::size_t* removed) {
  const Eigen::Index n = samples.points.cols();
  const Eigen::Index d = samples.points.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < d; ++k) {
      if (samples.points(k, a) != samples.points(k, b)) return samples.points(k, a) < samples.points(k, b);
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<bool> keep(static_cast<std::size_t>(n), true);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (samples.points.col(order[i]) == samples.points.col(order[i - 1])) keep[static_cast<std::size_t>(order[i])] = false;
  }
  const auto kept = static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), true));
  if (removed) *removed = static_cast<std::size_t>(n - kept);
  if (kept == n) return samples;

  SampleSet out;
  out.points.resize(d, kept);
  out.tau = samples.tau;
  out.provenance = samples.provenance;
  Eigen::Index c = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    out.points.col(c++) = samples.points.col(i);
    if (static_cast<std::size_t>(i) < samples.times.size()) out.times.push_back(samples.times[static_cast<std::size_t>(i)]);
  }
  return out;
}

namespace {

double fold(double v, const PeriodicDomain& dom) {
  double w = dom.lo + std::fmod(v - dom.lo, dom.period);
  if (w < dom.lo) w += dom.period;
  if (w >= dom.lo + dom.period) w = dom.lo;
  return w;
}

Eigen::VectorXd fold_point(const VecRef& x, const std::optional<PeriodicDomain>& dom) {
  Eigen::VectorXd y = x;
  if (dom) {
    for (Eigen::Index k = 0; k < y.size(); ++k) y[k] = fold(y[k], *dom);
  }
  return y;
}

}  // namespace

SampleSet fold_periodic(const SampleSet& samples, const PeriodicDomain& domain, std::size_t* n_primary) {
  const int d = samples.dim();
  SampleSet folded = samples;
  for (Eigen::Index i = 0; i < folded.points.size(); ++i) folded.points.data()[i] = fold(folded.points.data()[i], domain);
  std::size_t removed = 0;
  folded = deduplicate(folded, &removed);
  const Eigen::Index n = folded.points.cols();
  if (n_primary) *n_primary = static_cast<std::size_t>(n);

  // Every shift in {-1, 0, 1}^d except zero.
  std::size_t shifts = 1;
  for (int k = 0; k < d; ++k) shifts *= 3;
  std::vector<double> images;
  const double lo = domain.lo - domain.pad;
  const double hi = domain.lo + domain.period + domain.pad;
  Eigen::VectorXd cand(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < shifts; ++s) {
      std::size_t code = s;
      bool zero = true;
      bool inside = true;
      for (int k = 0; k < d; ++k) {
        int step = static_cast<int>(code % 3) - 1;
        code /= 3;
        zero = zero && step == 0;
        cand[k] = folded.points(k, i) + step * domain.period;
        inside = inside && cand[k] >= lo && cand[k] < hi;
      }
      if (zero || !inside) continue;
      images.insert(images.end(), cand.data(), cand.data() + d);
    }
  }
  const auto m = static_cast<Eigen::Index>(images.size() / static_cast<std::size_t>(d));
  SampleSet out;
  out.points.resize(d, n + m);
  out.points.leftCols(n) = folded.points;
  if (m > 0) out.points.rightCols(m) = Eigen::Map<const Eigen::MatrixXd>(images.data(), d, m);
  out.times = folded.times;
  out.tau = samples.tau;
  out.provenance = samples.provenance;
  return out;
}

Eigen::MatrixXd evaluate_drift(const DriftField& r, const Eigen::MatrixXd& points) {
  const int d = static_cast<int>(points.rows());
  if (r.dim() != d) {
    throw DimensionMismatchError("drift dimension " + std::to_string(r.dim()) + " vs samples " + std::to_string(d));
  }
  Eigen::MatrixXd out(d, points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    r.evaluate(std::span<const double>(points.col(j).data(), static_cast<std::size_t>(d)),
               std::span<double>(out.col(j).data(), static_cast<std::size_t>(d)));
  }
  return out;
}

namespace {

void check_problem(const SampleSet& samples, const DriftField& r, const EstimatorConfig& cfg) {
  cfg.validate();
  if (samples.size() < 1) throw InputError("no samples");
  if (samples.dim() != cfg.kernel.dim() || r.dim() != samples.dim()) {
    throw DimensionMismatchError("dimensions disagree: samples " + std::to_string(samples.dim()) + ", drift " +
                                 std::to_string(r.dim()) + ", kernel " + std::to_string(cfg.kernel.dim()));
  }
  if (!samples.points.allFinite()) throw NumericError("samples contain non-finite values");
}

LinearSystem assemble(const Eigen::MatrixXd& x, const Eigen::MatrixXd& r_values, const EstimatorConfig& cfg) {
  const int d = static_cast<int>(x.rows());
  const Eigen::Index n = x.cols();
  const Eigen::Index nd = n * d;
  const double C = cfg.C;
  const auto& D = cfg.diffusion;
  const auto& kern = cfg.kernel;

  LinearSystem sys;
  sys.A = Eigen::MatrixXd::Identity(nd, nd);
  sys.b = Eigen::VectorXd::Zero(nd);

  Eigen::VectorXd delta(d);
  Eigen::MatrixXd G(d, d);
  Eigen::MatrixXd GD(d, d);
  Eigen::VectorXd h(d);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      delta = x.col(i) - x.col(j);
      const double q = kern.value_from_delta(delta.data());
      kern.grad_x_grad_yT_from_delta(delta.data(), q, G.data());
      kern.grad_x_lap_y_from_delta(delta.data(), q, D, h.data());
      GD.noalias() = C * G * D;
      // G is even in delta, h is odd.
      sys.A.block(i * d, j * d, d, d) += GD;
      sys.b.segment(i * d, d) -= C * (G * r_values.col(j) + 0.5 * h);
      if (i != j) {
        sys.A.block(j * d, i * d, d, d) += GD;
        sys.b.segment(j * d, d) -= C * (G * r_values.col(i) - 0.5 * h);
      }
    }
  }
  if (!sys.A.allFinite() || !sys.b.allFinite()) throw NumericError("non-finite kernel entries in the linear system");
  return sys;
}

}  // namespace

LinearSystem assemble_system(const SampleSet& samples, const DriftField& r, const EstimatorConfig& cfg) {
  check_problem(samples, r, cfg);
  return assemble(samples.points, evaluate_drift(r, samples.points), cfg);
}

GradientFieldEstimate solve_gradient_field(const SampleSet& samples, const DriftField& r, const EstimatorConfig& cfg) {
  check_problem(samples, r, cfg);

  GradientFieldEstimate est;
  est.config = cfg;
  if (cfg.periodic) {
    est.samples = fold_periodic(samples, *cfg.periodic, &est.n_primary);
    est.diagnostics.duplicates_removed = samples.size() - est.n_primary;
    est.diagnostics.periodic_images = est.samples.size() - est.n_primary;
  } else {
    est.samples = deduplicate(samples, &est.diagnostics.duplicates_removed);
    est.n_primary = est.samples.size();
  }
  if (est.diagnostics.duplicates_removed > 0) {
    est.diagnostics.warnings.push_back("removed " + std::to_string(est.diagnostics.duplicates_removed) +
                                       " duplicate sample point(s)");
  }

  const int d = samples.dim();
  const std::size_t unknowns = est.samples.size() * static_cast<std::size_t>(d);
  if (unknowns > kMaxUnknowns) {
    throw SizeGuardError("linear system would have " + std::to_string(unknowns) + " unknowns (limit " +
                         std::to_string(kMaxUnknowns) + "); subsample the data first");
  }

  const Eigen::MatrixXd r_values = evaluate_drift(r, est.samples.points);
  LinearSystem sys = assemble(est.samples.points, r_values, cfg);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.A);
  const double rcond = lu.rcond();
  if (!(rcond > std::numeric_limits<double>::epsilon())) {
    throw SingularMatrixError("linear system is numerically singular (rcond " + format_double(rcond) + ")");
  }
  Eigen::VectorXd sol = lu.solve(sys.b);
  const double tol = 1e-8 * (1.0 + sys.b.norm());
  double residual = (sys.A * sol - sys.b).norm();
  if (!(residual <= tol)) {
    sol += lu.solve(sys.b - sys.A * sol);
    residual = (sys.A * sol - sys.b).norm();
  }
  if (!sol.allFinite() || !(residual <= tol)) {
    throw NumericError("solve did not reach the residual tolerance (residual " + format_double(residual) + ")");
  }

  est.diagnostics.residual_norm = residual;
  est.diagnostics.condition_estimate = 1.0 / rcond;
  if (est.diagnostics.condition_estimate > cfg.condition_warn_threshold) {
    est.diagnostics.warnings.push_back("ill-conditioned system: condition estimate " +
                                       format_double(est.diagnostics.condition_estimate));
  }

  const Eigen::Index n = est.samples.points.cols();
  est.u = Eigen::Map<const Eigen::MatrixXd>(sol.data(), d, n);
  est.coefficients = r_values + cfg.diffusion * est.u;
  return est;
}

double evaluate_psi(const GradientFieldEstimate& est, const VecRef& x_in) {
  const Eigen::VectorXd x = fold_point(x_in, est.config.periodic);
  const auto& kern = est.config.kernel;
  const auto& D = est.config.diffusion;
  const double inv_l2 = 1.0 / (kern.length_scale() * kern.length_scale());
  Eigen::VectorXd delta(x.size());
  double sum = 0.0;
  for (Eigen::Index j = 0; j < est.samples.points.cols(); ++j) {
    delta = x - est.samples.points.col(j);
    const double q = kern.value_from_delta(delta.data());
    // grad_y k = delta q / l^2
    sum += inv_l2 * q * est.coefficients.col(j).dot(delta) + 0.5 * kern.lap_y_from_delta(delta.data(), q, D);
  }
  return -est.config.C * sum;
}

Eigen::VectorXd evaluate_grad_psi(const GradientFieldEstimate& est, const VecRef& x_in) {
  const Eigen::VectorXd x = fold_point(x_in, est.config.periodic);
  const auto& kern = est.config.kernel;
  const auto& D = est.config.diffusion;
  const Eigen::Index d = x.size();
  Eigen::VectorXd delta(d);
  Eigen::MatrixXd G(d, d);
  Eigen::VectorXd h(d);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < est.samples.points.cols(); ++j) {
    delta = x - est.samples.points.col(j);
    const double q = kern.value_from_delta(delta.data());
    kern.grad_x_grad_yT_from_delta(delta.data(), q, G.data());
    kern.grad_x_lap_y_from_delta(delta.data(), q, D, h.data());
    sum.noalias() += G * est.coefficients.col(j);
    sum += 0.5 * h;
  }
  return -est.config.C * sum;
}

double evaluate_trace_hessian_psi(const GradientFieldEstimate& est, const VecRef& x_in) {
  const Eigen::VectorXd x = fold_point(x_in, est.config.periodic);
  const auto& kern = est.config.kernel;
  const auto& D = est.config.diffusion;
  const Eigen::Index d = x.size();
  Eigen::VectorXd delta(d);
  Eigen::VectorXd h(d);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < est.samples.points.cols(); ++j) {
    delta = x - est.samples.points.col(j);
    const double q = kern.value_from_delta(delta.data());
    kern.grad_x_lap_y_from_delta(delta.data(), q, D, h.data());
    // tr[D hess_x](grad_y k . c) = -grad_x lap_y k . c
    sum += -h.dot(est.coefficients.col(j)) + 0.5 * kern.lap_x_lap_y_from_delta(delta.data(), q, D);
  }
  return -est.config.C * sum;
}

RateReport rate_estimate(const GradientFieldEstimate& est) {
  RateReport report;
  const auto n = static_cast<Eigen::Index>(est.n_primary);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += est.u.col(i).dot(est.config.diffusion * est.u.col(i));
  report.rate_estimate = n > 0 ? sum / (2.0 * static_cast<double>(n)) : 0.0;
  report.n_used = est.n_primary;
  report.config_digest = est.config.digest();
  return report;
}

double potential_norm_squared(const GradientFieldEstimate& est) {
  // psi = -C sum_j L_j k(., x_j) with L_j = c_j . grad_y + 1/2 tr[D hess_y], so
  // |psi|^2 = C^2 sum_ij L_i^x L_j^y k(x_i, x_j).
  const auto& kern = est.config.kernel;
  const auto& D = est.config.diffusion;
  const auto& x = est.samples.points;
  const auto& c = est.coefficients;
  const Eigen::Index d = x.rows();
  Eigen::VectorXd delta(d);
  Eigen::MatrixXd G(d, d);
  Eigen::VectorXd h(d);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      delta = x.col(i) - x.col(j);
      const double q = kern.value_from_delta(delta.data());
      kern.grad_x_grad_yT_from_delta(delta.data(), q, G.data());
      kern.grad_x_lap_y_from_delta(delta.data(), q, D, h.data());
      sum += c.col(i).dot(G * c.col(j)) + 0.5 * c.col(i).dot(h) - 0.5 * h.dot(c.col(j)) +
             0.25 * kern.lap_x_lap_y_from_delta(delta.data(), q, D);
    }
  }
  return est.config.C * est.config.C * sum;
}

double empirical_objective(const GradientFieldEstimate& est, const SampleSet& samples, const DriftField& r) {
  if (samples.size() == 0) throw InputError("no samples");
  const auto& D = est.config.diffusion;
  const int d = samples.dim();
  Eigen::VectorXd rx(d);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < samples.points.cols(); ++i) {
    const Eigen::VectorXd x = fold_point(samples.points.col(i), est.config.periodic);
    const Eigen::VectorXd grad = evaluate_grad_psi(est, x);
    r.evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(d)),
               std::span<double>(rx.data(), static_cast<std::size_t>(d)));
    sum += 0.5 * grad.dot(D * grad) + rx.dot(grad) + 0.5 * evaluate_trace_hessian_psi(est, x);
  }
  return sum / static_cast<double>(samples.size());
}

double empirical_objective(const TrialPotential& psi, const SampleSet& samples, const DriftField& r,
                           const Eigen::MatrixXd& D) {
  if (samples.size() == 0) throw InputError("no samples");
  const int d = samples.dim();
  Eigen::VectorXd rx(d);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < samples.points.cols(); ++i) {
    const Eigen::VectorXd x = samples.points.col(i);
    const Eigen::VectorXd grad = psi.gradient(x);
    const Eigen::MatrixXd hess = psi.hessian(x);
    r.evaluate(std::span<const double>(x.data(), static_cast<std::size_t>(d)),
               std::span<double>(rx.data(), static_cast<std::size_t>(d)));
    sum += 0.5 * grad.dot(D * grad) + rx.dot(grad) + 0.5 * (D * hess).trace();
  }
  return sum / static_cast<double>(samples.size());
}

double gradient_relative_l2(const GradientFieldEstimate& est, const DriftField& g, const DriftField& r,
                            double tail) {
  if (!(tail >= 0.0 && tail < 0.5)) throw InputError("quantile tail must lie in [0, 0.5)");
  const auto n = static_cast<Eigen::Index>(est.n_primary);
  if (n == 0) throw InputError("no observations");
  const Eigen::MatrixXd x = est.samples.points.leftCols(n);
  const Eigen::Index d = x.rows();

  Eigen::VectorXd lower(d), upper(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = x(k, i);
    std::sort(col.begin(), col.end());
    // linear interpolation between order statistics
    auto quantile = [&](double q) {
      const double pos = q * static_cast<double>(n - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, col.size() - 1);
      return col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
    };
    lower(k) = quantile(tail);
    upper(k) = quantile(1.0 - tail);
  }

  const Eigen::MatrixXd truth = est.config.diffusion.ldlt().solve(evaluate_drift(g, x) - evaluate_drift(r, x));
  double err = 0.0, ref = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (((x.col(i) - lower).array() < 0.0).any() || ((upper - x.col(i)).array() < 0.0).any()) continue;
    err += (est.u.col(i) - truth.col(i)).squaredNorm();
    ref += truth.col(i).squaredNorm();
  }
  if (!(ref > 0.0)) throw NumericError("true gradient vanishes on the evaluation range");
  return std::sqrt(err / ref);
}

HyperparameterSelection select_hyperparameters(const SampleSet& samples, const DriftField& r,
                                               const EstimatorConfig& base, const std::vector<double>& C_grid,
                                               const std::vector<double>& length_grid) {
  const Eigen::Index n = samples.points.cols();
  if (n < 4) throw InputError("hyperparameter selection needs at least four samples");
  if (C_grid.empty() || length_grid.empty()) throw InputError("empty hyperparameter grid");
  const Eigen::Index half = n / 2;
  SampleSet fit;
  fit.points = samples.points.leftCols(half);
  SampleSet heldout;
  heldout.points = samples.points.rightCols(n - half);

  HyperparameterSelection sel;
  double best = std::numeric_limits<double>::infinity();
  for (double l : length_grid) {
    for (double C : C_grid) {
      SelectionCandidate cand{C, l, 0.0, false};
      try {
        EstimatorConfig cfg = base;
        cfg.C = C;
        cfg.kernel = RbfKernel(l, base.kernel.dim());
        auto est = solve_gradient_field(fit, r, cfg);
        cand.heldout_objective = empirical_objective(est, heldout, r);
        if (!std::isfinite(cand.heldout_objective)) cand.failed = true;
      } catch (const NumericError&) {
        cand.failed = true;
      }
      if (!cand.failed && cand.heldout_objective < best) {
        best = cand.heldout_objective;
        sel.C = C;
        sel.length_scale = l;
      }
      sel.candidates.push_back(cand);
    }
  }
  if (!std::isfinite(best)) throw NumericError("every hyperparameter candidate failed");
  return sel;
}

}  // namespace entrate

#include "entrate/sde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "entrate/digest.hpp"
#include "entrate/error.hpp"
#include "entrate/rng.hpp"

namespace entrate {

double uniform_at(std::uint64_t seed, std::uint64_t counter) noexcept {
  std::uint64_t bits = splitmix64(splitmix64(seed) + counter * 0x9e3779b97f4a7c15ULL);
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

double NormalStream::next() noexcept {
  std::uint64_t k = index_++;
  if (k & 1u) return cached_;
  double u1 = uniform_at(seed_, k);
  double u2 = uniform_at(seed_, k + 1);
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  cached_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

void SimConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be a finite nonnegative number");
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  if (!(t_total > 0.0)) throw InputError("t_total must be positive");
  if (!(dt < t_total)) throw InputError("dt must be smaller than t_total");
  if (!(burn_in >= 0.0) || !(burn_in < t_total)) throw InputError("burn_in must lie in [0, t_total)");
  if (static_cast<int>(x0.size()) != drift.dim()) {
    throw DimensionMismatchError("x0 has " + std::to_string(x0.size()) + " entries, drift dimension is " +
                                 std::to_string(drift.dim()));
  }
  for (double v : x0) {
    if (!std::isfinite(v)) throw InputError("x0 must be finite");
  }
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(t_total / dt)); }

std::size_t SimConfig::burn_in_steps() const { return static_cast<std::size_t>(std::llround(burn_in / dt)); }

namespace {

class EulerStepper {
 public:
  explicit EulerStepper(const SimConfig& cfg)
      : cfg_(cfg), sqrt_dt_(std::sqrt(cfg.dt)), rng_(cfg.seed), x_(cfg.x0), drift_(cfg.x0.size()) {}

  std::span<const double> state() const { return x_; }

  // Advances to step k (k >= 1).
  void advance(std::size_t k) {
    cfg_.drift.evaluate(x_, drift_);
    double norm = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) {
      double xi = rng_.next();
      x_[i] = x_[i] + drift_[i] * cfg_.dt + cfg_.sigma * sqrt_dt_ * xi;
      norm = std::isfinite(x_[i]) ? std::max(norm, std::abs(x_[i])) : HUGE_VAL;
    }
    if (norm > kOverflowGuard) throw DivergenceError(k, norm);
  }

 private:
  const SimConfig& cfg_;
  double sqrt_dt_;
  NormalStream rng_;
  std::vector<double> x_;
  std::vector<double> drift_;
};

std::string sim_digest(const SimConfig& cfg) {
  std::string text = "drift=" + cfg.drift.description() + ";sigma=" + format_double(cfg.sigma) +
                     ";dt=" + format_double(cfg.dt) + ";t_total=" + format_double(cfg.t_total) +
                     ";burn_in=" + format_double(cfg.burn_in) + ";seed=" + std::to_string(cfg.seed) + ";x0=";
  for (double v : cfg.x0) text += format_double(v) + ",";
  return "sim:" + hex64(fnv1a64(text));
}

void check_length(std::size_t length, std::size_t n_keep, std::size_t stride, std::size_t burn_in_steps) {
  if (stride == 0) throw InputError("stride must be positive");
  std::size_t required = burn_in_steps + n_keep * stride;
  if (required > length) throw InsufficientLengthError(required, length);
}

}  // namespace

Trajectory simulate(const SimConfig& cfg) {
  cfg.validate();
  const std::size_t steps = cfg.steps();
  Trajectory traj;
  traj.dim = cfg.drift.dim();
  traj.dt = cfg.dt;
  traj.values.reserve((steps + 1) * cfg.x0.size());
  traj.values.insert(traj.values.end(), cfg.x0.begin(), cfg.x0.end());
  EulerStepper stepper(cfg);
  for (std::size_t k = 1; k <= steps; ++k) {
    stepper.advance(k);
    auto x = stepper.state();
    traj.values.insert(traj.values.end(), x.begin(), x.end());
  }
  return traj;
}

SampleSet subsample(const Trajectory& traj, std::size_t n_keep, std::size_t stride, std::size_t burn_in_steps) {
  check_length(traj.size(), n_keep, stride, burn_in_steps);
  SampleSet out;
  out.points.resize(traj.dim, static_cast<Eigen::Index>(n_keep));
  out.times.resize(n_keep);
  out.tau = static_cast<double>(stride) * traj.dt;
  for (std::size_t i = 0; i < n_keep; ++i) {
    std::size_t k = burn_in_steps + i * stride;
    auto x = traj.point(k);
    for (int j = 0; j < traj.dim; ++j) out.points(j, static_cast<Eigen::Index>(i)) = x[static_cast<std::size_t>(j)];
    out.times[i] = traj.time(k);
  }
  out.provenance = "trajectory";
  return out;
}

SampleSet simulate_samples(const SimConfig& cfg, std::size_t n_keep, std::size_t stride) {
  cfg.validate();
  const std::size_t steps = cfg.steps();
  const std::size_t burn = cfg.burn_in_steps();
  check_length(steps + 1, n_keep, stride, burn);

  SampleSet out;
  const int dim = cfg.drift.dim();
  out.points.resize(dim, static_cast<Eigen::Index>(n_keep));
  out.times.resize(n_keep);
  out.tau = static_cast<double>(stride) * cfg.dt;

  EulerStepper stepper(cfg);
  std::size_t kept = 0;
  auto record = [&](std::size_t k) {
    if (kept < n_keep && k >= burn && (k - burn) % stride == 0) {
      auto x = stepper.state();
      for (int j = 0; j < dim; ++j) out.points(j, static_cast<Eigen::Index>(kept)) = x[static_cast<std::size_t>(j)];
      out.times[kept] = static_cast<double>(k) * cfg.dt;
      ++kept;
    }
  };
  record(0);
  for (std::size_t k = 1; k <= steps; ++k) {
    stepper.advance(k);
    record(k);
  }
  out.provenance = sim_digest(cfg);
  return out;
}

}  // namespace entrate

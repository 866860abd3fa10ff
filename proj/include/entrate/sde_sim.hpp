#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "entrate/drift_lang.hpp"

namespace entrate {

inline constexpr double kOverflowGuard = 1e6;

/// Euler-Maruyama setup for dX = g(X) dt + sigma dB with constant scalar sigma.
struct SimConfig {
  DriftField drift;
  double sigma = 1.0;
  std::vector<double> x0;
  double dt = 1e-3;
  double t_total = 1.0;
  double burn_in = 10.0;  // time units discarded before sampling
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t steps() const;
  std::size_t burn_in_steps() const;
};

/// Points x_0..x_K at times k*dt, stored row-major (K+1) x d.
struct Trajectory {
  int dim = 1;
  double dt = 0.0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size() / static_cast<std::size_t>(dim); }
  double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
  std::span<const double> point(std::size_t k) const noexcept {
    return {values.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

/// Sample points as columns of a d x n matrix.
struct SampleSet {
  Eigen::MatrixXd points;
  std::vector<double> times;
  double tau = 0.0;
  std::string provenance = "external";

  std::size_t size() const noexcept { return static_cast<std::size_t>(points.cols()); }
  int dim() const noexcept { return static_cast<int>(points.rows()); }
};

Trajectory simulate(const SimConfig& cfg);

/// Keeps indices burn_in_steps + k*stride for k < n_keep.
SampleSet subsample(const Trajectory& traj, std::size_t n_keep, std::size_t stride,
                    std::size_t burn_in_steps);

/// simulate() followed by subsample(), without storing the full trajectory.
/// Produces the same bits as the two-step route.
SampleSet simulate_samples(const SimConfig& cfg, std::size_t n_keep, std::size_t stride);

}  // namespace entrate

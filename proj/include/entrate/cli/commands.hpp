#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "entrate/cli/config.hpp"
#include "entrate/estimator.hpp"

namespace entrate::cli {

enum ExitCode : int { kSuccess = 0, kToleranceFailure = 1, kConfigError = 2, kNumericFailure = 3 };

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool full_scale = false;
};

/// Simulation, estimation and (when configured) the oracle for one drift.
struct PipelineResult {
  std::uint64_t seed = 0;
  SampleSet samples;
  GradientFieldEstimate estimate;
  RateReport report;
  std::optional<double> drift_rel_l2;
  std::vector<std::string> warnings;
};

PipelineResult run_pipeline(const ExperimentConfig& cfg, const DriftField& g, std::uint64_t seed);

/// Per-value seed of a sweep: a function of the base seed and the value's
/// bits, so reordering values leaves every row unchanged.
std::uint64_t sweep_seed(std::uint64_t base, double value);

double oracle_rate(const ExperimentConfig& cfg, const DriftField& g, std::vector<std::string>* warnings = nullptr);

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_used = 0;
  std::optional<double> rate_estimate;
  std::optional<double> oracle_rate;
  std::optional<double> rel_error;
  std::optional<double> drift_rel_l2;
  std::optional<double> residual_norm;
  std::string status;
};

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& log);
int cmd_estimate(const CommandOptions& opts, std::ostream& out, std::ostream& log);
int cmd_sweep(const CommandOptions& opts, std::ostream& out, std::ostream& log);
int cmd_oracle(const CommandOptions& opts, std::ostream& out, std::ostream& log);
int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream& log);

/// Dispatches by name and maps library errors to exit codes.
int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out, std::ostream& log);

}  // namespace entrate::cli

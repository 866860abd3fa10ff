#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "entrate/drift_lang.hpp"
#include "entrate/estimator.hpp"
#include "entrate/oracle.hpp"
#include "entrate/sde_sim.hpp"

namespace entrate::cli {

/// A drift given either by catalog name or by expression text, one
/// expression per coordinate.
struct DriftSpec {
  std::string catalog;
  std::vector<std::string> expressions;
  std::map<std::string, double> params;

  DriftField build(int dim) const;
  DriftField build(int dim, const std::string& param, double value) const;
  std::string text() const;
};

struct SimSection {
  std::vector<double> x0;
  double dt = 1e-3;
  double t_total = 20010.0;
  double burn_in = 10.0;
  std::size_t n = 2000;
  double stride_time = 10.0;
  std::uint64_t seed = 1;

  std::size_t stride_steps() const;
};

struct FullScaleSection {
  double t_total = 100010.0;
  std::size_t n = 10000;
};

struct EstimatorSection {
  double C = 1.0;
  std::optional<double> length_scale;  // empty: median heuristic
  std::optional<PeriodicDomain> periodic;
};

struct SweepSection {
  std::string param;
  std::vector<double> values;
};

struct OracleSection {
  double lo = -8.0;
  double hi = 8.0;
  std::size_t m = 8001;
  Boundary boundary = Boundary::Open;
};

struct ExperimentConfig {
  std::string name;
  int dim = 1;
  DriftSpec drift_g;
  DriftSpec drift_r;
  double sigma = 1.0;
  SimSection sim;
  FullScaleSection full_scale;
  EstimatorSection estimator;
  std::optional<SweepSection> sweep;
  std::optional<OracleSection> oracle;
  double tolerance = 0.15;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> samples;  // estimate input; default <out>/samples.csv
  std::filesystem::path source;                  // file the config was read from

  nlohmann::ordered_json raw;  // as parsed, after command-line overrides

  /// Applies --seed and --full-scale.
  void apply_overrides(std::optional<std::uint64_t> seed, bool full_scale);
  std::string digest() const;
  SimConfig sim_config(const DriftField& g) const;
  EstimatorConfig estimator_config(const SampleSet& samples) const;
  std::optional<QuadratureGrid> oracle_grid() const;
};

ExperimentConfig parse_config(const nlohmann::ordered_json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace entrate::cli

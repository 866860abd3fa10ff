#include "entrate/cli/commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "entrate/digest.hpp"
#include "entrate/error.hpp"
#include "entrate/cli/manifest.hpp"
#include "entrate/oracle.hpp"
#include "entrate/rng.hpp"
#include "entrate/sample_io.hpp"

namespace entrate::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kGridPoints = 400;

struct Loaded {
  ExperimentConfig cfg;
  fs::path out_dir;
};

Loaded load(const CommandOptions& opts) {
  Loaded l{load_config(opts.config), {}};
  l.cfg.apply_overrides(opts.seed, opts.full_scale);
  l.out_dir = opts.out ? *opts.out : l.cfg.output_dir;
  fs::create_directories(l.out_dir);
  return l;
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InputError("'" + s + "' is not a number");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string param_label(const ExperimentConfig& cfg) { return cfg.sweep ? cfg.sweep->param : "value"; }

void log_warnings(std::ostream& log, const std::vector<std::string>& warnings, const std::string& context) {
  for (const auto& w : warnings) log << "warning: " << context << w << "\n";
}

ordered_json params_json(const DriftField& g) {
  ordered_json p = ordered_json::object();
  for (const auto& [k, v] : g.params()) p[k] = v;
  return p;
}

// Every kept point with the fitted gradient: t, x1.., u1..
std::string gradient_samples_csv(const GradientFieldEstimate& est) {
  const int d = est.samples.dim();
  std::ostringstream os;
  os << "t";
  for (int j = 1; j <= d; ++j) os << ",x" << j;
  for (int j = 1; j <= d; ++j) os << ",u" << j;
  os << "\n";
  for (std::size_t i = 0; i < est.n_primary; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    os << (i < est.samples.times.size() ? format_double(est.samples.times[i]) : std::string());
    for (int j = 0; j < d; ++j) os << "," << format_double(est.samples.points(j, col));
    for (int j = 0; j < d; ++j) os << "," << format_double(est.u(j, col));
    os << "\n";
  }
  return os.str();
}

// grad psi-hat on a uniform grid over [min x - l, max x + l], with the true
// D^{-1}(g - r) alongside. One-dimensional only.
std::string gradient_grid_csv(const GradientFieldEstimate& est, const DriftField& g, const DriftField& r) {
  const auto n = static_cast<Eigen::Index>(est.n_primary);
  const double l = est.config.kernel.length_scale();
  const double lo = est.samples.points.leftCols(n).minCoeff() - l;
  const double hi = est.samples.points.leftCols(n).maxCoeff() + l;
  const double D = est.config.diffusion(0, 0);
  std::ostringstream os;
  os << "x,grad_psi,true_grad_psi\n";
  Eigen::VectorXd x(1);
  for (std::size_t k = 0; k < kGridPoints; ++k) {
    x(0) = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(kGridPoints - 1);
    os << format_double(x(0)) << "," << format_double(evaluate_grad_psi(est, x)(0)) << ","
       << format_double((g.scalar(x(0)) - r.scalar(x(0))) / D) << "\n";
  }
  return os.str();
}

void write_with_manifest(const fs::path& path, const std::string& content, const ordered_json& manifest) {
  write_atomic(path, content);
  write_manifest(path, manifest);
}

std::string value_tag(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::uint64_t sweep_seed(std::uint64_t base, double value) {
  if (value == 0.0) value = 0.0;  // one seed for +0 and -0
  return splitmix64(base ^ splitmix64(std::bit_cast<std::uint64_t>(value)));
}

double oracle_rate(const ExperimentConfig& cfg, const DriftField& g, std::vector<std::string>* warnings) {
  auto grid = cfg.oracle_grid();
  if (!grid) throw InputError("config has no 'oracle' section");
  return exact_rer(g, cfg.drift_r.build(cfg.dim), cfg.sigma, *grid, cfg.oracle->boundary, warnings);
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const DriftField& g, std::uint64_t seed) {
  PipelineResult res;
  res.seed = seed;
  SimConfig sim = cfg.sim_config(g);
  sim.seed = seed;
  res.samples = simulate_samples(sim, cfg.sim.n, cfg.sim.stride_steps());
  const DriftField r = cfg.drift_r.build(cfg.dim);
  res.estimate = solve_gradient_field(res.samples, r, cfg.estimator_config(res.samples));
  res.report = rate_estimate(res.estimate);
  res.warnings = res.estimate.diagnostics.warnings;
  if (cfg.oracle) res.report.attach_oracle(oracle_rate(cfg, g, &res.warnings));
  try {
    res.drift_rel_l2 = gradient_relative_l2(res.estimate, g, r);
  } catch (const NumericError&) {
    // g = r: the relative error is undefined
  }
  return res;
}

int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream&) {
  auto [cfg, dir] = load(opts);
  const DriftField g = cfg.drift_g.build(cfg.dim);
  const SimConfig sim = cfg.sim_config(g);
  const SampleSet samples = simulate_samples(sim, cfg.sim.n, cfg.sim.stride_steps());

  std::ostringstream csv;
  write_samples_csv(csv, samples);
  auto m = base_manifest(cfg, "simulate");
  m["seed"] = sim.seed;
  m["dt"] = sim.dt;
  m["t_total"] = sim.t_total;
  m["stride"] = cfg.sim.stride_steps();
  m["stride_time"] = cfg.sim.stride_time;
  m["n"] = cfg.sim.n;
  m["drift"] = cfg.drift_g.text();
  m["drift_params"] = params_json(g);
  m["sigma"] = sim.sigma;
  m["burn_in"] = sim.burn_in;
  m["generator"] = kRngName;
  m["provenance"] = samples.provenance;
  const fs::path path = dir / "samples.csv";
  write_with_manifest(path, csv.str(), m);
  out << path.string() << "\n";
  return kSuccess;
}

int cmd_estimate(const CommandOptions& opts, std::ostream& out, std::ostream& log) {
  auto [cfg, dir] = load(opts);
  const fs::path input = cfg.samples ? *cfg.samples : dir / "samples.csv";
  const SampleSet samples = read_samples_csv(input);
  if (samples.dim() != cfg.dim) {
    throw DimensionMismatchError("sample file has dimension " + std::to_string(samples.dim()) + ", config says " +
                                 std::to_string(cfg.dim));
  }
  const DriftField g = cfg.drift_g.build(cfg.dim);
  const DriftField r = cfg.drift_r.build(cfg.dim);
  const EstimatorConfig ecfg = cfg.estimator_config(samples);
  const auto est = solve_gradient_field(samples, r, ecfg);
  auto report = rate_estimate(est);
  std::vector<std::string> warnings = est.diagnostics.warnings;
  if (cfg.oracle) report.attach_oracle(oracle_rate(cfg, g, &warnings));
  log_warnings(log, warnings, "");

  ordered_json j;
  j["rate_estimate"] = report.rate_estimate;
  j["n_used"] = report.n_used;
  j["oracle_rate"] = report.oracle_rate ? ordered_json(*report.oracle_rate) : ordered_json(nullptr);
  j["relative_error"] = report.relative_error ? ordered_json(*report.relative_error) : ordered_json(nullptr);
  try {
    j["drift_rel_l2"] = gradient_relative_l2(est, g, r);
  } catch (const NumericError&) {
    j["drift_rel_l2"] = nullptr;
  }
  j["params"] = params_json(g);
  j["C"] = ecfg.C;
  j["length_scale"] = ecfg.kernel.length_scale();
  j["estimator_digest"] = report.config_digest;
  j["residual_norm"] = est.diagnostics.residual_norm;
  j["condition_estimate"] = est.diagnostics.condition_estimate;
  j["duplicates_removed"] = est.diagnostics.duplicates_removed;
  j["periodic_images"] = est.diagnostics.periodic_images;
  j["warnings"] = warnings;
  j["samples"] = input.string();

  auto m = base_manifest(cfg, "estimate");
  m["samples"] = input.string();
  m["samples_digest"] = file_digest(input);
  m["samples_provenance"] = samples.provenance;
  write_with_manifest(dir / "estimate.json", j.dump(2) + "\n", m);
  write_with_manifest(dir / "gradient_samples.csv", gradient_samples_csv(est), m);
  if (cfg.dim == 1) write_with_manifest(dir / "gradient_grid.csv", gradient_grid_csv(est, g, r), m);

  out << "rate_estimate " << format_double(report.rate_estimate);
  if (report.oracle_rate) {
    out << "  oracle " << format_double(*report.oracle_rate) << "  rel_error " << format_double(*report.relative_error);
  }
  out << "\n";
  return kSuccess;
}

int cmd_sweep(const CommandOptions& opts, std::ostream& out, std::ostream& log) {
  auto [cfg, dir] = load(opts);
  if (!cfg.sweep) throw InputError("config has no 'sweep' section");
  const auto& sweep = *cfg.sweep;
  const DriftField r = cfg.drift_r.build(cfg.dim);

  const fs::path path = dir / "sweep.csv";
  std::ofstream csv(path, std::ios::trunc);
  if (!csv) throw InputError("cannot write " + path.string());
  csv << sweep.param << ",seed,n_used,rate_estimate,oracle_rate,rel_error,drift_rel_l2,residual_norm,C,length_scale,status\n";
  csv.flush();

  auto m = base_manifest(cfg, "sweep");
  ordered_json rows = ordered_json::array();
  bool any_failed = false;
  for (double value : sweep.values) {
    const std::uint64_t seed = sweep_seed(cfg.sim.seed, value);
    std::string line;
    try {
      const DriftField g = cfg.drift_g.build(cfg.dim, sweep.param, value);
      auto res = run_pipeline(cfg, g, seed);
      log_warnings(log, res.warnings, sweep.param + "=" + value_tag(value) + ": ");
      const auto& rep = res.report;
      line = format_double(value) + "," + std::to_string(seed) + "," + std::to_string(rep.n_used) + "," +
             format_double(rep.rate_estimate) + "," + opt_field(rep.oracle_rate) + "," +
             opt_field(rep.relative_error) + "," + opt_field(res.drift_rel_l2) + "," +
             format_double(res.estimate.diagnostics.residual_norm) + "," + format_double(res.estimate.config.C) +
             "," + format_double(res.estimate.config.kernel.length_scale()) + ",ok";
      if (cfg.dim == 1) {
        const fs::path grid = dir / ("gradient_grid_" + sweep.param + "_" + value_tag(value) + ".csv");
        write_with_manifest(grid, gradient_grid_csv(res.estimate, g, r), m);
      }
      rows.push_back({{"value", value}, {"seed", seed}, {"warnings", res.warnings}});
    } catch (const Error& e) {
      any_failed = true;
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      line = format_double(value) + "," + std::to_string(seed) + ",,,,,,,,,error: " + msg;
      log << "error: " << sweep.param << "=" << value_tag(value) << ": " << e.what() << "\n";
      rows.push_back({{"value", value}, {"seed", seed}, {"error", e.what()}});
    }
    csv << line << "\n";
    csv.flush();
    out << line << "\n";
  }
  csv.close();
  m["base_seed"] = cfg.sim.seed;
  m["rows"] = rows;
  write_manifest(path, m);
  return any_failed ? kNumericFailure : kSuccess;
}

int cmd_oracle(const CommandOptions& opts, std::ostream& out, std::ostream& log) {
  auto [cfg, dir] = load(opts);
  if (!cfg.oracle) throw InputError("config has no 'oracle' section");
  std::ostringstream csv;
  std::vector<std::string> warnings;
  if (cfg.sweep) {
    csv << cfg.sweep->param << ",exact_rer\n";
    for (double v : cfg.sweep->values) {
      const double rate = oracle_rate(cfg, cfg.drift_g.build(cfg.dim, cfg.sweep->param, v), &warnings);
      csv << format_double(v) << "," << format_double(rate) << "\n";
    }
  } else {
    csv << "exact_rer\n" << format_double(oracle_rate(cfg, cfg.drift_g.build(cfg.dim), &warnings)) << "\n";
  }
  log_warnings(log, warnings, "");
  auto m = base_manifest(cfg, "oracle");
  m["grid"] = {{"lo", cfg.oracle->lo}, {"hi", cfg.oracle->hi}, {"m", cfg.oracle->m},
               {"boundary", cfg.oracle->boundary == Boundary::Open ? "open" : "periodic"}};
  m["warnings"] = warnings;
  write_with_manifest(dir / "oracle.csv", csv.str(), m);
  out << csv.str();
  return kSuccess;
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + " is empty");
  const auto header = split_csv(line);
  if (header.size() != 11 || header[1] != "seed" || header.back() != "status") {
    throw InputError(path.string() + " is not a sweep table");
  }
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 11) throw InputError(path.string() + ": malformed row '" + line + "'");
    SweepRow row;
    row.value = *parse_opt(f[0]);
    row.seed = std::stoull(f[1]);
    row.n_used = f[2].empty() ? 0 : std::stoull(f[2]);
    row.rate_estimate = parse_opt(f[3]);
    row.oracle_rate = parse_opt(f[4]);
    row.rel_error = parse_opt(f[5]);
    row.drift_rel_l2 = parse_opt(f[6]);
    row.residual_norm = parse_opt(f[7]);
    row.status = f[10];
    rows.push_back(row);
  }
  return rows;
}

namespace {

// value -> rate from either the sweep table or a single estimate.
std::map<double, double> read_estimates(const ExperimentConfig& cfg, const fs::path& dir) {
  std::map<double, double> out;
  if (cfg.sweep && fs::exists(dir / "sweep.csv")) {
    for (const auto& row : read_sweep_csv(dir / "sweep.csv")) {
      if (!row.rate_estimate) throw NumericError("sweep row " + format_double(row.value) + " failed: " + row.status);
      out[row.value] = *row.rate_estimate;
    }
    return out;
  }
  const fs::path path = dir / "estimate.json";
  std::ifstream in(path);
  if (!in) throw InputError("no estimates found: expected " + (dir / "sweep.csv").string() + " or " + path.string());
  auto j = nlohmann::json::parse(in);
  double key = 0.0;
  if (cfg.sweep) key = j.at("params").at(cfg.sweep->param).get<double>();
  out[key] = j.at("rate_estimate").get<double>();
  return out;
}

std::map<double, double> read_oracle(const ExperimentConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  const bool keyed = header.size() == 2;
  if (!(keyed && header[1] == "exact_rer") && !(header.size() == 1 && header[0] == "exact_rer")) {
    throw InputError(path.string() + " is not an oracle table");
  }
  if (keyed && cfg.sweep && header[0] != cfg.sweep->param) {
    throw InputError(path.string() + " is keyed by '" + header[0] + "', config sweeps '" + cfg.sweep->param + "'");
  }
  std::map<double, double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != header.size()) throw InputError(path.string() + ": malformed row '" + line + "'");
    if (keyed) {
      out[*parse_opt(f[0])] = *parse_opt(f[1]);
    } else {
      out[0.0] = *parse_opt(f[0]);
    }
  }
  return out;
}

}  // namespace

int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream&) {
  auto [cfg, dir] = load(opts);
  const auto estimates = read_estimates(cfg, dir);
  const auto exact = read_oracle(cfg, dir / "oracle.csv");

  std::vector<std::string> missing;
  for (const auto& [v, _] : estimates) {
    if (!exact.count(v)) missing.push_back("oracle lacks " + param_label(cfg) + "=" + format_double(v));
  }
  for (const auto& [v, _] : exact) {
    if (!estimates.count(v)) missing.push_back("estimates lack " + param_label(cfg) + "=" + format_double(v));
  }
  if (!missing.empty()) {
    std::string msg = "value sets differ:";
    for (const auto& s : missing) msg += "\n  " + s;
    throw InputError(msg);
  }

  out << param_label(cfg) << ",rate_estimate,exact_rer,rel_error\n";
  double worst = 0.0;
  for (const auto& [v, est] : estimates) {
    const double ex = exact.at(v);
    const double rel = ex != 0.0 ? std::abs(est - ex) / std::abs(ex) : std::abs(est);
    worst = std::max(worst, rel);
    out << format_double(v) << "," << format_double(est) << "," << format_double(ex) << "," << format_double(rel)
        << "\n";
  }
  const bool ok = worst <= cfg.tolerance;
  out << "max_rel_error " << format_double(worst) << " tolerance " << format_double(cfg.tolerance)
      << (ok ? " PASS" : " FAIL") << "\n";
  return ok ? kSuccess : kToleranceFailure;
}

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out, std::ostream& log) {
  try {
    if (name == "simulate") return cmd_simulate(opts, out, log);
    if (name == "estimate") return cmd_estimate(opts, out, log);
    if (name == "sweep") return cmd_sweep(opts, out, log);
    if (name == "oracle") return cmd_oracle(opts, out, log);
    if (name == "compare") return cmd_compare(opts, out, log);
    log << "error: unknown command '" << name << "'\n";
    return kConfigError;
  } catch (const InputError& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    log << "error: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const nlohmann::json::exception& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace entrate::cli

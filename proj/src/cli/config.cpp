#include "entrate/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "entrate/catalog.hpp"
#include "entrate/digest.hpp"
#include "entrate/error.hpp"

namespace entrate::cli {

using nlohmann::ordered_json;

namespace {

// Typed access to one JSON object, naming fields by their dotted path in errors.
class Section {
 public:
  Section(const ordered_json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw InputError("config field '" + label() + "' must be an object");
  }

  void only(std::initializer_list<const char*> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj_.items()) {
      if (!ok.count(key)) throw InputError("config field '" + field(key) + "' is not recognized");
    }
  }

  bool has(const char* key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

  const ordered_json& at(const char* key) const {
    if (!has(key)) throw InputError("config field '" + field(key) + "' is missing");
    return obj_.at(key);
  }

  double number(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw InputError("config field '" + field(key) + "' must be a number");
    double out = v.get<double>();
    if (!std::isfinite(out)) throw InputError("config field '" + field(key) + "' must be finite");
    return out;
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  double positive(const char* key) const {
    double v = number(key);
    if (!(v > 0.0)) throw InputError("config field '" + field(key) + "' must be positive");
    return v;
  }
  double positive(const char* key, double fallback) const { return has(key) ? positive(key) : fallback; }

  std::uint64_t count(const char* key) const {
    const auto& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw InputError("config field '" + field(key) + "' must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const char* key, std::uint64_t fallback) const { return has(key) ? count(key) : fallback; }

  std::string text(const char* key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw InputError("config field '" + field(key) + "' must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key) const {
    const auto& v = at(key);
    if (v.is_number()) return {number(key)};
    if (!v.is_array()) throw InputError("config field '" + field(key) + "' must be a number or a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        throw InputError("config field '" + field(key) + "' must hold finite numbers");
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  Section sub(const char* key) const { return Section(at(key), field(key)); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }

  const ordered_json& obj_;
  std::string path_;
};

DriftSpec parse_drift(const Section& s, int dim) {
  s.only({"catalog", "expression", "params"});
  DriftSpec spec;
  if (s.has("catalog") == s.has("expression")) {
    throw InputError("config field '" + s.field("") + "' needs exactly one of 'catalog' or 'expression'");
  }
  if (s.has("catalog")) {
    spec.catalog = s.text("catalog");
  } else {
    const auto& e = s.at("expression");
    if (e.is_string()) {
      spec.expressions.push_back(e.get<std::string>());
    } else if (e.is_array()) {
      for (const auto& item : e) {
        if (!item.is_string()) throw InputError("config field '" + s.field("expression") + "' must hold strings");
        spec.expressions.push_back(item.get<std::string>());
      }
    } else {
      throw InputError("config field '" + s.field("expression") + "' must be a string or a list of strings");
    }
  }
  if (s.has("params")) {
    Section p = s.sub("params");
    for (const auto& [key, value] : s.at("params").items()) spec.params[key] = p.number(key.c_str());
  }
  // Build once so that bad expressions and parameters surface as config errors.
  spec.build(dim);
  return spec;
}

}  // namespace

DriftField DriftSpec::build(int dim) const {
  if (!catalog.empty()) {
    if (dim != 1) throw DimensionMismatchError("catalog drifts are one-dimensional");
    return catalog_drift(catalog, params);
  }
  return DriftField::from_expressions(expressions, dim, params);
}

DriftField DriftSpec::build(int dim, const std::string& param, double value) const {
  DriftSpec copy = *this;
  copy.params[param] = value;
  return copy.build(dim);
}

std::string DriftSpec::text() const {
  std::string out;
  if (!catalog.empty()) {
    out = catalog_entry(catalog).expression;
  } else {
    for (std::size_t i = 0; i < expressions.size(); ++i) out += (i ? "; " : "") + expressions[i];
  }
  return out;
}

std::size_t SimSection::stride_steps() const {
  return static_cast<std::size_t>(std::llround(stride_time / dt));
}

ExperimentConfig parse_config(const ordered_json& doc) {
  Section root(doc, "");
  root.only({"name", "dim", "drift_g", "drift_r", "sigma", "sim", "full_scale", "estimator", "sweep", "oracle",
             "tolerance", "output_dir", "samples"});
  ExperimentConfig cfg;
  cfg.raw = doc;
  cfg.name = root.has("name") ? root.text("name") : "experiment";
  cfg.dim = static_cast<int>(root.count("dim", 1));
  if (cfg.dim < 1) throw InputError("config field 'dim' must be at least 1");
  cfg.sigma = root.number("sigma");
  if (!(cfg.sigma >= 0.0)) throw InputError("config field 'sigma' must be nonnegative");
  cfg.drift_g = parse_drift(root.sub("drift_g"), cfg.dim);
  cfg.drift_r = parse_drift(root.sub("drift_r"), cfg.dim);

  Section sim = root.sub("sim");
  sim.only({"x0", "dt", "t_total", "burn_in", "n", "stride_time", "seed"});
  cfg.sim.x0 = sim.has("x0") ? sim.numbers("x0") : std::vector<double>(static_cast<std::size_t>(cfg.dim), 0.0);
  if (static_cast<int>(cfg.sim.x0.size()) != cfg.dim) {
    throw InputError("config field 'sim.x0' must have " + std::to_string(cfg.dim) + " entries");
  }
  cfg.sim.dt = sim.positive("dt");
  cfg.sim.t_total = sim.positive("t_total");
  cfg.sim.burn_in = sim.number("burn_in", 10.0);
  if (cfg.sim.burn_in < 0.0) throw InputError("config field 'sim.burn_in' must be nonnegative");
  cfg.sim.n = sim.count("n");
  if (cfg.sim.n == 0) throw InputError("config field 'sim.n' must be positive");
  cfg.sim.stride_time = sim.positive("stride_time");
  if (cfg.sim.stride_steps() == 0) throw InputError("config field 'sim.stride_time' is shorter than dt");
  cfg.sim.seed = sim.count("seed", 1);

  if (root.has("full_scale")) {
    Section fs = root.sub("full_scale");
    fs.only({"t_total", "n"});
    cfg.full_scale.t_total = fs.positive("t_total", cfg.full_scale.t_total);
    cfg.full_scale.n = fs.count("n", cfg.full_scale.n);
  }

  if (root.has("estimator")) {
    Section est = root.sub("estimator");
    est.only({"C", "length_scale", "periodic"});
    cfg.estimator.C = est.positive("C", 1.0);
    if (est.has("length_scale")) {
      const auto& l = est.at("length_scale");
      if (l.is_string()) {
        if (l.get<std::string>() != "median") {
          throw InputError("config field 'estimator.length_scale' must be a positive number or \"median\"");
        }
      } else {
        cfg.estimator.length_scale = est.positive("length_scale");
      }
    }
    if (est.has("periodic")) {
      Section per = est.sub("periodic");
      per.only({"lo", "period", "pad"});
      PeriodicDomain dom;
      dom.lo = per.number("lo");
      dom.period = per.positive("period");
      dom.pad = per.number("pad", 0.0);
      if (dom.pad < 0.0 || dom.pad > dom.period) {
        throw InputError("config field 'estimator.periodic.pad' must lie in [0, period]");
      }
      cfg.estimator.periodic = dom;
    }
  }

  if (root.has("sweep")) {
    Section sw = root.sub("sweep");
    sw.only({"param", "values"});
    SweepSection sweep;
    sweep.param = sw.text("param");
    sweep.values = sw.numbers("values");
    if (sweep.values.empty()) throw InputError("config field 'sweep.values' is empty");
    std::set<double> seen(sweep.values.begin(), sweep.values.end());
    if (seen.size() != sweep.values.size()) throw InputError("config field 'sweep.values' has repeated entries");
    if (!cfg.drift_g.params.count(sweep.param)) {
      throw InputError("config field 'sweep.param': '" + sweep.param + "' is not a parameter of drift_g");
    }
    cfg.sweep = sweep;
  }

  if (root.has("oracle")) {
    Section orc = root.sub("oracle");
    orc.only({"lo", "hi", "m", "boundary"});
    OracleSection o;
    o.lo = orc.number("lo");
    o.hi = orc.number("hi");
    o.m = orc.count("m", 8001);
    if (orc.has("boundary")) {
      const std::string b = orc.text("boundary");
      if (b == "open") {
        o.boundary = Boundary::Open;
      } else if (b == "periodic") {
        o.boundary = Boundary::Periodic;
      } else {
        throw InputError("config field 'oracle.boundary' must be \"open\" or \"periodic\"");
      }
    }
    if (cfg.dim != 1) throw InputError("config field 'oracle': the quadrature oracle is one-dimensional");
    QuadratureGrid::simpson(o.lo, o.hi, o.m);
    cfg.oracle = o;
  }

  cfg.tolerance = root.positive("tolerance", 0.15);
  if (root.has("output_dir")) cfg.output_dir = root.text("output_dir");
  if (root.has("samples")) cfg.samples = root.text("samples");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  ExperimentConfig cfg = parse_config(doc);
  cfg.source = path;
  // Relative paths inside a config resolve against the working directory,
  // like the --out flag.
  return cfg;
}

void ExperimentConfig::apply_overrides(std::optional<std::uint64_t> seed, bool full_scale) {
  if (seed) {
    sim.seed = *seed;
    raw["sim"]["seed"] = *seed;
  }
  if (full_scale) {
    sim.t_total = this->full_scale.t_total;
    sim.n = this->full_scale.n;
    raw["sim"]["t_total"] = sim.t_total;
    raw["sim"]["n"] = sim.n;
    raw["full_scale_profile"] = true;
  }
}

std::string ExperimentConfig::digest() const {
  // Sorted keys, so the digest ignores key order in the file.
  nlohmann::json canonical = raw;
  canonical.erase("output_dir");
  return hex64(fnv1a64(canonical.dump()));
}

SimConfig ExperimentConfig::sim_config(const DriftField& g) const {
  SimConfig out;
  out.drift = g;
  out.sigma = sigma;
  out.x0 = sim.x0;
  out.dt = sim.dt;
  out.t_total = sim.t_total;
  out.burn_in = sim.burn_in;
  out.seed = sim.seed;
  return out;
}

EstimatorConfig ExperimentConfig::estimator_config(const SampleSet& samples) const {
  if (!(sigma > 0.0)) throw InputError("estimation needs sigma > 0");
  double l = 0.0;
  if (estimator.length_scale) {
    l = *estimator.length_scale;
  } else if (estimator.periodic) {
    PeriodicDomain cell = *estimator.periodic;
    cell.pad = 0.0;
    std::size_t n_primary = 0;
    l = median_heuristic(fold_periodic(samples, cell, &n_primary).points);
  } else {
    l = median_heuristic(samples.points);
  }
  EstimatorConfig out = EstimatorConfig::isotropic(estimator.C, l, dim, sigma);
  out.periodic = estimator.periodic;
  return out;
}

std::optional<QuadratureGrid> ExperimentConfig::oracle_grid() const {
  if (!oracle) return std::nullopt;
  return QuadratureGrid::simpson(oracle->lo, oracle->hi, oracle->m);
}

}  // namespace entrate::cli

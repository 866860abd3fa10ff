#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "entrate/cli/commands.hpp"
#include "entrate/cli/manifest.hpp"
#include "entrate/error.hpp"
#include "entrate/sample_io.hpp"

namespace fs = std::filesystem;
using namespace entrate;
using namespace entrate::cli;
using nlohmann::ordered_json;

namespace {

const fs::path kConfigs = ENTRATE_CONFIG_DIR;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("entrate_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_json(const fs::path& dir, const std::string& name, const ordered_json& j) {
  fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

// Small OU experiment that runs in well under a second.
ordered_json small_ou() {
  return ordered_json::parse(R"({
    "name": "small_ou",
    "drift_g": {"expression": "-theta*x", "params": {"theta": 1.0}},
    "drift_r": {"expression": "0"},
    "sigma": 1.0,
    "sim": {"x0": 0.0, "dt": 0.01, "t_total": 401, "burn_in": 1, "n": 200, "stride_time": 2, "seed": 9},
    "estimator": {"C": 1.0, "length_scale": "median"},
    "sweep": {"param": "theta", "values": [1, 2]},
    "oracle": {"lo": -8, "hi": 8, "m": 2001}
  })");
}

int run(const std::string& cmd, const fs::path& config, const fs::path& out, std::string* stdout_text = nullptr,
        std::string* stderr_text = nullptr) {
  CommandOptions opts;
  opts.config = config;
  opts.out = out;
  std::ostringstream o, e;
  int code = run_command(cmd, opts, o, e);
  if (stdout_text) *stdout_text = o.str();
  if (stderr_text) *stderr_text = e.str();
  return code;
}

}  // namespace

TEST_CASE("golden configs parse") {
  for (const char* name : {"example1.json", "example2.json", "example3.json", "ou_validation.json", "constant_shift.json"}) {
    INFO(name);
    auto cfg = load_config(kConfigs / name);
    CHECK(cfg.sweep.has_value());
    CHECK(cfg.oracle.has_value());
    CHECK(cfg.sim.n == 2000);
    CHECK(cfg.sim.stride_steps() == 10000);
    CHECK(cfg.sim.burn_in + static_cast<double>(cfg.sim.n) * cfg.sim.stride_time <= cfg.sim.t_total);
  }
}

TEST_CASE("config errors name the field") {
  auto doc = small_ou();
  doc.erase("sigma");
  try {
    parse_config(doc);
    FAIL("expected a config error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("'sigma'") != std::string::npos);
  }

  doc = small_ou();
  doc["sim"]["dtt"] = 1;
  CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("sim.dtt"), InputError);

  doc = small_ou();
  doc["sweep"]["values"] = ordered_json::array();
  CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("sweep.values"), InputError);

  doc = small_ou();
  doc["sweep"]["param"] = "beta";
  CHECK_THROWS_WITH_AS(parse_config(doc), doctest::Contains("sweep.param"), InputError);

  doc = small_ou();
  doc["drift_g"]["expression"] = "-theta*y";
  CHECK_THROWS_AS(parse_config(doc), UnknownIdentifierError);

  TempDir tmp;
  std::ofstream(tmp.path / "broken.json") << "{\n  \"name\": \"x\",\n  oops\n}";
  std::string err;
  CHECK(run("simulate", tmp.path / "broken.json", tmp.path, nullptr, &err) == kConfigError);
  CHECK(err.find("line 3") != std::string::npos);
  CHECK(run("simulate", tmp.path / "missing.json", tmp.path) == kConfigError);
}

TEST_CASE("overrides change the digest") {
  auto cfg = parse_config(small_ou());
  const std::string base = cfg.digest();
  auto reordered = small_ou();
  auto sim = reordered["sim"];
  reordered.erase("sim");
  reordered["sim"] = sim;
  CHECK(parse_config(reordered).digest() == base);
  cfg.apply_overrides(77, false);
  CHECK(cfg.sim.seed == 77);
  CHECK(cfg.digest() != base);
  auto full = parse_config(small_ou());
  full.apply_overrides(std::nullopt, true);
  CHECK(full.sim.n == 10000);
}

TEST_CASE("simulate writes samples and a sidecar manifest") {
  TempDir tmp;
  auto doc = small_ou();
  doc["sigma"] = 0.0;
  doc["sim"]["x0"] = 1.0;
  doc["sim"]["burn_in"] = 0.0;
  auto config = write_json(tmp.path, "det.json", doc);
  REQUIRE(run("simulate", config, tmp.path) == kSuccess);
  auto s = read_samples_csv(tmp.path / "samples.csv");
  REQUIRE(s.size() == 200);
  for (std::size_t i = 0; i < s.size(); ++i) {
    // 200 Euler steps of x -> 0.99 x between kept points
    CHECK(s.points(0, static_cast<Eigen::Index>(i)) ==
          doctest::Approx(std::pow(0.99, 200.0 * static_cast<double>(i))).epsilon(1e-10));
  }
  auto m = nlohmann::json::parse(slurp(tmp.path / "samples.csv.manifest.json"));
  CHECK(m["seed"] == 9);
  CHECK(m["dt"] == 0.01);
  CHECK(m["stride"] == 200);
  CHECK(m["drift"] == "-theta*x");
  CHECK(m["sigma"] == 0.0);
  CHECK(m["burn_in"] == 0.0);
  CHECK(m["generator"] == "splitmix64-counter/box-muller");
  CHECK(verify_manifest(tmp.path / "samples.csv", load_config(config)).empty());
  std::ofstream(tmp.path / "samples.csv", std::ios::app) << "9,9\n";
  CHECK(!verify_manifest(tmp.path / "samples.csv", load_config(config)).empty());
}

TEST_CASE("example 1 desk-scale simulation yields 2000 rows") {
  TempDir tmp;
  REQUIRE(run("simulate", kConfigs / "example1.json", tmp.path) == kSuccess);
  auto s = read_samples_csv(tmp.path / "samples.csv");
  CHECK(s.size() == 2000);
  CHECK(s.tau == doctest::Approx(10.0));
}

TEST_CASE("divergence maps to the numeric exit code") {
  TempDir tmp;
  auto doc = small_ou();
  doc["drift_g"] = {{"expression", "x^3"}};
  doc["sigma"] = 0.0;
  doc["sim"]["x0"] = 10.0;
  doc.erase("sweep");
  std::string err;
  CHECK(run("simulate", write_json(tmp.path, "div.json", doc), tmp.path, nullptr, &err) == kNumericFailure);
  CHECK(err.find("diverged") != std::string::npos);
}

TEST_CASE("estimate writes the report and gradient tables") {
  TempDir tmp;
  auto config = write_json(tmp.path, "ou.json", small_ou());
  REQUIRE(run("simulate", config, tmp.path) == kSuccess);
  REQUIRE(run("estimate", config, tmp.path) == kSuccess);
  auto j = nlohmann::json::parse(slurp(tmp.path / "estimate.json"));
  CHECK(j["rate_estimate"].get<double>() >= 0.0);
  CHECK(j["n_used"] == 200);
  CHECK(j["oracle_rate"].get<double>() == doctest::Approx(0.25).epsilon(1e-8));
  std::ifstream grid(tmp.path / "gradient_grid.csv");
  std::string line;
  int rows = -1;
  while (std::getline(grid, line)) ++rows;
  CHECK(rows == 400);
  CHECK(fs::exists(tmp.path / "gradient_samples.csv"));
  CHECK(verify_manifest(tmp.path / "estimate.json", load_config(config)).empty());
}

TEST_CASE("duplicate rows are reported and tolerated") {
  TempDir tmp;
  auto doc = small_ou();
  doc["samples"] = (tmp.path / "dup.csv").string();
  std::ofstream(tmp.path / "dup.csv") << "t,x1\n0,0.5\n1,-0.25\n2,0.5\n3,1.0\n4,-1.5\n";
  std::string err;
  REQUIRE(run("estimate", write_json(tmp.path, "dup.json", doc), tmp.path, nullptr, &err) == kSuccess);
  CHECK(err.find("duplicate") != std::string::npos);
  auto j = nlohmann::json::parse(slurp(tmp.path / "estimate.json"));
  CHECK(j["duplicates_removed"] == 1);
}

TEST_CASE("oracle tables") {
  TempDir tmp;
  std::string out;
  auto ex2 = ordered_json::parse(slurp(kConfigs / "example2.json"));
  ex2["sweep"]["values"] = {0};
  REQUIRE(run("oracle", write_json(tmp.path, "ex2.json", ex2), tmp.path, &out) == kSuccess);
  CHECK(out == "beta,exact_rer\n0,0\n");

  REQUIRE(run("oracle", kConfigs / "constant_shift.json", tmp.path, &out) == kSuccess);
  auto lines = out.substr(out.find('\n') + 1);
  CHECK(std::stod(lines.substr(lines.find(',') + 1)) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("example 1 oracle matches the frozen table") {
  TempDir tmp;
  REQUIRE(run("oracle", kConfigs / "example1.json", tmp.path) == kSuccess);
  CHECK(slurp(tmp.path / "oracle.csv") == slurp(fs::path(ENTRATE_GOLDEN_DIR) / "oracle_example1.csv"));
}

TEST_CASE("compare") {
  TempDir tmp;
  auto doc = small_ou();
  doc["tolerance"] = 0.15;
  auto config = write_json(tmp.path, "cmp.json", doc);
  auto sweep_table = [&](double a, double b) {
    std::ofstream(tmp.path / "sweep.csv")
        << "theta,seed,n_used,rate_estimate,oracle_rate,rel_error,drift_rel_l2,residual_norm,C,length_scale,status\n"
        << "1,1,200," << a << ",,,,,1,1,ok\n"
        << "2,2,200," << b << ",,,,,1,1,ok\n";
  };
  std::ofstream(tmp.path / "oracle.csv") << "theta,exact_rer\n1,0.25\n2,0.5\n";
  sweep_table(0.26, 0.48);
  CHECK(run("compare", config, tmp.path) == kSuccess);
  sweep_table(0.26, 0.65);
  std::string out;
  CHECK(run("compare", config, tmp.path, &out) == kToleranceFailure);
  CHECK(out.find("FAIL") != std::string::npos);

  std::ofstream(tmp.path / "oracle.csv") << "theta,exact_rer\n1,0.25\n3,0.75\n";
  std::string err;
  CHECK(run("compare", config, tmp.path, nullptr, &err) == kConfigError);
  CHECK(err.find("theta=3") != std::string::npos);
  CHECK(err.find("theta=2") != std::string::npos);
}

TEST_CASE("sweep seeds follow the value") {
  CHECK(sweep_seed(5, 1.5) == sweep_seed(5, 1.5));
  CHECK(sweep_seed(5, 1.5) != sweep_seed(5, 2.0));
  CHECK(sweep_seed(5, 1.5) != sweep_seed(6, 1.5));
  CHECK(sweep_seed(5, 0.0) == sweep_seed(5, -0.0));
}

TEST_CASE("sweep rows are deterministic and independent of order") {
  TempDir a, b, c;
  auto doc = small_ou();
  auto config = write_json(a.path, "ou.json", doc);
  REQUIRE(run("sweep", config, a.path) == kSuccess);
  REQUIRE(run("sweep", config, b.path) == kSuccess);
  CHECK(slurp(a.path / "sweep.csv") == slurp(b.path / "sweep.csv"));

  doc["sweep"]["values"] = {2, 1};
  REQUIRE(run("sweep", write_json(c.path, "rev.json", doc), c.path) == kSuccess);
  auto forward = read_sweep_csv(a.path / "sweep.csv");
  auto reverse = read_sweep_csv(c.path / "sweep.csv");
  REQUIRE(forward.size() == 2);
  REQUIRE(reverse.size() == 2);
  CHECK(forward[0].value == reverse[1].value);
  CHECK(forward[0].rate_estimate == reverse[1].rate_estimate);
  CHECK(forward[1].rate_estimate == reverse[0].rate_estimate);
  CHECK(forward[0].status == "ok");
  CHECK(forward[0].oracle_rate.has_value());
}

TEST_CASE("sweep records failing rows and continues") {
  TempDir tmp;
  auto doc = small_ou();
  doc["drift_g"] = {{"expression", "-theta*x^3"}, {"params", {{"theta", 1.0}}}};
  doc["sim"]["x0"] = 3.0;
  doc["sim"]["dt"] = 0.5;
  doc["sim"]["t_total"] = 801;
  doc["sim"]["stride_time"] = 4;
  doc["sweep"]["values"] = {-1, 0.01};
  doc.erase("oracle");
  std::string out;
  CHECK(run("sweep", write_json(tmp.path, "bad.json", doc), tmp.path, &out) == kNumericFailure);
  auto rows = read_sweep_csv(tmp.path / "sweep.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].status.rfind("error:", 0) == 0);
  CHECK(rows[1].status == "ok");
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "entrate/catalog.hpp"
#include "entrate/error.hpp"
#include "entrate/estimator.hpp"
#include "entrate/sde_sim.hpp"

using namespace entrate;

namespace {

SampleSet points_1d(std::initializer_list<double> xs) {
  SampleSet s;
  s.points.resize(1, static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) s.points(0, i++) = x;
  return s;
}

SampleSet random_points(int d, int n, std::uint64_t seed, double spread = 1.5) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, spread);
  SampleSet s;
  s.points.resize(d, n);
  for (Eigen::Index k = 0; k < s.points.size(); ++k) s.points.data()[k] = normal(gen);
  return s;
}

DriftField constant_drift(double c) {
  return DriftField::native(1, [c](std::span<const double>, std::span<double> out) { out[0] = c; }, "const");
}

DriftField rotation_drift() {
  return DriftField::from_expressions({"-x1 + 0.5*x2", "sin(x1) - x2"}, 2, {});
}

SampleSet simulate_null(const DriftField& g, std::size_t n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.drift = g;
  cfg.sigma = 1.0;
  cfg.x0 = {0.5};
  cfg.dt = 1e-3;
  cfg.burn_in = 10.0;
  cfg.t_total = cfg.burn_in + 10.0 * static_cast<double>(n);
  cfg.seed = seed;
  return simulate_samples(cfg, n, 10000);
}

}  // namespace

TEST_CASE("single-point system") {
  auto s = points_1d({0.3});
  auto cfg = EstimatorConfig::isotropic(1.0, 1.0, 1, 1.0);
  auto sys = assemble_system(s, constant_drift(1.0), cfg);
  CHECK(sys.A(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(sys.b(0) == doctest::Approx(-1.0).epsilon(1e-15));

  auto est = solve_gradient_field(s, constant_drift(1.0), cfg);
  CHECK(est.u(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(est.coefficients(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  Eigen::VectorXd x(1);
  x << 0.3;
  CHECK(evaluate_psi(est, x) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(rate_estimate(est).rate_estimate == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("single-point solution follows the closed form") {
  std::mt19937_64 gen(123);
  std::uniform_real_distribution<double> pos(0.1, 5.0);
  std::uniform_real_distribution<double> sym(-3.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    const double C = pos(gen), l = pos(gen), r1 = sym(gen), sigma = std::sqrt(pos(gen));
    const double D = sigma * sigma;
    auto est = solve_gradient_field(points_1d({sym(gen)}), constant_drift(r1),
                                    EstimatorConfig::isotropic(C, l, 1, sigma));
    const double expected = -C * r1 / (l * l + C * D);
    CHECK(std::abs(est.u(0, 0) - expected) <= 1e-13 * (1.0 + std::abs(expected)));
  }
}

TEST_CASE("degenerate limits") {
  auto s = random_points(2, 7, 4);
  auto r = rotation_drift();
  auto sys = assemble_system(s, r, EstimatorConfig::isotropic(0.0, 1.0, 2, 1.0));
  CHECK(sys.A.isApprox(Eigen::MatrixXd::Identity(14, 14)));
  CHECK(sys.b.isZero());

  auto zero = catalog_drift("zero");
  auto one = solve_gradient_field(points_1d({1.7}), zero, EstimatorConfig::isotropic(2.0, 0.7, 1, 1.3));
  CHECK(one.u(0, 0) == 0.0);

  auto est = solve_gradient_field(s, r, EstimatorConfig::isotropic(0.0, 1.0, 2, 1.0));
  Eigen::VectorXd x(2);
  x << 0.2, -0.4;
  CHECK(evaluate_psi(est, x) == 0.0);
  CHECK(evaluate_grad_psi(est, x).isZero());
  CHECK(rate_estimate(est).rate_estimate == 0.0);
}

TEST_CASE("far field decay") {
  auto s = random_points(1, 10, 8);
  auto est = solve_gradient_field(s, catalog_drift("double_well"), EstimatorConfig::isotropic(1.0, 0.5, 1, 1.0));
  Eigen::VectorXd far(1);
  far << 60.0;
  CHECK(std::abs(evaluate_psi(est, far)) < 1e-100);
  CHECK(evaluate_grad_psi(est, far).norm() < 1e-100);
}

TEST_CASE("solve residual, representer consistency and derivative consistency") {
  for (int d : {1, 2}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      auto s = random_points(d, 40, seed);
      DriftField r = d == 1 ? catalog_drift("tfa_gene", {{"beta", 1.0}}) : rotation_drift();
      auto cfg = EstimatorConfig::isotropic(3.0, 0.8, d, 0.9);
      auto est = solve_gradient_field(s, r, cfg);
      auto sys = assemble_system(est.samples, r, cfg);
      Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(est.u.data(), est.u.size());
      CHECK((sys.A * u - sys.b).norm() <= 1e-8 * (1.0 + sys.b.norm()));
      CHECK(est.diagnostics.residual_norm <= 1e-8 * (1.0 + sys.b.norm()));

      double worst = 0.0;
      for (Eigen::Index i = 0; i < est.samples.points.cols(); ++i) {
        worst = std::max(worst, (evaluate_grad_psi(est, est.samples.points.col(i)) - est.u.col(i)).cwiseAbs().maxCoeff());
      }
      CHECK(worst <= 1e-7);

      // central differences of psi and grad psi at an off-sample point
      Eigen::VectorXd x = Eigen::VectorXd::Constant(d, 0.37);
      const double h = 1e-4;
      Eigen::VectorXd g = evaluate_grad_psi(est, x);
      double trace = 0.0;
      for (int k = 0; k < d; ++k) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        e(k) = h;
        double fd = (evaluate_psi(est, x + e) - evaluate_psi(est, x - e)) / (2 * h);
        CHECK(std::abs(fd - g(k)) <= 1e-6 * (1.0 + std::abs(g(k))));
        Eigen::VectorXd col = (evaluate_grad_psi(est, x + e) - evaluate_grad_psi(est, x - e)) / (2 * h);
        trace += cfg.diffusion.row(k).dot(col);
      }
      const double exact = evaluate_trace_hessian_psi(est, x);
      CHECK(std::abs(trace - exact) <= 1e-6 * (1.0 + std::abs(exact)));
    }
  }
}

TEST_CASE("rate is nonnegative and equals the objective identity") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const int d = seed % 2 == 0 ? 2 : 1;
    auto s = random_points(d, 30, seed * 31);
    DriftField r = d == 1 ? catalog_drift("double_well_perturbed", {{"beta", 1.5}}) : rotation_drift();
    const double C = 0.5 * static_cast<double>(seed);
    auto est = solve_gradient_field(s, r, EstimatorConfig::isotropic(C, 0.9, d, 1.1));
    const double rate = rate_estimate(est).rate_estimate;
    CHECK(rate >= 0.0);
    // At the minimizer, -objective = rate + |psi|^2 / (C n); hence -objective >= rate.
    const double objective = empirical_objective(est, est.samples, r);
    const double norm2 = potential_norm_squared(est);
    CHECK(norm2 >= 0.0);
    const double n = static_cast<double>(est.samples.size());
    CHECK(std::abs(-objective - (rate + norm2 / (C * n))) <= 1e-9 * (1.0 + std::abs(objective)));
    CHECK(-objective >= rate - 1e-12);
  }
}

TEST_CASE("rate of constant gradients") {
  GradientFieldEstimate est;
  est.config = EstimatorConfig::isotropic(1.0, 1.0, 1, 1.0);
  est.u = Eigen::MatrixXd::Constant(1, 5, 0.6);
  est.n_primary = 5;
  CHECK(rate_estimate(est).rate_estimate == doctest::Approx(0.18));
  est.u.setZero();
  CHECK(rate_estimate(est).rate_estimate == 0.0);
}

TEST_CASE("objective for analytic potentials") {
  auto s = points_1d({-1.0, 0.0, 1.0});
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(1, 1);
  TrialPotential zero{[](const VecRef&) { return Eigen::VectorXd::Zero(1).eval(); },
                      [](const VecRef&) { return Eigen::MatrixXd::Zero(1, 1).eval(); }};
  CHECK(empirical_objective(zero, s, catalog_drift("double_well"), D) == 0.0);
  TrialPotential linear{[](const VecRef&) { return Eigen::VectorXd::Ones(1).eval(); },
                        [](const VecRef&) { return Eigen::MatrixXd::Zero(1, 1).eval(); }};
  CHECK(empirical_objective(linear, s, catalog_drift("zero"), D) == doctest::Approx(0.5));
  TrialPotential quad{[](const VecRef& x) { return Eigen::VectorXd(x); },
                      [](const VecRef&) { return Eigen::MatrixXd::Identity(1, 1).eval(); }};
  CHECK(empirical_objective(quad, s, catalog_drift("ou", {{"theta", 1.0}}), D) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("duplicates are removed with a warning") {
  auto s = points_1d({0.5, -0.2, 0.5, 1.0});
  auto est = solve_gradient_field(s, catalog_drift("double_well"), EstimatorConfig::isotropic(1.0, 1.0, 1, 1.0));
  CHECK(est.samples.size() == 3);
  CHECK(est.diagnostics.duplicates_removed == 1);
  REQUIRE(est.diagnostics.warnings.size() == 1);
  CHECK(est.diagnostics.warnings[0].find("duplicate") != std::string::npos);
  CHECK(est.samples.points(0, 0) == 0.5);
  CHECK(est.samples.points(0, 1) == -0.2);
}

TEST_CASE("input and size guards") {
  auto r = catalog_drift("double_well");
  CHECK_THROWS_AS(solve_gradient_field(random_points(2, 3, 1), r, EstimatorConfig::isotropic(1, 1, 2, 1)),
                  DimensionMismatchError);
  CHECK_THROWS_AS(solve_gradient_field(random_points(1, 20001, 1), r, EstimatorConfig::isotropic(1, 1, 1, 1)),
                  SizeGuardError);
  auto bad = EstimatorConfig::isotropic(1, 1, 1, 1);
  bad.diffusion(0, 0) = -1.0;
  CHECK_THROWS_AS(solve_gradient_field(random_points(1, 3, 1), r, bad), InputError);
  auto nan = points_1d({0.0, std::nan("")});
  CHECK_THROWS_AS(solve_gradient_field(nan, r, EstimatorConfig::isotropic(1, 1, 1, 1)), NumericError);
}

TEST_CASE("periodic folding keeps the observations first") {
  PeriodicDomain dom{-std::numbers::pi, 2 * std::numbers::pi, 1.0};
  auto s = points_1d({0.0, 7.0, -3.0, 0.0 + 2 * std::numbers::pi});
  std::size_t n_primary = 0;
  auto folded = fold_periodic(s, dom, &n_primary);
  CHECK(n_primary == 3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(folded.points(0, i) >= -std::numbers::pi);
    CHECK(folded.points(0, i) < std::numbers::pi);
  }
  CHECK(folded.points(0, 1) == doctest::Approx(7.0 - 2 * std::numbers::pi));
  // -3 lies within the pad of the lower edge; its image sits at -3 + 2 pi.
  bool found = false;
  for (Eigen::Index i = 3; i < folded.points.cols(); ++i) {
    found = found || std::abs(folded.points(0, i) - (-3.0 + 2 * std::numbers::pi)) < 1e-12;
    CHECK((folded.points(0, i) < -std::numbers::pi || folded.points(0, i) >= std::numbers::pi));
  }
  CHECK(found);

  auto cfg = EstimatorConfig::isotropic(1.0, 1.0, 1, 1.0);
  cfg.periodic = dom;
  auto est = solve_gradient_field(s, catalog_drift("trig", {{"beta", 1.0}}), cfg);
  CHECK(rate_estimate(est).n_used == 3);
  Eigen::VectorXd a(1), b(1);
  a << 0.4;
  b << 0.4 + 4 * std::numbers::pi;
  CHECK(evaluate_grad_psi(est, a)(0) == doctest::Approx(evaluate_grad_psi(est, b)(0)));
}

TEST_CASE("data drawn from the reference drift") {
  auto ou = catalog_drift("ou", {{"theta", 1.0}});
  for (std::uint64_t seed : {1, 2, 3}) {
    auto s = simulate_null(ou, 200, seed);
    auto est = solve_gradient_field(s, ou, EstimatorConfig::isotropic(0.01, 2.0, 1, 1.0));
    CHECK(est.u.cwiseAbs().maxCoeff() <= 0.05);
  }
}

TEST_CASE("null perturbation with default hyperparameters") {
  struct Family {
    const char* name;
    DriftField g;
    DriftField r;
    bool periodic;
  };
  const Family families[] = {
      {"double_well_perturbed", catalog_drift("double_well_perturbed", {{"beta", 0.0}}), catalog_drift("double_well"),
       false},
      {"tfa_gene", catalog_drift("tfa_gene", {{"beta", 0.0}}), catalog_drift("zero"), false},
      {"trig", catalog_drift("trig", {{"beta", 0.0}}), catalog_drift("zero"), true},
  };
  for (const auto& f : families) {
    for (std::uint64_t seed : {1, 2, 3}) {
      auto s = simulate_null(f.g, 1000, seed);
      EstimatorConfig cfg = EstimatorConfig::isotropic(1.0, 1.0, 1, 1.0);
      if (f.periodic) {
        cfg.periodic = PeriodicDomain{-std::numbers::pi, 2 * std::numbers::pi, std::numbers::pi};
        PeriodicDomain cell = *cfg.periodic;
        cell.pad = 0.0;
        std::size_t n_primary = 0;
        cfg.kernel = RbfKernel(median_heuristic(fold_periodic(s, cell, &n_primary).points), 1);
      } else {
        cfg.kernel = RbfKernel(median_heuristic(s.points), 1);
      }
      const double rate = rate_estimate(solve_gradient_field(s, f.r, cfg)).rate_estimate;
      INFO(std::string(f.name), " seed ", seed, " rate ", rate);
      CHECK(rate <= 0.02);
    }
  }
}

TEST_CASE("hyperparameter selection reports every candidate") {
  auto s = random_points(1, 40, 77, 0.7);
  auto sel = select_hyperparameters(s, catalog_drift("double_well"), EstimatorConfig::isotropic(1, 1, 1, 1),
                                    {0.1, 1.0}, {0.5, 1.0});
  CHECK(sel.candidates.size() == 4);
  CHECK(sel.C > 0.0);
  CHECK(sel.length_scale > 0.0);
}

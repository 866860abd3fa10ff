#include "entrate/catalog.hpp"

#include <cmath>

#include "entrate/error.hpp"

namespace entrate {

const std::vector<CatalogEntry>& drift_catalog() {
  static const std::vector<CatalogEntry> entries{
      {"zero", "0", {}},
      {"double_well", "4*x - 4*x^3", {}},
      {"double_well_perturbed", "4*x - 4*x^3 - beta*(x^2 + 2*x + 1)", {"beta"}},
      {"tfa_gene", "beta*(6*x^2/(x^2 + 10) - x + 0.4)", {"beta"}},
      {"trig", "beta*(sin(x) - sin(x)^3)", {"beta"}},
      {"ou", "-theta*x", {"theta"}},
      {"constant_shift", "-x + c", {"c"}},
  };
  return entries;
}

const CatalogEntry& catalog_entry(std::string_view name) {
  for (const auto& e : drift_catalog()) {
    if (e.name == name) return e;
  }
  throw InputError("unknown catalog drift '" + std::string(name) + "'");
}

namespace {

using Scalar = double (*)(double, double);

DriftField scalar_native(const CatalogEntry& entry, double p, Scalar fn) {
  auto eval = [p, fn](std::span<const double> x, std::span<double> out) { out[0] = fn(x[0], p); };
  return DriftField::native(1, eval, entry.expression);
}

}  // namespace

DriftField catalog_drift(std::string_view name, const std::map<std::string, double>& params) {
  const CatalogEntry& entry = catalog_entry(name);
  for (const auto& [key, value] : params) {
    bool declared = false;
    for (const auto& p : entry.params) declared = declared || p == key;
    if (!declared) throw InputError("catalog drift '" + entry.name + "' has no parameter '" + key + "'");
  }
  double p = 0.0;
  for (const auto& declared : entry.params) {
    auto it = params.find(declared);
    if (it == params.end()) {
      throw InputError("catalog drift '" + entry.name + "' requires parameter '" + declared + "'");
    }
    p = it->second;
  }

  if (entry.name == "zero") {
    return scalar_native(entry, p, [](double, double) { return 0.0; });
  }
  if (entry.name == "double_well") {
    return scalar_native(entry, p, [](double x, double) { return 4.0 * x - 4.0 * x * x * x; });
  }
  if (entry.name == "double_well_perturbed") {
    return scalar_native(entry, p, [](double x, double beta) {
      return 4.0 * x - 4.0 * x * x * x - beta * (x * x + 2.0 * x + 1.0);
    });
  }
  if (entry.name == "tfa_gene") {
    return scalar_native(entry, p, [](double x, double beta) {
      return beta * (6.0 * x * x / (x * x + 10.0) - x + 0.4);
    });
  }
  if (entry.name == "trig") {
    return scalar_native(entry, p, [](double x, double beta) {
      double s = std::sin(x);
      return beta * (s - s * s * s);
    });
  }
  if (entry.name == "ou") {
    return scalar_native(entry, p, [](double x, double theta) { return -theta * x; });
  }
  // constant_shift
  return scalar_native(entry, p, [](double x, double c) { return -x + c; });
}

}  // namespace entrate

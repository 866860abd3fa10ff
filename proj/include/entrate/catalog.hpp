#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "entrate/drift_lang.hpp"

namespace entrate {

/// A built-in scalar drift with a native evaluator and its textual form.
struct CatalogEntry {
  std::string name;
  std::string expression;
  std::vector<std::string> params;
};

/// double_well, double_well_perturbed, tfa_gene, trig, ou, constant_shift, zero.
const std::vector<CatalogEntry>& drift_catalog();

const CatalogEntry& catalog_entry(std::string_view name);

/// Native evaluator for a catalog drift. Every declared parameter must be
/// bound and no others may be given.
DriftField catalog_drift(std::string_view name, const std::map<std::string, double>& params = {});

}  // namespace entrate

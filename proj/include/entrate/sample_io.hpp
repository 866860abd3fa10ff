#pragma once

#include <filesystem>
#include <iosfwd>

#include "entrate/sde_sim.hpp"

namespace entrate {

/// CSV with header `t,x1[,x2,...]`, one sample per row, 17 significant digits.
void write_samples_csv(std::ostream& out, const SampleSet& samples);
void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples);

SampleSet read_samples_csv(std::istream& in);
SampleSet read_samples_csv(const std::filesystem::path& path);

}  // namespace entrate

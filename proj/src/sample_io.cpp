#include "entrate/sample_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "entrate/digest.hpp"
#include "entrate/error.hpp"

namespace entrate {

void write_samples_csv(std::ostream& out, const SampleSet& samples) {
  out << "t";
  for (int j = 0; j < samples.dim(); ++j) out << ",x" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << format_double(i < samples.times.size() ? samples.times[i] : static_cast<double>(i) * samples.tau);
    for (int j = 0; j < samples.dim(); ++j) out << "," << format_double(samples.points(j, static_cast<Eigen::Index>(i)));
    out << "\n";
  }
}

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_samples_csv(out, samples);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double to_number(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    while (used < s.size() && (s[used] == ' ' || s[used] == '\r')) ++used;
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("sample file line " + std::to_string(line) + ": '" + s + "' is not a number");
  }
}

}  // namespace

SampleSet read_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("sample file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split(line);
  if (header.size() < 2 || header[0] != "t") throw InputError("sample file header must be 't,x1[,x2,...]'");
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "x" + std::to_string(j)) throw InputError("sample file header column '" + header[j] + "'");
  }
  const std::size_t dim = header.size() - 1;

  std::vector<double> times;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != dim + 1) {
      throw InputError("sample file line " + std::to_string(lineno) + ": expected " + std::to_string(dim + 1) +
                       " fields");
    }
    times.push_back(to_number(fields[0], lineno));
    for (std::size_t j = 1; j <= dim; ++j) {
      double v = to_number(fields[j], lineno);
      if (!std::isfinite(v)) throw InputError("sample file line " + std::to_string(lineno) + ": non-finite value");
      values.push_back(v);
    }
  }

  SampleSet s;
  const auto n = static_cast<Eigen::Index>(times.size());
  s.points = Eigen::Map<const Eigen::MatrixXd>(values.data(), static_cast<Eigen::Index>(dim), n);
  s.times = std::move(times);
  s.tau = s.times.size() >= 2 ? s.times[1] - s.times[0] : 0.0;
  s.provenance = "external";
  return s;
}

SampleSet read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  return read_samples_csv(in);
}

}  // namespace entrate

#include "entrate/cli/manifest.hpp"

#include <chrono>
#include <fstream>
#include <iterator>
#include <sstream>

#include "entrate/digest.hpp"
#include "entrate/error.hpp"
#include "entrate/rng.hpp"

namespace entrate::cli {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InputError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes));
}

nlohmann::ordered_json base_manifest(const ExperimentConfig& cfg, std::string_view command) {
  using clock = std::chrono::system_clock;
  const auto now = std::chrono::duration_cast<std::chrono::seconds>(clock::now().time_since_epoch()).count();
  nlohmann::ordered_json m;
  m["tool"] = "entrate";
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["config_name"] = cfg.name;
  m["config_path"] = cfg.source.string();
  m["config_digest"] = cfg.digest();
  m["rng"] = {{"name", kRngName}, {"version", kRngVersion}};
  m["created_unix"] = now;
  return m;
}

fs::path write_manifest(const fs::path& output, nlohmann::ordered_json manifest) {
  manifest["output"] = output.filename().string();
  manifest["output_digest"] = file_digest(output);
  fs::path path = output;
  path += ".manifest.json";
  write_atomic(path, manifest.dump(2) + "\n");
  return path;
}

std::string verify_manifest(const fs::path& output, const ExperimentConfig& cfg) {
  fs::path path = output;
  path += ".manifest.json";
  std::ifstream in(path);
  if (!in) return "missing manifest " + path.string();
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    return "unreadable manifest " + path.string() + ": " + e.what();
  }
  if (m.value("config_digest", "") != cfg.digest()) return "config digest mismatch in " + path.string();
  if (m.value("output_digest", "") != file_digest(output)) return "output digest mismatch in " + path.string();
  return {};
}

}  // namespace entrate::cli

#include "bullysense/manifest.hpp"

#include <atomic>
#include <filesystem>

#include "bullysense/common.hpp"
#include "bullysense/sha256.hpp"

namespace bullysense::cli {

using nlohmann::json;

RunManifest RunManifest::begin(const std::string& command) {
  static std::atomic<int> counter{0};
  RunManifest m;
  m.command = command;
  m.created_utc = now_utc_iso8601();
  std::string compact;
  for (char c : m.created_utc)
    if (c != ':' && c != '-') compact.push_back(c);
  m.run_id = command + "-" + compact + "-" + std::to_string(counter.fetch_add(1));
  return m;
}

void RunManifest::add_input(const std::string& path) {
  inputs[path] = sha256_file_hex(path);
}

json RunManifest::to_json() const {
  return json{{"run_id", run_id},           {"command", command},
              {"created_utc", created_utc}, {"finished_utc", finished_utc},
              {"inputs", inputs},           {"parameters", parameters},
              {"outputs", outputs},         {"tool_version", kToolVersion}};
}

void RunManifest::finish_and_write(const std::string& dir) {
  namespace fs = std::filesystem;
  finished_utc = now_utc_iso8601();
  fs::create_directories(dir);
  write_text_file((fs::path(dir) / "run_manifest.json").string(), to_json().dump(2) + "\n");
}

}  // namespace bullysense::cli

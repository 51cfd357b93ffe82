#pragma once

#include <string>

#include <json.hpp>

namespace bullysense::cli {

// Per-run record written into every artifact directory; enough to replay
// the run (input hashes, parameters, seed) up to the training backend's
// floating-point behaviour.
struct RunManifest {
  std::string run_id;
  std::string command;
  std::string created_utc;
  std::string finished_utc;
  nlohmann::json inputs = nlohmann::json::object();      // path -> sha256
  nlohmann::json parameters = nlohmann::json::object();  // command-specific
  nlohmann::json outputs = nlohmann::json::array();      // files written

  static RunManifest begin(const std::string& command);
  void add_input(const std::string& path);
  void finish_and_write(const std::string& dir);
  nlohmann::json to_json() const;
};

}  // namespace bullysense::cli

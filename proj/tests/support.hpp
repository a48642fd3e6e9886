#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <unistd.h>

#include "glide/engine.hpp"

namespace glide::test {

inline std::filesystem::path assets() { return GLIDE_TEST_ASSETS; }
inline std::filesystem::path map_path(const std::string& name) { return assets() / "maps" / (name + ".json"); }
inline std::filesystem::path scenario_path(const std::string& name) {
  return assets() / "scenarios" / (name + ".json");
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::shared_ptr<const ScenarioMap> shared_map(const std::string& name) {
  return std::make_shared<const ScenarioMap>(load_map(map_path(name)));
}

inline SimConfig scenario(const std::string& name) { return load_config(scenario_path(name)); }

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("glide-test-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace glide::test

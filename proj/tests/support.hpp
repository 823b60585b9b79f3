#pragma once

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "rigidflow/grid.hpp"
#include "rigidflow/se3.hpp"

namespace testing {

namespace fs = std::filesystem;

/// DENSE_SE3_FIXTURE_DIR overrides the checked-in fixture directory.
inline fs::path fixture_dir() {
  if (const char* env = std::getenv("DENSE_SE3_FIXTURE_DIR")) return env;
  return RIGIDFLOW_FIXTURE_DIR;
}

/// Set DENSE_SE3_UPDATE_FIXTURES=1 to rewrite regression fixtures from the
/// current build instead of comparing against them.
inline bool update_fixtures() {
  const char* env = std::getenv("DENSE_SE3_UPDATE_FIXTURES");
  return env != nullptr && std::string(env) == "1";
}

inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rigidflow_" + name + "_" +
                                                   std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline rigidflow::Vector3 random_vector(std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  return {n(rng), n(rng), n(rng)};
}

}  // namespace testing

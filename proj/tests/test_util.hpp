#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "tibcad/volio.hpp"

/// Fresh per-test scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tibcad_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline tibcad::Volume random_volume(tibcad::Dims d, unsigned seed, int lo = -1000, int hi = 400,
                                    tibcad::Spacing s = {1.0, 1.0, 1.0}) {
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> dist(lo, hi);
  tibcad::Volume v(d, s, std::int16_t{0});
  for (std::size_t i = 0; i < d.count(); ++i) v[i] = static_cast<std::int16_t>(dist(gen));
  return v;
}

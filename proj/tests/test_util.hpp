#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

namespace hemo::test {

inline std::filesystem::path tmp_path(const std::string& name) {
  std::filesystem::path dir(HEMO_TEST_TMP);
  std::filesystem::create_directories(dir);
  return dir / name;
}

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace hemo::test

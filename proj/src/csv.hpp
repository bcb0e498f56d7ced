#pragma once

#include "hemo/error.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace hemo::detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::ofstream open_csv(const std::filesystem::path& path, const std::string& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::MalformedFile, "cannot open for writing: " + path.string());
  out << header << '\n';
  return out;
}

}  // namespace hemo::detail

#pragma once

#include "hemo/flow.hpp"
#include "hemo/summary.hpp"

#include <filesystem>

namespace hemo {

// Little-endian container: "HFNN", u32 version, u8 type tag (1 summary,
// 2 flow), type header, u32 network count, then per network u32 layer count,
// u8 activation (0 ReLU, 1 softplus) and per layer u32 rows, u32 cols, f64 W
// (row-major), f64 b.
void save_summary(const std::filesystem::path& path, const SummaryModel& model);
SummaryModel load_summary(const std::filesystem::path& path);
void save_flow(const std::filesystem::path& path, const FlowModel& model);
FlowModel load_flow(const std::filesystem::path& path);

}  // namespace hemo

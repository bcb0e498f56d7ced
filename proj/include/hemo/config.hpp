#pragma once

#include "hemo/baselines.hpp"
#include "hemo/bootstrap.hpp"
#include "hemo/calibration.hpp"
#include "hemo/map_solver.hpp"
#include "hemo/nn.hpp"
#include "hemo/simulator.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace hemo {

// Flat `key = value` text with `#` comments. Relative paths resolve against
// the file's directory.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::filesystem::path& path);
  static KeyValueConfig parse_string(const std::string& text, const std::filesystem::path& base_dir = ".");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;
  // Empty when the key is absent.
  std::filesystem::path get_path(const std::string& key) const;
  std::vector<std::filesystem::path> get_paths(const std::string& key) const;

  // Keys never read through a getter.
  std::vector<std::string> unused_keys() const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  std::filesystem::path base_;
  mutable std::set<std::string> used_;
};

struct RunConfig {
  // inputs
  std::filesystem::path mesh;  // empty: icosphere
  int mesh_subdivisions = 3;
  double mesh_radius = 100.0;
  std::filesystem::path dataset;
  std::filesystem::path truth;
  std::filesystem::path summary_model;
  std::filesystem::path flow_model;
  std::filesystem::path field;  // estimated field (deconvolve)
  std::vector<std::filesystem::path> population_fields;

  HrfModel model = HrfModel::one_parameter();
  SimulatorConfig sim;

  // prior used to draw synthetic truth, and the selection grid
  double kappa = 5e-3;
  double tau = 100.0;
  std::vector<double> kappa_grid{1e-3, 2.5e-3, 5e-3, 1e-2, 2e-2};
  std::vector<double> tau_grid{25.0, 50.0, 100.0, 200.0, 400.0};

  int train_pairs = 50000;
  AdamConfig summary_adam{1e-3, 100, 20000};
  AdamConfig flow_adam{1e-3, 100, 20000};

  NewtonOptions newton;
  BootstrapOptions bootstrap;
  CalibrationBounds calibration_bounds;
  CalibrationOptions calibration;

  double signal_power = 0.0;  // 0: estimated per vertex
  std::vector<int> roi;
  int lag = 2;
  double fdr_q = 0.05;
  int kl_components = 3;

  JointMapOptions jointmap;
  int jointmap_vertices = 0;  // 0: every vertex
  bool bench_uq = false;

  static RunConfig defaults();
  static RunConfig from(const KeyValueConfig& kv);
};

}  // namespace hemo

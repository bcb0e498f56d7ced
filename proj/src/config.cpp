#include "hemo/config.hpp"

#include "hemo/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace hemo {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw Error(ErrorKind::InvalidArgument, "config key '" + key + "': not a number: '" + text + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw Error(ErrorKind::InvalidArgument, "config key '" + key + "': not an integer: '" + text + "'");
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::filesystem::path& base_dir) {
  KeyValueConfig c;
  c.base_ = base_dir;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + ": empty key");
    if (!c.values_.emplace(key, value).second)
      throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return c;
}

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MalformedFile, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return parse_string(ss.str(), base);
}

const std::string* KeyValueConfig::find(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) != 0; }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  return v ? parse_double(key, *v) : fallback;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto* v = find(key);
  return v ? parse_int(key, *v) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw Error(ErrorKind::InvalidArgument, "config key '" + key + "': not a boolean: '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<int> KeyValueConfig::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<int> out;
  for (const auto& item : split_list(*v)) out.push_back(parse_int(key, item));
  return out;
}

std::filesystem::path KeyValueConfig::get_path(const std::string& key) const {
  const auto* v = find(key);
  if (!v || v->empty()) return {};
  const std::filesystem::path p(*v);
  return p.is_absolute() ? p : base_ / p;
}

std::vector<std::filesystem::path> KeyValueConfig::get_paths(const std::string& key) const {
  const auto* v = find(key);
  std::vector<std::filesystem::path> out;
  if (!v) return out;
  for (const auto& item : split_list(*v)) {
    const std::filesystem::path p(item);
    out.push_back(p.is_absolute() ? p : base_ / p);
  }
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.calibration_bounds.lower = c.sim;
  c.calibration_bounds.upper = c.sim;
  c.calibration_bounds.lower.lambda_min = 0.01;
  c.calibration_bounds.upper.lambda_min = 0.2;
  c.calibration_bounds.lower.lambda_max = 0.2;
  c.calibration_bounds.upper.lambda_max = 1.0;
  c.calibration_bounds.lower.a_min = 0.1;
  c.calibration_bounds.upper.a_min = 1.0;
  c.calibration_bounds.lower.a_max = 1.0;
  c.calibration_bounds.upper.a_max = 3.0;
  c.calibration_bounds.lower.sigma2 = 0.01;
  c.calibration_bounds.upper.sigma2 = 2.0;
  return c;
}

RunConfig RunConfig::from(const KeyValueConfig& kv) {
  RunConfig c = defaults();
  c.mesh = kv.get_path("mesh");
  c.mesh_subdivisions = kv.get_int("mesh_subdivisions", c.mesh_subdivisions);
  c.mesh_radius = kv.get_double("mesh_radius", c.mesh_radius);
  c.dataset = kv.get_path("dataset");
  c.truth = kv.get_path("truth");
  c.summary_model = kv.get_path("summary_model");
  c.flow_model = kv.get_path("flow_model");
  c.field = kv.get_path("field");
  c.population_fields = kv.get_paths("population_fields");

  const std::string hrf = kv.get_string("hrf", "one");
  if (hrf == "one") c.model = HrfModel::one_parameter();
  else if (hrf == "two") c.model = HrfModel::two_parameter();
  else throw Error(ErrorKind::InvalidArgument, "config key 'hrf': expected 'one' or 'two', got '" + hrf + "'");

  auto read_sim = [&](const std::string& prefix, SimulatorConfig s) {
    s.lambda_min = kv.get_double(prefix + "lambda_min", s.lambda_min);
    s.lambda_max = kv.get_double(prefix + "lambda_max", s.lambda_max);
    s.a_min = kv.get_double(prefix + "a_min", s.a_min);
    s.a_max = kv.get_double(prefix + "a_max", s.a_max);
    s.sigma2 = kv.get_double(prefix + "sigma2", s.sigma2);
    return s;
  };
  c.sim = read_sim("sim.", c.sim);
  c.sim.t_r = kv.get_double("t_r", c.sim.t_r);
  c.sim.M = kv.get_int("M", c.sim.M);
  c.sim.validate();

  c.kappa = kv.get_double("kappa", c.kappa);
  c.tau = kv.get_double("tau", c.tau);
  c.kappa_grid = kv.get_doubles("kappa_grid", c.kappa_grid);
  c.tau_grid = kv.get_doubles("tau_grid", c.tau_grid);

  c.train_pairs = kv.get_int("train.pairs", c.train_pairs);
  auto read_adam = [&](const std::string& prefix, AdamConfig a) {
    a.learning_rate = kv.get_double(prefix + "lr", a.learning_rate);
    a.batch_size = kv.get_int(prefix + "batch", a.batch_size);
    a.iterations = kv.get_int(prefix + "iterations", a.iterations);
    return a;
  };
  c.summary_adam = read_adam("train.summary.", c.summary_adam);
  c.flow_adam = read_adam("train.flow.", c.flow_adam);

  c.newton.tol = kv.get_double("newton.tol", c.newton.tol);
  c.newton.max_iters = kv.get_int("newton.max_iters", c.newton.max_iters);

  c.bootstrap.outer = kv.get_int("uq.B", c.bootstrap.outer);
  c.bootstrap.inner = kv.get_int("uq.R", c.bootstrap.inner);
  c.bootstrap.alpha0 = kv.get_double("uq.alpha0", c.bootstrap.alpha0);
  c.bootstrap.xi = kv.get_double("uq.xi", c.bootstrap.xi);
  c.bootstrap.block_length = kv.get_double("uq.L", c.bootstrap.block_length);

  c.calibration.budget = kv.get_int("calibrate.budget", c.calibration.budget);
  c.calibration.num_simulations = kv.get_int("calibrate.simulations", c.calibration.num_simulations);
  c.calibration.random_search = kv.get_bool("calibrate.random_search", c.calibration.random_search);
  c.calibration_bounds.lower = read_sim("calibrate.lower.", c.calibration_bounds.lower);
  c.calibration_bounds.upper = read_sim("calibrate.upper.", c.calibration_bounds.upper);
  for (auto* s : {&c.calibration_bounds.lower, &c.calibration_bounds.upper}) {
    s->t_r = c.sim.t_r;
    s->M = c.sim.M;
  }

  c.signal_power = kv.get_double("deconvolve.signal_power", c.signal_power);
  c.roi = kv.get_ints("connect.roi", c.roi);
  c.lag = kv.get_int("connect.lag", c.lag);
  c.fdr_q = kv.get_double("connect.q", c.fdr_q);
  c.kl_components = kv.get_int("popstats.components", c.kl_components);

  c.jointmap.admm_iterations = kv.get_int("jointmap.admm_iterations", c.jointmap.admm_iterations);
  c.jointmap.outer_rounds = kv.get_int("jointmap.rounds", c.jointmap.outer_rounds);
  c.jointmap_vertices = kv.get_int("bench.jointmap_vertices", c.jointmap_vertices);
  c.bench_uq = kv.get_bool("bench.uq", c.bench_uq);
  return c;
}

}  // namespace hemo

#include "hemo/bench.hpp"

#include "csv.hpp"
#include "hemo/baselines.hpp"
#include "hemo/bootstrap.hpp"
#include "hemo/error.hpp"
#include "hemo/map_solver.hpp"
#include "hemo/parallel.hpp"
#include "hemo/spde_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hemo {

namespace {
constexpr std::uint64_t kTruthStream = 0xbe01;
constexpr std::uint64_t kDataStream = 0xbe02;
constexpr std::uint64_t kTrainStream = 0xbe03;
constexpr std::uint64_t kSubsetStream = 0xbe04;
constexpr std::uint64_t kUqStream = 0xbe05;
}  // namespace

TriMesh mesh_from_config(const RunConfig& config) {
  if (!config.mesh.empty()) return load_mesh(config.mesh);
  return make_icosphere(config.mesh_subdivisions, config.mesh_radius);
}

SyntheticExperiment simulate_experiment(const RunConfig& config, std::uint64_t seed) {
  SyntheticExperiment ex;
  ex.mesh = mesh_from_config(config);
  const auto V = static_cast<Eigen::Index>(ex.mesh.num_vertices());
  const int J = config.model.num_params();
  const SparseSym C = mass_matrix(ex.mesh, true);
  const SparseSym G = stiffness_matrix(ex.mesh);
  const SparseSym Q = precision_from_fem(C, G, config.kappa, config.tau);
  const CholFactor factor = sparse_cholesky(Q);

  ex.truth.model = config.model;
  ex.truth.coords = Coordinates::Unconstrained;
  ex.truth.values.resize(V, J);
  for (int j = 0; j < J; ++j) {
    Rng rng(derive_seed(seed, kTruthStream, static_cast<std::uint64_t>(j)));
    ex.truth.values.col(j) = sample_field(factor, rng);
  }
  const RowMatrix theta = ex.truth.to_constrained().values;

  ex.data.t_r = config.sim.t_r;
  ex.data.Y.resize(V, config.sim.M);
  parallel_for(static_cast<std::size_t>(V), [&](std::size_t v) {
    Rng rng(derive_seed(seed, kDataStream, v));
    const auto r = static_cast<Eigen::Index>(v);
    const Eigen::VectorXd th = theta.row(r).transpose();
    ex.data.Y.row(r) =
        simulate_bold(config.sim, config.model, std::span<const double>(th.data(), static_cast<std::size_t>(J)), rng)
            .transpose();
  });
  return ex;
}

TrainedModels train_models(const RunConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kTrainStream));
  const PairSimulator sim = prior_pair_simulator(config.sim, config.model);
  TrainedModels m;
  m.summary = train_summary(sim, config.train_pairs, config.summary_adam, rng, &m.summary_report);
  m.flow = train_flow(sim, m.summary, config.train_pairs, config.flow_adam, rng, &m.flow_report);
  return m;
}

HyperparamSelection estimate_field(const RunConfig& config, const TriMesh& mesh, const BoldDataset& data,
                                   const TrainedModels& models) {
  data.validate(mesh.num_vertices());
  const RowMatrix T = summary_forward_batch(models.summary, data.Y);
  const FlowLikelihood lik(models.flow);
  return select_hyperparams(T, lik, mesh, config.kappa_grid, config.tau_grid, config.model, config.newton);
}

const BenchRow* BenchResult::find(const std::string& method, int component) const {
  for (const auto& r : rows)
    if (r.method == method && r.component == component) return &r;
  return nullptr;
}

BenchRow field_metrics(const std::string& method, const ParamField& estimate, const ParamField& truth, int component,
                       const std::vector<int>& vertices) {
  const RowMatrix est = estimate.to_constrained().values;
  const RowMatrix tru = truth.to_constrained().values;
  std::vector<int> idx = vertices;
  if (idx.empty()) {
    idx.resize(static_cast<std::size_t>(tru.rows()));
    std::iota(idx.begin(), idx.end(), 0);
  }
  BenchRow row;
  row.method = method;
  row.component = component;
  row.vertices = static_cast<int>(idx.size());
  for (int v : idx) {
    const double d = est(v, component) - tru(v, component);
    row.mse += d * d;
    row.bias += d;
  }
  row.mse /= static_cast<double>(idx.size());
  row.bias /= static_cast<double>(idx.size());
  return row;
}

BenchResult run_bench(const RunConfig& config, std::uint64_t seed) {
  const SyntheticExperiment ex = simulate_experiment(config, seed);
  const TrainedModels models = train_models(config, seed);
  const HyperparamSelection sel = estimate_field(config, ex.mesh, ex.data, models);
  const int J = config.model.num_params();

  BenchResult res;
  res.kappa_hat = sel.kappa;
  res.tau_hat = sel.tau;
  const ParamField mpm = mpm_estimate(ex.data, models.summary, config.model);
  for (int j = 0; j < J; ++j) {
    res.rows.push_back(field_metrics("Ours", sel.map.field, ex.truth, j));
    res.rows.push_back(field_metrics("MPM", mpm, ex.truth, j));
  }

  if (config.model.variant == HrfVariant::OneParameter) {
    const auto V = static_cast<int>(ex.mesh.num_vertices());
    std::vector<int> subset(static_cast<std::size_t>(V));
    std::iota(subset.begin(), subset.end(), 0);
    if (config.jointmap_vertices > 0 && config.jointmap_vertices < V) {
      Rng rng(derive_seed(seed, kSubsetStream));
      for (int i = 0; i < config.jointmap_vertices; ++i) {
        const int j = i + std::min(static_cast<int>(uniform01(rng) * (V - i)), V - i - 1);
        std::swap(subset[static_cast<std::size_t>(i)], subset[static_cast<std::size_t>(j)]);
      }
      subset.resize(static_cast<std::size_t>(config.jointmap_vertices));
      std::sort(subset.begin(), subset.end());
    }
    BoldDataset sub;
    sub.t_r = ex.data.t_r;
    sub.Y.resize(static_cast<Eigen::Index>(subset.size()), ex.data.Y.cols());
    for (std::size_t i = 0; i < subset.size(); ++i) sub.Y.row(static_cast<Eigen::Index>(i)) = ex.data.Y.row(subset[i]);
    const ParamField jm_sub = jointmap_field(sub, config.model, std::sqrt(config.sim.sigma2), config.jointmap);
    ParamField jm = ex.truth.to_constrained();
    for (std::size_t i = 0; i < subset.size(); ++i) jm.values(subset[i], 0) = jm_sub.values(static_cast<Eigen::Index>(i), 0);
    res.rows.push_back(field_metrics("JointMAP", jm, ex.truth, 0, subset));
  }

  if (config.bench_uq) {
    const FlowLikelihood lik(models.flow);
    const SparseSym Q = full_precision(mass_matrix(ex.mesh, true), stiffness_matrix(ex.mesh),
                                       PriorSpec::uniform(J, sel.kappa, sel.tau));
    const EstimationPipeline pipeline = [&](const BoldDataset& d) {
      const RowMatrix T = summary_forward_batch(models.summary, d.Y);
      return newton_map(initial_field(T, config.model), T, lik, Q, config.newton).field;
    };
    Rng rng(derive_seed(seed, kUqStream));
    const IntervalField iv = double_bootstrap_intervals(ex.data, pipeline, config.bootstrap, rng);
    const RowMatrix truth = ex.truth.to_constrained().values;
    for (auto& row : res.rows) {
      if (row.method != "Ours") continue;
      const int j = row.component;
      double covered = 0.0, length = 0.0;
      for (Eigen::Index v = 0; v < truth.rows(); ++v) {
        covered += (truth(v, j) >= iv.lower(v, j) && truth(v, j) <= iv.upper(v, j)) ? 1.0 : 0.0;
        length += iv.upper(v, j) - iv.lower(v, j);
      }
      row.coverage = covered / static_cast<double>(truth.rows());
      row.interval_length = length / static_cast<double>(truth.rows());
    }
  }
  return res;
}

void write_bench_csv(const std::filesystem::path& path, const BenchResult& result) {
  auto out = detail::open_csv(path, "method,component,vertices,mse,bias,coverage,interval_length");
  for (const auto& r : result.rows) {
    out << r.method << ',' << r.component << ',' << r.vertices << ',' << detail::num(r.mse) << ','
        << detail::num(r.bias) << ',' << (r.coverage < 0 ? "" : detail::num(r.coverage)) << ','
        << (r.interval_length < 0 ? "" : detail::num(r.interval_length)) << '\n';
  }
}

}  // namespace hemo

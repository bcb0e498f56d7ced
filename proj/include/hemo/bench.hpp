#pragma once

#include "hemo/config.hpp"
#include "hemo/dataset.hpp"
#include "hemo/flow.hpp"
#include "hemo/mesh_fem.hpp"
#include "hemo/summary.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hemo {

// Synthetic ground truth: a prior draw of the unconstrained field on the mesh
// and one simulated series per vertex.
struct SyntheticExperiment {
  TriMesh mesh;
  ParamField truth;  // unconstrained
  BoldDataset data;
};

TriMesh mesh_from_config(const RunConfig& config);
SyntheticExperiment simulate_experiment(const RunConfig& config, std::uint64_t seed);

struct TrainedModels {
  SummaryModel summary;
  FlowModel flow;
  TrainingReport summary_report;
  TrainingReport flow_report;
};
TrainedModels train_models(const RunConfig& config, std::uint64_t seed);

// MAP field with hyperparameters chosen by Laplace evidence over the grid.
HyperparamSelection estimate_field(const RunConfig& config, const TriMesh& mesh, const BoldDataset& data,
                                   const TrainedModels& models);

struct BenchRow {
  std::string method;
  int component = 0;
  int vertices = 0;
  double mse = 0.0;
  double bias = 0.0;
  double coverage = -1.0;         // negative when not computed
  double interval_length = -1.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double kappa_hat = 0.0;
  double tau_hat = 0.0;
  const BenchRow* find(const std::string& method, int component = 0) const;
};

// Error metrics on the constrained scale; `vertices` restricts the average.
BenchRow field_metrics(const std::string& method, const ParamField& estimate, const ParamField& truth, int component,
                       const std::vector<int>& vertices = {});

BenchResult run_bench(const RunConfig& config, std::uint64_t seed);
void write_bench_csv(const std::filesystem::path& path, const BenchResult& result);

}  // namespace hemo

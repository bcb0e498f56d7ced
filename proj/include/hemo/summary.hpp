#pragma once

#include "hemo/dataset.hpp"
#include "hemo/nn.hpp"
#include "hemo/rng.hpp"
#include "hemo/simulator.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>

namespace hemo {

// Summary network: y -> log(periodogram(y) + 1e-12) -> MLP -> R^J, trained to
// regress the unconstrained parameters.
struct SummaryModel {
  int M = 0;
  int J = 0;
  Mlp net;

  // Hidden widths M, M/2, M/4.
  static SummaryModel create(int M, int J, Rng& rng);
  int encoding_dim() const { return M / 2 + 1; }
};

Eigen::VectorXd summary_encode(std::span<const double> y);
Eigen::VectorXd summary_forward(const SummaryModel& model, std::span<const double> y);
inline Eigen::VectorXd summary_forward(const SummaryModel& model, const Eigen::VectorXd& y) {
  return summary_forward(model, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}
// Row v of the result is summary_forward(model, Y.row(v)).
RowMatrix summary_forward_batch(const SummaryModel& model, const RowMatrix& Y);

// One simulated (theta-tilde, y) pair per call.
struct TrainingPair {
  Eigen::VectorXd theta_tilde;
  Eigen::VectorXd y;
};
using PairSimulator = std::function<TrainingPair(Rng&)>;

// theta ~ Unif(Theta), theta-tilde = transform(theta), y = simulate_bold(theta).
PairSimulator prior_pair_simulator(const SimulatorConfig& config, const HrfModel& model);

struct PairSet {
  RowMatrix theta_tilde;  // N x J
  RowMatrix y;            // N x M
};
// Pair i is drawn from Rng(derive_seed(seed, stream, i)); parallel over i.
PairSet simulate_pairs(const PairSimulator& simulator, int N, std::uint64_t seed);

// Adam on the mean squared error (averaged over pairs and components). The
// report's losses are measured on held-out pairs.
SummaryModel train_summary(const PairSimulator& simulator, int N, const AdamConfig& adam, Rng& rng,
                           TrainingReport* report = nullptr);
// Same optimizer on a fixed pair set; report losses use the first min(N, 1000) pairs.
SummaryModel train_summary_on_pairs(const PairSet& pairs, const AdamConfig& adam, Rng& rng,
                                    TrainingReport* report = nullptr);
double summary_loss(const SummaryModel& model, const PairSet& pairs);

}  // namespace hemo

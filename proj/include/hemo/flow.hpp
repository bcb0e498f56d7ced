#pragma once

#include "hemo/dataset.hpp"
#include "hemo/nn.hpp"
#include "hemo/rng.hpp"
#include "hemo/summary.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

namespace hemo {

// Conditional density p(u | context) on R^J (J = 1 or 2) built from a stack
// of rational-quadratic spline stages over a standard normal base. For J = 1
// every stage is an elementwise spline whose parameters depend on the context.
// For J = 2 stage s transforms coordinate s mod 2 and conditions on the other
// coordinate and the context.
struct FlowModel {
  int J = 1;
  int num_bins = 8;
  double tail_bound = 5.0;
  std::vector<Mlp> conditioners;  // one per stage

  // Conditioners have `hidden_layers` softplus layers of width `hidden`; their
  // output layer starts at zero so the flow starts as the identity.
  static FlowModel create(int J, Rng& rng, int stages = 5, int num_bins = 8, double tail_bound = 5.0,
                          int hidden = 64, int hidden_layers = 3);

  int num_stages() const { return static_cast<int>(conditioners.size()); }
  int active_coordinate(int stage) const { return J == 1 ? 0 : stage % 2; }
  int conditioner_input_dim() const { return J == 1 ? J : 1 + J; }
  void validate() const;
};

double flow_logpdf(const FlowModel& model, std::span<const double> u, std::span<const double> context);
// Exact derivative of flow_logpdf with respect to the context.
Eigen::VectorXd flow_grad_context(const FlowModel& model, std::span<const double> u,
                                  std::span<const double> context);
// Central differences of flow_grad_context (step 1e-4), symmetrized.
Eigen::MatrixXd flow_hess_context(const FlowModel& model, std::span<const double> u,
                                  std::span<const double> context);

Eigen::MatrixXd central_difference_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                                           const Eigen::VectorXd& x, double step = 1e-4);

// Data -> base map and its inverse.
Eigen::VectorXd flow_transform(const FlowModel& model, std::span<const double> u, std::span<const double> context,
                               double* logdet = nullptr);
Eigen::VectorXd flow_inverse(const FlowModel& model, std::span<const double> z, std::span<const double> context);
Eigen::VectorXd flow_sample(const FlowModel& model, std::span<const double> context, Rng& rng);

// Batched evaluation; columns of U and C are samples. Optionally accumulates
// weight_scale * d(sum_b logp_b)/dW into weight_grads (one vector per stage).
struct FlowBatch {
  Eigen::VectorXd logp;
  Eigen::MatrixXd grad_context;  // J x B
};
FlowBatch flow_evaluate(const FlowModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C,
                        std::vector<std::vector<DenseLayer>>* weight_grads = nullptr, double weight_scale = 1.0);

// Log-densities only; cheaper than flow_evaluate when no gradient is needed.
Eigen::VectorXd flow_logp_batch(const FlowModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C);

// Adam on the negative mean log-density of (summary, context) pairs.
FlowModel train_flow_on_pairs(const RowMatrix& summaries, const RowMatrix& contexts, const AdamConfig& adam,
                              Rng& rng, TrainingReport* report = nullptr);
// Simulates N pairs, maps y through the frozen summary network and trains.
// The report's losses are measured on held-out pairs.
FlowModel train_flow(const PairSimulator& simulator, const SummaryModel& summary, int N, const AdamConfig& adam,
                     Rng& rng, TrainingReport* report = nullptr);
double flow_loss(const FlowModel& model, const RowMatrix& summaries, const RowMatrix& contexts);

}  // namespace hemo

#pragma once

#include "hemo/dataset.hpp"
#include "hemo/rng.hpp"
#include "hemo/simulator.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace hemo {

// Search box for nu = (lambda_min, lambda_max, a_min, a_max, sigma2). The grid
// fields (t_r, M) of `lower` are used for the simulated series.
struct CalibrationBounds {
  SimulatorConfig lower;
  SimulatorConfig upper;
};

struct CalibrationOptions {
  int budget = 200;              // total loss evaluations
  int num_simulations = 2000;    // K
  bool random_search = false;    // skip the surrogate; uniform random proposals
};

struct CalibrationStep {
  SimulatorConfig nu;
  double loss;
};

struct CalibrationResult {
  SimulatorConfig best;
  double best_loss = 0.0;
  int initial_design_size = 0;
  std::vector<CalibrationStep> history;
};

// Mean one-sided periodogram over the rows of a dataset.
Eigen::VectorXd mean_periodogram(const BoldDataset& data);

// K series from the simulator with theta ~ Unif(Theta); draw k uses
// derive_seed(seed, k). Used by the loss and by tests that need the same draws.
BoldDataset simulate_prior_predictive(const SimulatorConfig& nu, int K, const HrfModel& model,
                                      std::uint64_t seed);

// sum_k | mean observed PSD_k - mean simulated PSD_k |
double calibration_loss(const SimulatorConfig& nu, const Eigen::VectorXd& observed_mean_psd, int K,
                        const HrfModel& model, std::uint64_t seed);
double calibration_loss(const SimulatorConfig& nu, const BoldDataset& observed, int K, const HrfModel& model,
                        Rng& rng);

// Zeroth-order minimization of the loss: Gaussian-process surrogate with
// expected improvement, seeded with a Latin-hypercube design of size
// min(budget / 4, 32). Every loss evaluation reuses one simulation seed.
CalibrationResult calibrate(const BoldDataset& observed, const CalibrationBounds& bounds,
                            const CalibrationOptions& options, const HrfModel& model, Rng& rng);

// Small dense GP regression used as the surrogate; exposed for testing.
class GpSurrogate {
 public:
  GpSurrogate(Eigen::MatrixXd inputs, Eigen::VectorXd targets);
  // Posterior mean and standard deviation in the original target units.
  std::pair<double, double> predict(const Eigen::VectorXd& x) const;
  double lengthscale() const { return lengthscale_; }

 private:
  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  double fit(double lengthscale);  // returns log marginal likelihood

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  double mean_ = 0.0, scale_ = 1.0, lengthscale_ = 0.2;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
};

double expected_improvement(double mean, double sd, double best, double xi = 0.01);

}  // namespace hemo

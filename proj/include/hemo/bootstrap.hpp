#pragma once

#include "hemo/dataset.hpp"
#include "hemo/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace hemo {

struct Block {
  int start;
  int length;
};

// Geometric block length with mean L (support 1, 2, ...).
int draw_block_length(double expected_length, Rng& rng);
// Blocks with geometric lengths and uniform starts covering M samples.
std::vector<Block> draw_blocks(int M, double expected_length, Rng& rng);
// Concatenates the blocks with circular wrap-around, truncated to y's length.
Eigen::VectorXd apply_blocks(const Eigen::VectorXd& y, const std::vector<Block>& blocks);
Eigen::VectorXd stationary_bootstrap(const Eigen::VectorXd& y, double expected_length, Rng& rng);
// Resamples every row with one shared block structure.
BoldDataset resample_dataset(const BoldDataset& data, double expected_length, Rng& rng);

int default_block_length(int M);  // ceil(M^(1/3))

// Maps a dataset to an unconstrained field; must be pure.
using EstimationPipeline = std::function<ParamField(const BoldDataset&)>;

struct BootstrapOptions {
  int outer = 100;          // B
  int inner = 20;           // R
  double alpha0 = 0.05;
  double xi = 0.05;
  double block_length = 0;  // 0: default_block_length(M)
};

struct IntervalField {
  RowMatrix estimate;            // constrained point estimate, V x J
  RowMatrix lower, upper;        // constrained
  RowMatrix lower_unconstrained, upper_unconstrained;
  RowMatrix outer_sd;            // s, unconstrained scale
  RowMatrix vertex_alpha;        // alpha-hat per vertex and component
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> flagged;  // zero s
  double alpha0 = 0.05;
  std::vector<double> alpha_hat;  // calibrated level per component
  bool degenerate = false;        // some vertex had zero outer spread
};

// Candidate levels 0.001, 0.002, ..., 0.5.
std::vector<double> alpha_grid();

// Largest grid alpha whose bootstrap coverage reaches 1 - alpha0, given the
// standardized outer deviations |theta_b - theta_hat| / s_b (0.001 if none).
double calibrated_alpha(std::vector<double> standardized_deviations, double alpha0);

IntervalField double_bootstrap_intervals(const BoldDataset& data, const EstimationPipeline& pipeline,
                                         const BootstrapOptions& options, Rng& rng);

}  // namespace hemo

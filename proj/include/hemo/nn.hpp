#pragma once

#include "hemo/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace hemo {

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

// Hidden-layer nonlinearity. Softplus log(1 + e^z) is the smooth stand-in for
// ReLU where second derivatives of the network output are needed.
enum class Activation : std::uint8_t { Relu = 0, Softplus = 1 };

// Fully connected network with a hidden activation and a linear output.
class Mlp {
 public:
  Mlp() = default;
  // widths = {in, hidden..., out}. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in));
  // zero_output_layer leaves the last layer at exactly zero.
  Mlp(const std::vector<int>& widths, Rng& rng, bool zero_output_layer = false,
      Activation activation = Activation::Relu);

  int input_dim() const { return static_cast<int>(layers.front().W.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().W.rows()); }
  std::size_t num_parameters() const;

  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer (post-activation of the previous)
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each hidden layer
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // Columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape* tape) const;
  // Accumulates d(sum over batch)/dW into grads (same shapes as layers) and
  // returns the gradient with respect to the input batch.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& d_out,
                           std::vector<DenseLayer>* grads) const;

  std::vector<DenseLayer> zeros_like() const;

  std::vector<DenseLayer> layers;
  Activation activation = Activation::Relu;
};

struct AdamConfig {
  double learning_rate = 1e-5;
  int batch_size = 100;
  int iterations = 100000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed list of layer blocks.
class Adam {
 public:
  explicit Adam(const AdamConfig& config) : config_(config) {}
  void step(const std::vector<DenseLayer*>& params, const std::vector<const DenseLayer*>& grads);

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<DenseLayer> m_, v_;
};

struct TrainingReport {
  double initial_loss = 0.0;  // on the fixed evaluation subset, before training
  double final_loss = 0.0;    // same subset, after training
  std::vector<double> batch_losses;
};

}  // namespace hemo

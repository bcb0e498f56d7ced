#pragma once

#include "hemo/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace hemo {

struct BoldDataset;

enum class HrfVariant : std::uint8_t {
  OneParameter,  // shifted double gamma, time scale theta
  TwoParameter,  // canonical double gamma plus its time derivative
};

struct ParamBounds {
  double lo;
  double hi;
  double range() const { return hi - lo; }
};

// Parametric hemodynamic response kernel h_theta.
struct HrfModel {
  HrfVariant variant = HrfVariant::OneParameter;
  std::vector<ParamBounds> bounds;
  double a1 = 6.0;
  double a2 = 16.0;
  double b1 = 1.0;
  double b2 = 1.0;
  double c = 1.0 / 6.0;

  static HrfModel one_parameter();
  static HrfModel two_parameter();

  int num_params() const { return static_cast<int>(bounds.size()); }
  // Throws OutOfBounds if theta is outside the parameter box.
  void check_bounds(std::span<const double> theta) const;
};

// Evaluates h_theta(t) for a fixed theta with the constant factors folded in.
class HrfKernel {
 public:
  HrfKernel(const HrfModel& model, std::span<const double> theta);
  double operator()(double t) const;

 private:
  HrfVariant variant_;
  double rate1_, rate2_;   // exponential rates of the two gamma terms
  int shape1_, shape2_;    // integer powers of t
  double coef1_, coef2_;   // leading constants (sign included)
  double dcoef1_, dcoef2_; // derivative-term constants (two-parameter only)
  double w_base_ = 1.0, w_deriv_ = 0.0;
};

double hrf_kernel(const HrfModel& model, std::span<const double> theta, double t);

// Simulator hyperparameters nu = (lambda_min, lambda_max, a_min, a_max, sigma2)
// plus the acquisition grid (t_r, M).
struct SimulatorConfig {
  double lambda_min = 0.05;
  double lambda_max = 0.5;
  double a_min = 0.5;
  double a_max = 1.5;
  double sigma2 = 1.0;
  double t_r = 0.72;
  int M = 400;

  void validate() const;
  double duration() const { return (M - 1) * t_r; }
  Eigen::VectorXd acquisition_times() const;
};

struct SpikeTrain {
  std::vector<double> times;       // sorted, within [0, (M-1) t_r]
  std::vector<double> amplitudes;  // same length
};

struct NeuralDraw {
  double rate;
  SpikeTrain train;
};

NeuralDraw simulate_neural(const SimulatorConfig& config, Rng& rng);

// Exact superposition y_m = sum_i a_i h(t_m - t_i) 1{t_m >= t_i}.
Eigen::VectorXd forward_convolve(const SpikeTrain& train, const HrfModel& model,
                                 std::span<const double> theta, const Eigen::VectorXd& times);

Eigen::VectorXd simulate_bold(const SimulatorConfig& config, const HrfModel& model,
                              std::span<const double> theta, Rng& rng);

// Draws theta ~ Unif(Theta).
Eigen::VectorXd sample_uniform_theta(const HrfModel& model, Rng& rng);

// Modified probit link and its inverse. transform clamps theta to
// [lo + 1e-6 range, hi - 1e-6 range] first.
Eigen::VectorXd transform(const HrfModel& model, std::span<const double> theta);
Eigen::VectorXd inverse_transform(const HrfModel& model, std::span<const double> theta_tilde);
double transform_component(const ParamBounds& b, double theta);
double inverse_transform_component(const ParamBounds& b, double theta_tilde);

double normal_cdf(double x);
double normal_quantile(double p);

// One-sided periodogram |DFT(y)|^2 / M at bins k = 0..floor(M/2); interior
// bins carry the folded negative-frequency power.
Eigen::VectorXd periodogram(std::span<const double> y);
inline Eigen::VectorXd periodogram(const Eigen::VectorXd& y) {
  return periodogram(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}
// Frequencies (Hz) of the periodogram bins: k / (M t_r).
Eigen::VectorXd periodogram_frequencies(int M, double t_r);

}  // namespace hemo

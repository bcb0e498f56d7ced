#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace hemo {

// Monotone rational-quadratic spline on [-B, B], identity outside.
struct SplineKnots {
  double tail_bound = 5.0;
  std::vector<double> widths;       // K, positive, sum 2B
  std::vector<double> heights;      // K, positive, sum 2B
  std::vector<double> derivatives;  // K + 1, positive, first and last equal to 1

  int num_bins() const { return static_cast<int>(widths.size()); }
  static SplineKnots identity(int num_bins, double tail_bound);
};

struct SplineValue {
  double y;
  double logdet;  // log dy/dx
};

constexpr double kMinBinWidth = 1e-3;
constexpr double kMinBinHeight = 1e-3;
constexpr double kMinDerivative = 1e-3;

SplineValue rq_spline(const SplineKnots& knots, double x);
double rq_spline_inverse(const SplineKnots& knots, double y);

// Unconstrained parameter layout (length 3K - 1): K width logits, K height
// logits, K - 1 interior derivative pre-activations. All-zero raw values give
// the identity spline.
constexpr int spline_param_count(int num_bins) { return 3 * num_bins - 1; }
SplineKnots knots_from_raw(std::span<const double> raw, int num_bins, double tail_bound);

// Value, log-determinant and their derivatives with respect to the raw
// parameters and to x. Supported bin counts: 2, 4, 8, 16.
struct SplineJacobian {
  double y = 0.0;
  double logdet = 0.0;
  double dy_dx = 1.0;
  double dlogdet_dx = 0.0;
  Eigen::VectorXd dy_draw;
  Eigen::VectorXd dlogdet_draw;
};

SplineJacobian rq_spline_jacobian(std::span<const double> raw, int num_bins, double tail_bound, double x);

}  // namespace hemo

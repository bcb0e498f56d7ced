#pragma once

#include "hemo/dataset.hpp"
#include "hemo/simulator.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace hemo {

// Wiener filter s = IDFT[conj(H) Y / (|H|^2 + sigma2 / signal_power)], with H
// the DFT of the kernel sampled at m t_r.
Eigen::VectorXd wiener_deconvolve(const Eigen::VectorXd& y, const HrfModel& model, std::span<const double> theta,
                                  double sigma2, double signal_power, double t_r);
// Mean power of y minus the noise level (floored at a small fraction of the
// mean power); the default signal_power for the CLI.
double default_signal_power(const Eigen::VectorXd& y, double sigma2);

struct GrangerTest {
  double F;
  double pvalue;
};

// Bivariate Granger test of source -> target with `lag` lags and intercept.
GrangerTest granger_f(const Eigen::VectorXd& source, const Eigen::VectorXd& target, int lag);

// Benjamini-Hochberg step-up rejections at level q.
std::vector<bool> bh_fdr(std::span<const double> pvalues, double q);

struct GcResult {
  std::vector<int> roi;
  int lag = 2;
  std::vector<int> vertices;  // non-ROI vertices, ascending
  std::vector<double> F;
  std::vector<double> pvalue;  // NaN when the design was singular
  std::vector<bool> significant;
  std::vector<bool> singular;
};

// Granger tests from each non-ROI vertex to the ROI-mean series, then BH over
// the vertices whose design was non-singular.
GcResult seed_connectivity(const BoldDataset& data, const std::vector<int>& roi, int lag, double q);

struct KlDecomposition {
  Eigen::VectorXd mean;           // V
  Eigen::MatrixXd eigenfunctions;  // K x V, orthonormal rows
  Eigen::VectorXd eigenvalues;     // K, non-increasing
  Eigen::MatrixXd scores;          // N x K

  // Pointwise variance sum_k lambda_k phi_k(v)^2.
  Eigen::VectorXd pointwise_variance() const;
  Eigen::MatrixXd reconstruct() const;
};

// fields is N x V (one subject per row).
KlDecomposition kl_decompose(const Eigen::MatrixXd& fields, int K);

}  // namespace hemo

#pragma once

#include "hemo/dataset.hpp"
#include "hemo/simulator.hpp"
#include "hemo/summary.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace hemo {

// Vertexwise posterior-mean estimate inverse_transform(T(y_v)), constrained
// coordinates.
ParamField mpm_estimate(const BoldDataset& data, const SummaryModel& summary, const HrfModel& model);

// M x M lower-triangular convolution matrix, A(m, k) = h((m - k) t_r).
Eigen::MatrixXd convolution_matrix(const HrfModel& model, double theta, int M, double t_r);

struct AdmmResult {
  Eigen::VectorXd s;
  int iterations = 0;
  double primal_residual = 0.0;
};

// min_{s >= 0} ||y - A s||^2 + eta ||s||_1 by ADMM with the splitting s = z;
// returns z, which is exactly nonnegative.
AdmmResult nonneg_lasso_admm(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double eta, double rho = 1.0,
                             int iterations = 200);

// Minimizes f on [lo, hi] to bracket width tol. Returns the best point seen;
// the interval midpoint is evaluated first and wins ties.
double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol);

struct JointMapOptions {
  double rho = 1.0;
  int admm_iterations = 200;
  double golden_tol = 1e-3;
  int outer_rounds = 10;
  double rel_tol = 1e-5;
  double eta = -1.0;  // negative: sigma * sqrt(2 log M)
};

struct JointMapResult {
  double theta = 0.0;
  Eigen::VectorXd s;
  double objective = 0.0;
  std::vector<double> objective_trace;  // after each outer round
  bool converged = false;
};

// Block-coordinate descent on ||y - A(theta) s||^2 + eta ||s||_1, s >= 0, for
// the one-parameter model.
JointMapResult jointmap_estimate(const Eigen::VectorXd& y, const HrfModel& model, double sigma, double t_r,
                                 const JointMapOptions& options = {});

// jointmap_estimate on each row of the dataset (constrained field).
ParamField jointmap_field(const BoldDataset& data, const HrfModel& model, double sigma,
                          const JointMapOptions& options = {});

}  // namespace hemo

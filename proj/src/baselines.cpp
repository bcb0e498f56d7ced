#include "hemo/baselines.hpp"

#include "hemo/error.hpp"
#include "hemo/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <string>

namespace hemo {

ParamField mpm_estimate(const BoldDataset& data, const SummaryModel& summary, const HrfModel& model) {
  data.validate();
  if (summary.J != model.num_params())
    throw Error(ErrorKind::DimensionMismatch, "summary network output does not match the HRF model");
  ParamField f;
  f.values = summary_forward_batch(summary, data.Y);
  f.coords = Coordinates::Unconstrained;
  f.model = model;
  return f.to_constrained();
}

Eigen::MatrixXd convolution_matrix(const HrfModel& model, double theta, int M, double t_r) {
  const HrfKernel h(model, std::span<const double>(&theta, 1));
  Eigen::VectorXd k(M);
  for (int m = 0; m < M; ++m) k[m] = h(m * t_r);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(M, M);
  for (int c = 0; c < M; ++c) A.col(c).tail(M - c) = k.head(M - c);
  return A;
}

AdmmResult nonneg_lasso_admm(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double eta, double rho,
                             int iterations) {
  if (A.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "design rows differ from data length");
  const Eigen::Index n = A.cols();
  Eigen::MatrixXd lhs = 2.0 * A.transpose() * A;
  lhs.diagonal().array() += rho;
  const Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  const Eigen::VectorXd aty = 2.0 * A.transpose() * y;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n), z = x, u = x;
  AdmmResult res;
  for (int it = 0; it < iterations; ++it) {
    x = llt.solve(aty + rho * (z - u));
    z = (x + u).array() - eta / rho;
    z = z.cwiseMax(0.0);
    u += x - z;
    res.iterations = it + 1;
  }
  res.primal_residual = (x - z).norm();
  res.s = std::move(z);
  return res;
}

double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double best_x = 0.5 * (lo + hi);
  double best_f = f(best_x);
  auto consider = [&](double x, double fx) {
    if (fx < best_f) best_f = fx, best_x = x;
  };
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  consider(c, fc);
  consider(d, fd);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      consider(d, fd);
    }
  }
  consider(a, f(a));
  consider(b, f(b));
  return best_x;
}

namespace {

double jointmap_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, const Eigen::VectorXd& s, double eta) {
  return (y - A * s).squaredNorm() + eta * s.lpNorm<1>();
}

}  // namespace

JointMapResult jointmap_estimate(const Eigen::VectorXd& y, const HrfModel& model, double sigma, double t_r,
                                 const JointMapOptions& options) {
  if (model.variant != HrfVariant::OneParameter)
    throw Error(ErrorKind::InvalidArgument, "JointMAP supports the one-parameter model only");
  const auto M = static_cast<int>(y.size());
  if (M < 2) throw Error(ErrorKind::InvalidArgument, "series too short");
  const double eta = options.eta >= 0.0 ? options.eta : sigma * std::sqrt(2.0 * std::log(static_cast<double>(M)));
  const ParamBounds b = model.bounds[0];

  JointMapResult res;
  res.theta = 0.5 * (b.lo + b.hi);
  res.s = Eigen::VectorXd::Zero(M);
  Eigen::MatrixXd A = convolution_matrix(model, res.theta, M, t_r);
  res.objective = jointmap_objective(A, y, res.s, eta);
  for (int round = 0; round < options.outer_rounds; ++round) {
    const double prev = res.objective;
    // Signal step; keep the previous signal if ADMM's inexact answer is worse.
    Eigen::VectorXd s = nonneg_lasso_admm(A, y, eta, options.rho, options.admm_iterations).s;
    const double fs = jointmap_objective(A, y, s, eta);
    if (fs <= res.objective) {
      res.s = std::move(s);
      res.objective = fs;
    }
    // Kernel step.
    if (res.s.cwiseAbs().maxCoeff() > 0.0) {
      const auto obj = [&](double th) {
        return jointmap_objective(convolution_matrix(model, th, M, t_r), y, res.s, eta);
      };
      const double th = golden_section(obj, b.lo, b.hi, options.golden_tol);
      const double ft = obj(th);
      if (ft <= res.objective) {
        res.theta = th;
        res.objective = ft;
        A = convolution_matrix(model, res.theta, M, t_r);
      }
    }
    res.objective_trace.push_back(res.objective);
    if (std::abs(prev - res.objective) <= options.rel_tol * std::max(std::abs(prev), 1e-300)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

ParamField jointmap_field(const BoldDataset& data, const HrfModel& model, double sigma, const JointMapOptions& options) {
  data.validate();
  ParamField f;
  f.model = model;
  f.coords = Coordinates::Constrained;
  f.values.resize(data.Y.rows(), 1);
  parallel_for(static_cast<std::size_t>(data.Y.rows()), [&](std::size_t v) {
    const Eigen::VectorXd y = data.Y.row(static_cast<Eigen::Index>(v)).transpose();
    f.values(static_cast<Eigen::Index>(v), 0) = jointmap_estimate(y, model, sigma, data.t_r, options).theta;
  });
  return f;
}

}  // namespace hemo

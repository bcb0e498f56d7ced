#pragma once

#include "hemo/dataset.hpp"
#include "hemo/flow.hpp"
#include "hemo/mesh_fem.hpp"
#include "hemo/spde_prior.hpp"

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

namespace hemo {

// Per-vertex likelihood p(u_v | theta-tilde_v) of the summary u_v given the
// unconstrained parameters. Columns of U and C are vertices.
class VertexLikelihood {
 public:
  virtual ~VertexLikelihood() = default;
  virtual int dim() const = 0;
  // log p and d log p / d context for each column.
  virtual FlowBatch evaluate(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const = 0;
  // log p only; defaults to evaluate().logp.
  virtual Eigen::VectorXd log_density(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const {
    return evaluate(U, C).logp;
  }
  // d^2 log p / d context^2 per column; default is central differences of the
  // gradient (step 1e-4), symmetrized.
  virtual std::vector<Eigen::MatrixXd> hessians(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const;
};

class FlowLikelihood final : public VertexLikelihood {
 public:
  explicit FlowLikelihood(const FlowModel& flow) : flow_(flow) {}
  int dim() const override { return flow_.J; }
  FlowBatch evaluate(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const override;
  Eigen::VectorXd log_density(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const override {
    return flow_logp_batch(flow_, U, C);
  }

 private:
  const FlowModel& flow_;
};

// u | c ~ N(c, sd^2 I), normalized.
class GaussianLikelihood final : public VertexLikelihood {
 public:
  GaussianLikelihood(int dim, double sd) : dim_(dim), sd_(sd) {}
  int dim() const override { return dim_; }
  FlowBatch evaluate(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const override;
  std::vector<Eigen::MatrixXd> hessians(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const override;

 private:
  int dim_;
  double sd_;
};

// Summaries T(y_v) as a V x J matrix; the field is in unconstrained
// coordinates; Q is JV x JV, component-major.
double neg_log_posterior(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik,
                         const SparseSym& Q);
Eigen::VectorXd posterior_gradient(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik,
                                   const SparseSym& Q);
// Negated likelihood Hessian: J x J block per vertex, exactly J^2 V entries.
SparseSym likelihood_hessian(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik);
SparseSym posterior_hessian(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik,
                            const SparseSym& Q);

struct NewtonOptions {
  double tol = 1e-5;        // gradient infinity-norm
  int max_iters = 50;
  double cg_tol = 1e-12;    // relative residual target for the inner solve
  double cg_accept = 1e-6;  // residual above this counts as a failed solve
  // Stop when an accepted step lowers the objective by less than
  // ftol * max(1, |f|). Spline knots make the learned log-density only
  // piecewise smooth, so the gradient can stall above tol at a kink.
  double ftol = 1e-10;
};

struct NewtonIteration {
  int iteration;
  double objective;
  double grad_norm;  // infinity norm
  double step;
  double damping;
  double cg_residual;
};

struct NewtonResult {
  ParamField field;
  bool converged = false;  // gradient below tol
  bool stalled = false;    // stopped on the objective-change test
  int iterations = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  std::vector<NewtonIteration> history;
};

NewtonResult newton_map(const ParamField& init, const RowMatrix& data, const VertexLikelihood& lik,
                        const SparseSym& Q, const NewtonOptions& options = {});

// log p(T) ~ log p(T | MAP) - MAP' Q MAP / 2 + logdet(Q) / 2 - logdet(H) / 2, with H the
// solver's Hessian (indefinite likelihood blocks projected onto the PSD cone).
double laplace_evidence(const ParamField& field_hat, const RowMatrix& data, const VertexLikelihood& lik,
                        const SparseSym& Q);

struct GridPoint {
  double kappa;
  double tau;
  bool ok = false;
  double evidence = 0.0;
  std::string error;
};

struct HyperparamSelection {
  double kappa = 0.0;
  double tau = 0.0;
  std::vector<GridPoint> grid;
  NewtonResult map;  // at the selected point
};

// Evidence-maximizing (kappa, tau) shared by all components; ties go to the
// larger kappa, then the larger tau.
HyperparamSelection select_hyperparams(const RowMatrix& data, const VertexLikelihood& lik, const TriMesh& mesh,
                                       const std::vector<double>& kappa_grid, const std::vector<double>& tau_grid,
                                       const HrfModel& model, const NewtonOptions& options = {});

// MAP estimate starting from the summaries themselves.
ParamField initial_field(const RowMatrix& data, const HrfModel& model);

}  // namespace hemo

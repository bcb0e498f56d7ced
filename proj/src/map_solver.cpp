#include "hemo/map_solver.hpp"

#include "hemo/error.hpp"
#include "hemo/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace hemo {

namespace {

constexpr Eigen::Index kChunk = 128;

// Splits the columns into chunks evaluated in parallel.
FlowBatch evaluate_all(const VertexLikelihood& lik, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) {
  const Eigen::Index n = U.cols();
  FlowBatch out{Eigen::VectorXd(n), Eigen::MatrixXd(U.rows(), n)};
  const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index lo = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index len = std::min(kChunk, n - lo);
    const FlowBatch part = lik.evaluate(U.middleCols(lo, len), C.middleCols(lo, len));
    out.logp.segment(lo, len) = part.logp;
    out.grad_context.middleCols(lo, len) = part.grad_context;
  });
  return out;
}

Eigen::VectorXd log_density_all(const VertexLikelihood& lik, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) {
  const Eigen::Index n = U.cols();
  Eigen::VectorXd out(n);
  const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index lo = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index len = std::min(kChunk, n - lo);
    out.segment(lo, len) = lik.log_density(U.middleCols(lo, len), C.middleCols(lo, len));
  });
  return out;
}

std::vector<Eigen::MatrixXd> hessians_all(const VertexLikelihood& lik, const Eigen::MatrixXd& U,
                                          const Eigen::MatrixXd& C) {
  const Eigen::Index n = U.cols();
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(n));
  const auto chunks = static_cast<std::size_t>((n + kChunk - 1) / kChunk);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index lo = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index len = std::min(kChunk, n - lo);
    auto part = lik.hessians(U.middleCols(lo, len), C.middleCols(lo, len));
    for (Eigen::Index i = 0; i < len; ++i) out[static_cast<std::size_t>(lo + i)] = std::move(part[static_cast<std::size_t>(i)]);
  });
  return out;
}

void check(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik, const SparseSym* Q) {
  if (field.coords != Coordinates::Unconstrained)
    throw Error(ErrorKind::InvalidArgument, "posterior is defined on unconstrained coordinates");
  if (data.rows() != field.values.rows() || data.cols() != field.values.cols() || data.cols() != lik.dim())
    throw Error(ErrorKind::DimensionMismatch, "field is " + std::to_string(field.values.rows()) + "x" +
                                                  std::to_string(field.values.cols()) + ", summaries are " +
                                                  std::to_string(data.rows()) + "x" + std::to_string(data.cols()));
  if (Q && Q->dim() != static_cast<std::size_t>(field.values.size()))
    throw Error(ErrorKind::DimensionMismatch,
                "precision has dimension " + std::to_string(Q->dim()) + ", field has " +
                    std::to_string(field.values.size()) + " entries");
}

// Column v of the context matrix is vertex v's parameter vector.
Eigen::MatrixXd contexts(const ParamField& f) { return f.values.transpose(); }
Eigen::MatrixXd summaries(const RowMatrix& d) { return d.transpose(); }

Eigen::VectorXd stack_columns(const Eigen::MatrixXd& per_vertex) {
  // per_vertex is J x V; component-major stacking is row-wise concatenation.
  const Eigen::Index J = per_vertex.rows(), V = per_vertex.cols();
  Eigen::VectorXd x(J * V);
  for (Eigen::Index j = 0; j < J; ++j) x.segment(j * V, V) = per_vertex.row(j).transpose();
  return x;
}

struct CgResult {
  Eigen::VectorXd x;
  double residual;
  bool positive_curvature;
};

CgResult pcg(const SparseSym::Matrix& A, const Eigen::VectorXd& b, double tol) {
  const Eigen::Index n = b.size();
  CgResult res{Eigen::VectorXd::Zero(n), 1.0, true};
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.residual = 0.0;
    return res;
  }
  const Eigen::VectorXd d = A.diagonal();
  if ((d.array() <= 0.0).any()) {
    res.positive_curvature = false;
    return res;
  }
  const Eigen::VectorXd inv_d = d.cwiseInverse();
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = inv_d.cwiseProduct(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  const Eigen::Index max_iters = std::max<Eigen::Index>(200, 10 * n);
  for (Eigen::Index k = 0; k < max_iters; ++k) {
    const Eigen::VectorXd Ap = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) {
      res.positive_curvature = false;
      return res;
    }
    const double alpha = rz / pAp;
    res.x += alpha * p;
    r -= alpha * Ap;
    if (r.norm() <= tol * bnorm) break;
    z = inv_d.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.residual = (b - A * res.x).norm() / bnorm;
  return res;
}

// Places per-vertex J x J blocks (already negated) at (j V + v, k V + v).
SparseSym assemble_blocks(const std::vector<Eigen::MatrixXd>& blocks, int J) {
  const auto V = static_cast<int>(blocks.size());
  std::vector<SparseSym::Triplet> t;
  t.reserve(static_cast<std::size_t>(J * J * V));
  for (int v = 0; v < V; ++v)
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < J; ++k) t.emplace_back(j * V + v, k * V + v, blocks[static_cast<std::size_t>(v)](j, k));
  return SparseSym::from_triplets(static_cast<std::size_t>(J * V), t);
}

// Negated likelihood blocks with negative eigenvalues raised to zero. The
// learned density is not log-concave everywhere, and a single indefinite
// block would otherwise force damping of the whole system.
SparseSym convexified_likelihood_hessian(const ParamField& field, const RowMatrix& data,
                                         const VertexLikelihood& lik) {
  auto blocks = hessians_all(lik, summaries(data), contexts(field));
  for (auto& b : blocks) {
    b = -b;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
    if (es.eigenvalues().minCoeff() < 0.0)
      b = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
  }
  return assemble_blocks(blocks, static_cast<int>(field.values.cols()));
}

double objective_at(const Eigen::VectorXd& x, const ParamField& like, const RowMatrix& data,
                    const VertexLikelihood& lik, const SparseSym& Q) {
  const ParamField f = ParamField::from_stacked(x, like.num_vertices(), like.model, Coordinates::Unconstrained);
  return neg_log_posterior(f, data, lik, Q);
}

}  // namespace

std::vector<Eigen::MatrixXd> VertexLikelihood::hessians(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const {
  constexpr double h = 1e-4;
  const Eigen::Index J = C.rows(), n = C.cols();
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(n), Eigen::MatrixXd(J, J));
  for (Eigen::Index k = 0; k < J; ++k) {
    Eigen::MatrixXd cp = C, cm = C;
    cp.row(k).array() += h;
    cm.row(k).array() -= h;
    const Eigen::MatrixXd gp = evaluate(U, cp).grad_context;
    const Eigen::MatrixXd gm = evaluate(U, cm).grad_context;
    for (Eigen::Index v = 0; v < n; ++v) out[static_cast<std::size_t>(v)].col(k) = (gp.col(v) - gm.col(v)) / (2.0 * h);
  }
  for (auto& m : out) m = (0.5 * (m + m.transpose())).eval();
  return out;
}

FlowBatch FlowLikelihood::evaluate(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const {
  return flow_evaluate(flow_, U, C);
}

FlowBatch GaussianLikelihood::evaluate(const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) const {
  const Eigen::MatrixXd r = (U - C) / sd_;
  FlowBatch out;
  out.logp = -0.5 * r.colwise().squaredNorm().transpose();
  out.logp.array() -= 0.5 * dim_ * std::log(2.0 * std::numbers::pi * sd_ * sd_);
  out.grad_context = r / sd_;
  return out;
}

std::vector<Eigen::MatrixXd> GaussianLikelihood::hessians(const Eigen::MatrixXd&, const Eigen::MatrixXd& C) const {
  return std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(C.cols()),
                                      -Eigen::MatrixXd::Identity(dim_, dim_) / (sd_ * sd_));
}

double neg_log_posterior(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik,
                         const SparseSym& Q) {
  check(field, data, lik, &Q);
  return -log_density_all(lik, summaries(data), contexts(field)).sum() + 0.5 * Q.quadratic_form(field.stacked());
}

Eigen::VectorXd posterior_gradient(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik,
                                   const SparseSym& Q) {
  check(field, data, lik, &Q);
  const FlowBatch fb = evaluate_all(lik, summaries(data), contexts(field));
  return -stack_columns(fb.grad_context) + Q * field.stacked();
}

SparseSym likelihood_hessian(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik) {
  check(field, data, lik, nullptr);
  auto blocks = hessians_all(lik, summaries(data), contexts(field));
  for (auto& b : blocks) b = -b;
  return assemble_blocks(blocks, static_cast<int>(field.values.cols()));
}

SparseSym posterior_hessian(const ParamField& field, const RowMatrix& data, const VertexLikelihood& lik,
                            const SparseSym& Q) {
  check(field, data, lik, &Q);
  return likelihood_hessian(field, data, lik) + Q;
}

NewtonResult newton_map(const ParamField& init, const RowMatrix& data, const VertexLikelihood& lik,
                        const SparseSym& Q, const NewtonOptions& options) {
  check(init, data, lik, &Q);
  if (!init.values.allFinite()) throw Error(ErrorKind::NonFiniteObjective, "initial field is not finite");
  constexpr double kArmijo = 1e-4;
  const double min_step = std::ldexp(1.0, -30);

  NewtonResult result;
  Eigen::VectorXd x = init.stacked();
  double f = objective_at(x, init, data, lik, Q);
  if (!std::isfinite(f)) throw Error(ErrorKind::NonFiniteObjective, "objective is not finite at the initial field");
  double mu = 0.0;

  for (int it = 0;; ++it) {
    const ParamField cur = ParamField::from_stacked(x, init.num_vertices(), init.model, Coordinates::Unconstrained);
    const Eigen::VectorXd g = posterior_gradient(cur, data, lik, Q);
    result.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(result.grad_norm)) throw Error(ErrorKind::NonFiniteObjective, "gradient is not finite");
    if (result.grad_norm < options.tol) {
      result.converged = true;
      break;
    }
    if (it >= options.max_iters) break;

    const double f_prev = f;
    const SparseSym H = convexified_likelihood_hessian(cur, data, lik) + Q;
    const double mu_base = 1e-6 * std::max(H.diagonal().cwiseAbs().mean(), 1e-12);
    const SparseSym::Matrix eye = SparseSym::identity(H.dim()).matrix();
    for (;;) {
      const SparseSym::Matrix A = H.matrix() + mu * eye;
      const CgResult cg = pcg(A, g, options.cg_tol);
      const double slope = g.dot(cg.x);
      if (cg.positive_curvature && cg.residual < options.cg_accept && slope > 0.0) {
        bool accepted = false;
        for (double alpha = 1.0; alpha >= min_step; alpha *= 0.5) {
          const Eigen::VectorXd xn = x - alpha * cg.x;
          const double fn = objective_at(xn, init, data, lik, Q);
          if (std::isfinite(fn) && fn <= f - kArmijo * alpha * slope) {
            result.history.push_back({it + 1, fn, result.grad_norm, alpha, mu, cg.residual});
            x = xn;
            f = fn;
            accepted = true;
            break;
          }
        }
        if (accepted) break;
      }
      mu = std::max(10.0 * mu, mu_base);
      if (mu > 1e8) throw Error(ErrorKind::SolverStall, "damping exceeded 1e8 at iteration " + std::to_string(it + 1));
    }
    mu = mu / 10.0 < mu_base ? 0.0 : mu / 10.0;
    ++result.iterations;
    if (f_prev - f < options.ftol * std::max(1.0, std::abs(f))) {
      result.stalled = true;
      const ParamField last = ParamField::from_stacked(x, init.num_vertices(), init.model, Coordinates::Unconstrained);
      result.grad_norm = posterior_gradient(last, data, lik, Q).lpNorm<Eigen::Infinity>();
      result.converged = result.grad_norm < options.tol;
      break;
    }
  }
  result.field = ParamField::from_stacked(x, init.num_vertices(), init.model, Coordinates::Unconstrained);
  result.objective = f;
  return result;
}

double laplace_evidence(const ParamField& field_hat, const RowMatrix& data, const VertexLikelihood& lik,
                        const SparseSym& Q) {
  check(field_hat, data, lik, &Q);
  const FlowBatch fb = evaluate_all(lik, summaries(data), contexts(field_hat));
  const double loglik = fb.logp.sum();
  const double quad = Q.quadratic_form(field_hat.stacked());
  const double logdet_q = sparse_cholesky(Q).log_determinant();
  // Same curvature model as the solver: indefinite likelihood blocks are
  // projected onto the PSD cone, so H is SPD whenever Q is.
  const SparseSym H = convexified_likelihood_hessian(field_hat, data, lik) + Q;
  double logdet_h = 0.0;
  try {
    logdet_h = sparse_cholesky(H).log_determinant();
  } catch (const Error&) {
    // Q itself can be numerically singular; damp as the solver does.
    const double base = 1e-6 * std::max(H.diagonal().cwiseAbs().mean(), 1e-12);
    const SparseSym eye = SparseSym::identity(H.dim());
    bool ok = false;
    for (double mu = base; mu <= 1e8 && !ok; mu *= 10.0) {
      try {
        logdet_h = sparse_cholesky(H + mu * eye).log_determinant();
        ok = true;
      } catch (const Error&) {
      }
    }
    if (!ok) throw Error(ErrorKind::FactorizationFailure, "posterior Hessian is not positive definite");
  }
  const double ev = loglik - 0.5 * quad + 0.5 * logdet_q - 0.5 * logdet_h;
  if (!std::isfinite(ev)) throw Error(ErrorKind::NonFiniteObjective, "evidence is not finite");
  return ev;
}

ParamField initial_field(const RowMatrix& data, const HrfModel& model) {
  ParamField f;
  f.values = data;
  f.coords = Coordinates::Unconstrained;
  f.model = model;
  return f;
}

HyperparamSelection select_hyperparams(const RowMatrix& data, const VertexLikelihood& lik, const TriMesh& mesh,
                                       const std::vector<double>& kappa_grid, const std::vector<double>& tau_grid,
                                       const HrfModel& model, const NewtonOptions& options) {
  if (kappa_grid.empty() || tau_grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty hyperparameter grid");
  if (data.rows() != static_cast<Eigen::Index>(mesh.num_vertices()))
    throw Error(ErrorKind::DimensionMismatch, "summaries have " + std::to_string(data.rows()) + " rows, mesh has " +
                                                  std::to_string(mesh.num_vertices()) + " vertices");
  const SparseSym C = mass_matrix(mesh, true);
  const SparseSym G = stiffness_matrix(mesh);
  const int J = static_cast<int>(data.cols());
  const ParamField init = initial_field(data, model);

  HyperparamSelection sel;
  for (double k : kappa_grid)
    for (double t : tau_grid) sel.grid.push_back(GridPoint{k, t, false, 0.0, {}});
  std::vector<NewtonResult> maps(sel.grid.size());
  parallel_for(sel.grid.size(), [&](std::size_t i) {
    auto& p = sel.grid[i];
    try {
      const SparseSym Q = full_precision(C, G, PriorSpec::uniform(J, p.kappa, p.tau));
      maps[i] = newton_map(init, data, lik, Q, options);
      p.evidence = laplace_evidence(maps[i].field, data, lik, Q);
      p.ok = true;
    } catch (const Error& e) {
      p.error = e.what();
    }
  });

  std::size_t best = sel.grid.size();
  for (std::size_t i = 0; i < sel.grid.size(); ++i) {
    const auto& p = sel.grid[i];
    if (!p.ok) continue;
    if (best == sel.grid.size()) {
      best = i;
      continue;
    }
    const auto& b = sel.grid[best];
    const double tol = 1e-12 * std::max(1.0, std::abs(b.evidence));
    const bool tie = std::abs(p.evidence - b.evidence) <= tol;
    if ((!tie && p.evidence > b.evidence) ||
        (tie && (p.kappa > b.kappa || (p.kappa == b.kappa && p.tau > b.tau))))
      best = i;
  }
  if (best == sel.grid.size()) throw Error(ErrorKind::AllPointsFailed, "no grid point produced an evidence value");
  sel.kappa = sel.grid[best].kappa;
  sel.tau = sel.grid[best].tau;
  sel.map = std::move(maps[best]);
  return sel;
}

}  // namespace hemo

#include "hemo/flow.hpp"

#include "hemo/error.hpp"
#include "hemo/spline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace hemo {

namespace {

constexpr std::uint64_t kHeldOutStream = 0xf10e;
constexpr int kEvalPairs = 1000;

Eigen::VectorXd as_vector(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

void check_dims(const FlowModel& m, std::size_t u, std::size_t c) {
  if (static_cast<int>(u) != m.J || static_cast<int>(c) != m.J)
    throw Error(ErrorKind::DimensionMismatch, "flow expects vectors of length " + std::to_string(m.J));
}

Eigen::MatrixXd conditioner_input(const FlowModel& m, int stage, const Eigen::MatrixXd& X, const Eigen::MatrixXd& C) {
  if (m.J == 1) return C;
  Eigen::MatrixXd in(1 + m.J, X.cols());
  in.row(0) = X.row(1 - m.active_coordinate(stage));
  in.bottomRows(m.J) = C;
  return in;
}

}  // namespace

FlowModel FlowModel::create(int J, Rng& rng, int stages, int num_bins, double tail_bound, int hidden,
                            int hidden_layers) {
  if (J < 1 || J > 2) throw Error(ErrorKind::InvalidArgument, "flow supports J = 1 or 2");
  if (stages < 1 || hidden < 1 || hidden_layers < 1)
    throw Error(ErrorKind::InvalidArgument, "flow needs at least one stage and one hidden layer");
  FlowModel m;
  m.J = J;
  m.num_bins = num_bins;
  m.tail_bound = tail_bound;
  std::vector<int> widths{m.conditioner_input_dim()};
  for (int l = 0; l < hidden_layers; ++l) widths.push_back(hidden);
  widths.push_back(spline_param_count(num_bins));
  for (int s = 0; s < stages; ++s) m.conditioners.emplace_back(widths, rng, true, Activation::Softplus);
  return m;
}

void FlowModel::validate() const {
  if (J < 1 || J > 2) throw Error(ErrorKind::InvalidArgument, "flow supports J = 1 or 2");
  if (conditioners.empty()) throw Error(ErrorKind::InvalidArgument, "flow has no stages");
  for (const auto& c : conditioners)
    if (c.input_dim() != conditioner_input_dim() || c.output_dim() != spline_param_count(num_bins))
      throw Error(ErrorKind::DimensionMismatch, "conditioner shape does not match the flow");
}

FlowBatch flow_evaluate(const FlowModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C,
                        std::vector<std::vector<DenseLayer>>* weight_grads, double weight_scale) {
  const int J = model.J;
  const Eigen::Index nb = U.cols();
  if (U.rows() != J || C.rows() != J || C.cols() != nb)
    throw Error(ErrorKind::DimensionMismatch, "flow batch shapes do not match J=" + std::to_string(J));
  const int S = model.num_stages();
  const int K = model.num_bins;
  const double B = model.tail_bound;

  Eigen::MatrixXd X = U;
  Eigen::VectorXd logdet = Eigen::VectorXd::Zero(nb);
  std::vector<Mlp::Tape> tapes(static_cast<std::size_t>(S));
  std::vector<std::vector<SplineJacobian>> jac(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    const auto su = static_cast<std::size_t>(s);
    const int a = model.active_coordinate(s);
    const Eigen::MatrixXd raw = model.conditioners[su].forward(conditioner_input(model, s, X, C), &tapes[su]);
    jac[su].resize(static_cast<std::size_t>(nb));
    for (Eigen::Index b = 0; b < nb; ++b) {
      auto& jb = jac[su][static_cast<std::size_t>(b)];
      jb = rq_spline_jacobian(std::span<const double>(raw.col(b).data(), static_cast<std::size_t>(raw.rows())), K,
                              B, X(a, b));
      X(a, b) = jb.y;
      logdet[b] += jb.logdet;
    }
  }

  FlowBatch out;
  out.logp = logdet - 0.5 * X.colwise().squaredNorm().transpose();
  out.logp.array() -= 0.5 * J * std::log(2.0 * std::numbers::pi);

  Eigen::MatrixXd gx = -X;  // d logp / d state after the last stage
  out.grad_context = Eigen::MatrixXd::Zero(J, nb);
  const int P = spline_param_count(K);
  for (int s = S - 1; s >= 0; --s) {
    const auto su = static_cast<std::size_t>(s);
    const int a = model.active_coordinate(s);
    Eigen::MatrixXd g_raw(P, nb);
    for (Eigen::Index b = 0; b < nb; ++b) {
      const auto& jb = jac[su][static_cast<std::size_t>(b)];
      g_raw.col(b) = gx(a, b) * jb.dy_draw + jb.dlogdet_draw;
      gx(a, b) = gx(a, b) * jb.dy_dx + jb.dlogdet_dx;
    }
    std::vector<DenseLayer> stage_grads;
    if (weight_grads) stage_grads = model.conditioners[su].zeros_like();
    const Eigen::MatrixXd d_in =
        model.conditioners[su].backward(tapes[su], g_raw, weight_grads ? &stage_grads : nullptr);
    if (weight_grads) {
      auto& dst = (*weight_grads)[su];
      for (std::size_t l = 0; l < dst.size(); ++l) {
        dst[l].W += weight_scale * stage_grads[l].W;
        dst[l].b += weight_scale * stage_grads[l].b;
      }
    }
    if (J == 1) {
      out.grad_context += d_in;
    } else {
      gx.row(1 - a) += d_in.row(0);
      out.grad_context += d_in.bottomRows(J);
    }
  }
  return out;
}

Eigen::VectorXd flow_logp_batch(const FlowModel& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C) {
  const int J = model.J;
  const Eigen::Index nb = U.cols();
  if (U.rows() != J || C.rows() != J || C.cols() != nb)
    throw Error(ErrorKind::DimensionMismatch, "flow batch shapes do not match J=" + std::to_string(J));
  Eigen::MatrixXd X = U;
  Eigen::VectorXd logdet = Eigen::VectorXd::Zero(nb);
  for (int s = 0; s < model.num_stages(); ++s) {
    const int a = model.active_coordinate(s);
    const Eigen::MatrixXd raw =
        model.conditioners[static_cast<std::size_t>(s)].forward(conditioner_input(model, s, X, C), nullptr);
    for (Eigen::Index b = 0; b < nb; ++b) {
      const SplineKnots knots =
          knots_from_raw(std::span<const double>(raw.col(b).data(), static_cast<std::size_t>(raw.rows())),
                         model.num_bins, model.tail_bound);
      const SplineValue v = rq_spline(knots, X(a, b));
      X(a, b) = v.y;
      logdet[b] += v.logdet;
    }
  }
  Eigen::VectorXd logp = logdet - 0.5 * X.colwise().squaredNorm().transpose();
  logp.array() -= 0.5 * J * std::log(2.0 * std::numbers::pi);
  return logp;
}

double flow_logpdf(const FlowModel& model, std::span<const double> u, std::span<const double> context) {
  check_dims(model, u.size(), context.size());
  return flow_evaluate(model, as_vector(u), as_vector(context)).logp[0];
}

Eigen::VectorXd flow_grad_context(const FlowModel& model, std::span<const double> u,
                                  std::span<const double> context) {
  check_dims(model, u.size(), context.size());
  return flow_evaluate(model, as_vector(u), as_vector(context)).grad_context.col(0);
}

Eigen::MatrixXd central_difference_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                                           const Eigen::VectorXd& x, double step) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    h.col(k) = (grad(xp) - grad(xm)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

Eigen::MatrixXd flow_hess_context(const FlowModel& model, std::span<const double> u,
                                  std::span<const double> context) {
  check_dims(model, u.size(), context.size());
  const Eigen::VectorXd uu = as_vector(u);
  return central_difference_hessian(
      [&](const Eigen::VectorXd& c) { return flow_evaluate(model, uu, c).grad_context.col(0).eval(); },
      as_vector(context));
}

Eigen::VectorXd flow_transform(const FlowModel& model, std::span<const double> u, std::span<const double> context,
                               double* logdet) {
  check_dims(model, u.size(), context.size());
  Eigen::MatrixXd X = as_vector(u);
  const Eigen::MatrixXd C = as_vector(context);
  double ld = 0.0;
  for (int s = 0; s < model.num_stages(); ++s) {
    const int a = model.active_coordinate(s);
    const Eigen::VectorXd raw =
        model.conditioners[static_cast<std::size_t>(s)].forward(conditioner_input(model, s, X, C), nullptr).col(0);
    const SplineKnots knots = knots_from_raw(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())),
                                             model.num_bins, model.tail_bound);
    const SplineValue v = rq_spline(knots, X(a, 0));
    X(a, 0) = v.y;
    ld += v.logdet;
  }
  if (logdet) *logdet = ld;
  return X.col(0);
}

Eigen::VectorXd flow_inverse(const FlowModel& model, std::span<const double> z, std::span<const double> context) {
  check_dims(model, z.size(), context.size());
  Eigen::MatrixXd X = as_vector(z);
  const Eigen::MatrixXd C = as_vector(context);
  for (int s = model.num_stages() - 1; s >= 0; --s) {
    const int a = model.active_coordinate(s);
    const Eigen::VectorXd raw =
        model.conditioners[static_cast<std::size_t>(s)].forward(conditioner_input(model, s, X, C), nullptr).col(0);
    const SplineKnots knots = knots_from_raw(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())),
                                             model.num_bins, model.tail_bound);
    X(a, 0) = rq_spline_inverse(knots, X(a, 0));
  }
  return X.col(0);
}

Eigen::VectorXd flow_sample(const FlowModel& model, std::span<const double> context, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(model.J);
  for (auto& v : z) v = normal(rng);
  return flow_inverse(model, std::span<const double>(z.data(), static_cast<std::size_t>(z.size())), context);
}

double flow_loss(const FlowModel& model, const RowMatrix& summaries, const RowMatrix& contexts) {
  if (summaries.rows() == 0) return 0.0;
  return -flow_evaluate(model, summaries.transpose(), contexts.transpose()).logp.mean();
}

namespace {

FlowModel fit_flow(FlowModel model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& C, const RowMatrix& eval_u,
                   const RowMatrix& eval_c, const AdamConfig& adam, Rng& rng, TrainingReport* report) {
  const auto N = static_cast<int>(U.cols());
  if (adam.batch_size < 1 || N < adam.batch_size)
    throw Error(ErrorKind::InvalidArgument,
                "need at least one batch of pairs (N=" + std::to_string(N) + ", batch=" + std::to_string(adam.batch_size) + ")");
  if (report) {
    report->initial_loss = flow_loss(model, eval_u, eval_c);
    report->batch_losses.clear();
  }
  Adam opt(adam);
  std::vector<std::vector<DenseLayer>> grads;
  std::vector<DenseLayer*> params;
  std::vector<const DenseLayer*> gptr;
  for (auto& c : model.conditioners) grads.push_back(c.zeros_like());
  for (std::size_t s = 0; s < grads.size(); ++s)
    for (std::size_t l = 0; l < grads[s].size(); ++l) {
      params.push_back(&model.conditioners[s].layers[l]);
      gptr.push_back(&grads[s][l]);
    }
  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  Eigen::MatrixXd bu(model.J, adam.batch_size), bc(model.J, adam.batch_size);
  for (int it = 0; it < adam.iterations; ++it) {
    for (int b = 0; b < adam.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          const auto j = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)), i - 1);
          std::swap(order[i - 1], order[j]);
        }
        cursor = 0;
      }
      const int i = order[cursor++];
      bu.col(b) = U.col(i);
      bc.col(b) = C.col(i);
    }
    for (auto& g : grads)
      for (auto& l : g) {
        l.W.setZero();
        l.b.setZero();
      }
    const FlowBatch fb = flow_evaluate(model, bu, bc, &grads, -1.0 / adam.batch_size);
    opt.step(params, gptr);
    if (report) report->batch_losses.push_back(-fb.logp.mean());
  }
  if (report) report->final_loss = flow_loss(model, eval_u, eval_c);
  return model;
}

}  // namespace

FlowModel train_flow_on_pairs(const RowMatrix& summaries, const RowMatrix& contexts, const AdamConfig& adam, Rng& rng,
                              TrainingReport* report) {
  if (summaries.rows() != contexts.rows() || summaries.cols() != contexts.cols())
    throw Error(ErrorKind::DimensionMismatch, "summaries and contexts must have the same shape");
  FlowModel model = FlowModel::create(static_cast<int>(summaries.cols()), rng);
  const Eigen::Index n_eval = std::min<Eigen::Index>(summaries.rows(), kEvalPairs);
  return fit_flow(std::move(model), summaries.transpose(), contexts.transpose(), summaries.topRows(n_eval),
                  contexts.topRows(n_eval), adam, rng, report);
}

FlowModel train_flow(const PairSimulator& simulator, const SummaryModel& summary, int N, const AdamConfig& adam,
                     Rng& rng, TrainingReport* report) {
  if (N < adam.batch_size)
    throw Error(ErrorKind::InvalidArgument, "pair count N=" + std::to_string(N) + " is below the batch size");
  const std::uint64_t data_seed = rng();
  const PairSet train = simulate_pairs(simulator, N, data_seed);
  const PairSet held_out = simulate_pairs(simulator, std::min(N, kEvalPairs), derive_seed(data_seed, kHeldOutStream, 0));
  const RowMatrix u = summary_forward_batch(summary, train.y);
  const RowMatrix u_eval = summary_forward_batch(summary, held_out.y);
  FlowModel model = FlowModel::create(summary.J, rng);
  return fit_flow(std::move(model), u.transpose(), train.theta_tilde.transpose(), u_eval, held_out.theta_tilde, adam,
                  rng, report);
}

}  // namespace hemo

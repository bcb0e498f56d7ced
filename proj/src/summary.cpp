#include "hemo/summary.hpp"

#include "hemo/error.hpp"
#include "hemo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace hemo {

namespace {

constexpr std::uint64_t kPairStream = 0x7a11;
constexpr std::uint64_t kHeldOutStream = 0x7a12;
constexpr int kEvalPairs = 1000;

// Encodings as columns (D x N).
Eigen::MatrixXd encode_rows(const RowMatrix& Y) {
  const Eigen::Index D = Y.cols() / 2 + 1;
  Eigen::MatrixXd out(D, Y.rows());
  parallel_for(static_cast<std::size_t>(Y.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.col(r) = summary_encode(std::span<const double>(Y.row(r).data(), static_cast<std::size_t>(Y.cols())));
  });
  return out;
}

double mse(const Mlp& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& T) {
  if (X.cols() == 0) return 0.0;
  const Eigen::MatrixXd out = net.forward(X, nullptr);
  return (out - T).squaredNorm() / static_cast<double>(T.size());
}

void shuffle(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)), i - 1);
    std::swap(idx[i - 1], idx[j]);
  }
}

SummaryModel fit(SummaryModel model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& T, const Eigen::MatrixXd& eval_x,
                 const Eigen::MatrixXd& eval_t, const AdamConfig& adam, Rng& rng, TrainingReport* report) {
  const auto N = static_cast<int>(X.cols());
  if (adam.batch_size < 1 || N < adam.batch_size)
    throw Error(ErrorKind::InvalidArgument,
                "need at least one batch of pairs (N=" + std::to_string(N) + ", batch=" + std::to_string(adam.batch_size) + ")");
  if (report) {
    report->initial_loss = mse(model.net, eval_x, eval_t);
    report->batch_losses.clear();
  }
  Adam opt(adam);
  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  Eigen::MatrixXd bx(X.rows(), adam.batch_size), bt(T.rows(), adam.batch_size);
  Mlp::Tape tape;
  std::vector<DenseLayer> grads = model.net.zeros_like();
  std::vector<DenseLayer*> params;
  std::vector<const DenseLayer*> gptr;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    params.push_back(&model.net.layers[l]);
    gptr.push_back(&grads[l]);
  }
  const double scale = 2.0 / (static_cast<double>(adam.batch_size) * static_cast<double>(T.rows()));
  for (int it = 0; it < adam.iterations; ++it) {
    for (int b = 0; b < adam.batch_size; ++b) {
      if (cursor == order.size()) {
        shuffle(order, rng);
        cursor = 0;
      }
      const int i = order[cursor++];
      bx.col(b) = X.col(i);
      bt.col(b) = T.col(i);
    }
    const Eigen::MatrixXd out = model.net.forward(bx, &tape);
    const Eigen::MatrixXd resid = out - bt;
    for (auto& g : grads) {
      g.W.setZero();
      g.b.setZero();
    }
    model.net.backward(tape, scale * resid, &grads);
    opt.step(params, gptr);
    if (report) report->batch_losses.push_back(resid.squaredNorm() / static_cast<double>(resid.size()));
  }
  if (report) report->final_loss = mse(model.net, eval_x, eval_t);
  return model;
}

Eigen::MatrixXd targets_of(const PairSet& p) { return p.theta_tilde.transpose(); }

}  // namespace

SummaryModel SummaryModel::create(int M, int J, Rng& rng) {
  if (M < 4 || J < 1) throw Error(ErrorKind::InvalidArgument, "summary network needs M >= 4 and J >= 1");
  SummaryModel s;
  s.M = M;
  s.J = J;
  s.net = Mlp({M / 2 + 1, M, M / 2, M / 4, J}, rng);
  return s;
}

Eigen::VectorXd summary_encode(std::span<const double> y) {
  return (periodogram(y).array() + 1e-12).log().matrix();
}

Eigen::VectorXd summary_forward(const SummaryModel& model, std::span<const double> y) {
  if (static_cast<int>(y.size()) != model.M)
    throw Error(ErrorKind::DimensionMismatch,
                "series of length " + std::to_string(y.size()) + ", summary network expects M=" + std::to_string(model.M));
  return model.net.forward(summary_encode(y));
}

RowMatrix summary_forward_batch(const SummaryModel& model, const RowMatrix& Y) {
  if (Y.cols() != model.M)
    throw Error(ErrorKind::DimensionMismatch,
                "series of length " + std::to_string(Y.cols()) + ", summary network expects M=" + std::to_string(model.M));
  RowMatrix out(Y.rows(), model.J);
  constexpr std::size_t kChunk = 256;
  const auto n = static_cast<std::size_t>(Y.rows());
  parallel_for((n + kChunk - 1) / kChunk, [&](std::size_t c) {
    const auto lo = static_cast<Eigen::Index>(c * kChunk);
    const auto hi = static_cast<Eigen::Index>(std::min(n, (c + 1) * kChunk));
    Eigen::MatrixXd enc(model.encoding_dim(), hi - lo);
    for (Eigen::Index r = lo; r < hi; ++r)
      enc.col(r - lo) = summary_encode(std::span<const double>(Y.row(r).data(), static_cast<std::size_t>(Y.cols())));
    out.middleRows(lo, hi - lo) = model.net.forward(enc, nullptr).transpose();
  });
  return out;
}

PairSimulator prior_pair_simulator(const SimulatorConfig& config, const HrfModel& model) {
  config.validate();
  return [config, model](Rng& rng) {
    const Eigen::VectorXd theta = sample_uniform_theta(model, rng);
    const std::span<const double> th(theta.data(), static_cast<std::size_t>(theta.size()));
    TrainingPair p;
    p.theta_tilde = transform(model, th);
    p.y = simulate_bold(config, model, th, rng);
    return p;
  };
}

PairSet simulate_pairs(const PairSimulator& simulator, int N, std::uint64_t seed) {
  if (N < 1) throw Error(ErrorKind::InvalidArgument, "need at least one pair");
  std::vector<TrainingPair> pairs(static_cast<std::size_t>(N));
  parallel_for(pairs.size(), [&](std::size_t i) {
    Rng rng(derive_seed(seed, kPairStream, i));
    pairs[i] = simulator(rng);
  });
  PairSet out;
  const auto J = pairs[0].theta_tilde.size();
  const auto M = pairs[0].y.size();
  out.theta_tilde.resize(N, J);
  out.y.resize(N, M);
  for (int i = 0; i < N; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    if (p.theta_tilde.size() != J || p.y.size() != M)
      throw Error(ErrorKind::DimensionMismatch, "simulator returned pairs of varying size");
    out.theta_tilde.row(i) = p.theta_tilde.transpose();
    out.y.row(i) = p.y.transpose();
  }
  return out;
}

double summary_loss(const SummaryModel& model, const PairSet& pairs) {
  return mse(model.net, encode_rows(pairs.y), targets_of(pairs));
}

SummaryModel train_summary_on_pairs(const PairSet& pairs, const AdamConfig& adam, Rng& rng, TrainingReport* report) {
  const auto M = static_cast<int>(pairs.y.cols());
  const auto J = static_cast<int>(pairs.theta_tilde.cols());
  SummaryModel model = SummaryModel::create(M, J, rng);
  const Eigen::MatrixXd X = encode_rows(pairs.y);
  const Eigen::MatrixXd T = targets_of(pairs);
  const Eigen::Index n_eval = std::min<Eigen::Index>(X.cols(), kEvalPairs);
  return fit(std::move(model), X, T, X.leftCols(n_eval), T.leftCols(n_eval), adam, rng, report);
}

SummaryModel train_summary(const PairSimulator& simulator, int N, const AdamConfig& adam, Rng& rng,
                           TrainingReport* report) {
  if (N < adam.batch_size)
    throw Error(ErrorKind::InvalidArgument, "pair count N=" + std::to_string(N) + " is below the batch size");
  const std::uint64_t data_seed = rng();
  const PairSet train = simulate_pairs(simulator, N, data_seed);
  const PairSet held_out = simulate_pairs(simulator, std::min(N, kEvalPairs), derive_seed(data_seed, kHeldOutStream, 0));
  const auto M = static_cast<int>(train.y.cols());
  const auto J = static_cast<int>(train.theta_tilde.cols());
  SummaryModel model = SummaryModel::create(M, J, rng);
  return fit(std::move(model), encode_rows(train.y), targets_of(train), encode_rows(held_out.y), targets_of(held_out),
             adam, rng, report);
}

}  // namespace hemo

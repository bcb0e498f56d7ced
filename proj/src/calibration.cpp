#include "hemo/calibration.hpp"

#include "hemo/error.hpp"
#include "hemo/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace hemo {

Eigen::VectorXd mean_periodogram(const BoldDataset& data) {
  data.validate();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(data.num_timepoints() / 2 + 1);
  for (Eigen::Index v = 0; v < data.Y.rows(); ++v) {
    const Eigen::VectorXd row = data.Y.row(v).transpose();
    acc += periodogram(row);
  }
  return acc / static_cast<double>(data.Y.rows());
}

BoldDataset simulate_prior_predictive(const SimulatorConfig& nu, int K, const HrfModel& model,
                                      std::uint64_t seed) {
  nu.validate();
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "simulation count K must be at least 1");
  BoldDataset out;
  out.t_r = nu.t_r;
  out.Y.resize(K, nu.M);
  parallel_for(static_cast<std::size_t>(K), [&](std::size_t k) {
    Rng rng(derive_seed(seed, 0x5ca1, k));
    const Eigen::VectorXd theta = sample_uniform_theta(model, rng);
    out.Y.row(static_cast<Eigen::Index>(k)) =
        simulate_bold(nu, model, std::span<const double>(theta.data(), theta.size()), rng).transpose();
  });
  return out;
}

double calibration_loss(const SimulatorConfig& nu, const Eigen::VectorXd& observed_mean_psd, int K,
                        const HrfModel& model, std::uint64_t seed) {
  if (observed_mean_psd.size() != nu.M / 2 + 1)
    throw Error(ErrorKind::DimensionMismatch, "observed spectrum has " + std::to_string(observed_mean_psd.size()) +
                                                  " bins, simulator M=" + std::to_string(nu.M));
  const Eigen::VectorXd sim = mean_periodogram(simulate_prior_predictive(nu, K, model, seed));
  return (observed_mean_psd - sim).cwiseAbs().sum();
}

double calibration_loss(const SimulatorConfig& nu, const BoldDataset& observed, int K, const HrfModel& model,
                        Rng& rng) {
  if (observed.num_timepoints() != nu.M || std::abs(observed.t_r - nu.t_r) > 1e-12)
    throw Error(ErrorKind::DimensionMismatch, "observed grid (M, t_r) differs from the simulator's");
  if (K < 1) throw Error(ErrorKind::InvalidArgument, "simulation count K must be at least 1");
  return calibration_loss(nu, mean_periodogram(observed), K, model, rng());
}

// ------------------------------------------------------------ GP surrogate

GpSurrogate::GpSurrogate(Eigen::MatrixXd inputs, Eigen::VectorXd targets)
    : x_(std::move(inputs)), y_(std::move(targets)) {
  mean_ = y_.mean();
  const double var = (y_.array() - mean_).square().mean();
  scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  double best = -std::numeric_limits<double>::infinity(), best_ell = 0.2;
  for (double ell : {0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2}) {
    const double lml = fit(ell);
    if (lml > best) best = lml, best_ell = ell;
  }
  fit(best_ell);
}

double GpSurrogate::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  return std::exp(-0.5 * (a - b).squaredNorm() / (lengthscale_ * lengthscale_));
}

double GpSurrogate::fit(double lengthscale) {
  lengthscale_ = lengthscale;
  const Eigen::Index n = x_.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel(x_.row(i), x_.row(j));
  k.diagonal().array() += 1e-6;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  chol_ = llt.matrixL();
  const Eigen::VectorXd z = (y_.array() - mean_) / scale_;
  alpha_ = llt.solve(z);
  return -0.5 * z.dot(alpha_) - chol_.diagonal().array().log().sum();
}

std::pair<double, double> GpSurrogate::predict(const Eigen::VectorXd& x) const {
  const Eigen::Index n = x_.rows();
  Eigen::VectorXd kx(n);
  for (Eigen::Index i = 0; i < n; ++i) kx[i] = kernel(x_.row(i), x);
  const double mu = kx.dot(alpha_);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(kx);
  const double var = std::max(1.0 + 1e-6 - v.squaredNorm(), 1e-12);
  return {mean_ + scale_ * mu, scale_ * std::sqrt(var)};
}

double expected_improvement(double mean, double sd, double best, double xi) {
  if (sd <= 0.0) return std::max(best - mean - xi, 0.0);
  const double z = (best - mean - xi) / sd;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return (best - mean - xi) * normal_cdf(z) + sd * pdf;
}

// -------------------------------------------------------------- calibrate

namespace {

constexpr int kDims = 5;

SimulatorConfig decode(const Eigen::VectorXd& u, const CalibrationBounds& b) {
  SimulatorConfig nu = b.lower;
  auto lerp = [&](int i, double lo, double hi) { return lo + u[i] * (hi - lo); };
  nu.lambda_min = lerp(0, b.lower.lambda_min, b.upper.lambda_min);
  nu.lambda_max = lerp(1, b.lower.lambda_max, b.upper.lambda_max);
  nu.a_min = lerp(2, b.lower.a_min, b.upper.a_min);
  nu.a_max = lerp(3, b.lower.a_max, b.upper.a_max);
  nu.sigma2 = lerp(4, b.lower.sigma2, b.upper.sigma2);
  if (nu.lambda_min > nu.lambda_max) std::swap(nu.lambda_min, nu.lambda_max);
  if (nu.a_min > nu.a_max) std::swap(nu.a_min, nu.a_max);
  return nu;
}

Eigen::MatrixXd latin_hypercube(int n, Rng& rng) {
  Eigen::MatrixXd x(n, kDims);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int d = 0; d < kDims; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform01(rng) * (i + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(std::min(j, i))]);
    }
    for (int i = 0; i < n; ++i) x(i, d) = (perm[static_cast<std::size_t>(i)] + uniform01(rng)) / n;
  }
  return x;
}

Eigen::VectorXd uniform_point(Rng& rng) {
  Eigen::VectorXd u(kDims);
  for (auto& v : u) v = uniform01(rng);
  return u;
}

}  // namespace

CalibrationResult calibrate(const BoldDataset& observed, const CalibrationBounds& bounds,
                            const CalibrationOptions& options, const HrfModel& model, Rng& rng) {
  if (options.budget < 20)
    throw Error(ErrorKind::BudgetTooSmall, "calibration budget " + std::to_string(options.budget) + " < 20");
  bounds.lower.validate();
  if (observed.num_timepoints() != bounds.lower.M || std::abs(observed.t_r - bounds.lower.t_r) > 1e-12)
    throw Error(ErrorKind::DimensionMismatch, "observed grid (M, t_r) differs from the calibration grid");

  const Eigen::VectorXd target = mean_periodogram(observed);
  const std::uint64_t sim_seed = rng();  // common random numbers across evaluations

  CalibrationResult result;
  std::vector<Eigen::VectorXd> xs;
  std::vector<double> ys;
  auto evaluate = [&](const Eigen::VectorXd& u) {
    const SimulatorConfig nu = decode(u, bounds);
    const double loss = calibration_loss(nu, target, options.num_simulations, model, sim_seed);
    xs.push_back(u);
    ys.push_back(loss);
    result.history.push_back({nu, loss});
  };

  const int n_init = std::min(options.budget / 4, 32);
  result.initial_design_size = n_init;
  const Eigen::MatrixXd design = latin_hypercube(n_init, rng);
  for (int i = 0; i < n_init; ++i) evaluate(design.row(i).transpose());

  while (static_cast<int>(ys.size()) < options.budget) {
    if (options.random_search) {
      evaluate(uniform_point(rng));
      continue;
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), kDims);
    for (std::size_t i = 0; i < xs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    const GpSurrogate gp(x, Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())));
    const double best = *std::min_element(ys.begin(), ys.end());

    // Candidate pool: global uniform draws plus local perturbations of the
    // incumbent points.
    std::vector<std::size_t> order(ys.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ys[a] < ys[b]; });
    std::normal_distribution<double> jitter(0.0, 0.05);
    Eigen::VectorXd best_u;
    double best_ei = -1.0;
    auto consider = [&](const Eigen::VectorXd& u) {
      const auto [mu, sd] = gp.predict(u);
      const double ei = expected_improvement(mu, sd, best);
      if (ei > best_ei) best_ei = ei, best_u = u;
    };
    for (int c = 0; c < 1000; ++c) consider(uniform_point(rng));
    for (std::size_t r = 0; r < std::min<std::size_t>(3, order.size()); ++r)
      for (int c = 0; c < 150; ++c) {
        Eigen::VectorXd u = xs[order[r]];
        for (auto& v : u) v = std::clamp(v + jitter(rng), 0.0, 1.0);
        consider(u);
      }
    evaluate(best_u);
  }

  const auto best_it = std::min_element(ys.begin(), ys.end());
  const auto best_idx = static_cast<std::size_t>(best_it - ys.begin());
  result.best = result.history[best_idx].nu;
  result.best_loss = *best_it;
  return result;
}

}  // namespace hemo

#include "doctest.h"
#include "test_util.hpp"

#include "hemo/baselines.hpp"
#include "hemo/error.hpp"

#include <cmath>

using namespace hemo;

namespace {

Eigen::VectorXd sparse_spikes(int M, std::initializer_list<std::pair<int, double>> spikes) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(M);
  for (auto [i, a] : spikes) s[i] = a;
  return s;
}

}  // namespace

TEST_CASE("convolution matrix is the causal Toeplitz kernel") {
  const HrfModel m = HrfModel::one_parameter();
  const int M = 40;
  const double tr = 0.8;
  const Eigen::MatrixXd A = convolution_matrix(m, 1.4, M, tr);
  const HrfKernel h(m, std::vector<double>{1.4});
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) CHECK(A(r, c) == (r >= c ? h((r - c) * tr) : 0.0));
  // agrees with the forward model on grid-aligned spikes
  const SpikeTrain train{{4 * tr, 11 * tr}, {0.5, 1.5}};
  Eigen::VectorXd times(M);
  for (int i = 0; i < M; ++i) times[i] = i * tr;
  const Eigen::VectorXd y = forward_convolve(train, m, std::vector<double>{1.4}, times);
  CHECK((A * sparse_spikes(M, {{4, 0.5}, {11, 1.5}}) - y).norm() < 1e-12);
}

TEST_CASE("ADMM solves the nonnegative lasso") {
  Rng rng(1);
  std::normal_distribution<double> n;
  Eigen::MatrixXd A(30, 12);
  Eigen::VectorXd y(30);
  for (auto& v : A.reshaped()) v = n(rng);
  for (auto& v : y) v = n(rng);
  const double eta = 2.0;
  const AdmmResult r = nonneg_lasso_admm(A, y, eta, 1.0, 5000);
  CHECK((r.s.array() >= 0.0).all());
  CHECK(r.primal_residual < 1e-8);
  // KKT: gradient of the smooth part plus eta vanishes on the support and is
  // nonnegative off it.
  const Eigen::VectorXd g = 2.0 * A.transpose() * (A * r.s - y) + Eigen::VectorXd::Constant(12, eta);
  int support = 0;
  for (Eigen::Index i = 0; i < 12; ++i) {
    if (r.s[i] > 0.0) {
      ++support;
      CHECK(std::abs(g[i]) < 1e-6);
    } else {
      CHECK(g[i] > -1e-6);
    }
  }
  CHECK(support > 0);
  CHECK(support < 12);

  const Eigen::VectorXd yy = (Eigen::VectorXd(4) << 1.0, -2.0, 0.5, 3.0).finished();
  const AdmmResult id = nonneg_lasso_admm(Eigen::MatrixXd::Identity(4, 4), yy, 0.0, 1.0, 2000);
  CHECK((id.s - yy.cwiseMax(0.0)).norm() < 1e-8);
  CHECK_THROWS_AS(nonneg_lasso_admm(A, Eigen::VectorXd::Zero(5), eta), Error);
}

TEST_CASE("golden-section search") {
  int calls = 0;
  const double x = golden_section([&](double t) { ++calls; return (t - 0.3) * (t - 0.3); }, 0.0, 1.0, 1e-6);
  CHECK(std::abs(x - 0.3) < 1e-6);
  CHECK(calls < 50);
  CHECK(golden_section([](double) { return 4.0; }, 0.5, 2.5, 1e-3) == 1.5);
  CHECK(std::abs(golden_section([](double t) { return t; }, 0.5, 2.5, 1e-4) - 0.5) < 1e-12);
  CHECK(std::abs(golden_section([](double t) { return -t; }, 0.5, 2.5, 1e-4) - 2.5) < 1e-12);
}

TEST_CASE("JointMAP recovers the kernel from noiseless data") {
  // Three random spikes, default solver settings. Descent starts at the
  // interval midpoint and only travels upward, so theta* sits above it.
  const HrfModel m = HrfModel::one_parameter();
  const int M = 200;
  const double theta = 1.8;
  {
    Rng rng(1);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(M);
    for (int k = 0; k < 3; ++k) s[static_cast<int>(uniform01(rng) * (M - 40))] = 0.5 + uniform01(rng);
    const Eigen::VectorXd y = convolution_matrix(m, theta, M, 1.0) * s;
    JointMapOptions o;
    o.eta = 1e-3;
    const JointMapResult r = jointmap_estimate(y, m, 0.0, 1.0, o);
    CHECK(std::abs(r.theta - theta) < 0.1);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
  }
}

TEST_CASE("JointMAP profile objective is minimized at the true kernel") {
  const HrfModel m = HrfModel::one_parameter();
  const int M = 200;
  Eigen::VectorXd s = sparse_spikes(M, {{21, 0.64}, {56, 1.41}, {72, 0.52}});
  for (double theta : {0.8, 1.3, 2.0}) {
    const Eigen::VectorXd y = convolution_matrix(m, theta, M, 1.0) * s;
    double best = INFINITY, arg = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const double th = 0.5 + 0.1 * i;
      const Eigen::MatrixXd A = convolution_matrix(m, th, M, 1.0);
      const Eigen::VectorXd sh = nonneg_lasso_admm(A, y, 1e-3, 1.0, 3000).s;
      const double f = (y - A * sh).squaredNorm() + 1e-3 * sh.lpNorm<1>();
      if (f < best) best = f, arg = th;
    }
    CHECK(std::abs(arg - theta) < 0.11);
  }
}

TEST_CASE("JointMAP on zero data keeps the interval midpoint") {
  const HrfModel m = HrfModel::one_parameter();
  const JointMapResult r = jointmap_estimate(Eigen::VectorXd::Zero(80), m, 0.5, 1.0);
  CHECK(r.theta == 1.5);
  CHECK(r.s.norm() == 0.0);
  CHECK(r.objective == 0.0);
  CHECK(r.converged);
}

TEST_CASE("JointMAP objective is non-increasing on noisy data and rejects the two-parameter model") {
  const HrfModel m = HrfModel::one_parameter();
  SimulatorConfig cfg;
  cfg.M = 150;
  cfg.sigma2 = 0.2;
  Rng rng(3);
  const Eigen::VectorXd y = simulate_bold(cfg, m, std::vector<double>{1.1}, rng);
  const JointMapResult r = jointmap_estimate(y, m, std::sqrt(cfg.sigma2), cfg.t_r);
  REQUIRE(!r.objective_trace.empty());
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
  CHECK(r.theta >= 0.5);
  CHECK(r.theta <= 2.5);
  CHECK_THROWS_AS(jointmap_estimate(y, HrfModel::two_parameter(), 0.1, cfg.t_r), Error);

  BoldDataset d;
  d.t_r = cfg.t_r;
  d.Y = RowMatrix(2, cfg.M);
  d.Y.row(0) = y.transpose();
  d.Y.row(1).setZero();
  const ParamField f = jointmap_field(d, m, std::sqrt(cfg.sigma2));
  CHECK(f.coords == Coordinates::Constrained);
  CHECK(f.values(0, 0) == r.theta);
  CHECK(f.values(1, 0) == 1.5);
}

TEST_CASE("MPM is the inverse-transformed summary") {
  for (const HrfModel& m : {HrfModel::one_parameter(), HrfModel::two_parameter()}) {
    const int J = m.num_params();
    Rng rng(4);
    const SummaryModel s = SummaryModel::create(64, J, rng);
    BoldDataset d;
    d.t_r = 1.0;
    d.Y = RowMatrix(5, 64);
    std::normal_distribution<double> n;
    for (auto& v : d.Y.reshaped()) v = n(rng);
    const ParamField f = mpm_estimate(d, s, m);
    CHECK(f.coords == Coordinates::Constrained);
    for (Eigen::Index v = 0; v < 5; ++v) {
      const Eigen::VectorXd y = d.Y.row(v).transpose();
      const Eigen::VectorXd t = summary_forward(s, y);
      for (int j = 0; j < J; ++j) {
        CHECK(std::abs(f.values(v, j) - inverse_transform_component(m.bounds[static_cast<std::size_t>(j)], t[j])) < 1e-12);
        CHECK(f.values(v, j) > m.bounds[static_cast<std::size_t>(j)].lo);
        CHECK(f.values(v, j) < m.bounds[static_cast<std::size_t>(j)].hi);
      }
    }
    const SummaryModel wrong = SummaryModel::create(64, 3 - J, rng);
    CHECK_THROWS_AS(mpm_estimate(d, wrong, m), Error);
  }
}

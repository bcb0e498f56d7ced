#include "doctest.h"
#include "test_util.hpp"

#include "hemo/bootstrap.hpp"
#include "hemo/error.hpp"
#include "hemo/simulator.hpp"

#include <algorithm>
#include <cmath>

using namespace hemo;

namespace {

Eigen::VectorXd ramp(int M) { return Eigen::VectorXd::LinSpaced(M, 0.0, M - 1.0); }

// Unconstrained field = time mean of each row.
ParamField mean_field(const BoldDataset& d) {
  ParamField f;
  f.model = HrfModel::one_parameter();
  f.values = d.Y.rowwise().mean();
  return f;
}

BoldDataset white_noise(int V, int M, double mu, Rng& rng) {
  std::normal_distribution<double> n(mu, 1.0);
  BoldDataset d;
  d.t_r = 1.0;
  d.Y.resize(V, M);
  for (auto& v : d.Y.reshaped()) v = n(rng);
  return d;
}

}  // namespace

TEST_CASE("geometric block lengths have mean L") {
  for (double L : {1.0, 3.0, 8.0, 20.0}) {
    Rng rng(1);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const int len = draw_block_length(L, rng);
      CHECK(len >= 1);
      acc += len;
    }
    CHECK(test::rel_err(acc / n, L) < 0.02);
  }
  Rng rng(2);
  CHECK_THROWS_AS(draw_block_length(0.5, rng), Error);
}

TEST_CASE("block application") {
  const Eigen::VectorXd y = ramp(10);
  CHECK(apply_blocks(y, {{0, 10}}) == y);
  const Eigen::VectorXd shifted = apply_blocks(y, {{3, 10}});
  for (int i = 0; i < 10; ++i) CHECK(shifted[i] == (i + 3) % 10);
  const Eigen::VectorXd two = apply_blocks(y, {{8, 4}, {1, 6}});
  const std::vector<double> expected{8, 9, 0, 1, 1, 2, 3, 4, 5, 6};
  for (int i = 0; i < 10; ++i) CHECK(two[i] == expected[static_cast<std::size_t>(i)]);
  CHECK_THROWS_AS(apply_blocks(y, {{0, 4}}), Error);
}

TEST_CASE("stationary bootstrap: closure, coverage of M, determinism, long blocks") {
  const int M = 57;
  const Eigen::VectorXd y = ramp(M) * 1.5;
  Rng a(3), b(3);
  for (int t = 0; t < 200; ++t) {
    const Eigen::VectorXd r = stationary_bootstrap(y, 5.0, a);
    CHECK(r == stationary_bootstrap(y, 5.0, b));
    REQUIRE(r.size() == M);
    for (double v : r) CHECK(std::find(y.begin(), y.end(), v) != y.end());
    // consecutive entries inside a block are circular neighbours
  }
  Rng c(4);
  const auto blocks = draw_blocks(M, 5.0, c);
  int total = 0;
  for (const auto& blk : blocks) {
    CHECK(blk.start >= 0);
    CHECK(blk.start < M);
    total += blk.length;
  }
  CHECK(total == M);
  // a very long expected block almost surely gives one circular shift
  Rng d(5);
  const Eigen::VectorXd r = stationary_bootstrap(y, 1e9, d);
  const auto start = static_cast<int>(r[0] / 1.5);
  for (int i = 0; i < M; ++i) CHECK(r[i] == y[(start + i) % M]);
  CHECK(default_block_length(400) == 8);
  CHECK(default_block_length(1000) == 10);
  CHECK(default_block_length(1001) == 11);
}

TEST_CASE("dataset resampling shares the block structure across vertices") {
  BoldDataset d;
  d.t_r = 1.0;
  d.Y.resize(3, 40);
  d.Y.row(0) = ramp(40).transpose();
  d.Y.row(1) = 2.0 * ramp(40).transpose();
  d.Y.row(2) = -ramp(40).transpose();
  Rng rng(6);
  const BoldDataset r = resample_dataset(d, 4.0, rng);
  CHECK(r.Y.row(1) == 2.0 * r.Y.row(0));
  CHECK(r.Y.row(2) == -r.Y.row(0));
  CHECK(r.t_r == 1.0);
}

TEST_CASE("alpha calibration from standardized deviations") {
  CHECK(alpha_grid().size() == 500);
  CHECK(alpha_grid().front() == 0.001);
  CHECK(alpha_grid().back() == 0.5);
  CHECK(calibrated_alpha(std::vector<double>(20, 0.0), 0.05) == 0.5);
  // needed z = 1.959 -> alpha 0.05 is the largest level whose quantile covers it
  std::vector<double> dev(100, 0.1);
  for (int i = 90; i < 95; ++i) dev[static_cast<std::size_t>(i)] = 1.959;
  for (int i = 95; i < 100; ++i) dev[static_cast<std::size_t>(i)] = 50.0;
  CHECK(calibrated_alpha(dev, 0.05) == doctest::Approx(0.05));
  CHECK(calibrated_alpha(std::vector<double>(10, 1e6), 0.05) == 0.001);

  // monotone: a stricter target never yields a larger level
  Rng rng(7);
  std::exponential_distribution<double> e(0.8);
  std::vector<double> sample(300);
  for (auto& v : sample) v = e(rng);
  double prev = INFINITY;
  for (double target = 0.5; target <= 0.999; target += 0.01) {
    const double a = calibrated_alpha(sample, 1.0 - target);
    CHECK(a <= prev);
    prev = a;
  }
}

TEST_CASE("degenerate pipeline gives zero-width flagged intervals") {
  Rng data_rng(8);
  const BoldDataset d = white_noise(4, 50, 0.0, data_rng);
  const EstimationPipeline constant = [](const BoldDataset& x) {
    ParamField f;
    f.model = HrfModel::one_parameter();
    f.values = RowMatrix::Constant(x.Y.rows(), 1, 0.3);
    return f;
  };
  BootstrapOptions o;
  o.outer = 10;
  o.inner = 5;
  Rng rng(9);
  const IntervalField iv = double_bootstrap_intervals(d, constant, o, rng);
  CHECK(iv.degenerate);
  CHECK((iv.flagged.array() == 1).all());
  CHECK((iv.upper - iv.lower).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("double bootstrap: structure, determinism, seed streams") {
  Rng data_rng(10);
  const BoldDataset d = white_noise(6, 80, 0.2, data_rng);
  const EstimationPipeline pipe = mean_field;
  BootstrapOptions o;
  o.outer = 20;
  o.inner = 10;
  o.block_length = 1;
  Rng r1(11), r2(11);
  const IntervalField a = double_bootstrap_intervals(d, pipe, o, r1);
  const IntervalField b = double_bootstrap_intervals(d, pipe, o, r2);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  CHECK(!a.degenerate);
  REQUIRE(a.alpha_hat.size() == 1);
  const ParamField hat = mean_field(d);
  const RowMatrix est = hat.to_constrained().values;
  for (Eigen::Index v = 0; v < 6; ++v) {
    CHECK(a.lower(v, 0) <= est(v, 0));
    CHECK(a.upper(v, 0) >= est(v, 0));
    CHECK(a.lower(v, 0) >= 0.5);
    CHECK(a.upper(v, 0) <= 2.5);
    CHECK(a.lower_unconstrained(v, 0) < hat.values(v, 0));
  }

  BootstrapOptions swapped = o;
  swapped.outer = 10;
  swapped.inner = 20;
  Rng r3(11);
  const IntervalField c = double_bootstrap_intervals(d, pipe, swapped, r3);
  CHECK(c.upper != a.upper);

  BootstrapOptions small = o;
  small.outer = 9;
  Rng r4(11);
  CHECK_THROWS_AS(double_bootstrap_intervals(d, pipe, small, r4), Error);
}

TEST_CASE("double bootstrap covers the mean of white noise at the nominal rate") {
  BootstrapOptions o;
  o.outer = 50;
  o.inner = 20;
  o.block_length = 1;
  const double mu = 0.3;
  int covered = 0, total = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    Rng data_rng(derive_seed(12, 1, rep));
    const BoldDataset d = white_noise(4, 100, mu, data_rng);
    Rng rng(derive_seed(12, 2, rep));
    const IntervalField iv = double_bootstrap_intervals(d, mean_field, o, rng);
    for (Eigen::Index v = 0; v < 4; ++v) {
      covered += iv.lower_unconstrained(v, 0) <= mu && mu <= iv.upper_unconstrained(v, 0);
      ++total;
    }
  }
  const double coverage = static_cast<double>(covered) / total;
  CHECK(coverage >= 0.90);
  CHECK(coverage <= 0.99);
}

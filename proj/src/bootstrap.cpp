#include "hemo/bootstrap.hpp"

#include "hemo/error.hpp"
#include "hemo/parallel.hpp"
#include "hemo/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hemo {

namespace {
constexpr std::uint64_t kOuterStream = 0xb001;
constexpr std::uint64_t kInnerStream = 0xb002;

// Shifted by the first value so identical inputs give exactly zero.
double sample_sd(const std::vector<double>& x) {
  const auto n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v - x.front();
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - x.front() - mean) * (v - x.front() - mean);
  return std::sqrt(ss / (n - 1.0));
}
}  // namespace

int draw_block_length(double expected_length, Rng& rng) {
  if (!(expected_length >= 1.0)) throw Error(ErrorKind::InvalidArgument, "expected block length must be >= 1");
  if (expected_length == 1.0) return 1;
  const double p = 1.0 / expected_length;
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  const double len = 1.0 + std::floor(std::log(u) / std::log1p(-p));
  return static_cast<int>(std::min(len, static_cast<double>(std::numeric_limits<int>::max())));
}

std::vector<Block> draw_blocks(int M, double expected_length, Rng& rng) {
  std::vector<Block> blocks;
  int covered = 0;
  while (covered < M) {
    const int start = std::min(static_cast<int>(uniform01(rng) * M), M - 1);
    const int len = std::min(draw_block_length(expected_length, rng), M - covered);
    blocks.push_back({start, len});
    covered += len;
  }
  return blocks;
}

Eigen::VectorXd apply_blocks(const Eigen::VectorXd& y, const std::vector<Block>& blocks) {
  const auto M = static_cast<int>(y.size());
  Eigen::VectorXd out(M);
  int pos = 0;
  for (const auto& b : blocks)
    for (int k = 0; k < b.length && pos < M; ++k) out[pos++] = y[(b.start + k) % M];
  if (pos < M) throw Error(ErrorKind::InvalidArgument, "blocks do not cover the series");
  return out;
}

Eigen::VectorXd stationary_bootstrap(const Eigen::VectorXd& y, double expected_length, Rng& rng) {
  return apply_blocks(y, draw_blocks(static_cast<int>(y.size()), expected_length, rng));
}

BoldDataset resample_dataset(const BoldDataset& data, double expected_length, Rng& rng) {
  const int M = data.num_timepoints();
  const auto blocks = draw_blocks(M, expected_length, rng);
  BoldDataset out;
  out.t_r = data.t_r;
  out.Y.resize(data.Y.rows(), M);
  int pos = 0;
  for (const auto& b : blocks)
    for (int k = 0; k < b.length && pos < M; ++k, ++pos) out.Y.col(pos) = data.Y.col((b.start + k) % M);
  return out;
}

int default_block_length(int M) { return static_cast<int>(std::ceil(std::cbrt(static_cast<double>(M)) - 1e-12)); }

std::vector<double> alpha_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 500; ++i) g.push_back(i / 1000.0);
  return g;
}

double calibrated_alpha(std::vector<double> dev, double alpha0) {
  if (dev.empty()) throw Error(ErrorKind::InvalidArgument, "no bootstrap deviations");
  std::sort(dev.begin(), dev.end());
  // Coverage at alpha is the fraction of deviations <= z_{1-alpha/2}; it
  // reaches 1 - alpha0 once z covers the k-th smallest deviation.
  const auto n = static_cast<double>(dev.size());
  const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil((1.0 - alpha0) * n - 1e-9)));
  const double needed = dev[std::min(k, dev.size()) - 1];
  double best = 0.001;
  for (double a : alpha_grid())
    if (normal_quantile(1.0 - a / 2.0) >= needed) best = a;
  return best;
}

IntervalField double_bootstrap_intervals(const BoldDataset& data, const EstimationPipeline& pipeline,
                                         const BootstrapOptions& options, Rng& rng) {
  data.validate();
  if (options.outer < 10 || options.inner < 5)
    throw Error(ErrorKind::InvalidArgument, "double bootstrap needs B >= 10 and R >= 5 (got B=" +
                                                std::to_string(options.outer) + ", R=" + std::to_string(options.inner) + ")");
  if (!(options.alpha0 > 0.0 && options.alpha0 < 1.0) || !(options.xi > 0.0 && options.xi < 1.0))
    throw Error(ErrorKind::InvalidArgument, "alpha0 and xi must lie in (0, 1)");
  const double L = options.block_length > 0 ? options.block_length : default_block_length(data.num_timepoints());
  const std::uint64_t master = rng();

  const ParamField hat = pipeline(data).to_unconstrained();
  const auto V = hat.values.rows();
  const auto J = hat.values.cols();
  const auto B = static_cast<std::size_t>(options.outer);
  const auto R = static_cast<std::size_t>(options.inner);

  std::vector<RowMatrix> outer(B), inner_sd(B);
  parallel_for(B, [&](std::size_t b) {
    Rng orng(derive_seed(master, kOuterStream, b));
    const BoldDataset yb = resample_dataset(data, L, orng);
    outer[b] = pipeline(yb).to_unconstrained().values;
    std::vector<RowMatrix> in(R);
    for (std::size_t r = 0; r < R; ++r) {
      Rng irng(derive_seed(derive_seed(master, kInnerStream, b), r));
      in[r] = pipeline(resample_dataset(yb, L, irng)).to_unconstrained().values;
    }
    inner_sd[b].resize(V, J);
    std::vector<double> col(R);
    for (Eigen::Index v = 0; v < V; ++v)
      for (Eigen::Index j = 0; j < J; ++j) {
        for (std::size_t r = 0; r < R; ++r) col[r] = in[r](v, j);
        inner_sd[b](v, j) = sample_sd(col);
      }
  });
  for (const auto& o : outer)
    if (o.rows() != V || o.cols() != J)
      throw Error(ErrorKind::DimensionMismatch, "pipeline returned fields of varying shape");

  IntervalField res;
  res.alpha0 = options.alpha0;
  res.outer_sd.resize(V, J);
  res.vertex_alpha.resize(V, J);
  res.flagged.setZero(V, J);
  std::vector<double> col(B), dev(B);
  for (Eigen::Index v = 0; v < V; ++v)
    for (Eigen::Index j = 0; j < J; ++j) {
      const double center = hat.values(v, j);
      for (std::size_t b = 0; b < B; ++b) {
        col[b] = outer[b](v, j);
        const double d = std::abs(col[b] - center);
        const double s = inner_sd[b](v, j);
        dev[b] = d == 0.0 ? 0.0 : (s > 0.0 ? d / s : std::numeric_limits<double>::infinity());
      }
      res.outer_sd(v, j) = sample_sd(col);
      res.vertex_alpha(v, j) = calibrated_alpha(dev, options.alpha0);
      if (!(res.outer_sd(v, j) > 0.0)) {
        res.flagged(v, j) = 1;
        res.degenerate = true;
      }
    }

  // xi-quantile over vertices (inverse empirical CDF).
  for (Eigen::Index j = 0; j < J; ++j) {
    std::vector<double> a(static_cast<std::size_t>(V));
    for (Eigen::Index v = 0; v < V; ++v) a[static_cast<std::size_t>(v)] = res.vertex_alpha(v, j);
    std::sort(a.begin(), a.end());
    const auto idx = static_cast<std::size_t>(std::max(0.0, std::ceil(options.xi * static_cast<double>(V) - 1e-9) - 1.0));
    res.alpha_hat.push_back(a[std::min(idx, a.size() - 1)]);
  }

  res.lower_unconstrained.resize(V, J);
  res.upper_unconstrained.resize(V, J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double z = normal_quantile(1.0 - res.alpha_hat[static_cast<std::size_t>(j)] / 2.0);
    for (Eigen::Index v = 0; v < V; ++v) {
      const double half = z * res.outer_sd(v, j);
      res.lower_unconstrained(v, j) = hat.values(v, j) - half;
      res.upper_unconstrained(v, j) = hat.values(v, j) + half;
    }
  }
  auto to_constrained = [&](const RowMatrix& m) {
    ParamField f = hat;
    f.values = m;
    return f.to_constrained().values;
  };
  res.estimate = hat.to_constrained().values;
  res.lower = to_constrained(res.lower_unconstrained);
  res.upper = to_constrained(res.upper_unconstrained);
  return res;
}

}  // namespace hemo

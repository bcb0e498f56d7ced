#include "hemo/downstream.hpp"

#include "hemo/error.hpp"
#include "hemo/parallel.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <boost/math/distributions/fisher_f.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>

namespace hemo {

Eigen::VectorXd wiener_deconvolve(const Eigen::VectorXd& y, const HrfModel& model, std::span<const double> theta,
                                  double sigma2, double signal_power, double t_r) {
  const HrfKernel h(model, theta);
  if (!(sigma2 >= 0.0) || !(signal_power > 0.0))
    throw Error(ErrorKind::InvalidArgument, "need sigma2 >= 0 and signal_power > 0");
  if (!(t_r > 0.0)) throw Error(ErrorKind::InvalidArgument, "t_r must be positive");
  const auto M = static_cast<std::size_t>(y.size());
  if (M < 2) throw Error(ErrorKind::InvalidArgument, "series too short");
  std::vector<double> k(M), yy(y.data(), y.data() + M);
  double kmax = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    k[m] = h(static_cast<double>(m) * t_r);
    kmax = std::max(kmax, std::abs(k[m]));
  }
  if (kmax < 1e-14) throw Error(ErrorKind::ZeroKernel, "kernel samples vanish on the acquisition grid");
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> H, Y;
  fft.fwd(H, k);
  fft.fwd(Y, yy);
  const double reg = sigma2 / signal_power;
  for (std::size_t i = 0; i < M; ++i) {
    const double den = std::norm(H[i]) + reg;
    // With sigma2 = 0 a frequency the kernel does not pass carries no information.
    Y[i] = den > 0.0 ? std::conj(H[i]) * Y[i] / den : std::complex<double>(0.0);
  }
  std::vector<double> s;
  fft.inv(s, Y);
  return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(M));
}

double default_signal_power(const Eigen::VectorXd& y, double sigma2) {
  const double power = y.squaredNorm() / static_cast<double>(y.size());
  return std::max(power - sigma2, 1e-3 * std::max(power, 1e-300));
}

GrangerTest granger_f(const Eigen::VectorXd& source, const Eigen::VectorXd& target, int lag) {
  const auto M = static_cast<int>(target.size());
  if (source.size() != target.size()) throw Error(ErrorKind::DimensionMismatch, "series lengths differ");
  if (lag < 1) throw Error(ErrorKind::InvalidArgument, "lag must be >= 1");
  if (M <= 3 * lag + 2)
    throw Error(ErrorKind::InvalidArgument, "series of length " + std::to_string(M) + " too short for lag " + std::to_string(lag));
  auto constant = [](const Eigen::VectorXd& x) { return x.maxCoeff() == x.minCoeff(); };
  if (constant(source) || constant(target)) throw Error(ErrorKind::SingularDesign, "constant series");

  const int n = M - lag;
  Eigen::MatrixXd X(n, 1 + 2 * lag);
  const Eigen::VectorXd yv = target.tail(n);
  X.col(0).setOnes();
  for (int l = 1; l <= lag; ++l) {
    X.col(l) = target.segment(lag - l, n);
    X.col(lag + l) = source.segment(lag - l, n);
  }
  auto rss = [&](int cols) {
    const auto Xs = X.leftCols(cols);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) throw Error(ErrorKind::SingularDesign, "collinear regressors");
    return (yv - Xs * qr.solve(yv)).squaredNorm();
  };
  const double rss_r = rss(1 + lag);
  const double rss_u = rss(1 + 2 * lag);
  if (!(rss_u > 0.0)) throw Error(ErrorKind::SingularDesign, "unrestricted model fits exactly");
  const double df2 = M - 3 * lag - 1;
  const double F = std::max(0.0, ((rss_r - rss_u) / lag) / (rss_u / df2));
  const boost::math::fisher_f_distribution<double> dist(lag, df2);
  const double p = std::clamp(boost::math::cdf(boost::math::complement(dist, F)), 0.0, 1.0);
  return {F, p};
}

std::vector<bool> bh_fdr(std::span<const double> pvalues, double q) {
  const std::size_t m = pvalues.size();
  for (double p : pvalues)
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "p-value outside [0, 1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pvalues[a] < pvalues[b]; });
  std::size_t k_star = 0;
  for (std::size_t k = 1; k <= m; ++k)
    if (pvalues[order[k - 1]] <= static_cast<double>(k) * q / static_cast<double>(m)) k_star = k;
  std::vector<bool> reject(m, false);
  if (k_star == 0) return reject;
  const double cutoff = pvalues[order[k_star - 1]];
  for (std::size_t i = 0; i < m; ++i) reject[i] = pvalues[i] <= cutoff;
  return reject;
}

GcResult seed_connectivity(const BoldDataset& data, const std::vector<int>& roi, int lag, double q) {
  data.validate();
  const auto V = static_cast<int>(data.Y.rows());
  std::vector<bool> in_roi(static_cast<std::size_t>(V), false);
  for (int v : roi) {
    if (v < 0 || v >= V) throw Error(ErrorKind::OutOfBounds, "ROI vertex " + std::to_string(v) + " out of range");
    in_roi[static_cast<std::size_t>(v)] = true;
  }
  GcResult res;
  for (int v = 0; v < V; ++v)
    if (in_roi[static_cast<std::size_t>(v)]) res.roi.push_back(v);
    else res.vertices.push_back(v);
  if (res.roi.empty() || res.vertices.empty())
    throw Error(ErrorKind::InvalidArgument, "ROI must be a nonempty proper subset of the vertices");
  res.lag = lag;

  Eigen::VectorXd seed = Eigen::VectorXd::Zero(data.num_timepoints());
  for (int v : res.roi) seed += data.Y.row(v).transpose();
  seed /= static_cast<double>(res.roi.size());

  const std::size_t n = res.vertices.size();
  res.F.assign(n, std::numeric_limits<double>::quiet_NaN());
  res.pvalue = res.F;
  std::vector<std::uint8_t> singular(n, 0);
  parallel_for(n, [&](std::size_t i) {
    try {
      const GrangerTest t = granger_f(data.Y.row(res.vertices[i]).transpose(), seed, lag);
      res.F[i] = t.F;
      res.pvalue[i] = t.pvalue;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularDesign) throw;
      singular[i] = 1;
    }
  });
  res.singular.assign(singular.begin(), singular.end());
  std::vector<double> p;
  for (std::size_t i = 0; i < n; ++i)
    if (!res.singular[i]) p.push_back(res.pvalue[i]);
  const auto rej = bh_fdr(p, q);
  res.significant.assign(n, false);
  for (std::size_t i = 0, k = 0; i < n; ++i)
    if (!res.singular[i]) res.significant[i] = rej[k++];
  return res;
}

Eigen::VectorXd KlDecomposition::pointwise_variance() const {
  Eigen::VectorXd var = Eigen::VectorXd::Zero(mean.size());
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k)
    var += eigenvalues[k] * eigenfunctions.row(k).transpose().cwiseAbs2();
  return var;
}

Eigen::MatrixXd KlDecomposition::reconstruct() const {
  Eigen::MatrixXd out = scores * eigenfunctions;
  out.rowwise() += mean.transpose();
  return out;
}

KlDecomposition kl_decompose(const Eigen::MatrixXd& fields, int K) {
  const Eigen::Index N = fields.rows();
  if (N < 2) throw Error(ErrorKind::DimensionMismatch, "need at least two fields");
  if (K < 1 || K > N - 1)
    throw Error(ErrorKind::DimensionMismatch, "K=" + std::to_string(K) + " must lie in [1, N-1] with N=" + std::to_string(N));
  if (K > fields.cols()) throw Error(ErrorKind::DimensionMismatch, "K exceeds the number of vertices");
  KlDecomposition kl;
  kl.mean = fields.colwise().mean().transpose();
  const Eigen::MatrixXd centered = fields.rowwise() - kl.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  Eigen::MatrixXd phi = svd.matrixV().leftCols(K).transpose();
  // Sign convention: largest-magnitude entry of each eigenfunction positive.
  for (Eigen::Index k = 0; k < K; ++k) {
    Eigen::Index arg = 0;
    phi.row(k).cwiseAbs().maxCoeff(&arg);
    if (phi(k, arg) < 0.0) phi.row(k) *= -1.0;
  }
  kl.eigenfunctions = phi;
  kl.eigenvalues = svd.singularValues().head(K).cwiseAbs2() / static_cast<double>(N - 1);
  kl.scores = centered * phi.transpose();
  return kl;
}

}  // namespace hemo

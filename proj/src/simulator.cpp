#include "hemo/error.hpp"
#include "hemo/simulator.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <numeric>
#include <string>

namespace hemo {

void SimulatorConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "simulator config: " + what); };
  if (!(lambda_min > 0.0 && lambda_min <= lambda_max)) fail("need 0 < lambda_min <= lambda_max");
  if (!(a_min <= a_max)) fail("need a_min <= a_max");
  if (!(sigma2 >= 0.0)) fail("need sigma2 >= 0");
  if (!(t_r > 0.0)) fail("need t_r > 0");
  if (M < 2) fail("need M >= 2");
}

Eigen::VectorXd SimulatorConfig::acquisition_times() const {
  return Eigen::VectorXd::LinSpaced(M, 0.0, duration());
}

NeuralDraw simulate_neural(const SimulatorConfig& config, Rng& rng) {
  config.validate();
  NeuralDraw draw;
  draw.rate = config.lambda_min + (config.lambda_max - config.lambda_min) * uniform01(rng);
  const double T = config.duration();
  std::poisson_distribution<long> count_dist(draw.rate * T);
  const long n = count_dist(rng);
  auto& train = draw.train;
  train.times.resize(static_cast<std::size_t>(n));
  train.amplitudes.resize(static_cast<std::size_t>(n));
  for (auto& t : train.times) t = T * uniform01(rng);
  std::sort(train.times.begin(), train.times.end());
  for (auto& a : train.amplitudes) a = config.a_min + (config.a_max - config.a_min) * uniform01(rng);
  return draw;
}

Eigen::VectorXd forward_convolve(const SpikeTrain& train, const HrfModel& model,
                                 std::span<const double> theta, const Eigen::VectorXd& times) {
  const HrfKernel h(model, theta);
  if (train.times.size() != train.amplitudes.size())
    throw Error(ErrorKind::DimensionMismatch, "spike times and amplitudes differ in length");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(times.size());
  if (times.size() == 0) return y;
  const double t_end = times[times.size() - 1];
  for (std::size_t i = 0; i < train.times.size(); ++i) {
    const double ti = train.times[i];
    if (ti < times[0] || ti > t_end)
      throw Error(ErrorKind::OutOfBounds, "spike at t=" + std::to_string(ti) + " outside acquisition window");
    const double ai = train.amplitudes[i];
    // first grid point at or after the spike
    const auto first = std::lower_bound(times.data(), times.data() + times.size(), ti) - times.data();
    for (Eigen::Index m = first; m < times.size(); ++m) y[m] += ai * h(times[m] - ti);
  }
  return y;
}

Eigen::VectorXd simulate_bold(const SimulatorConfig& config, const HrfModel& model,
                              std::span<const double> theta, Rng& rng) {
  model.check_bounds(theta);
  const NeuralDraw neural = simulate_neural(config, rng);
  Eigen::VectorXd y = forward_convolve(neural.train, model, theta, config.acquisition_times());
  if (config.sigma2 > 0.0) {
    std::normal_distribution<double> noise(0.0, std::sqrt(config.sigma2));
    for (auto& v : y) v += noise(rng);
  }
  return y;
}

Eigen::VectorXd sample_uniform_theta(const HrfModel& model, Rng& rng) {
  Eigen::VectorXd theta(model.num_params());
  for (int j = 0; j < model.num_params(); ++j) {
    const auto& b = model.bounds[static_cast<std::size_t>(j)];
    theta[j] = b.lo + b.range() * uniform01(rng);
  }
  return theta;
}

Eigen::VectorXd periodogram(std::span<const double> y) {
  const auto M = static_cast<Eigen::Index>(y.size());
  if (M < 2) throw Error(ErrorKind::InvalidArgument, "periodogram needs at least 2 samples");
  std::vector<double> in(y.begin(), y.end());
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  fft.fwd(spec, in);
  const Eigen::Index half = M / 2;
  Eigen::VectorXd p(half + 1);
  for (Eigen::Index k = 0; k <= half; ++k) {
    double v = std::norm(spec[static_cast<std::size_t>(k)]) / static_cast<double>(M);
    const bool self_conjugate = (k == 0) || (M % 2 == 0 && k == half);
    p[k] = self_conjugate ? v : 2.0 * v;
  }
  return p;
}

Eigen::VectorXd periodogram_frequencies(int M, double t_r) {
  Eigen::VectorXd f(M / 2 + 1);
  for (int k = 0; k <= M / 2; ++k) f[k] = k / (M * t_r);
  return f;
}

}  // namespace hemo

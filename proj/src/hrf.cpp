#include "hemo/error.hpp"
#include "hemo/simulator.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hemo {

namespace {

double power(double t, double p) {
  const double ip = std::round(p);
  if (ip == p && ip >= 0.0 && ip <= 64.0) {
    // exponentiation by squaring keeps integer powers exact and cheap
    double result = 1.0, base = t;
    for (auto n = static_cast<unsigned>(ip); n != 0; n >>= 1) {
      if (n & 1u) result *= base;
      base *= base;
    }
    return result;
  }
  return std::pow(t, p);
}

}  // namespace

HrfModel HrfModel::one_parameter() {
  HrfModel m;
  m.variant = HrfVariant::OneParameter;
  m.bounds = {{0.5, 2.5}};
  return m;
}

HrfModel HrfModel::two_parameter() {
  HrfModel m;
  m.variant = HrfVariant::TwoParameter;
  m.bounds = {{0.2, 2.0}, {-1.0, 1.0}};
  return m;
}

void HrfModel::check_bounds(std::span<const double> theta) const {
  if (static_cast<int>(theta.size()) != num_params())
    throw Error(ErrorKind::DimensionMismatch, "theta has " + std::to_string(theta.size()) +
                                                  " entries, model expects " + std::to_string(num_params()));
  for (std::size_t j = 0; j < theta.size(); ++j)
    if (!(theta[j] >= bounds[j].lo && theta[j] <= bounds[j].hi))
      throw Error(ErrorKind::OutOfBounds, "theta[" + std::to_string(j) + "]=" + std::to_string(theta[j]) +
                                              " outside [" + std::to_string(bounds[j].lo) + ", " +
                                              std::to_string(bounds[j].hi) + "]");
}

// Each kernel is a sum of two terms exp(-r t) (A t^p + B t^(p-1)).
HrfKernel::HrfKernel(const HrfModel& model, std::span<const double> theta) : variant_(model.variant) {
  model.check_bounds(theta);
  if (variant_ == HrfVariant::OneParameter) {
    const double th = theta[0];
    rate1_ = rate2_ = th;
    shape1_ = static_cast<int>(model.a1);
    shape2_ = static_cast<int>(model.a2);
    coef1_ = std::pow(th, model.a1 + 1.0) / std::tgamma(model.a1 + 1.0);
    coef2_ = -model.c * std::pow(th, model.a2 + 1.0) / std::tgamma(model.a2 + 1.0);
    dcoef1_ = dcoef2_ = 0.0;
  } else {
    const double k1 = std::pow(model.b1, model.a1) / std::tgamma(model.a1);
    const double k2 = -model.c * std::pow(model.b2, model.a2) / std::tgamma(model.a2);
    rate1_ = model.b1;
    rate2_ = model.b2;
    shape1_ = static_cast<int>(model.a1 - 1.0);
    shape2_ = static_cast<int>(model.a2 - 1.0);
    w_base_ = theta[0];
    w_deriv_ = theta[1];
    // theta1 h + theta2 h', with d/dt [t^p e^{-rt}] = (p t^{p-1} - r t^p) e^{-rt}
    coef1_ = k1 * (w_base_ - w_deriv_ * rate1_);
    coef2_ = k2 * (w_base_ - w_deriv_ * rate2_);
    dcoef1_ = k1 * w_deriv_ * shape1_;
    dcoef2_ = k2 * w_deriv_ * shape2_;
  }
}

double HrfKernel::operator()(double t) const {
  if (t <= 0.0) return 0.0;
  if (rate1_ == rate2_) {
    const double e = std::exp(-rate1_ * t);
    double s = coef1_ * power(t, shape1_) + coef2_ * power(t, shape2_);
    if (dcoef1_ != 0.0 || dcoef2_ != 0.0)
      s += dcoef1_ * power(t, shape1_ - 1) + dcoef2_ * power(t, shape2_ - 1);
    return e * s;
  }
  double s1 = coef1_ * power(t, shape1_) + dcoef1_ * power(t, shape1_ - 1);
  double s2 = coef2_ * power(t, shape2_) + dcoef2_ * power(t, shape2_ - 1);
  return std::exp(-rate1_ * t) * s1 + std::exp(-rate2_ * t) * s2;
}

double hrf_kernel(const HrfModel& model, std::span<const double> theta, double t) {
  if (t < 0.0) throw Error(ErrorKind::InvalidArgument, "kernel evaluated at negative time");
  return HrfKernel(model, theta)(t);
}

// ------------------------------------------------------------ probit link

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double transform_component(const ParamBounds& b, double theta) {
  const double eps = 1e-6 * b.range();
  const double clamped = std::clamp(theta, b.lo + eps, b.hi - eps);
  return normal_quantile((clamped - b.lo) / b.range());
}

double inverse_transform_component(const ParamBounds& b, double theta_tilde) {
  return b.lo + b.range() * normal_cdf(theta_tilde);
}

Eigen::VectorXd transform(const HrfModel& model, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != model.num_params())
    throw Error(ErrorKind::DimensionMismatch, "transform: wrong parameter count");
  Eigen::VectorXd out(model.num_params());
  for (int j = 0; j < model.num_params(); ++j)
    out[j] = transform_component(model.bounds[static_cast<std::size_t>(j)], theta[static_cast<std::size_t>(j)]);
  return out;
}

Eigen::VectorXd inverse_transform(const HrfModel& model, std::span<const double> theta_tilde) {
  if (static_cast<int>(theta_tilde.size()) != model.num_params())
    throw Error(ErrorKind::DimensionMismatch, "inverse_transform: wrong parameter count");
  Eigen::VectorXd out(model.num_params());
  for (int j = 0; j < model.num_params(); ++j)
    out[j] = inverse_transform_component(model.bounds[static_cast<std::size_t>(j)],
                                         theta_tilde[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace hemo

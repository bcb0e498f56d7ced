#include "hemo/spline.hpp"

#include "hemo/dual.hpp"
#include "hemo/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace hemo {

namespace {

using std::exp;
using std::log;
using std::log1p;
using std::sqrt;

template <typename T>
T softplus(const T& x) {
  if (value_of(x) > 0.0) return x + log1p(exp(-x));
  return log1p(exp(x));
}

template <typename T>
struct Knots {
  std::vector<T> xk, yk, d;  // K + 1 knot positions and derivatives
};

// Rational-quadratic segment for x strictly inside [-B, B].
template <typename T>
std::pair<T, T> segment_forward(const Knots<T>& k, const T& x) {
  const int K = static_cast<int>(k.xk.size()) - 1;
  int b = 0;
  while (b + 1 < K && !(value_of(x) < value_of(k.xk[static_cast<std::size_t>(b + 1)]))) ++b;
  const auto i = static_cast<std::size_t>(b);
  const T w = k.xk[i + 1] - k.xk[i];
  const T h = k.yk[i + 1] - k.yk[i];
  const T s = h / w;
  const T xi = (x - k.xk[i]) / w;
  const T one_minus = 1.0 - xi;
  const T xi1 = xi * one_minus;
  const T denom = s + (k.d[i + 1] + k.d[i] - 2.0 * s) * xi1;
  const T y = k.yk[i] + h * (s * xi * xi + k.d[i] * xi1) / denom;
  const T dnum = s * s * (k.d[i + 1] * xi * xi + 2.0 * s * xi1 + k.d[i] * one_minus * one_minus);
  const T logdet = log(dnum) - 2.0 * log(denom);
  return {y, logdet};
}

template <typename T>
Knots<T> build_from_raw(const T* raw, int K, double B) {
  Knots<T> k;
  auto normalized = [&](const T* logits, double min_frac) {
    double mx = value_of(logits[0]);
    for (int i = 1; i < K; ++i) mx = std::max(mx, value_of(logits[i]));
    std::vector<T> e(static_cast<std::size_t>(K));
    T sum(0.0);
    for (int i = 0; i < K; ++i) {
      e[static_cast<std::size_t>(i)] = exp(logits[i] - mx);
      sum += e[static_cast<std::size_t>(i)];
    }
    std::vector<T> knots(static_cast<std::size_t>(K + 1));
    knots[0] = T(-B);
    T acc(0.0);
    for (int i = 0; i < K; ++i) {
      acc += (min_frac + (1.0 - K * min_frac) * (e[static_cast<std::size_t>(i)] / sum)) * (2.0 * B);
      knots[static_cast<std::size_t>(i + 1)] = acc - B;
    }
    knots[static_cast<std::size_t>(K)] = T(B);
    return knots;
  };
  k.xk = normalized(raw, kMinBinWidth);
  k.yk = normalized(raw + K, kMinBinHeight);
  const double shift = std::log(std::expm1(1.0 - kMinDerivative));
  k.d.assign(static_cast<std::size_t>(K + 1), T(1.0));
  for (int i = 0; i < K - 1; ++i)
    k.d[static_cast<std::size_t>(i + 1)] = kMinDerivative + softplus(raw[2 * K + i] + shift);
  return k;
}

template <int K>
SplineJacobian jacobian_fixed(std::span<const double> raw, double B, double x) {
  constexpr int P = 3 * K - 1;
  using D = Dual<P + 1>;
  SplineJacobian out;
  out.dy_draw = Eigen::VectorXd::Zero(P);
  out.dlogdet_draw = Eigen::VectorXd::Zero(P);
  if (x <= -B || x >= B) {
    out.y = x;
    return out;
  }
  std::array<D, P> r;
  for (int i = 0; i < P; ++i) r[static_cast<std::size_t>(i)] = D::variable(raw[static_cast<std::size_t>(i)], i);
  const D xd = D::variable(x, P);
  const auto [y, ld] = segment_forward(build_from_raw(r.data(), K, B), xd);
  out.y = y.v;
  out.logdet = ld.v;
  for (int i = 0; i < P; ++i) {
    out.dy_draw[i] = y.d[static_cast<std::size_t>(i)];
    out.dlogdet_draw[i] = ld.d[static_cast<std::size_t>(i)];
  }
  out.dy_dx = y.d[P];
  out.dlogdet_dx = ld.d[P];
  return out;
}

Knots<double> check_knots(const SplineKnots& s) {
  const int K = s.num_bins();
  const double B = s.tail_bound;
  if (K < 1 || s.heights.size() != s.widths.size() || s.derivatives.size() != s.widths.size() + 1)
    throw Error(ErrorKind::DimensionMismatch, "spline needs K widths, K heights and K+1 derivatives");
  if (!(B > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "spline tail bound must be positive");
  for (std::size_t i = 0; i < s.widths.size(); ++i)
    if (!(s.widths[i] > 0.0) || !(s.heights[i] > 0.0))
      throw Error(ErrorKind::NonPositiveParameter, "spline bin " + std::to_string(i) + " has non-positive size");
  for (std::size_t i = 0; i < s.derivatives.size(); ++i)
    if (!(s.derivatives[i] > 0.0))
      throw Error(ErrorKind::NonPositiveParameter, "spline derivative " + std::to_string(i) + " is not positive");
  Knots<double> k;
  k.xk.resize(static_cast<std::size_t>(K + 1));
  k.yk.resize(static_cast<std::size_t>(K + 1));
  k.xk[0] = k.yk[0] = -B;
  for (std::size_t i = 0; i < s.widths.size(); ++i) {
    k.xk[i + 1] = k.xk[i] + s.widths[i];
    k.yk[i + 1] = k.yk[i] + s.heights[i];
  }
  const double tol = 1e-9 * B;
  if (std::abs(k.xk.back() - B) > tol || std::abs(k.yk.back() - B) > tol)
    throw Error(ErrorKind::InvalidArgument, "spline widths and heights must each sum to 2B");
  if (std::abs(s.derivatives.front() - 1.0) > 1e-12 || std::abs(s.derivatives.back() - 1.0) > 1e-12)
    throw Error(ErrorKind::InvalidArgument, "spline boundary derivatives must equal 1");
  k.xk.back() = k.yk.back() = B;
  k.d = s.derivatives;
  return k;
}

}  // namespace

SplineKnots SplineKnots::identity(int num_bins, double tail_bound) {
  SplineKnots s;
  s.tail_bound = tail_bound;
  s.widths.assign(static_cast<std::size_t>(num_bins), 2.0 * tail_bound / num_bins);
  s.heights = s.widths;
  s.derivatives.assign(static_cast<std::size_t>(num_bins + 1), 1.0);
  return s;
}

SplineValue rq_spline(const SplineKnots& knots, double x) {
  const Knots<double> k = check_knots(knots);
  if (x <= -knots.tail_bound || x >= knots.tail_bound) return {x, 0.0};
  const auto [y, ld] = segment_forward(k, x);
  return {y, ld};
}

double rq_spline_inverse(const SplineKnots& knots, double y) {
  const Knots<double> k = check_knots(knots);
  const double B = knots.tail_bound;
  if (y <= -B || y >= B) return y;
  const int K = knots.num_bins();
  int b = 0;
  while (b + 1 < K && !(y < k.yk[static_cast<std::size_t>(b + 1)])) ++b;
  const auto i = static_cast<std::size_t>(b);
  const double w = k.xk[i + 1] - k.xk[i];
  const double h = k.yk[i + 1] - k.yk[i];
  const double s = h / w;
  const double dy = y - k.yk[i];
  const double sum_d = k.d[i + 1] + k.d[i] - 2.0 * s;
  const double qa = h * (s - k.d[i]) + dy * sum_d;
  const double qb = h * k.d[i] - dy * sum_d;
  const double qc = -s * dy;
  const double disc = std::max(qb * qb - 4.0 * qa * qc, 0.0);
  const double xi = (2.0 * qc) / (-qb - std::sqrt(disc));
  return k.xk[i] + std::clamp(xi, 0.0, 1.0) * w;
}

SplineKnots knots_from_raw(std::span<const double> raw, int num_bins, double tail_bound) {
  if (static_cast<int>(raw.size()) != spline_param_count(num_bins))
    throw Error(ErrorKind::DimensionMismatch, "spline parameter vector has length " + std::to_string(raw.size()));
  const Knots<double> k = build_from_raw(raw.data(), num_bins, tail_bound);
  SplineKnots s;
  s.tail_bound = tail_bound;
  for (int i = 0; i < num_bins; ++i) {
    const auto u = static_cast<std::size_t>(i);
    s.widths.push_back(k.xk[u + 1] - k.xk[u]);
    s.heights.push_back(k.yk[u + 1] - k.yk[u]);
  }
  s.derivatives = k.d;
  return s;
}

SplineJacobian rq_spline_jacobian(std::span<const double> raw, int num_bins, double tail_bound, double x) {
  if (static_cast<int>(raw.size()) != spline_param_count(num_bins))
    throw Error(ErrorKind::DimensionMismatch, "spline parameter vector has length " + std::to_string(raw.size()));
  switch (num_bins) {
    case 2: return jacobian_fixed<2>(raw, tail_bound, x);
    case 4: return jacobian_fixed<4>(raw, tail_bound, x);
    case 8: return jacobian_fixed<8>(raw, tail_bound, x);
    case 16: return jacobian_fixed<16>(raw, tail_bound, x);
    default:
      throw Error(ErrorKind::InvalidArgument, "unsupported spline bin count " + std::to_string(num_bins));
  }
}

}  // namespace hemo

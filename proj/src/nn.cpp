#include "hemo/nn.hpp"

#include "hemo/error.hpp"

#include <cmath>

namespace hemo {

namespace {

template <typename Derived>
auto activate(const Eigen::MatrixBase<Derived>& z, Activation act) {
  using Plain = typename Derived::PlainObject;
  if (act == Activation::Relu) return Plain(z.cwiseMax(0.0));
  // max(z, 0) + log1p(exp(-|z|)) avoids overflow for large |z|
  return Plain(z.array().max(0.0) + (-z.array().abs()).exp().log1p());
}

template <typename Derived>
auto activation_slope(const Eigen::MatrixBase<Derived>& z, Activation act) {
  using Plain = typename Derived::PlainObject;
  if (act == Activation::Relu) return Plain((z.array() > 0.0).template cast<double>());
  return Plain(1.0 / (1.0 + (-z.array()).exp()));
}

}  // namespace

Mlp::Mlp(const std::vector<int>& widths, Rng& rng, bool zero_output_layer, Activation act) : activation(act) {
  if (widths.size() < 2) throw Error(ErrorKind::InvalidArgument, "network needs at least one layer");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    DenseLayer layer{Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
    const bool last = l + 2 == widths.size();
    if (!(last && zero_output_layer)) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (auto& w : layer.W.reshaped()) w = bound * (2.0 * uniform01(rng) - 1.0);
      for (auto& b : layer.b) b = bound * (2.0 * uniform01(rng) - 1.0);
    }
    layers.push_back(std::move(layer));
  }
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::VectorXd z = layers[l].W * a + layers[l].b;
    if (l + 1 < layers.size()) z = activate(z, activation);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Tape* tape) const {
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (tape) tape->inputs.push_back(a);
    Eigen::MatrixXd z = layers[l].W * a;
    z.colwise() += layers[l].b;
    if (l + 1 < layers.size()) {
      if (tape) tape->pre.push_back(z);
      z = activate(z, activation);
    }
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, const Eigen::MatrixXd& d_out,
                              std::vector<DenseLayer>* grads) const {
  Eigen::MatrixXd delta = d_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (grads) {
      (*grads)[l].W.noalias() += delta * tape.inputs[l].transpose();
      (*grads)[l].b += delta.rowwise().sum();
    }
    Eigen::MatrixXd d_in = layers[l].W.transpose() * delta;
    if (l > 0) d_in = d_in.cwiseProduct(activation_slope(tape.pre[l - 1], activation));
    delta = std::move(d_in);
  }
  return delta;
}

std::vector<DenseLayer> Mlp::zeros_like() const {
  std::vector<DenseLayer> g;
  g.reserve(layers.size());
  for (const auto& l : layers)
    g.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()), Eigen::VectorXd::Zero(l.b.size())});
  return g;
}

void Adam::step(const std::vector<DenseLayer*>& params, const std::vector<const DenseLayer*>& grads) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back({Eigen::MatrixXd::Zero(p->W.rows(), p->W.cols()), Eigen::VectorXd::Zero(p->b.size())});
      v_.push_back(m_.back());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i]->W, grads[i]->W, m_[i].W, v_[i].W);
    update(params[i]->b, grads[i]->b, m_[i].b, v_[i].b);
  }
}

}  // namespace hemo

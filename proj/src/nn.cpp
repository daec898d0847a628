// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/nn.hpp"

#include <algorithm>
#include <cmath>

#include "promptrack/errors.hpp"

namespace promptrack {

Linear::Linear(int in, int out, bool with_bias)
    : weight(Eigen::MatrixXd::Zero(out, in)),
      bias(with_bias ? Eigen::VectorXd::Zero(out) : Eigen::VectorXd()) {}

Linear Linear::random(int in, int out, std::mt19937_64& rng, double gain,
                      bool with_bias) {
  Linear layer(in, out, with_bias);
  const double s = gain / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-s, s);
  for (int c = 0; c < in; ++c) {
    for (int r = 0; r < out; ++r) layer.weight(r, c) = u(rng);
  }
  return layer;
}

Eigen::VectorXd Linear::forward(const Eigen::VectorXd& x) const {
  if (x.size() != weight.cols()) throw ContractError("Linear: input width mismatch");
  Eigen::VectorXd y = weight * x;
  if (bias.size() > 0) y += bias;
  return y;
}

Eigen::MatrixXd Linear::forward_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != weight.cols()) throw ContractError("Linear: input width mismatch");
  Eigen::MatrixXd y = x * weight.transpose();
  if (bias.size() > 0) y.rowwise() += bias.transpose();
  return y;
}

Eigen::VectorXd Linear::backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_out,
                                 Linear& grad) const {
  grad.weight.noalias() += grad_out * x.transpose();
  if (bias.size() > 0) grad.bias += grad_out;
  return weight.transpose() * grad_out;
}

Eigen::MatrixXd Linear::backward_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& grad_out,
                                      Linear& grad) const {
  grad.weight.noalias() += grad_out.transpose() * x;
  if (bias.size() > 0) grad.bias += grad_out.colwise().sum().transpose();
  return grad_out * weight;
}

void Linear::collect(const std::string& prefix, std::vector<ParamView>& out) {
  const double scale = 1.0 / static_cast<double>(std::max<Eigen::Index>(1, weight.cols()));
  out.push_back({prefix + ".weight",
                 {static_cast<int>(weight.rows()), static_cast<int>(weight.cols())},
                 {weight.data(), static_cast<std::size_t>(weight.size())},
                 scale});
  if (bias.size() > 0) {
    out.push_back({prefix + ".bias",
                   {static_cast<int>(bias.size())},
                   {bias.data(), static_cast<std::size_t>(bias.size())},
                   scale});
  }
}

Mlp2::Mlp2(Linear first, Linear second) : fc1(std::move(first)), fc2(std::move(second)) {
  if (fc1.out_features() != fc2.in_features()) {
    throw ContractError("Mlp2: hidden widths disagree");
  }
}

Mlp2 Mlp2::random(int in, int hidden, int out, std::mt19937_64& rng) {
  Linear a = Linear::random(in, hidden, rng, std::sqrt(2.0));
  Linear b = Linear::random(hidden, out, rng, 1.0);
  return Mlp2(std::move(a), std::move(b));
}

Eigen::VectorXd Mlp2::forward(const Eigen::VectorXd& x, Cache* cache) const {
  Eigen::VectorXd pre = fc1.forward(x);
  Eigen::VectorXd y = fc2.forward(pre.cwiseMax(0.0));
  if (cache != nullptr) {
    cache->input = x;
    cache->hidden_pre = std::move(pre);
  }
  return y;
}

Eigen::VectorXd Mlp2::backward(const Cache& cache, const Eigen::VectorXd& grad_out,
                               Mlp2& grad) const {
  const Eigen::VectorXd hidden = cache.hidden_pre.cwiseMax(0.0);
  Eigen::VectorXd g_hidden = fc2.backward(hidden, grad_out, grad.fc2);
  for (Eigen::Index k = 0; k < g_hidden.size(); ++k) {
    if (!(cache.hidden_pre(k) > 0.0)) g_hidden(k) = 0.0;
  }
  return fc1.backward(cache.input, g_hidden, grad.fc1);
}

void Mlp2::collect(const std::string& prefix, std::vector<ParamView>& out) {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

void zero_params(std::span<ParamView> params) {
  for (auto& p : params) std::fill(p.data.begin(), p.data.end(), 0.0);
}

double squared_norm(std::span<const ParamView> params) {
  double s = 0.0;
  for (const auto& p : params) {
    for (double v : p.data) s += v * v;
  }
  return s;
}

Adam::Adam(AdamConfig config, std::span<const ParamView> params) : config_(config) {
  if (!(config.learning_rate > 0.0)) throw InputError("Adam: learning rate must be positive");
  for (const auto& p : params) {
    m_.emplace_back(p.data.size(), 0.0);
    v_.emplace_back(p.data.size(), 0.0);
  }
}

void Adam::step(std::span<ParamView> params, std::span<const ParamView> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ContractError("Adam: parameter list changed");
  }
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, step_);
  const double c2 = 1.0 - std::pow(config_.beta2, step_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    auto theta = params[k].data;
    const auto g = grads[k].data;
    if (theta.size() != m.size() || g.size() != m.size()) {
      throw ContractError("Adam: parameter shape changed");
    }
    const double lr = config_.learning_rate * params[k].lr_scale;
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

}  // namespace promptrack

// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "kernels.hpp"
#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

constexpr int kPatch = kInputSize / kMapSize;            // 8
constexpr int kPatchValues = kPatch * kPatch * 3;        // 192
constexpr int kLatentChannels = 4;
constexpr std::size_t kSelfCacheSize = 2;

Eigen::MatrixXd gaussian(std::mt19937_64& rng, int rows, int cols, double stddev) {
  std::normal_distribution<double> nd(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  // Fill column-major explicitly so the draw order is fixed.
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = nd(rng);
  }
  return m;
}

std::uint64_t hash_matrix(const Eigen::MatrixXd& m, std::uint64_t h) {
  return fnv1a(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), h);
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t k = 0; k < bytes; ++k) {
    h ^= p[k];
    h *= 1099511628211ull;
  }
  return h;
}

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar)
    : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.empty() || alpha_bar_.front() != 1.0) {
    throw InputError("NoiseSchedule: alpha_bar must start at 1");
  }
  for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
    if (!(alpha_bar_[t] > 0.0 && alpha_bar_[t] <= alpha_bar_[t - 1])) {
      throw InputError("NoiseSchedule: alpha_bar must be non-increasing in (0, 1]");
    }
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw InputError("NoiseSchedule: steps must be >= 1");
  std::vector<double> ab(static_cast<std::size_t>(steps));
  ab[0] = 1.0;
  for (int t = 1; t < steps; ++t) {
    const double beta =
        beta_start + (beta_end - beta_start) * (t - 1) / std::max(1, steps - 2);
    ab[static_cast<std::size_t>(t)] = ab[static_cast<std::size_t>(t - 1)] * (1.0 - beta);
  }
  return NoiseSchedule(std::move(ab));
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t >= steps()) throw InputError("NoiseSchedule: step out of range");
  return alpha_bar_[static_cast<std::size_t>(t)];
}

int NoiseSchedule::step_for_alpha_bar(double target) const {
  int best = 0;
  for (int t = 1; t < steps(); ++t) {
    if (std::abs(alpha_bar_[static_cast<std::size_t>(t)] - target) <
        std::abs(alpha_bar_[static_cast<std::size_t>(best)] - target)) {
      best = t;
    }
  }
  return best;
}

LatentImage add_noise(const LatentImage& z0, int t, std::span<const double> eps,
                      const NoiseSchedule& schedule) {
  if (eps.size() != z0.values.size()) throw ContractError("add_noise: noise shape mismatch");
  const double ab = schedule.alpha_bar(t);
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  LatentImage out = z0;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    out.values[k] = signal * z0.values[k] + noise * eps[k];
  }
  return out;
}

double diffusion_loss(const LatentImage& noise_pred, std::span<const double> eps) {
  if (eps.size() != noise_pred.values.size() || eps.empty()) {
    throw ContractError("diffusion_loss: shape mismatch");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    const double d = eps[k] - noise_pred.values[k];
    s += d * d;
  }
  return s / static_cast<double>(eps.size());
}

std::vector<double> diffusion_loss_grad(const LatentImage& noise_pred,
                                        std::span<const double> eps) {
  if (eps.size() != noise_pred.values.size() || eps.empty()) {
    throw ContractError("diffusion_loss_grad: shape mismatch");
  }
  std::vector<double> g(eps.size());
  const double scale = 2.0 / static_cast<double>(eps.size());
  for (std::size_t k = 0; k < eps.size(); ++k) g[k] = scale * (noise_pred.values[k] - eps[k]);
  return g;
}

SyntheticBackbone::SyntheticBackbone(const SyntheticBackboneConfig& config)
    : config_(config), schedule_(NoiseSchedule::linear()) {
  if (config.prompt_dim < 1 || config.feature_dim < 1) {
    throw InputError("SyntheticBackbone: dimensions must be positive");
  }
  std::mt19937_64 rng(config.seed);
  // Shared colour projection averaged over the patch, plus a small random
  // spatial part, so a patch straddling two regions encodes near the mix.
  const Eigen::MatrixXd colour = gaussian(rng, kLatentChannels, 3, 1.0);
  patch_embed_ = gaussian(rng, kLatentChannels, kPatchValues,
                          config.spatial_scale / std::sqrt(static_cast<double>(kPatchValues)));
  for (int k = 0; k < kPatchValues; ++k) {
    patch_embed_.col(k) += colour.col(k % 3) / static_cast<double>(kPatch * kPatch);
  }
  patch_bias_ = gaussian(rng, kLatentChannels, 1, config.patch_bias_scale);
  feature_map_ = gaussian(rng, config.feature_dim, kLatentChannels, 1.0);
  key_ = gaussian(rng, config.feature_dim, config.prompt_dim,
                  config.key_scale / std::sqrt(static_cast<double>(config.prompt_dim)) *
                      std::sqrt(static_cast<double>(config.feature_dim)));
  latent_mix_ = gaussian(rng, kLatentChannels, kLatentChannels, config.latent_coupling);
  prompt_head_ = gaussian(rng, kLatentChannels, config.prompt_dim,
                          config.prompt_coupling / std::sqrt(static_cast<double>(config.prompt_dim)));
}

void SyntheticBackbone::check_latent(const LatentImage& z) const {
  if (!(z.shape == latent_shape()) ||
      z.values.size() != static_cast<std::size_t>(latent_shape().size())) {
    throw ContractError("SyntheticBackbone: latent shape mismatch");
  }
}

void SyntheticBackbone::check_prompt(const PromptEmbedding& p) const {
  if (p.dim() != config_.prompt_dim) {
    std::ostringstream oss;
    oss << "SyntheticBackbone: prompt has dimension " << p.dim() << ", expected "
        << config_.prompt_dim;
    throw ContractError(oss.str());
  }
  if (!p.values.allFinite()) throw InputError("SyntheticBackbone: non-finite prompt");
}

LatentImage SyntheticBackbone::encode_image(const Image& frame) const {
  if (frame.width != kInputSize || frame.height != kInputSize || frame.channels != 3) {
    std::ostringstream oss;
    oss << "encode_image: expected " << kInputSize << "x" << kInputSize << "x3, got "
        << frame.width << "x" << frame.height << "x" << frame.channels;
    throw InputError(oss.str());
  }
  LatentImage z;
  z.shape = latent_shape();
  z.values.assign(static_cast<std::size_t>(z.shape.size()), 0.0);
  z.frame_id = fnv1a(frame.data.data(), frame.data.size());
  Eigen::VectorXd patch(kPatchValues);
  for (int pi = 0; pi < kMapSize; ++pi) {
    for (int pj = 0; pj < kMapSize; ++pj) {
      int k = 0;
      for (int y = 0; y < kPatch; ++y) {
        for (int x = 0; x < kPatch; ++x) {
          for (int c = 0; c < 3; ++c) {
            patch(k++) = frame.at(pj * kPatch + x, pi * kPatch + y, c) / 255.0 - 0.5;
          }
        }
      }
      const Eigen::VectorXd v = patch_embed_ * patch + patch_bias_;
      for (int c = 0; c < kLatentChannels; ++c) z.at(c, pi, pj) = v(c);
    }
  }
  return z;
}

Eigen::MatrixXd SyntheticBackbone::raw_features(const LatentImage& z) const {
  check_latent(z);
  const int n = z.shape.height * z.shape.width;
  const Eigen::Map<const Eigen::MatrixXd> zc(z.values.data(), n, kLatentChannels);
  return zc * feature_map_.transpose();
}

Eigen::MatrixXd SyntheticBackbone::features(const LatentImage& z) const {
  check_latent(z);
  const int n = z.shape.height * z.shape.width;
  Eigen::MatrixXd phi(n, config_.feature_dim);
  Eigen::VectorXd zc(kLatentChannels);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < kLatentChannels; ++c) {
      zc(c) = z.values[static_cast<std::size_t>(c) * n + r];
    }
    Eigen::VectorXd v = feature_map_ * zc;
    const double norm = v.norm();
    if (norm > 0.0) {
      phi.row(r) = (config_.feature_gain / norm) * v.transpose();
    } else {
      phi.row(r).setZero();
    }
  }
  return phi;
}

AttentionMap SyntheticBackbone::cross_map(const Eigen::MatrixXd& phi,
                                          const PromptEmbedding& p) const {
  const Eigen::VectorXd query = key_ * p.values;
  Eigen::VectorXd logits = phi * query / std::sqrt(static_cast<double>(config_.feature_dim));
  const double peak = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - peak).exp().matrix();
  e /= e.sum();
  return AttentionMap(kMapSize, kMapSize, std::vector<double>(e.data(), e.data() + e.size()));
}

std::shared_ptr<const SelfAttentionTensor> SyntheticBackbone::self_attention(
    const LatentImage& z) const {
  check_latent(z);
  const std::uint64_t key =
      fnv1a(z.values.data(), z.values.size() * sizeof(double), 0x5e1fa77e57ull);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    for (const auto& [k, tensor] : cache_) {
      if (k == key) return tensor;
    }
  }
  const Eigen::MatrixXd phi = features(z);
  const int n = static_cast<int>(phi.rows());
  const int d = static_cast<int>(phi.cols());
  std::vector<float> phi_f(static_cast<std::size_t>(n) * d);
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < d; ++k) phi_f[static_cast<std::size_t>(r) * d + k] = static_cast<float>(phi(r, k));
  }
  std::vector<float> values(static_cast<std::size_t>(n) * n);
  detail::softmax_self_attention(phi_f.data(), n, d,
                                 static_cast<float>(1.0 / std::sqrt(static_cast<double>(d))),
                                 values.data());
  auto tensor = std::make_shared<const SelfAttentionTensor>(kMapSize, kMapSize, std::move(values));
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_.emplace_front(key, tensor);
  while (cache_.size() > kSelfCacheSize) cache_.pop_back();
  return tensor;
}

BackboneOutput SyntheticBackbone::forward(const LatentImage& z, int t,
                                          const PromptEmbedding& p) const {
  check_latent(z);
  check_prompt(p);
  (void)schedule_.alpha_bar(t);  // range check

  BackboneOutput out;
  out.cross_maps.push_back(cross_map(raw_features(z), p));
  out.self_maps.push_back(self_attention(z));

  out.noise_pred.shape = z.shape;
  out.noise_pred.frame_id = z.frame_id;
  out.noise_pred.values.assign(z.values.size(), 0.0);
  const Eigen::VectorXd prompt_term = prompt_head_ * p.values;
  const int n = z.shape.height * z.shape.width;
  for (int c = 0; c < kLatentChannels; ++c) {
    double* dst = out.noise_pred.values.data() + static_cast<std::size_t>(c) * n;
    for (int r = 0; r < n; ++r) dst[r] = prompt_term(c);
    for (int c2 = 0; c2 < kLatentChannels; ++c2) {
      const double w = latent_mix_(c, c2);
      const double* src = z.values.data() + static_cast<std::size_t>(c2) * n;
      for (int r = 0; r < n; ++r) dst[r] += w * src[r];
    }
  }
  return out;
}

Eigen::VectorXd SyntheticBackbone::prompt_vjp(
    const LatentImage& z, int t, const PromptEmbedding& p,
    std::span<const std::vector<double>> grad_cross_maps,
    std::span<const double> grad_noise_pred) const {
  check_latent(z);
  check_prompt(p);
  (void)schedule_.alpha_bar(t);
  if (grad_cross_maps.size() != 1) {
    throw ContractError("SyntheticBackbone::prompt_vjp: expects one cross-map gradient");
  }
  const int n = kMapSize * kMapSize;
  const auto& g = grad_cross_maps[0];
  if (static_cast<int>(g.size()) != n) {
    throw ContractError("SyntheticBackbone::prompt_vjp: cross-map gradient size");
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(config_.prompt_dim);

  const Eigen::MatrixXd phi = raw_features(z);
  const AttentionMap mc = cross_map(phi, p);
  const auto m = mc.values();
  double inner = 0.0;
  for (int r = 0; r < n; ++r) inner += m[static_cast<std::size_t>(r)] * g[static_cast<std::size_t>(r)];
  Eigen::VectorXd grad_logits(n);
  for (int r = 0; r < n; ++r) {
    grad_logits(r) = m[static_cast<std::size_t>(r)] * (g[static_cast<std::size_t>(r)] - inner);
  }
  const Eigen::VectorXd grad_query =
      phi.transpose() * grad_logits / std::sqrt(static_cast<double>(config_.feature_dim));
  grad += key_.transpose() * grad_query;

  if (!grad_noise_pred.empty()) {
    if (grad_noise_pred.size() != z.values.size()) {
      throw ContractError("SyntheticBackbone::prompt_vjp: noise gradient size");
    }
    Eigen::VectorXd per_channel = Eigen::VectorXd::Zero(kLatentChannels);
    for (int c = 0; c < kLatentChannels; ++c) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += grad_noise_pred[static_cast<std::size_t>(c) * n + r];
      per_channel(c) = s;
    }
    grad += prompt_head_.transpose() * per_channel;
  }
  return grad;
}

std::uint64_t SyntheticBackbone::parameter_hash() const {
  std::uint64_t h = fnv1a(&config_.seed, sizeof(config_.seed));
  h = hash_matrix(patch_embed_, h);
  h = fnv1a(patch_bias_.data(), static_cast<std::size_t>(patch_bias_.size()) * sizeof(double), h);
  for (const Eigen::MatrixXd* m : {&feature_map_, &key_, &latent_mix_, &prompt_head_}) {
    h = hash_matrix(*m, h);
  }
  return h;
}

PromptEmbedding SyntheticBackbone::prompt_for_query(const Eigen::VectorXd& query) const {
  if (query.size() != config_.feature_dim) {
    throw ContractError("prompt_for_query: query width mismatch");
  }
  const Eigen::MatrixXd gram = key_ * key_.transpose();
  return PromptEmbedding(key_.transpose() * gram.ldlt().solve(query));
}

}  // namespace promptrack

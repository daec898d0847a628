// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Attention backbone abstraction. A backbone encodes a frame to a latent,
// runs a prompt-conditioned denoiser over the (noisy) latent and exposes the
// cross- and self-attention maps of that pass. Backbone weights are never
// trained here; only the prompt receives gradients, through `prompt_vjp`.
//
// Adapter contract for an external pre-trained denoiser:
//  * input frames are 512 x 512 RGB (callers letterbox);
//  * cross maps are delivered at 64 x 64, self-attention tensors from the
//    same stage, every self-attention slice row-stochastic;
//  * `prompt_vjp` returns d(loss)/d(prompt) given d(loss)/d(each cross map)
//    and d(loss)/d(noise_pred), which an autograd runtime provides directly;
//  * concurrency: SyntheticBackbone is safe to call from several threads.
//    Adapters document their own policy; sessions call them sequentially.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "promptrack/attention.hpp"
#include "promptrack/image.hpp"

namespace promptrack {

inline constexpr int kPromptDim = 1024;
inline constexpr int kInputSize = 512;
inline constexpr int kMapSize = 64;

struct PromptEmbedding {
  Eigen::VectorXd values;

  PromptEmbedding() = default;
  explicit PromptEmbedding(Eigen::VectorXd v) : values(std::move(v)) {}

  int dim() const { return static_cast<int>(values.size()); }
  bool operator==(const PromptEmbedding& o) const {
    return values.size() == o.values.size() && values == o.values;
  }
};

struct LatentShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  int size() const { return channels * height * width; }
  bool operator==(const LatentShape&) const = default;
};

/// Channel-major latent grid.
struct LatentImage {
  LatentShape shape;
  std::vector<double> values;
  std::uint64_t frame_id = 0;

  double& at(int c, int i, int j) {
    return values[(static_cast<std::size_t>(c) * shape.height + i) * shape.width + j];
  }
  double at(int c, int i, int j) const {
    return values[(static_cast<std::size_t>(c) * shape.height + i) * shape.width + j];
  }
};

/// Variance-preserving forward-process schedule.
class NoiseSchedule {
 public:
  /// `alpha_bar` must start at 1 and be non-increasing in (0, 1].
  explicit NoiseSchedule(std::vector<double> alpha_bar);

  /// Linear beta schedule, alpha_bar(0) = 1.
  static NoiseSchedule linear(int steps = 1000, double beta_start = 1e-4,
                              double beta_end = 0.02);

  int steps() const { return static_cast<int>(alpha_bar_.size()); }
  double alpha_bar(int t) const;

  /// Step whose alpha_bar is closest to `target`.
  int step_for_alpha_bar(double target) const;

 private:
  std::vector<double> alpha_bar_;
};

/// z_t = sqrt(alpha_bar(t)) * z0 + sqrt(1 - alpha_bar(t)) * eps.
LatentImage add_noise(const LatentImage& z0, int t, std::span<const double> eps,
                      const NoiseSchedule& schedule);

/// Mean of (eps - noise_pred)^2.
double diffusion_loss(const LatentImage& noise_pred, std::span<const double> eps);

/// d(diffusion_loss)/d(noise_pred).
std::vector<double> diffusion_loss_grad(const LatentImage& noise_pred,
                                        std::span<const double> eps);

struct BackboneOutput {
  LatentImage noise_pred;
  std::vector<AttentionMap> cross_maps;
  std::vector<std::shared_ptr<const SelfAttentionTensor>> self_maps;
};

class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual int prompt_dim() const = 0;
  virtual LatentShape latent_shape() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;

  virtual LatentImage encode_image(const Image& frame) const = 0;

  virtual BackboneOutput forward(const LatentImage& z, int t,
                                 const PromptEmbedding& p) const = 0;

  /// Gradient w.r.t. `p` of a scalar whose gradients w.r.t. the outputs of
  /// `forward(z, t, p)` are given. `grad_noise_pred` may be empty.
  virtual Eigen::VectorXd prompt_vjp(
      const LatentImage& z, int t, const PromptEmbedding& p,
      std::span<const std::vector<double>> grad_cross_maps,
      std::span<const double> grad_noise_pred) const = 0;

  /// Content hash of all weights; used to assert the backbone stays frozen.
  virtual std::uint64_t parameter_hash() const = 0;
};

struct SyntheticBackboneConfig {
  std::uint64_t seed = 7;
  int prompt_dim = kPromptDim;
  int feature_dim = 8;
  /// Norm of every feature vector. Sets the sharpness of self-attention.
  double feature_gain = 5.0;
  /// Scale of the prompt-to-key projection.
  double key_scale = 1.0;
  double patch_bias_scale = 0.2;
  /// Weight of the position-dependent part of the patch embedding.
  double spatial_scale = 0.1;
  /// Weights of the linear denoiser head on latent and prompt.
  double latent_coupling = 0.02;
  double prompt_coupling = 0.05;
};

/// Deterministic differentiable stand-in for a text-to-image denoiser.
///
/// encode: fixed projection of 8 x 8 patches to a 4 x 64 x 64 latent: a
/// patch-averaged colour map plus a small random per-pixel term.
/// features: per position f = A z with A a fixed map, and its rescaled unit
/// direction phi = gain * f / |f|.
/// cross map: softmax over positions of f . (K p) / sqrt(d).
/// self map: slice r = softmax over positions of phi_r . phi / sqrt(d).
///
/// Cross logits stay linear in the latent so a patch straddling the target
/// edge scores between its two sides; the self kernel uses directions so it
/// measures similarity rather than magnitude.
/// noise_pred(c, pos) = sum_c' N(c, c') z(c', pos) + (U p)(c).
class SyntheticBackbone final : public Backbone {
 public:
  explicit SyntheticBackbone(const SyntheticBackboneConfig& config = {});

  int prompt_dim() const override { return config_.prompt_dim; }
  LatentShape latent_shape() const override { return {4, kMapSize, kMapSize}; }
  const NoiseSchedule& schedule() const override { return schedule_; }

  LatentImage encode_image(const Image& frame) const override;
  BackboneOutput forward(const LatentImage& z, int t,
                         const PromptEmbedding& p) const override;
  Eigen::VectorXd prompt_vjp(const LatentImage& z, int t, const PromptEmbedding& p,
                             std::span<const std::vector<double>> grad_cross_maps,
                             std::span<const double> grad_noise_pred) const override;
  std::uint64_t parameter_hash() const override;

  const SyntheticBackboneConfig& config() const { return config_; }

  /// positions x feature_dim grid f = A z feeding the cross map.
  Eigen::MatrixXd raw_features(const LatentImage& z) const;
  /// Unit directions of raw_features scaled to feature_gain; feeds the self map.
  Eigen::MatrixXd features(const LatentImage& z) const;

  /// Minimum-norm prompt whose key projection equals `query`.
  PromptEmbedding prompt_for_query(const Eigen::VectorXd& query) const;

  /// Self-attention tensor of `z`. Recently used tensors are memoized by
  /// latent content, so repeated passes over one frame pay for it once.
  std::shared_ptr<const SelfAttentionTensor> self_attention(const LatentImage& z) const;

 private:
  AttentionMap cross_map(const Eigen::MatrixXd& phi, const PromptEmbedding& p) const;
  void check_latent(const LatentImage& z) const;
  void check_prompt(const PromptEmbedding& p) const;

  SyntheticBackboneConfig config_;
  NoiseSchedule schedule_;
  Eigen::MatrixXd patch_embed_;   // 4 x 192
  Eigen::VectorXd patch_bias_;    // 4
  Eigen::MatrixXd feature_map_;   // d x 4
  Eigen::MatrixXd key_;           // d x prompt_dim
  Eigen::MatrixXd latent_mix_;    // 4 x 4
  Eigen::MatrixXd prompt_head_;   // 4 x prompt_dim

  mutable std::mutex cache_mutex_;
  mutable std::deque<std::pair<std::uint64_t, std::shared_ptr<const SelfAttentionTensor>>> cache_;
};

/// FNV-1a over raw bytes; shared by parameter and latent hashing.
std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t seed = 1469598103934665603ull);

}  // namespace promptrack

// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "promptrack/attention.hpp"
#include "promptrack/backbone.hpp"
#include "promptrack/image.hpp"

namespace promptrack {

enum class NoiseMode {
  kZero,     // eps = 0, fixed inference step: fully deterministic
  kSampled,  // fresh seeded eps and step for every evaluation
};

struct LearnerConfig {
  double learning_rate = 5e-3;
  int epochs = 3;
  int steps_per_epoch = 50;
  double alpha = 0.5;
  double init_scale = 0.02;
  /// Weight of the denoising term relative to the map term.
  double dm_weight = 1.0;
  NoiseMode noise = NoiseMode::kZero;
  /// Sampled steps are drawn from [0, t] with alpha_bar(t) closest to this.
  double min_alpha_bar = 0.9;
  /// Step used in zero-noise mode and at inference.
  double inference_alpha_bar = 0.98;
  std::uint64_t seed = 0;
};

struct LearnTrace {
  std::vector<double> total;
  std::vector<double> mse;
  std::vector<double> dm;
};

struct LearnResult {
  PromptEmbedding prompt;
  LearnTrace trace;
};

/// Elementwise mean of the cross maps a backbone returns.
AttentionMap average_cross_maps(std::span<const AttentionMap> maps);

/// Elementwise mean of the self-attention tensors; shares the input when
/// there is only one.
std::shared_ptr<const SelfAttentionTensor> average_self_maps(
    std::span<const std::shared_ptr<const SelfAttentionTensor>> maps);

/// Every intermediate of the fused-map composition, kept for backward.
struct FusedMapEval {
  BackboneOutput output;
  AttentionMap cross;
  std::shared_ptr<const SelfAttentionTensor> self;
  AttentionMap fused;
};

/// forward -> average cross maps -> harmonize with the averaged self tensor
/// -> resize to the cross-map grid -> blend with alpha. Learner and updater
/// both go through here.
FusedMapEval evaluate_fused_map(const Backbone& backbone, const LatentImage& z,
                                int t, const PromptEmbedding& p, double alpha);

AttentionMap fused_map(const Backbone& backbone, const LatentImage& z, int t,
                       const PromptEmbedding& p, double alpha);

/// Gradients w.r.t. each backbone cross map given d/d(fused map).
std::vector<std::vector<double>> fused_map_vjp(const FusedMapEval& eval,
                                               std::span<const double> grad_fused,
                                               double alpha);

struct PromptLoss {
  double total = 0.0;
  double mse = 0.0;
  double dm = 0.0;
};

/// map_mse(fused, gt) + dm_weight * diffusion_loss at (z_t, t, eps).
/// Writes d(total)/d(p) into `grad` when non-null.
PromptLoss prompt_loss(const Backbone& backbone, const LatentImage& z_t, int t,
                       std::span<const double> eps, const PromptEmbedding& p,
                       const AttentionMap& gt, double alpha, double dm_weight,
                       Eigen::VectorXd* grad = nullptr);

/// Deterministic noisy latent for one learner step.
struct NoisyLatent {
  LatentImage z;
  int t = 0;
  std::vector<double> eps;
};

NoisyLatent make_noisy_latent(const Backbone& backbone, const LatentImage& z0,
                              const LearnerConfig& cfg, std::mt19937_64& rng);

/// Seeded N(0, init_scale^2) prompt.
PromptEmbedding initial_prompt(int dim, double init_scale, std::uint64_t seed);

/// Learns a prompt whose fused attention on `frame` activates `box` with the
/// backbone frozen. `frame` is at the backbone input size.
LearnResult learn_initial_prompt(const Image& frame, const BBox& box,
                                 const Backbone& backbone, const LearnerConfig& cfg);

}  // namespace promptrack

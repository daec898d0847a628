// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Online prompt update
//   p_k = (1 - beta) * H_b(p_{k-1} + proj(l_k)) + beta * p_{k-1}
// and the training loop for every learnable part of it.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "promptrack/attention.hpp"
#include "promptrack/backbone.hpp"
#include "promptrack/motion.hpp"
#include "promptrack/nn.hpp"
#include "promptrack/prompt_learner.hpp"
#include "promptrack/synth.hpp"

namespace promptrack {

struct UpdaterConfig {
  double beta = 0.7;
  double learning_rate = 5e-4;
  int epochs = 35;
  std::uint64_t seed = 0;
  /// Blend weight of the fused map the loss is taken on.
  double alpha = 0.5;
  HorizonSet horizons = HorizonSet::kBoth;
  /// Leading frames of each clip used for training; 0 keeps all.
  int max_clip_frames = 0;
  /// Budget for learning each clip's initial prompt.
  LearnerConfig learner;
};

/// d_p -> 2 d_p -> d_p with W1 = [I; -I], W2 = [I, -I] and zero biases, so
/// relu(x) - relu(-x) = x exactly.
Mlp2 identity_blend_head(int dim);

struct UpdaterModules {
  MotionModules motion;
  /// H_b.
  Mlp2 blend_head;
  /// Motion width -> prompt width.
  Linear projection;

  /// Seeded motion path, identity blend head, zero projection.
  static UpdaterModules create(std::uint64_t seed, int prompt_dim = kPromptDim);

  /// Same structure, every parameter zero (gradient accumulator).
  UpdaterModules zeros_like() const;

  int prompt_dim() const { return blend_head.in_features(); }

  std::vector<ParamView> parameters();
};

struct UpdateCache {
  Eigen::VectorXd motion;
  Mlp2::Cache head;
};

/// Throws ContractError on width mismatch and OptimizationError on a
/// non-finite result. beta = 1 returns `p_prev` unchanged.
PromptEmbedding update_prompt(const PromptEmbedding& p_prev, const ConditionedMotion& l,
                              const Mlp2& head, const Linear& projection, double beta,
                              UpdateCache* cache = nullptr);

/// Frame k as the updater sees it.
struct UpdaterFrame {
  LatentImage z;  // latent passed to the backbone (already noised)
  int t = 0;
  /// kWindow + 1 motion frames ending at frame k.
  std::span<const MotionFrame> window;
  AttentionMap gt;
};

struct UpdaterStep {
  double loss = 0.0;
  PromptEmbedding prompt;
};

/// Motion extraction -> update_prompt -> fused map -> map_mse against the
/// GT map. No diffusion term. Adds parameter gradients to `grad` when given.
UpdaterStep updater_step(const Backbone& backbone, const UpdaterModules& modules,
                         const Eigen::MatrixXd& template_tokens, const PromptEmbedding& p_prev,
                         const UpdaterFrame& frame, const UpdaterConfig& cfg,
                         UpdaterModules* grad = nullptr);

/// Convenience form on raw 512 x 512 frames. `window` ends at frame k;
/// `gt_box` is in frame pixels. Zero-noise inference step.
double updater_step_loss(std::span<const Image> window, const Image& template_crop,
                         const PromptEmbedding& p_prev, const Backbone& backbone,
                         const UpdaterModules& modules, const BBox& gt_box,
                         const UpdaterConfig& cfg);

/// A pseudo-labelled clip reduced to what training touches.
struct TrainingClip {
  std::string name;
  Eigen::MatrixXd template_tokens;
  std::vector<MotionFrame> motion;
  std::vector<LatentImage> latents;
  std::vector<int> steps;
  std::vector<AttentionMap> gt;
  PromptEmbedding initial_prompt;
};

/// Letterboxes every frame, learns the clip's initial prompt on frame 1 and
/// precomputes latents and GT maps. Throws InputError on clips shorter than
/// kWindow + 2 frames.
TrainingClip prepare_training_clip(const LabeledClip& clip, const Backbone& backbone,
                                   const UpdaterConfig& cfg, std::uint64_t clip_seed);

struct TrainReport {
  std::vector<double> epoch_loss;
  int clips = 0;
  int steps_per_epoch = 0;
};

using TrainProgress = std::function<void(int epoch, double mean_loss)>;

/// One Adam step per clip on the mean loss over frames kWindow + 2 ... n of
/// that clip, unrolled with p_{k-1} detached. Backbone and initial prompts
/// stay fixed.
TrainReport train_updater(std::span<const TrainingClip> clips, const Backbone& backbone,
                          const UpdaterConfig& cfg, UpdaterModules& modules,
                          const TrainProgress& progress = {});

/// Prepares every clip of `source`, then trains.
TrainReport train_updater(const PseudoLabelSource& source, const Backbone& backbone,
                          const UpdaterConfig& cfg, UpdaterModules& modules,
                          const TrainProgress& progress = {});

}  // namespace promptrack

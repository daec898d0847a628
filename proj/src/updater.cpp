// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/updater.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

void check_config(const UpdaterConfig& cfg) {
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw InputError("updater: beta must lie in [0, 1]");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw InputError("updater: alpha must lie in [0, 1]");
  if (!(cfg.learning_rate > 0.0)) throw InputError("updater: learning_rate must be positive");
  if (cfg.epochs < 0) throw InputError("updater: epochs must be non-negative");
}

}  // namespace

Mlp2 identity_blend_head(int dim) {
  Linear fc1(dim, 2 * dim);
  Linear fc2(2 * dim, dim);
  for (int k = 0; k < dim; ++k) {
    fc1.weight(k, k) = 1.0;
    fc1.weight(dim + k, k) = -1.0;
    fc2.weight(k, k) = 1.0;
    fc2.weight(k, dim + k) = -1.0;
  }
  return Mlp2(std::move(fc1), std::move(fc2));
}

UpdaterModules UpdaterModules::create(std::uint64_t seed, int prompt_dim) {
  if (prompt_dim < 1) throw InputError("UpdaterModules: prompt_dim must be positive");
  UpdaterModules m;
  m.motion = MotionModules::create(seed);
  m.blend_head = identity_blend_head(prompt_dim);
  // Zero projection: the untrained updater leaves the prompt where it is.
  m.projection = Linear(kMotionDim, prompt_dim);
  return m;
}

UpdaterModules UpdaterModules::zeros_like() const {
  UpdaterModules z = *this;
  auto params = z.parameters();
  zero_params(params);
  return z;
}

std::vector<ParamView> UpdaterModules::parameters() {
  std::vector<ParamView> out;
  motion.collect("motion.", out);
  blend_head.collect("blend_head", out);
  projection.collect("projection", out);
  return out;
}

PromptEmbedding update_prompt(const PromptEmbedding& p_prev, const ConditionedMotion& l,
                              const Mlp2& head, const Linear& projection, double beta,
                              UpdateCache* cache) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("update_prompt: beta must lie in [0, 1]");
  if (head.in_features() != p_prev.dim() || head.out_features() != p_prev.dim() ||
      projection.out_features() != p_prev.dim() || projection.in_features() != l.v.size()) {
    throw ContractError("update_prompt: prompt, motion and module widths disagree");
  }
  if (beta == 1.0) return p_prev;
  const Eigen::VectorXd x = p_prev.values + projection.forward(l.v);
  Mlp2::Cache head_cache;
  const Eigen::VectorXd h = head.forward(x, &head_cache);
  PromptEmbedding out((1.0 - beta) * h + beta * p_prev.values);
  if (!out.values.allFinite()) throw OptimizationError("update_prompt: non-finite prompt", {});
  if (cache != nullptr) {
    cache->motion = l.v;
    cache->head = std::move(head_cache);
  }
  return out;
}

UpdaterStep updater_step(const Backbone& backbone, const UpdaterModules& modules,
                         const Eigen::MatrixXd& template_tokens, const PromptEmbedding& p_prev,
                         const UpdaterFrame& frame, const UpdaterConfig& cfg,
                         UpdaterModules* grad) {
  UpdaterStep step;
  MotionCache motion_cache;
  UpdateCache update_cache;
  if (cfg.beta == 1.0) {
    step.prompt = p_prev;
  } else {
    const ConditionedMotion l = extract_motion(modules.motion, frame.window, template_tokens,
                                               cfg.horizons, &motion_cache);
    step.prompt = update_prompt(p_prev, l, modules.blend_head, modules.projection, cfg.beta,
                                &update_cache);
  }
  const FusedMapEval eval = evaluate_fused_map(backbone, frame.z, frame.t, step.prompt, cfg.alpha);
  step.loss = map_mse(eval.fused, frame.gt);
  if (grad == nullptr || cfg.beta == 1.0) return step;

  const auto g_fused = map_mse_grad(eval.fused, frame.gt);
  const auto g_cross = fused_map_vjp(eval, g_fused, cfg.alpha);
  const Eigen::VectorXd g_p = backbone.prompt_vjp(frame.z, frame.t, step.prompt, g_cross, {});
  const Eigen::VectorXd g_x =
      modules.blend_head.backward(update_cache.head, (1.0 - cfg.beta) * g_p, grad->blend_head);
  const Eigen::VectorXd g_l =
      modules.projection.backward(update_cache.motion, g_x, grad->projection);
  extract_motion_backward(modules.motion, motion_cache, cfg.horizons, g_l, grad->motion);
  return step;
}

double updater_step_loss(std::span<const Image> window, const Image& template_crop,
                         const PromptEmbedding& p_prev, const Backbone& backbone,
                         const UpdaterModules& modules, const BBox& gt_box,
                         const UpdaterConfig& cfg) {
  if (static_cast<int>(window.size()) != kWindow + 1) {
    throw InputError("updater_step_loss: window must hold kWindow + 1 frames");
  }
  std::vector<MotionFrame> motion;
  for (const auto& f : window) motion.push_back(make_motion_frame(f));
  const Image& current = window.back();
  UpdaterFrame frame;
  frame.z = backbone.encode_image(current);
  frame.t = backbone.schedule().step_for_alpha_bar(cfg.learner.inference_alpha_bar);
  const std::vector<double> eps(frame.z.values.size(), 0.0);
  frame.z = add_noise(frame.z, frame.t, eps, backbone.schedule());
  frame.window = motion;
  frame.gt = gt_map_from_bbox(gt_box, current.width, current.height, kMapSize, kMapSize);
  return updater_step(backbone, modules, QueryExtractor::prepare(template_crop), p_prev, frame,
                      cfg)
      .loss;
}

TrainingClip prepare_training_clip(const LabeledClip& clip, const Backbone& backbone,
                                   const UpdaterConfig& cfg, std::uint64_t clip_seed) {
  std::size_t n = clip.frames.size();
  if (cfg.max_clip_frames > 0) n = std::min(n, static_cast<std::size_t>(cfg.max_clip_frames));
  if (n < static_cast<std::size_t>(kWindow + 2)) {
    std::ostringstream oss;
    oss << "training clip '" << clip.name << "' has " << n << " frames; at least "
        << kWindow + 2 << " are required";
    throw InputError(oss.str());
  }
  if (clip.boxes.size() < n) {
    throw InputError("training clip '" + clip.name + "' lacks a box per frame");
  }
  const Letterbox lb(clip.frames[0].width, clip.frames[0].height, kInputSize);

  TrainingClip out;
  out.name = clip.name;
  LearnerConfig lcfg = cfg.learner;
  lcfg.alpha = cfg.alpha;
  lcfg.seed = clip_seed;
  std::mt19937_64 noise_rng(clip_seed ^ 0x243f6a8885a308d3ull);
  for (std::size_t k = 0; k < n; ++k) {
    const Image frame = lb.apply(clip.frames[k]);
    const BBox box = lb.to_input(clip.boxes[k]);
    if (k == 0) {
      out.initial_prompt = learn_initial_prompt(frame, box, backbone, lcfg).prompt;
      out.template_tokens = QueryExtractor::prepare(crop(frame, box));
    }
    out.motion.push_back(make_motion_frame(frame));
    NoisyLatent noisy = make_noisy_latent(backbone, backbone.encode_image(frame), lcfg, noise_rng);
    out.latents.push_back(std::move(noisy.z));
    out.steps.push_back(noisy.t);
    out.gt.push_back(gt_map_from_bbox(box, kInputSize, kInputSize, kMapSize, kMapSize));
  }
  return out;
}

TrainReport train_updater(std::span<const TrainingClip> clips, const Backbone& backbone,
                          const UpdaterConfig& cfg, UpdaterModules& modules,
                          const TrainProgress& progress) {
  check_config(cfg);
  if (clips.empty()) throw InputError("train_updater: empty dataset");
  for (const auto& c : clips) {
    if (c.latents.size() < static_cast<std::size_t>(kWindow + 2)) {
      throw InputError("train_updater: clip '" + c.name + "' is too short");
    }
    if (c.initial_prompt.dim() != modules.prompt_dim()) {
      throw ContractError("train_updater: initial prompt width differs from the modules'");
    }
  }
  TrainReport report;
  report.clips = static_cast<int>(clips.size());
  for (const auto& c : clips) report.steps_per_epoch += static_cast<int>(c.latents.size()) - kWindow;
  if (cfg.epochs == 0) return report;

  std::vector<ParamView> params = modules.parameters();
  UpdaterModules grads = modules.zeros_like();
  std::vector<ParamView> grad_views = grads.parameters();
  Adam adam(AdamConfig{.learning_rate = cfg.learning_rate}, params);

  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    int epoch_steps = 0;
    for (const std::size_t ci : order) {
      const TrainingClip& clip = clips[ci];
      zero_params(grad_views);
      PromptEmbedding p = clip.initial_prompt;
      int steps = 0;
      for (std::size_t k = kWindow; k < clip.latents.size(); ++k) {
        UpdaterFrame frame{clip.latents[k], clip.steps[k],
                           std::span<const MotionFrame>(clip.motion).subspan(k - kWindow, kWindow + 1),
                           clip.gt[k]};
        UpdaterStep s = updater_step(backbone, modules, clip.template_tokens, p, frame, cfg, &grads);
        if (!std::isfinite(s.loss)) {
          std::ostringstream oss;
          oss << "train_updater: non-finite loss in epoch " << epoch << ", clip '" << clip.name << "'";
          throw OptimizationError(oss.str(), report.epoch_loss);
        }
        p = std::move(s.prompt);
        epoch_sum += s.loss;
        ++epoch_steps;
        ++steps;
      }
      const double inv = 1.0 / static_cast<double>(steps);
      for (auto& g : grad_views) {
        for (double& v : g.data) v *= inv;
      }
      adam.step(params, grad_views);
    }
    report.epoch_loss.push_back(epoch_sum / epoch_steps);
    if (progress) progress(epoch, report.epoch_loss.back());
  }
  return report;
}

TrainReport train_updater(const PseudoLabelSource& source, const Backbone& backbone,
                          const UpdaterConfig& cfg, UpdaterModules& modules,
                          const TrainProgress& progress) {
  check_config(cfg);
  if (source.clip_count() == 0) throw InputError("train_updater: empty dataset");
  std::vector<TrainingClip> clips;
  for (std::size_t i = 0; i < source.clip_count(); ++i) {
    clips.push_back(prepare_training_clip(source.clip(i), backbone, cfg, cfg.seed + i));
  }
  return train_updater(clips, backbone, cfg, modules, progress);
}

}  // namespace promptrack

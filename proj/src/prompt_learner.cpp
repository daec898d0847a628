// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/prompt_learner.hpp"

#include <cmath>
#include <sstream>

#include "promptrack/errors.hpp"
#include "promptrack/nn.hpp"

namespace promptrack {

AttentionMap average_cross_maps(std::span<const AttentionMap> maps) {
  if (maps.empty()) throw ContractError("average_cross_maps: backbone returned no cross maps");
  if (maps.size() == 1) return maps[0];
  AttentionMap out(maps[0].height(), maps[0].width());
  for (const auto& m : maps) {
    if (m.height() != out.height() || m.width() != out.width()) {
      throw ContractError("average_cross_maps: cross maps differ in shape");
    }
    auto o = out.values();
    const auto v = m.values();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] += v[k];
  }
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (double& v : out.values()) v *= inv;
  return out;
}

std::shared_ptr<const SelfAttentionTensor> average_self_maps(
    std::span<const std::shared_ptr<const SelfAttentionTensor>> maps) {
  if (maps.empty()) throw ContractError("average_self_maps: backbone returned no self maps");
  if (maps.size() == 1) return maps[0];
  const int h = maps[0]->height();
  const int w = maps[0]->width();
  const std::size_t n = maps[0]->values().size();
  std::vector<double> acc(n, 0.0);
  for (const auto& m : maps) {
    if (m->height() != h || m->width() != w) {
      throw ContractError("average_self_maps: self maps differ in shape");
    }
    const auto v = m->values();
    for (std::size_t k = 0; k < n; ++k) acc[k] += v[k];
  }
  std::vector<float> values(n);
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (std::size_t k = 0; k < n; ++k) values[k] = static_cast<float>(acc[k] * inv);
  return std::make_shared<const SelfAttentionTensor>(h, w, std::move(values));
}

FusedMapEval evaluate_fused_map(const Backbone& backbone, const LatentImage& z,
                                int t, const PromptEmbedding& p, double alpha) {
  FusedMapEval eval;
  eval.output = backbone.forward(z, t, p);
  eval.cross = average_cross_maps(eval.output.cross_maps);
  eval.self = average_self_maps(eval.output.self_maps);
  const int h = eval.cross.height();
  const int w = eval.cross.width();
  if (alpha == 1.0) {
    // blend(x, mc, 1) == mc exactly for any finite x; skip the O(N^2) pass.
    eval.fused = blend(AttentionMap(h, w), eval.cross, alpha);
    return eval;
  }
  const AttentionMap at_self_size =
      resize_map(eval.cross, eval.self->height(), eval.self->width());
  const AttentionMap enhanced = resize_map(harmonize(at_self_size, *eval.self), h, w);
  eval.fused = blend(enhanced, eval.cross, alpha);
  return eval;
}

AttentionMap fused_map(const Backbone& backbone, const LatentImage& z, int t,
                       const PromptEmbedding& p, double alpha) {
  return evaluate_fused_map(backbone, z, t, p, alpha).fused;
}

std::vector<std::vector<double>> fused_map_vjp(const FusedMapEval& eval,
                                               std::span<const double> grad_fused,
                                               double alpha) {
  const int h = eval.cross.height();
  const int w = eval.cross.width();
  if (static_cast<int>(grad_fused.size()) != h * w) {
    throw ContractError("fused_map_vjp: gradient size mismatch");
  }
  std::vector<double> g_cross(grad_fused.size());
  for (std::size_t k = 0; k < g_cross.size(); ++k) g_cross[k] = alpha * grad_fused[k];
  if (alpha != 1.0) {
    const int sh = eval.self->height();
    const int sw = eval.self->width();
    std::vector<double> g_enh(grad_fused.size());
    for (std::size_t k = 0; k < g_enh.size(); ++k) g_enh[k] = (1.0 - alpha) * grad_fused[k];
    const auto g_harm = resize_map_vjp(g_enh, h, w, sh, sw);
    const auto g_self_grid = harmonize_vjp(g_harm, *eval.self);
    const auto g_back = resize_map_vjp(g_self_grid, sh, sw, h, w);
    for (std::size_t k = 0; k < g_cross.size(); ++k) g_cross[k] += g_back[k];
  }
  const std::size_t count = eval.output.cross_maps.size();
  if (count > 1) {
    const double inv = 1.0 / static_cast<double>(count);
    for (double& g : g_cross) g *= inv;
  }
  return std::vector<std::vector<double>>(count, g_cross);
}

PromptLoss prompt_loss(const Backbone& backbone, const LatentImage& z_t, int t,
                       std::span<const double> eps, const PromptEmbedding& p,
                       const AttentionMap& gt, double alpha, double dm_weight,
                       Eigen::VectorXd* grad) {
  const FusedMapEval eval = evaluate_fused_map(backbone, z_t, t, p, alpha);
  PromptLoss loss;
  loss.mse = map_mse(eval.fused, gt);
  loss.dm = diffusion_loss(eval.output.noise_pred, eps);
  loss.total = loss.mse + dm_weight * loss.dm;
  if (grad != nullptr) {
    const auto g_fused = map_mse_grad(eval.fused, gt);
    const auto g_cross = fused_map_vjp(eval, g_fused, alpha);
    std::vector<double> g_noise;
    if (dm_weight != 0.0) {
      g_noise = diffusion_loss_grad(eval.output.noise_pred, eps);
      for (double& g : g_noise) g *= dm_weight;
    }
    *grad = backbone.prompt_vjp(z_t, t, p, g_cross, g_noise);
  }
  return loss;
}

NoisyLatent make_noisy_latent(const Backbone& backbone, const LatentImage& z0,
                              const LearnerConfig& cfg, std::mt19937_64& rng) {
  const NoiseSchedule& sched = backbone.schedule();
  NoisyLatent out;
  out.eps.assign(z0.values.size(), 0.0);
  if (cfg.noise == NoiseMode::kZero) {
    out.t = sched.step_for_alpha_bar(cfg.inference_alpha_bar);
  } else {
    const int t_max = sched.step_for_alpha_bar(cfg.min_alpha_bar);
    out.t = std::uniform_int_distribution<int>(0, t_max)(rng);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& e : out.eps) e = nd(rng);
  }
  out.z = add_noise(z0, out.t, out.eps, sched);
  return out;
}

PromptEmbedding initial_prompt(int dim, double init_scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, init_scale);
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) v(k) = nd(rng);
  return PromptEmbedding(std::move(v));
}

LearnResult learn_initial_prompt(const Image& frame, const BBox& box,
                                 const Backbone& backbone, const LearnerConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw InputError("learner: learning_rate must be positive");
  if (cfg.epochs < 0 || cfg.steps_per_epoch < 0) {
    throw InputError("learner: epochs and steps_per_epoch must be non-negative");
  }
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw InputError("learner: alpha must lie in [0, 1]");
  if (!is_valid(box) || !intersects_frame(box, frame.width, frame.height)) {
    throw InputError("learner: box must be valid and inside the frame");
  }

  LearnResult result;
  result.prompt = initial_prompt(backbone.prompt_dim(), cfg.init_scale, cfg.seed);
  if (cfg.epochs == 0 || cfg.steps_per_epoch == 0) return result;

  const LatentImage z0 = backbone.encode_image(frame);
  // Map resolution comes from the backbone's own cross maps.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  LearnerConfig probe_cfg = cfg;
  probe_cfg.noise = NoiseMode::kZero;
  const NoisyLatent probe = make_noisy_latent(backbone, z0, probe_cfg, rng);
  const AttentionMap probe_cross =
      average_cross_maps(backbone.forward(probe.z, probe.t, result.prompt).cross_maps);
  const AttentionMap gt = gt_map_from_bbox(box, frame.width, frame.height,
                                           probe_cross.height(), probe_cross.width());

  std::vector<ParamView> params = {
      {"prompt", {result.prompt.dim()}, {result.prompt.values.data(), static_cast<std::size_t>(result.prompt.dim())}}};
  Eigen::VectorXd grad(result.prompt.dim());
  std::vector<ParamView> grads = {
      {"prompt", {result.prompt.dim()}, {grad.data(), static_cast<std::size_t>(grad.size())}}};
  Adam adam(AdamConfig{.learning_rate = cfg.learning_rate}, params);
  Eigen::VectorXd step_grad;

  const int total_steps = cfg.epochs * cfg.steps_per_epoch;
  result.trace.total.reserve(static_cast<std::size_t>(total_steps));
  for (int step = 0; step < total_steps; ++step) {
    const NoisyLatent noisy = make_noisy_latent(backbone, z0, cfg, rng);
    const PromptLoss loss = prompt_loss(backbone, noisy.z, noisy.t, noisy.eps, result.prompt,
                                        gt, cfg.alpha, cfg.dm_weight, &step_grad);
    grad = step_grad;  // copy: `grads` views this buffer
    result.trace.total.push_back(loss.total);
    result.trace.mse.push_back(loss.mse);
    result.trace.dm.push_back(loss.dm);
    if (!std::isfinite(loss.total) || !grad.allFinite()) {
      std::ostringstream oss;
      oss << "learner: non-finite loss or gradient at step " << step;
      throw OptimizationError(oss.str(), result.trace.total);
    }
    adam.step(params, grads);
  }
  return result;
}

}  // namespace promptrack

// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <unistd.h>

#include "promptrack/archive.hpp"
#include "promptrack/errors.hpp"
#include "promptrack/metrics.hpp"
#include "promptrack/pipeline.hpp"
#include "promptrack/synth.hpp"

namespace promptrack {
namespace {

Eigen::VectorXd unit_direction(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v / v.norm();
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

std::string fmt(double v) {
  std::ostringstream oss;
  oss.precision(3);
  oss << v;
  return oss.str();
}

SelftestRow named(const char* name) {
  SelftestRow row;
  row.name = name;
  return row;
}

// Oracle for harmonize: the literal quadruple sum.
AttentionMap harmonize_loop(const AttentionMap& mc, const SelfAttentionTensor& ms) {
  const int h = mc.height();
  const int w = mc.width();
  AttentionMap out(h, w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int a = 0; a < h; ++a) {
        for (int b = 0; b < w; ++b) {
          out(a, b) += mc(i, j) * static_cast<double>(ms.slice(i, j)[a * w + b]);
        }
      }
    }
  }
  return out;
}

struct Fixture {
  SyntheticBackbone backbone;
  SynthClip clip;
  UpdaterConfig cfg;
  TrainingClip training;

  Fixture() : backbone(SyntheticBackboneConfig{}) {
    SynthSpec spec;
    spec.frame_count = 8;
    clip = generate_synthetic_clip(spec, 11);
    cfg.learner.epochs = 1;
    cfg.learner.steps_per_epoch = 30;
    LabeledClip labeled{"selftest", clip.frames, clip.boxes};
    training = prepare_training_clip(labeled, backbone, cfg, 3);
  }
};

UpdaterModules modules_with_projection(std::uint64_t seed, int dim) {
  UpdaterModules m = UpdaterModules::create(seed, dim);
  std::mt19937_64 rng(seed + 1);
  m.projection = Linear::random(kMotionDim, dim, rng, 0.5);
  return m;
}

SelftestRow harmonize_row() {
  SelftestRow row = named("harmonize matches loop oracle");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    AttentionMap mc(4, 4);
    for (double& v : mc.values()) v = u(rng);
    std::vector<float> ms(256);
    for (int r = 0; r < 16; ++r) {
      double s = 0.0;
      for (int k = 0; k < 16; ++k) s += (ms[r * 16 + k] = static_cast<float>(u(rng)));
      for (int k = 0; k < 16; ++k) ms[r * 16 + k] = static_cast<float>(ms[r * 16 + k] / s);
    }
    const SelfAttentionTensor t(4, 4, ms);
    const AttentionMap a = harmonize(mc, t);
    const AttentionMap b = harmonize_loop(mc, t);
    for (int k = 0; k < 16; ++k) worst = std::max(worst, std::abs(a.values()[k] - b.values()[k]));
  }
  row.passed = worst < 1e-10;
  row.detail = "max abs diff " + fmt(worst);
  return row;
}

SelftestRow endpoints_row() {
  SelftestRow row = named("blend and update endpoints");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AttentionMap a(8, 8), b(8, 8);
  for (double& v : a.values()) v = u(rng);
  for (double& v : b.values()) v = u(rng);
  bool ok = blend(a, b, 0.0) == a && blend(a, b, 1.0) == b;

  const int dim = 16;
  Mlp2 head = Mlp2::random(dim, 2 * dim, dim, rng);
  Linear proj = Linear::random(kMotionDim, dim, rng);
  Eigen::VectorXd p(dim);
  for (int i = 0; i < dim; ++i) p[i] = u(rng);
  ConditionedMotion l{Eigen::VectorXd::Random(kMotionDim)};
  const PromptEmbedding prev(p);
  ok = ok && update_prompt(prev, l, head, proj, 1.0) == prev;
  const Eigen::VectorXd x = p + proj.forward(l.v);
  ok = ok && update_prompt(prev, l, head, proj, 0.0).values == head.forward(x);

  Linear eye(2, 2);
  eye.weight.setIdentity();
  const PromptEmbedding hand =
      update_prompt(PromptEmbedding(Eigen::Vector2d(1.0, 0.0)), ConditionedMotion{Eigen::Vector2d(0.0, 2.0)},
                    identity_blend_head(2), eye, 0.7);
  // 1 - 0.7 is 0.30000000000000004 in binary; the exact result is the
  // double after 0.6.
  const bool hand_ok = hand.values[0] == 1.0 && hand.values[1] == (1.0 - 0.7) * 2.0;
  row.passed = ok && hand_ok;
  row.detail = "hand case (" + fmt(hand.values[0]) + ", " + fmt(hand.values[1]) + ")";
  return row;
}

SelftestRow stochastic_row(const Fixture& f) {
  SelftestRow row = named("self-attention rows sum to one");
  const auto ms = f.backbone.self_attention(f.training.latents[0]);
  double worst = 0.0;
  bool nonneg = true;
  for (int r = 0; r < ms->positions(); ++r) {
    double s = 0.0;
    for (float v : ms->row(r)) {
      s += v;
      nonneg = nonneg && v >= 0.0f;
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  row.passed = nonneg && worst < 1e-6;
  row.detail = "max |sum - 1| " + fmt(worst);
  return row;
}

SelftestRow roundtrip_row() {
  SelftestRow row = named("box -> map -> box within one cell");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.0, 400.0), size(16.0, 110.0);
  const double cell = static_cast<double>(kInputSize) / kMapSize;
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const BBox b{pos(rng), pos(rng), size(rng), size(rng)};
    const AttentionMap m = gt_map_from_bbox(b, kInputSize, kInputSize, kMapSize, kMapSize);
    const BBox r = extract_bbox(m, kInputSize, kInputSize, 0.5);
    worst = std::max({worst, std::abs(r.x - b.x), std::abs(r.y - b.y),
                      std::abs(r.right() - b.right()), std::abs(r.bottom() - b.bottom())});
  }
  row.passed = worst <= cell;
  row.detail = "max edge error " + fmt(worst) + " px";
  return row;
}

SelftestRow prompt_gradient_row(const Fixture& f) {
  SelftestRow row = named("prompt loss gradient vs finite differences");
  double worst = 0.0;
  const LearnerConfig lcfg = f.cfg.learner;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);
    LearnerConfig sampled = lcfg;
    sampled.noise = NoiseMode::kSampled;
    const NoisyLatent n = make_noisy_latent(f.backbone, f.backbone.encode_image(f.clip.frames[0]),
                                            sampled, rng);
    const PromptEmbedding p = initial_prompt(f.backbone.prompt_dim(), 0.05, seed + 10);
    const GradCheck g = check_prompt_gradient(f.backbone, n.z, n.t, n.eps, p, f.training.gt[0],
                                              0.5, 1.0, seed);
    worst = std::max(worst, g.rel_error);
  }
  row.passed = worst < 1e-3;
  row.detail = "max rel error " + fmt(worst) + " over 3 seeds";
  return row;
}

SelftestRow updater_gradient_row(const Fixture& f) {
  SelftestRow row = named("updater gradients vs finite differences");
  const UpdaterModules m = modules_with_projection(5, f.backbone.prompt_dim());
  const int k = kWindow;
  UpdaterFrame frame{f.training.latents[k], f.training.steps[k],
                     std::span<const MotionFrame>(f.training.motion).subspan(0, kWindow + 1),
                     f.training.gt[k]};
  double worst = 0.0;
  std::string worst_name;
  for (const auto& g : check_updater_gradients(f.backbone, m, f.training.template_tokens,
                                               f.training.initial_prompt, frame, f.cfg, 7)) {
    if (g.rel_error >= worst) {
      worst = g.rel_error;
      worst_name = g.name;
    }
  }
  row.passed = worst < 1e-3;
  row.detail = "max rel error " + fmt(worst) + " (" + worst_name + ")";
  return row;
}

SelftestRow metrics_row() {
  SelftestRow row = named("metric hand cases");
  const BBox a{0, 0, 2, 1}, b{1, 0, 2, 1};
  const double o = iou(a, b);
  // IoU 0.55 passes thresholds 0, 0.05, ..., 0.55.
  const std::vector<BBox> pred{{0, 0, 11, 10}}, gt{{0, 0, 20, 10}};
  const double auc = success_auc(pred, gt);
  row.passed = std::abs(o - 1.0 / 3.0) < 1e-15 && std::abs(auc - 12.0 / 21.0) < 1e-15;
  row.detail = "iou " + fmt(o) + ", success_auc " + fmt(auc);
  return row;
}

SelftestRow archive_row(const std::filesystem::path& dir) {
  SelftestRow row = named("tensor archive round trip");
  UpdaterModules m = modules_with_projection(9, 32);
  save_modules(dir / "modules.json", m);
  UpdaterModules back = load_modules(dir / "modules.json");
  auto a = m.parameters();
  auto b = back.parameters();
  bool ok = a.size() == b.size();
  for (std::size_t i = 0; ok && i < a.size(); ++i) {
    ok = a[i].name == b[i].name && a[i].shape == b[i].shape;
    for (std::size_t k = 0; ok && k < a[i].data.size(); ++k) {
      ok = static_cast<double>(static_cast<float>(a[i].data[k])) == b[i].data[k];
    }
  }
  StoredPrompt sp{initial_prompt(64, 1.0, 3), 3, "{\"alpha\":0.5}"};
  save_prompt(dir / "prompt.json", sp);
  const StoredPrompt sb = load_prompt(dir / "prompt.json");
  ok = ok && sb.prompt.dim() == 64 && sb.seed == 3 &&
       sb.prompt.values == sp.prompt.values.cast<float>().cast<double>();
  row.passed = ok;
  row.detail = std::to_string(a.size()) + " tensors";
  return row;
}

SelftestRow protocol_row(const Fixture& f) {
  SelftestRow row = named("prompt frozen before frame 6; beta = 1 equals frozen run");
  const UpdaterModules m = modules_with_projection(6, f.backbone.prompt_dim());
  TrackConfig cfg;
  cfg.learner = f.cfg.learner;
  TrackSession s(f.clip.frames[0], f.clip.boxes[0], f.backbone, &m, cfg);
  bool frozen = true;
  for (int k = 1; k < 5; ++k) {
    s.step(f.clip.frames[k]);
    frozen = frozen && s.prompt() == s.initial_prompt();
  }
  s.step(f.clip.frames[5]);
  const bool moved = !(s.prompt() == s.initial_prompt());
  for (std::size_t k = 6; k < f.clip.frames.size(); ++k) s.step(f.clip.frames[k]);
  const bool length = s.trajectory().size() == f.clip.frames.size();

  cfg.beta = 1.0;
  const auto with_beta1 = track(f.clip.frames, f.clip.boxes[0], f.backbone, &m, cfg);
  const auto frozen_run = track(f.clip.frames, f.clip.boxes[0], f.backbone, nullptr, cfg);
  bool same = with_beta1.size() == frozen_run.size();
  for (std::size_t k = 0; same && k < with_beta1.size(); ++k) {
    same = with_beta1[k].box == frozen_run[k].box;
  }
  row.passed = frozen && moved && length && same;
  row.detail = std::string(frozen ? "" : "prompt moved early; ") + (moved ? "" : "no update at frame 6; ") +
               (length ? "" : "trajectory length; ") + (same ? "ok" : "beta=1 differs");
  return row;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < floor) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

GradCheck check_prompt_gradient(const Backbone& backbone, const LatentImage& z_t, int t,
                                std::span<const double> eps, const PromptEmbedding& p,
                                const AttentionMap& gt, double alpha, double dm_weight,
                                std::uint64_t direction_seed, double h) {
  Eigen::VectorXd grad;
  prompt_loss(backbone, z_t, t, eps, p, gt, alpha, dm_weight, &grad);
  std::mt19937_64 rng(direction_seed);
  const Eigen::VectorXd v = unit_direction(p.dim(), rng);
  const double plus =
      prompt_loss(backbone, z_t, t, eps, PromptEmbedding(p.values + h * v), gt, alpha, dm_weight).total;
  const double minus =
      prompt_loss(backbone, z_t, t, eps, PromptEmbedding(p.values - h * v), gt, alpha, dm_weight).total;
  GradCheck out{"prompt", grad.dot(v), (plus - minus) / (2.0 * h), 0.0};
  out.rel_error = relative_error(out.analytic, out.numeric);
  return out;
}

std::vector<std::string> updater_parameter_groups() {
  return {"motion.long_encoder",    "motion.short_encoder", "motion.query",
          "motion.long_attention",  "motion.short_attention", "motion.fusion",
          "blend_head",             "projection"};
}

std::vector<GradCheck> check_updater_gradients(const Backbone& backbone,
                                               const UpdaterModules& modules,
                                               const Eigen::MatrixXd& template_tokens,
                                               const PromptEmbedding& p_prev,
                                               const UpdaterFrame& frame,
                                               const UpdaterConfig& cfg,
                                               std::uint64_t direction_seed, double h) {
  UpdaterModules grads = modules.zeros_like();
  updater_step(backbone, modules, template_tokens, p_prev, frame, cfg, &grads);
  auto grad_views = grads.parameters();

  UpdaterModules probe = modules;
  auto views = probe.parameters();
  std::mt19937_64 rng(direction_seed);
  std::vector<GradCheck> out;
  for (const auto& group : updater_parameter_groups()) {
    std::vector<std::size_t> members;
    Eigen::Index n = 0;
    for (std::size_t i = 0; i < views.size(); ++i) {
      if (starts_with(views[i].name, group)) {
        members.push_back(i);
        n += static_cast<Eigen::Index>(views[i].data.size());
      }
    }
    if (members.empty()) throw ContractError("no parameters in group " + group);
    Eigen::VectorXd g(n);
    Eigen::Index o = 0;
    for (std::size_t i : members) {
      for (double x : grad_views[i].data) g[o++] = x;
    }
    // Half along the claimed gradient, half random: a random direction alone
    // sees ~1/sqrt(n) of it, while the gradient alone cannot expose a wrong
    // direction.
    Eigen::VectorXd v = unit_direction(n, rng);
    if (g.norm() > 0.0) v = (v + g.normalized()).normalized();
    const double analytic = g.dot(v);
    auto shifted = [&](double step) {
      Eigen::Index q = 0;
      for (std::size_t i : members) {
        for (std::size_t k = 0; k < views[i].data.size(); ++k) views[i].data[k] += step * v[q++];
      }
      const double loss = updater_step(backbone, probe, template_tokens, p_prev, frame, cfg).loss;
      q = 0;
      for (std::size_t i : members) {
        for (std::size_t k = 0; k < views[i].data.size(); ++k) views[i].data[k] -= step * v[q++];
      }
      return loss;
    };
    // Groups with tiny gradients (the query path) need a longer step for
    // the loss change to rise above rounding.
    const double step = std::clamp(1e-12 / std::max(std::abs(analytic), 1e-300), h, 100.0 * h);
    const double numeric = (shifted(step) - shifted(-step)) / (2.0 * step);
    out.push_back({group, analytic, numeric, relative_error(analytic, numeric)});
  }
  return out;
}

std::vector<SelftestRow> run_selftest(const std::function<void(const SelftestRow&)>& on_row) {
  std::vector<SelftestRow> rows;
  auto run = [&](const std::function<SelftestRow()>& check, const char* name) {
    const auto t0 = std::chrono::steady_clock::now();
    SelftestRow row;
    try {
      row = check();
    } catch (const std::exception& e) {
      row = {name, false, std::string("threw: ") + e.what()};
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_row) on_row(row);
    rows.push_back(row);
  };
  const auto tmp = std::filesystem::temp_directory_path() /
                   ("promptrack-selftest-" + std::to_string(::getpid()));
  std::filesystem::create_directories(tmp);

  run(harmonize_row, "harmonize");
  run(endpoints_row, "endpoints");
  run(roundtrip_row, "roundtrip");
  run(metrics_row, "metrics");
  run([&] { return archive_row(tmp); }, "archive");
  std::unique_ptr<Fixture> fixture;
  run([&] {
        fixture = std::make_unique<Fixture>();
        return SelftestRow{"fixture: synthetic clip and p1", true, "8 frames"};
      },
      "fixture");
  if (fixture) {
    run([&] { return stochastic_row(*fixture); }, "stochastic");
    run([&] { return prompt_gradient_row(*fixture); }, "prompt gradient");
    run([&] { return updater_gradient_row(*fixture); }, "updater gradient");
    run([&] { return protocol_row(*fixture); }, "protocol");
  }
  std::error_code ec;
  std::filesystem::remove_all(tmp, ec);
  return rows;
}

}  // namespace promptrack

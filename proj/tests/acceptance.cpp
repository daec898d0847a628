// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria, not counting those listed as known failures.
//
//   acceptance [--only 1,4,...] [--known-failures 5] [--log FILE]

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "promptrack/attention.hpp"
#include "promptrack/errors.hpp"
#include "promptrack/metrics.hpp"
#include "promptrack/pipeline.hpp"
#include "promptrack/selftest.hpp"
#include "promptrack/synth.hpp"
#include "promptrack/updater.hpp"

using namespace promptrack;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const SyntheticBackbone& backbone() {
  static const SyntheticBackbone b;
  return b;
}

// ---------------------------------------------------------------------------
// 1. Equation oracles

Outcome equation_oracles() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    AttentionMap mc(4, 4);
    for (double& v : mc.values()) v = u(rng);
    const SelfAttentionTensor ms = oracle::random_stochastic(4, 4, rng);
    const AttentionMap a = harmonize(mc, ms);
    const AttentionMap b = oracle::harmonize(mc, ms);
    for (int k = 0; k < 16; ++k) worst = std::max(worst, std::abs(a.values()[k] - b.values()[k]));
  }
  bool blend_ok = true;
  for (int c = 0; c < 20; ++c) {
    AttentionMap x(8, 8), y(8, 8);
    for (double& v : x.values()) v = u(rng);
    for (double& v : y.values()) v = u(rng);
    blend_ok = blend_ok && blend(x, y, 0.0) == x && blend(x, y, 1.0) == y;
  }
  bool beta_ok = true;
  for (int c = 0; c < 20; ++c) {
    const Mlp2 head = Mlp2::random(16, 32, 16, rng);
    const Linear proj = Linear::random(kMotionDim, 16, rng);
    const PromptEmbedding p(Eigen::VectorXd::Random(16));
    beta_ok = beta_ok &&
              update_prompt(p, ConditionedMotion{Eigen::VectorXd::Random(kMotionDim)}, head, proj, 1.0) == p;
  }
  Linear eye(2, 2);
  eye.weight.setIdentity();
  const PromptEmbedding hand =
      update_prompt(PromptEmbedding(Eigen::Vector2d(1.0, 0.0)), ConditionedMotion{Eigen::Vector2d(0.0, 2.0)},
                    identity_blend_head(2), eye, 0.7);
  // In binary, 1 - 0.7 is exactly 0.30000000000000004, so the correctly
  // rounded second component is 0.6000000000000001, one ulp above the
  // decimal 0.6. Both references are exact products of doubles.
  const double second = (1.0 - 0.7) * 2.0;
  const bool hand_ok = hand.values[0] == 1.0 && hand.values[1] == second &&
                       std::nextafter(0.6, 1.0) == second;
  return {worst < 1e-10 && blend_ok && beta_ok && hand_ok,
          "harmonize max diff " + fmt("%.2e", worst) + ", blend endpoints " + (blend_ok ? "exact" : "WRONG") +
              ", beta=1 " + (beta_ok ? "exact" : "WRONG") + ", hand case (" + fmt("%.17g", hand.values[0]) +
              ", " + fmt("%.17g", hand.values[1]) + ") bit-equal to the rounded reference, 1 ulp from decimal 0.6"};
}

// ---------------------------------------------------------------------------
// 2. Gradients

SynthClip planted(std::uint64_t seed) {
  SynthSpec spec;
  spec.frame_count = 1;
  spec.motion = MotionModel::kStatic;
  spec.texture_seed = seed;
  return generate_synthetic_clip(spec, seed);
}

Outcome gradients() {
  const auto& b = backbone();
  double worst_prompt = 0.0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const SynthClip clip = planted(100 + seed);
    const AttentionMap gt = gt_map_from_bbox(clip.boxes[0], 512, 512, kMapSize, kMapSize);
    LearnerConfig cfg;
    cfg.noise = NoiseMode::kSampled;
    std::mt19937_64 rng(seed);
    const NoisyLatent n = make_noisy_latent(b, b.encode_image(clip.frames[0]), cfg, rng);
    const PromptEmbedding p = initial_prompt(b.prompt_dim(), 0.05, seed);
    const double alpha = std::array{0.0, 0.5, 1.0}[seed % 3];
    const GradCheck g = check_prompt_gradient(b, n.z, n.t, n.eps, p, gt, alpha, 1.0, seed + 1000);
    worst_prompt = std::max(worst_prompt, g.rel_error);
  }

  SynthSpec spec;
  spec.frame_count = 8;
  spec.velocity_x = 4.0;
  const SynthClip clip = generate_synthetic_clip(spec, 77);
  UpdaterConfig cfg;
  cfg.learner.epochs = 1;
  cfg.learner.steps_per_epoch = 30;
  const TrainingClip tc = prepare_training_clip(LabeledClip{"grad", clip.frames, clip.boxes}, b, cfg, 5);
  double worst_updater = 0.0;
  std::string worst_group;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    UpdaterModules m = UpdaterModules::create(seed, b.prompt_dim());
    std::mt19937_64 rng(seed + 50);
    m.projection = Linear::random(kMotionDim, b.prompt_dim(), rng, 0.5);
    const std::size_t k = kWindow + seed % 3;
    const UpdaterFrame frame{tc.latents[k], tc.steps[k],
                             std::span<const MotionFrame>(tc.motion).subspan(k - kWindow, kWindow + 1), tc.gt[k]};
    for (const auto& g : check_updater_gradients(b, m, tc.template_tokens, tc.initial_prompt, frame, cfg, seed)) {
      if (g.rel_error > worst_updater) {
        worst_updater = g.rel_error;
        worst_group = g.name;
      }
    }
  }
  return {worst_prompt < 1e-3 && worst_updater < 1e-3,
          "12 seeds, prompt max rel err " + fmt("%.2e", worst_prompt) + ", updater max rel err " +
              fmt("%.2e", worst_updater) + " (" + worst_group + ", 8 groups)"};
}

// ---------------------------------------------------------------------------
// 3. Prompt-learning descent

Outcome learner_descent() {
  const auto& b = backbone();
  int good = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SynthClip clip = planted(200 + seed);
    LearnerConfig cfg;
    cfg.seed = seed;
    const LearnResult r = learn_initial_prompt(clip.frames[0], clip.boxes[0], b, cfg);
    const double ratio = r.trace.total.back() / r.trace.total.front();
    worst_ratio = std::max(worst_ratio, ratio);
    const int t = b.schedule().step_for_alpha_bar(cfg.inference_alpha_bar);
    const AttentionMap m = fused_map(b, b.encode_image(clip.frames[0]), t, r.prompt, cfg.alpha);
    int bi = 0, bj = 0;
    for (int i = 0; i < m.height(); ++i) {
      for (int j = 0; j < m.width(); ++j) {
        if (m(i, j) > m(bi, bj)) {
          bi = i;
          bj = j;
        }
      }
    }
    const double cell = 512.0 / m.width();
    const double cx = (bj + 0.5) * cell, cy = (bi + 0.5) * cell;
    const BBox& box = clip.boxes[0];
    const bool inside = cx >= box.x && cx <= box.right() && cy >= box.y && cy <= box.bottom();
    good += ratio < 0.5 && inside;
  }
  return {good >= 9, std::to_string(good) + "/10 seeds descend and peak in the box, worst loss ratio " +
                         fmt("%.3f", worst_ratio)};
}

// ---------------------------------------------------------------------------
// 4. End-to-end tracking, and the trained updaters 5 reuses

constexpr int kTrainClips = 12;
constexpr int kTrainFrames = 10;
constexpr int kTrainEpochs = 35;

UpdaterConfig train_config(HorizonSet horizons) {
  UpdaterConfig cfg;
  cfg.epochs = kTrainEpochs;
  cfg.max_clip_frames = kTrainFrames;
  cfg.horizons = horizons;
  return cfg;
}

const std::vector<TrainingClip>& training_clips() {
  static const std::vector<TrainingClip> clips = [] {
    std::vector<TrainingClip> out;
    const UpdaterConfig cfg = train_config(HorizonSet::kBoth);
    for (int i = 0; i < kTrainClips; ++i) {
      SynthSpec s;
      s.frame_count = kTrainFrames;
      s.motion = i % 2 ? MotionModel::kSinusoidal : MotionModel::kLinear;
      s.texture_seed = 500 + i;
      const SynthClip c = generate_synthetic_clip(s, 9000 + i);
      out.push_back(prepare_training_clip(LabeledClip{"train" + std::to_string(i), c.frames, c.boxes},
                                          backbone(), cfg, static_cast<std::uint64_t>(i)));
    }
    return out;
  }();
  return clips;
}

UpdaterModules trained(HorizonSet horizons) {
  UpdaterModules m = UpdaterModules::create(1, backbone().prompt_dim());
  train_updater(training_clips(), backbone(), train_config(horizons), m);
  return m;
}

const UpdaterModules& full_modules() {
  static const UpdaterModules m = trained(HorizonSet::kBoth);
  return m;
}

struct SuiteScore {
  double iou = 0.0;
  double prec5 = 0.0;
};

// Scores frames 2..N; frame 1 is the given box.
SuiteScore run_suite(const std::vector<SynthClip>& suite, const UpdaterModules* modules, TrackConfig cfg) {
  double iou_sum = 0.0;
  int hits = 0, n = 0;
  for (std::size_t s = 0; s < suite.size(); ++s) {
    cfg.seed = s;
    const auto traj = track(suite[s].frames, suite[s].boxes[0], backbone(), modules, cfg);
    for (std::size_t k = 1; k < traj.size(); ++k) {
      iou_sum += iou(traj[k].box, suite[s].boxes[k]);
      hits += center_error(traj[k].box, suite[s].boxes[k]) <= 5.0;
      ++n;
    }
  }
  return {iou_sum / n, static_cast<double>(hits) / n};
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const UpdaterModules& m = full_modules();
  const double train_s = seconds_since(t0);
  std::vector<SynthClip> suite;
  for (int s = 0; s < 20; ++s) {
    SynthSpec sp;
    sp.frame_count = 60;
    sp.motion = s % 2 ? MotionModel::kSinusoidal : MotionModel::kLinear;
    sp.texture_seed = 100 + s;
    suite.push_back(generate_synthetic_clip(sp, 1000 + s));
  }
  const SuiteScore score = run_suite(suite, &m, TrackConfig{});
  const double total = seconds_since(t0);
  return {score.iou >= 0.6 && score.prec5 >= 0.8 && total < 900.0,
          "20 x 60 frames, mean IoU " + fmt("%.3f", score.iou) + ", prec@5px " + fmt("%.3f", score.prec5) +
              ", updater trained " + std::to_string(kTrainClips) + " clips x " + std::to_string(kTrainEpochs) +
              " epochs in " + fmt("%.0f s", train_s) + ", total " + fmt("%.0f s", total)};
}

// ---------------------------------------------------------------------------
// 5. Ablation directions

Outcome ablations() {
  std::vector<SynthClip> suite;
  for (int s = 0; s < 8; ++s) {
    SynthSpec sp;
    sp.frame_count = 60;
    sp.motion = s % 2 ? MotionModel::kSinusoidal : MotionModel::kLinear;
    sp.texture_seed = 300 + s;
    sp.distractor_count = 2;
    sp.occlusions.push_back({25, 8, 0.5});
    sp.illumination_amplitude = 0.1;
    suite.push_back(generate_synthetic_clip(sp, 2000 + s));
  }
  const UpdaterModules long_only = trained(HorizonSet::kLongOnly);
  const UpdaterModules short_only = trained(HorizonSet::kShortOnly);

  const TrackConfig base;
  TrackConfig no_harmonize = base;
  no_harmonize.alpha = 1.0;
  TrackConfig frozen = base;
  frozen.beta = 1.0;
  TrackConfig long_cfg = base;
  long_cfg.horizons = HorizonSet::kLongOnly;
  TrackConfig short_cfg = base;
  short_cfg.horizons = HorizonSet::kShortOnly;

  const double full = run_suite(suite, &full_modules(), base).iou;
  const double a1 = run_suite(suite, &full_modules(), no_harmonize).iou;
  const double b1 = run_suite(suite, &full_modules(), frozen).iou;
  const double lo = run_suite(suite, &long_only, long_cfg).iou;
  const double so = run_suite(suite, &short_only, short_cfg).iou;
  return {full >= a1 && full >= b1 && full >= lo && full >= so,
          "mean IoU full " + fmt("%.5f", full) + ", alpha=1 " + fmt("%.5f", a1) + ", beta=1 " + fmt("%.5f", b1) +
              ", long-only " + fmt("%.5f", lo) + ", short-only " + fmt("%.5f", so)};
}

// ---------------------------------------------------------------------------
// 6. Protocol conformance

Outcome protocol() {
  SynthSpec spec;
  spec.frame_count = 12;
  spec.velocity_x = 3.0;
  const SynthClip clip = generate_synthetic_clip(spec, 60);
  UpdaterModules m = UpdaterModules::create(2, backbone().prompt_dim());
  std::mt19937_64 rng(4);
  m.projection = Linear::random(kMotionDim, backbone().prompt_dim(), rng, 0.5);
  TrackSession s(clip.frames[0], clip.boxes[0], backbone(), &m, TrackConfig{});
  bool held = true;
  for (int k = 1; k < 5; ++k) {
    s.step(clip.frames[static_cast<std::size_t>(k)]);
    held = held && s.prompt() == s.initial_prompt();
  }
  s.step(clip.frames[5]);
  const bool moved = !(s.prompt() == s.initial_prompt());
  for (std::size_t k = 6; k < clip.frames.size(); ++k) s.step(clip.frames[k]);
  const bool length_ok = s.trajectory().size() == clip.frames.size();

  std::mt19937_64 brng(8);
  std::uniform_real_distribution<double> pos(0, 400), size(10, 110);
  double worst = 0.0;
  for (int c = 0; c < 500; ++c) {
    const BBox b{pos(brng), pos(brng), size(brng), size(brng)};
    const BBox r = extract_bbox(gt_map_from_bbox(b, 512, 512, kMapSize, kMapSize), 512, 512, 0.5);
    worst = std::max({worst, std::abs(r.x - b.x), std::abs(r.y - b.y), std::abs(r.right() - b.right()),
                      std::abs(r.bottom() - b.bottom())});
  }
  const double cell = 512.0 / kMapSize;
  return {held && moved && length_ok && worst <= cell,
          std::string("frames 2-5 p1 ") + (held ? "bit-exact" : "CHANGED") + ", frame 6 " +
              (moved ? "updated" : "NOT updated") + ", trajectory length " + std::to_string(s.trajectory().size()) +
              "/" + std::to_string(clip.frames.size()) + ", box round trip max " + fmt("%.2f", worst) + " px (cell " +
              fmt("%.0f", cell) + ")"};
}

// ---------------------------------------------------------------------------
// 7. Metrics oracle

Outcome metrics_oracle() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pos(0, 60), size(1, 30), jit(-6, 6), st(0, 9);
  int mismatches = 0, cases = 0;
  for (int c = 0; c < 200; ++c) {
    std::vector<BBox> g, p;
    for (int k = 0; k < 40; ++k) {
      g.push_back({double(pos(rng)), double(pos(rng)), double(size(rng)), double(size(rng))});
      const BBox& b = g.back();
      p.push_back({b.x + jit(rng), b.y + jit(rng), std::max(1.0, b.w + jit(rng)), std::max(1.0, b.h + jit(rng))});
    }
    for (std::size_t k = 0; k < g.size(); ++k) mismatches += iou(p[k], g[k]) != oracle::iou_pixels(p[k], g[k]);
    mismatches += success_auc(p, g) != oracle::success_auc(p, g);
    mismatches += precision_score(p, g) != oracle::precision(p, g, 20.0);
    mismatches += normalized_precision(p, g) != oracle::normalized_precision(p, g);
    VotRun run;
    run.boxes = p;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const int s = st(rng);
      run.status.push_back(k == 0   ? VotStatus::kInit
                           : s == 0 ? VotStatus::kFailure
                           : s == 1 ? VotStatus::kSkipped
                           : s == 2 ? VotStatus::kInit
                                    : VotStatus::kTracked);
    }
    const VotResult v = vot_eval(run, g);
    const oracle::Vot o = oracle::vot(run, g);
    mismatches += v.eao_approx != o.eao;
    mismatches += v.accuracy != o.acc;
    mismatches += v.robustness != o.rob;
    cases += 40 + 6;
  }
  const double hand_iou = iou({0, 0, 2, 1}, {1, 0, 2, 1});
  const std::vector<BBox> hp{{0, 0, 11, 10}}, hg{{0, 0, 20, 10}};
  const double hand_auc = success_auc(hp, hg);
  const bool hand_ok = hand_iou == 1.0 / 3.0 && hand_auc == 12.0 / 21.0;
  return {mismatches == 0 && hand_ok, std::to_string(mismatches) + " mismatches in " + std::to_string(cases) +
                                          " comparisons, IoU hand case " + fmt("%.17g", hand_iou) +
                                          ", success_auc hand case " + fmt("%.17g", hand_auc)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 when unbounded
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptrack acceptance run"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
  std::vector<int> known;
  app.add_option("--known-failures", known, "Criteria reported but not counted in the exit status")->delimiter(',');
  std::string log_path;
  app.add_option("--log", log_path, "Also write the result lines to this file");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  const std::set<int> known_set(known.begin(), known.end());
  std::ofstream log;
  if (!log_path.empty()) log.open(log_path);
  const auto emit = [&](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (log) log << line << '\n' << std::flush;
  };

  const std::vector<Criterion> criteria{
      {1, "equation oracles", 5.0, equation_oracles},
      {2, "gradients vs central differences", 120.0, gradients},
      {3, "prompt-learning descent", 180.0, learner_descent},
      {4, "end-to-end synthetic tracking", 900.0, end_to_end},
      {5, "ablation directions", 0.0, ablations},
      {6, "protocol conformance", 0.0, protocol},
      {7, "metrics oracle", 0.0, metrics_oracle},
  };
  int failed = 0, failed_known = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double dt = seconds_since(t0);
    bool pass = o.passed;
    // Criterion 4 times itself, training included.
    if (c.budget_s > 0.0 && c.id != 4 && dt >= c.budget_s) {
      pass = false;
      o.detail += ", over the " + fmt("%.0f s", c.budget_s) + " budget";
    }
    const bool known_failure = known_set.contains(c.id);
    if (!pass) (known_failure ? failed_known : failed) += 1;
    emit(std::string(pass ? "PASS" : "FAIL") + "  " + std::to_string(c.id) + " " + c.name + ": " + o.detail + fmt(" (%.1f s)", dt) +
         (!pass && known_failure ? " [known failure]" : ""));
  }
  emit(std::to_string(failed) + " failed, " + std::to_string(failed_known) + " known failures");
  return failed;
}

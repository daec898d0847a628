// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "promptrack/backbone.hpp"
#include "promptrack/errors.hpp"
#include "promptrack/prompt_learner.hpp"
#include "promptrack/selftest.hpp"
#include "promptrack/synth.hpp"

using namespace promptrack;

namespace {

const SyntheticBackbone& shared_backbone() {
  static const SyntheticBackbone b;
  return b;
}

SynthClip planted(std::uint64_t seed) {
  SynthSpec spec;
  spec.frame_count = 1;
  spec.motion = MotionModel::kStatic;
  spec.texture_seed = seed;
  return generate_synthetic_clip(spec, seed);
}

}  // namespace

TEST_CASE("encode is deterministic and sized like the latent") {
  const auto& b = shared_backbone();
  const Image f = planted(1).frames[0];
  const LatentImage z1 = b.encode_image(f);
  const LatentImage z2 = b.encode_image(f);
  CHECK(z1.shape == b.latent_shape());
  CHECK(z1.values == z2.values);
  CHECK_THROWS_AS(b.encode_image(Image(64, 64)), InputError);
}

TEST_CASE("self-attention slices are row-stochastic") {
  const auto& b = shared_backbone();
  const auto ms = b.self_attention(b.encode_image(planted(2).frames[0]));
  REQUIRE(ms->height() == kMapSize);
  for (int r = 0; r < ms->positions(); r += 37) {
    double s = 0.0;
    for (float v : ms->row(r)) {
      CHECK(v >= 0.0f);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("cross maps are distributions over positions") {
  const auto& b = shared_backbone();
  const LatentImage z = b.encode_image(planted(3).frames[0]);
  const BackboneOutput out = b.forward(z, 10, initial_prompt(b.prompt_dim(), 0.1, 3));
  REQUIRE(!out.cross_maps.empty());
  CHECK(out.cross_maps[0].sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.noise_pred.shape == z.shape);
}

TEST_CASE("parameter hash is stable and seed dependent") {
  const SyntheticBackbone a(SyntheticBackboneConfig{.seed = 3});
  const SyntheticBackbone b(SyntheticBackboneConfig{.seed = 3});
  const SyntheticBackbone c(SyntheticBackboneConfig{.seed = 4});
  CHECK(a.parameter_hash() == b.parameter_hash());
  CHECK(a.parameter_hash() != c.parameter_hash());
}

TEST_CASE("noise schedule starts clean and decreases") {
  const NoiseSchedule s = NoiseSchedule::linear();
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(500) < s.alpha_bar(100));
  CHECK(s.alpha_bar(s.step_for_alpha_bar(0.98)) == doctest::Approx(0.98).epsilon(0.01));
  CHECK_THROWS_AS(NoiseSchedule({1.0, 1.2}), InputError);
}

TEST_CASE("prompt loss gradient matches central differences") {
  const auto& b = shared_backbone();
  const SynthClip clip = planted(4);
  const AttentionMap gt = gt_map_from_bbox(clip.boxes[0], 512, 512, kMapSize, kMapSize);
  LearnerConfig cfg;
  cfg.noise = NoiseMode::kSampled;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    std::mt19937_64 rng(seed);
    const NoisyLatent n = make_noisy_latent(b, b.encode_image(clip.frames[0]), cfg, rng);
    const PromptEmbedding p = initial_prompt(b.prompt_dim(), 0.05, seed);
    for (double alpha : {0.0, 0.5, 1.0}) {
      const GradCheck g = check_prompt_gradient(b, n.z, n.t, n.eps, p, gt, alpha, 1.0, seed + 100);
      CHECK(g.rel_error < 1e-3);
    }
  }
}

TEST_CASE("prompt learning lowers the loss and activates the box") {
  const auto& b = shared_backbone();
  const SynthClip clip = planted(5);
  LearnerConfig cfg;
  cfg.seed = 5;
  const LearnResult r = learn_initial_prompt(clip.frames[0], clip.boxes[0], b, cfg);
  REQUIRE(r.trace.total.size() == static_cast<std::size_t>(cfg.epochs * cfg.steps_per_epoch));
  CHECK(r.trace.total.back() < 0.5 * r.trace.total.front());
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
  const double cx = (bj + 0.5) * 8.0, cy = (bi + 0.5) * 8.0;
  const BBox& box = clip.boxes[0];
  CHECK(cx >= box.x);
  CHECK(cx <= box.right());
  CHECK(cy >= box.y);
  CHECK(cy <= box.bottom());
}

TEST_CASE("prompt learning is deterministic under its seed") {
  const auto& b = shared_backbone();
  const SynthClip clip = planted(6);
  LearnerConfig cfg;
  cfg.epochs = 1;
  cfg.steps_per_epoch = 10;
  cfg.noise = NoiseMode::kSampled;
  cfg.seed = 9;
  const LearnResult a = learn_initial_prompt(clip.frames[0], clip.boxes[0], b, cfg);
  const LearnResult c = learn_initial_prompt(clip.frames[0], clip.boxes[0], b, cfg);
  CHECK(a.prompt == c.prompt);
  CHECK(a.trace.total == c.trace.total);
}

TEST_CASE("prompt learning rejects degenerate input") {
  const auto& b = shared_backbone();
  const SynthClip clip = planted(7);
  CHECK_THROWS_AS(learn_initial_prompt(clip.frames[0], BBox{10, 10, 0, 5}, b, LearnerConfig{}),
                  InputError);
  CHECK_THROWS_AS(learn_initial_prompt(Image(100, 100), clip.boxes[0], b, LearnerConfig{}), InputError);
}

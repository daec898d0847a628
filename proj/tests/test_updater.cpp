// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "promptrack/errors.hpp"
#include "promptrack/selftest.hpp"
#include "promptrack/updater.hpp"

using namespace promptrack;

namespace {

const SyntheticBackbone& backbone() {
  static const SyntheticBackbone b;
  return b;
}

UpdaterConfig small_config() {
  UpdaterConfig cfg;
  cfg.learner.epochs = 1;
  cfg.learner.steps_per_epoch = 20;
  cfg.epochs = 2;
  return cfg;
}

const TrainingClip& training_clip() {
  static const TrainingClip clip = [] {
    SynthSpec spec;
    spec.frame_count = 8;
    spec.velocity_x = 4.0;
    const SynthClip c = generate_synthetic_clip(spec, 31);
    return prepare_training_clip(LabeledClip{"t", c.frames, c.boxes}, backbone(), small_config(), 1);
  }();
  return clip;
}

UpdaterModules live_modules(std::uint64_t seed, int dim) {
  UpdaterModules m = UpdaterModules::create(seed, dim);
  std::mt19937_64 rng(seed + 100);
  m.projection = Linear::random(kMotionDim, dim, rng, 0.5);
  return m;
}

}  // namespace

TEST_CASE("identity blend head reproduces its input") {
  const Mlp2 head = identity_blend_head(32);
  const Eigen::VectorXd x = Eigen::VectorXd::Random(32);
  CHECK(head.forward(x) == x);
}

TEST_CASE("update endpoints are exact for arbitrary heads") {
  std::mt19937_64 rng(1);
  for (int c = 0; c < 5; ++c) {
    const Mlp2 head = Mlp2::random(16, 32, 16, rng);
    const Linear proj = Linear::random(kMotionDim, 16, rng);
    const PromptEmbedding p(Eigen::VectorXd::Random(16));
    const ConditionedMotion l{Eigen::VectorXd::Random(kMotionDim)};
    CHECK(update_prompt(p, l, head, proj, 1.0) == p);
    CHECK(update_prompt(p, l, head, proj, 0.0).values == head.forward(p.values + proj.forward(l.v)));
  }
}

TEST_CASE("update hand case (1, 0) + (0, 2) at beta 0.7") {
  Linear eye(2, 2);
  eye.weight.setIdentity();
  const PromptEmbedding out = update_prompt(PromptEmbedding(Eigen::Vector2d(1.0, 0.0)),
                                            ConditionedMotion{Eigen::Vector2d(0.0, 2.0)},
                                            identity_blend_head(2), eye, 0.7);
  // 0.3 * 1 + 0.7 * 1 and 0.3 * 2 round to within one ulp of 1.0 and 0.6.
  const double ulp = std::numeric_limits<double>::epsilon();
  CHECK(std::abs(out.values[0] - 1.0) <= ulp);
  CHECK(std::abs(out.values[1] - 0.6) <= ulp);
}

TEST_CASE("update rejects mismatched widths and bad beta") {
  const PromptEmbedding p(Eigen::VectorXd::Zero(8));
  const ConditionedMotion l{Eigen::VectorXd::Zero(kMotionDim)};
  CHECK_THROWS_AS(update_prompt(p, l, identity_blend_head(4), Linear(kMotionDim, 8), 0.5), ContractError);
  CHECK_THROWS_AS(update_prompt(p, l, identity_blend_head(8), Linear(kMotionDim, 8), 1.5), InputError);
}

TEST_CASE("a fresh updater leaves the prompt unchanged") {
  const UpdaterModules m = UpdaterModules::create(3, 64);
  const PromptEmbedding p(Eigen::VectorXd::Random(64));
  const ConditionedMotion l{Eigen::VectorXd::Random(kMotionDim)};
  const PromptEmbedding out = update_prompt(p, l, m.blend_head, m.projection, 0.7);
  CHECK((out.values - p.values).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("update is Lipschitz in the motion with the measured head constant") {
  std::mt19937_64 rng(2);
  const int dim = 24;
  const Mlp2 head = Mlp2::random(dim, 2 * dim, dim, rng);
  const Linear proj = Linear::random(kMotionDim, dim, rng);
  // Spectral norms bound the head's constant: relu is 1-Lipschitz.
  const double l_head = head.fc1.weight.jacobiSvd().singularValues()[0] *
                        head.fc2.weight.jacobiSvd().singularValues()[0];
  const double beta = 0.7;
  const PromptEmbedding p(Eigen::VectorXd::Random(dim));
  for (int c = 0; c < 50; ++c) {
    const ConditionedMotion l1{Eigen::VectorXd::Random(kMotionDim)};
    const ConditionedMotion l2{Eigen::VectorXd::Random(kMotionDim)};
    const double lhs = (update_prompt(p, l1, head, proj, beta).values -
                        update_prompt(p, l2, head, proj, beta).values).norm();
    const double rhs = (1 - beta) * l_head * (proj.weight * (l1.v - l2.v)).norm();
    CHECK(lhs <= rhs * (1 + 1e-12));
  }
}

TEST_CASE("updater gradients match central differences for every group") {
  const TrainingClip& clip = training_clip();
  const UpdaterConfig cfg = small_config();
  for (std::uint64_t seed = 0; seed < 2; ++seed) {
    const UpdaterModules m = live_modules(seed, backbone().prompt_dim());
    const std::size_t k = kWindow + seed;
    const UpdaterFrame frame{clip.latents[k], clip.steps[k],
                             std::span<const MotionFrame>(clip.motion).subspan(k - kWindow, kWindow + 1),
                             clip.gt[k]};
    const auto checks = check_updater_gradients(backbone(), m, clip.template_tokens,
                                                clip.initial_prompt, frame, cfg, seed);
    CHECK(checks.size() == updater_parameter_groups().size());
    for (const auto& g : checks) {
      INFO(g.name << " analytic " << g.analytic << " numeric " << g.numeric);
      CHECK(g.rel_error < 1e-3);
    }
  }
}

TEST_CASE("training moves the updater but not the backbone or p1") {
  const TrainingClip& clip = training_clip();
  const std::uint64_t hash = backbone().parameter_hash();
  const PromptEmbedding p1 = clip.initial_prompt;
  UpdaterModules a = UpdaterModules::create(4, backbone().prompt_dim());
  UpdaterModules b = UpdaterModules::create(4, backbone().prompt_dim());
  const UpdaterModules before = a;
  const std::vector<TrainingClip> clips{clip};
  const TrainReport ra = train_updater(clips, backbone(), small_config(), a);
  const TrainReport rb = train_updater(clips, backbone(), small_config(), b);
  CHECK(ra.epoch_loss.size() == 2);
  CHECK(ra.epoch_loss == rb.epoch_loss);
  CHECK(a.projection.weight == b.projection.weight);
  CHECK(a.projection.weight != before.projection.weight);
  CHECK(backbone().parameter_hash() == hash);
  CHECK(clips[0].initial_prompt == p1);
}

TEST_CASE("training rejects short clips and mismatched widths") {
  TrainingClip shortened = training_clip();
  shortened.latents.resize(kWindow + 1);
  UpdaterModules m = UpdaterModules::create(1, backbone().prompt_dim());
  const std::vector<TrainingClip> bad{shortened};
  CHECK_THROWS_AS(train_updater(bad, backbone(), small_config(), m), InputError);
  UpdaterModules narrow = UpdaterModules::create(1, 16);
  const std::vector<TrainingClip> good{training_clip()};
  CHECK_THROWS_AS(train_updater(good, backbone(), small_config(), narrow), ContractError);
}

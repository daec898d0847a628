// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Tracking sessions: learn p1 on frame 1, then for each later frame update
// the prompt (from update_start_frame on), compute the fused map and read
// the box off it.

#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "promptrack/backbone.hpp"
#include "promptrack/dataset.hpp"
#include "promptrack/image.hpp"
#include "promptrack/metrics.hpp"
#include "promptrack/motion.hpp"
#include "promptrack/prompt_learner.hpp"
#include "promptrack/updater.hpp"

namespace promptrack {

enum class OnLost {
  kHoldLastBox,  // emit the previous box with the lost flag set
};

struct TrackConfig {
  double alpha = 0.5;
  double beta = 0.7;
  double tau = 0.5;
  int update_start_frame = 6;
  /// Noise policy and step for the per-frame backbone pass.
  NoiseMode noise = NoiseMode::kZero;
  double inference_alpha_bar = 0.98;
  std::uint64_t seed = 0;
  OnLost on_lost = OnLost::kHoldLastBox;
  HorizonSet horizons = HorizonSet::kBoth;
  /// Frame-1 prompt learning; alpha, noise and seed are taken from above.
  LearnerConfig learner;
};

/// One video. Strictly sequential; the backbone and modules must outlive it.
/// `modules` may be null, which freezes the prompt at p1.
class TrackSession {
 public:
  TrackSession(const Image& frame1, const BBox& bbox1, const Backbone& backbone,
               const UpdaterModules* modules, const TrackConfig& cfg);

  /// Processes the next frame. `frame_index` (1-based) defaults to the next
  /// one; anything else is an InputError.
  const TrajectoryEntry& step(const Image& frame, int frame_index = 0);

  int frames_seen() const { return static_cast<int>(trajectory_.size()); }
  const PromptEmbedding& prompt() const { return prompt_; }
  const PromptEmbedding& initial_prompt() const { return initial_prompt_; }
  const LearnTrace& learn_trace() const { return learn_trace_; }
  const std::vector<TrajectoryEntry>& trajectory() const { return trajectory_; }
  /// Fused map of the latest frame, in backbone input coordinates.
  const AttentionMap& last_map() const { return last_map_; }
  const Letterbox& letterbox() const { return letterbox_; }
  const TrackConfig& config() const { return cfg_; }

 private:
  AttentionMap compute_map(const Image& input, int frame_index) const;

  const Backbone* backbone_;
  const UpdaterModules* modules_;
  TrackConfig cfg_;
  Letterbox letterbox_;
  PromptEmbedding initial_prompt_;
  PromptEmbedding prompt_;
  LearnTrace learn_trace_;
  Eigen::MatrixXd template_tokens_;
  std::deque<MotionFrame> window_;
  std::vector<TrajectoryEntry> trajectory_;
  AttentionMap last_map_;
};

/// open_session + step over frames 2..N; one entry per frame.
std::vector<TrajectoryEntry> track(std::span<const Image> frames, const BBox& bbox1,
                                   const Backbone& backbone, const UpdaterModules* modules,
                                   const TrackConfig& cfg);

/// Reset protocol: a frame with zero overlap against `gts` is a failure; the
/// tracker restarts on the ground truth `skip` frames later.
VotRun track_with_resets(std::span<const Image> frames, std::span<const BBox> gts,
                         const Backbone& backbone, const UpdaterModules* modules,
                         const TrackConfig& cfg, int skip = 5);

}  // namespace promptrack

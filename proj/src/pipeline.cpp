// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/pipeline.hpp"

#include <sstream>

#include "promptrack/errors.hpp"

namespace promptrack {

namespace {

// Padding never holds the target; its cells are cleared so a map peak on
// the padding border cannot become the box.
AttentionMap mask_padding(AttentionMap m, const Letterbox& lb) {
  if (lb.is_identity()) return m;
  const BBox c = lb.content();
  const double cell_w = static_cast<double>(lb.size()) / m.width();
  const double cell_h = static_cast<double>(lb.size()) / m.height();
  for (int i = 0; i < m.height(); ++i) {
    const double cy = (i + 0.5) * cell_h;
    for (int j = 0; j < m.width(); ++j) {
      const double cx = (j + 0.5) * cell_w;
      if (cx < c.x || cx >= c.right() || cy < c.y || cy >= c.bottom()) m(i, j) = 0.0;
    }
  }
  return m;
}

}  // namespace

TrackSession::TrackSession(const Image& frame1, const BBox& bbox1, const Backbone& backbone,
                           const UpdaterModules* modules, const TrackConfig& cfg)
    : backbone_(&backbone), modules_(modules), cfg_(cfg) {
  if (cfg.update_start_frame < 2) throw InputError("track: update_start_frame must be >= 2");
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) throw InputError("track: tau must lie in (0, 1)");
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw InputError("track: beta must lie in [0, 1]");
  if (frame1.empty()) throw InputError("track: empty first frame");
  if (!is_valid(bbox1) || !intersects_frame(bbox1, frame1.width, frame1.height)) {
    throw InputError("track: initial box must be valid and inside the frame");
  }
  if (modules != nullptr && modules->prompt_dim() != backbone.prompt_dim()) {
    throw ContractError("track: updater modules and backbone disagree on prompt width");
  }
  letterbox_ = Letterbox(frame1.width, frame1.height, kInputSize);
  const Image input = letterbox_.apply(frame1);
  const BBox box = letterbox_.to_input(clip_to_frame(bbox1, frame1.width, frame1.height));

  LearnerConfig lcfg = cfg.learner;
  lcfg.alpha = cfg.alpha;
  lcfg.noise = cfg.noise;
  lcfg.inference_alpha_bar = cfg.inference_alpha_bar;
  lcfg.seed = cfg.seed;
  LearnResult learned = learn_initial_prompt(input, box, backbone, lcfg);
  initial_prompt_ = learned.prompt;
  prompt_ = std::move(learned.prompt);
  learn_trace_ = std::move(learned.trace);

  if (modules_ != nullptr) template_tokens_ = QueryExtractor::prepare(crop(input, box));
  window_.push_back(make_motion_frame(input));
  last_map_ = compute_map(input, 1);
  trajectory_.push_back({1, bbox1, last_map_.max(), false});
}

AttentionMap TrackSession::compute_map(const Image& input, int frame_index) const {
  LearnerConfig lcfg = cfg_.learner;
  lcfg.noise = cfg_.noise;
  lcfg.inference_alpha_bar = cfg_.inference_alpha_bar;
  std::mt19937_64 rng(cfg_.seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(frame_index));
  const NoisyLatent noisy = make_noisy_latent(*backbone_, backbone_->encode_image(input), lcfg, rng);
  return mask_padding(fused_map(*backbone_, noisy.z, noisy.t, prompt_, cfg_.alpha), letterbox_);
}

const TrajectoryEntry& TrackSession::step(const Image& frame, int frame_index) {
  const int expected = frames_seen() + 1;
  if (frame_index != 0 && frame_index != expected) {
    std::ostringstream oss;
    oss << "track: frame " << frame_index << " arrived out of order; expected " << expected;
    throw InputError(oss.str());
  }
  const Image input = letterbox_.apply(frame);
  window_.push_back(make_motion_frame(input));
  while (window_.size() > static_cast<std::size_t>(kWindow + 1)) window_.pop_front();

  if (expected >= cfg_.update_start_frame && modules_ != nullptr && cfg_.beta != 1.0) {
    // Early starts see fewer than kWindow + 1 frames; repeat the oldest.
    std::vector<MotionFrame> window(window_.begin(), window_.end());
    while (window.size() < static_cast<std::size_t>(kWindow + 1)) window.insert(window.begin(), window.front());
    const ConditionedMotion l =
        extract_motion(modules_->motion, window, template_tokens_, cfg_.horizons);
    prompt_ = update_prompt(prompt_, l, modules_->blend_head, modules_->projection, cfg_.beta);
  }

  last_map_ = compute_map(input, expected);
  TrajectoryEntry entry;
  entry.frame_index = expected;
  entry.confidence = last_map_.max();
  try {
    const BBox in_box = extract_bbox(last_map_, kInputSize, kInputSize, cfg_.tau);
    entry.box = clip_to_frame(letterbox_.to_source(in_box), letterbox_.source_width(),
                              letterbox_.source_height());
    if (!is_valid(entry.box)) throw LostTarget("box left the frame");
  } catch (const LostTarget&) {
    entry.box = trajectory_.back().box;
    entry.lost = true;
  }
  trajectory_.push_back(entry);
  return trajectory_.back();
}

std::vector<TrajectoryEntry> track(std::span<const Image> frames, const BBox& bbox1,
                                   const Backbone& backbone, const UpdaterModules* modules,
                                   const TrackConfig& cfg) {
  if (frames.empty()) throw InputError("track: no frames");
  TrackSession session(frames[0], bbox1, backbone, modules, cfg);
  for (std::size_t k = 1; k < frames.size(); ++k) session.step(frames[k]);
  return session.trajectory();
}

VotRun track_with_resets(std::span<const Image> frames, std::span<const BBox> gts,
                         const Backbone& backbone, const UpdaterModules* modules,
                         const TrackConfig& cfg, int skip) {
  if (frames.empty() || frames.size() != gts.size()) {
    throw InputError("track_with_resets: need one GT box per frame");
  }
  if (skip < 1) throw InputError("track_with_resets: skip must be >= 1");
  VotRun run;
  run.boxes.assign(frames.size(), BBox{});
  run.status.assign(frames.size(), VotStatus::kSkipped);
  std::size_t start = 0;
  while (start < frames.size()) {
    TrackSession session(frames[start], gts[start], backbone, modules, cfg);
    run.boxes[start] = gts[start];
    run.status[start] = VotStatus::kInit;
    std::size_t k = start + 1;
    bool failed = false;
    for (; k < frames.size(); ++k) {
      const BBox b = session.step(frames[k]).box;
      run.boxes[k] = b;
      if (iou(b, gts[k]) == 0.0) {
        run.status[k] = VotStatus::kFailure;
        failed = true;
        break;
      }
      run.status[k] = VotStatus::kTracked;
    }
    if (!failed) break;
    start = k + static_cast<std::size_t>(skip);
  }
  return run;
}

}  // namespace promptrack

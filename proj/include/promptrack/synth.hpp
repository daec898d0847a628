// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic videos with exact ground truth, and the pseudo-label provider
// interface that training reads clips through.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "promptrack/attention.hpp"
#include "promptrack/image.hpp"

namespace promptrack {

enum class MotionModel { kStatic, kLinear, kSinusoidal, kPiecewise };

struct OcclusionEvent {
  int start = 0;
  int duration = 0;
  /// Fraction of the target width hidden, from its left edge.
  double coverage = 0.5;
};

struct SynthSpec {
  int frame_count = 60;
  int frame_width = 512;
  int frame_height = 512;
  int target_width = 80;
  int target_height = 64;
  std::uint64_t texture_seed = 1;
  MotionModel motion = MotionModel::kLinear;
  /// Per-frame displacement for linear motion (pixels).
  double velocity_x = 2.0;
  double velocity_y = 1.0;
  /// Sinusoidal: horizontal amplitude (pixels) and period (frames).
  double amplitude = 60.0;
  double period = 40.0;
  /// Piecewise: frames per segment and speed along each segment.
  int segment_frames = 15;
  double segment_speed = 3.0;
  std::vector<OcclusionEvent> occlusions;
  /// Relative amplitude of a global sinusoidal brightness drift.
  double illumination_amplitude = 0.0;
  int distractor_count = 0;
  double target_texture = 0.08;
  double background_texture = 0.12;
};

struct SynthClip {
  std::vector<Image> frames;
  std::vector<BBox> boxes;
  /// Base RGB colour of the target (before texture and drift).
  std::array<std::uint8_t, 3> target_color{};
};

/// Bit-deterministic under (spec, seed). Throws InputError when the target
/// does not fit in the frame or the spec is malformed.
SynthClip generate_synthetic_clip(const SynthSpec& spec, std::uint64_t seed);

MotionModel parse_motion_model(const std::string& name);
std::string to_string(MotionModel m);

/// A clip with one pseudo-label box per frame.
struct LabeledClip {
  std::string name;
  std::vector<Image> frames;
  std::vector<BBox> boxes;
};

/// Source of pseudo-labelled training clips. Real providers (e.g. optical
/// flow based) plug in here; the bundled ones are the synthetic generator
/// and a directory reader.
class PseudoLabelSource {
 public:
  virtual ~PseudoLabelSource() = default;
  virtual std::string id() const = 0;
  virtual std::size_t clip_count() const = 0;
  virtual LabeledClip clip(std::size_t index) const = 0;
};

/// Clip i is generate_synthetic_clip(spec, base_seed + i) with
/// texture_seed advanced by i.
class SyntheticLabelSource final : public PseudoLabelSource {
 public:
  SyntheticLabelSource(SynthSpec spec, std::size_t count, std::uint64_t base_seed);

  std::string id() const override { return "synthetic"; }
  std::size_t clip_count() const override { return count_; }
  LabeledClip clip(std::size_t index) const override;

 private:
  SynthSpec spec_;
  std::size_t count_;
  std::uint64_t base_seed_;
};

/// Every sub-directory of `root` holding frames and a groundtruth.txt.
class DirectoryLabelSource final : public PseudoLabelSource {
 public:
  explicit DirectoryLabelSource(const std::filesystem::path& root);

  std::string id() const override { return "directory"; }
  std::size_t clip_count() const override { return dirs_.size(); }
  LabeledClip clip(std::size_t index) const override;

 private:
  std::vector<std::filesystem::path> dirs_;
};

}  // namespace promptrack

// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// One JSON document holding every configuration struct:
//
//   {"seed": 0,
//    "backbone": {...SyntheticBackboneConfig...},
//    "learner":  {...LearnerConfig...},
//    "updater":  {...UpdaterConfig...},
//    "track":    {...TrackConfig...},
//    "synth":    {...SynthSpec..., "occlusions": [{"start", "duration", "coverage"}]},
//    "train_clips": 12}
//
// Missing keys keep their defaults; unknown keys are an InputError. The
// "learner" block is used both when training the updater and at test time.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "promptrack/backbone.hpp"
#include "promptrack/pipeline.hpp"
#include "promptrack/prompt_learner.hpp"
#include "promptrack/synth.hpp"
#include "promptrack/updater.hpp"

namespace promptrack {

struct Config {
  std::uint64_t seed = 0;
  SyntheticBackboneConfig backbone;
  LearnerConfig learner;
  UpdaterConfig updater;
  TrackConfig track;
  SynthSpec synth;
  int train_clips = 12;

  /// `updater` with the shared learner block and the global seed applied.
  UpdaterConfig updater_config() const;
  /// `track` with the shared learner block and the global seed applied.
  TrackConfig track_config() const;
};

Config config_from_json(const std::string& text);
Config load_config(const std::filesystem::path& path);
std::string config_to_json(const Config& cfg);

/// Overrides one field addressed by a dotted path ("track.beta") with a
/// JSON value ("0.7", "\"sinusoidal\""). Bare words are taken as strings.
void set_config_value(Config& cfg, const std::string& key, const std::string& value);

std::string to_string(HorizonSet h);
HorizonSet parse_horizons(const std::string& name);
std::string to_string(NoiseMode m);
NoiseMode parse_noise_mode(const std::string& name);

}  // namespace promptrack

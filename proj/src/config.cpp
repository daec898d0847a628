// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

using json = nlohmann::ordered_json;

// Reads the known keys of one JSON object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InputError("config: '" + where_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw InputError("config: '" + where_ + "." + key + "' has the wrong type");
    }
  }

  template <class T, class Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    get(key, s);
    if (!s.empty()) out = parse(s);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw InputError("config: unknown key '" + where_ + "." + k + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string, std::less<>> seen_;
};

OnLost parse_on_lost(const std::string& s) {
  if (s == "hold-last-box") return OnLost::kHoldLastBox;
  throw InputError("config: unknown on_lost policy '" + s + "'");
}

json backbone_json(const SyntheticBackboneConfig& c) {
  return {{"seed", c.seed},
          {"prompt_dim", c.prompt_dim},
          {"feature_dim", c.feature_dim},
          {"feature_gain", c.feature_gain},
          {"key_scale", c.key_scale},
          {"patch_bias_scale", c.patch_bias_scale},
          {"spatial_scale", c.spatial_scale},
          {"latent_coupling", c.latent_coupling},
          {"prompt_coupling", c.prompt_coupling}};
}

void read_backbone(const json& j, SyntheticBackboneConfig& c) {
  Reader r(j, "backbone");
  r.get("seed", c.seed);
  r.get("prompt_dim", c.prompt_dim);
  r.get("feature_dim", c.feature_dim);
  r.get("feature_gain", c.feature_gain);
  r.get("key_scale", c.key_scale);
  r.get("patch_bias_scale", c.patch_bias_scale);
  r.get("spatial_scale", c.spatial_scale);
  r.get("latent_coupling", c.latent_coupling);
  r.get("prompt_coupling", c.prompt_coupling);
  r.finish();
}

json learner_json(const LearnerConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"steps_per_epoch", c.steps_per_epoch},
          {"alpha", c.alpha},
          {"init_scale", c.init_scale},
          {"dm_weight", c.dm_weight},
          {"noise", to_string(c.noise)},
          {"min_alpha_bar", c.min_alpha_bar},
          {"inference_alpha_bar", c.inference_alpha_bar},
          {"seed", c.seed}};
}

void read_learner(const json& j, LearnerConfig& c) {
  Reader r(j, "learner");
  r.get("learning_rate", c.learning_rate);
  r.get("epochs", c.epochs);
  r.get("steps_per_epoch", c.steps_per_epoch);
  r.get("alpha", c.alpha);
  r.get("init_scale", c.init_scale);
  r.get("dm_weight", c.dm_weight);
  r.get_enum("noise", c.noise, parse_noise_mode);
  r.get("min_alpha_bar", c.min_alpha_bar);
  r.get("inference_alpha_bar", c.inference_alpha_bar);
  r.get("seed", c.seed);
  r.finish();
}

json updater_json(const UpdaterConfig& c) {
  return {{"beta", c.beta},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"alpha", c.alpha},
          {"horizons", to_string(c.horizons)},
          {"max_clip_frames", c.max_clip_frames}};
}

void read_updater(const json& j, UpdaterConfig& c) {
  Reader r(j, "updater");
  r.get("beta", c.beta);
  r.get("learning_rate", c.learning_rate);
  r.get("epochs", c.epochs);
  r.get("seed", c.seed);
  r.get("alpha", c.alpha);
  r.get_enum("horizons", c.horizons, parse_horizons);
  r.get("max_clip_frames", c.max_clip_frames);
  r.finish();
}

json track_json(const TrackConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"tau", c.tau},
          {"update_start_frame", c.update_start_frame},
          {"noise", to_string(c.noise)},
          {"inference_alpha_bar", c.inference_alpha_bar},
          {"seed", c.seed},
          {"on_lost", "hold-last-box"},
          {"horizons", to_string(c.horizons)}};
}

void read_track(const json& j, TrackConfig& c) {
  Reader r(j, "track");
  r.get("alpha", c.alpha);
  r.get("beta", c.beta);
  r.get("tau", c.tau);
  r.get("update_start_frame", c.update_start_frame);
  r.get_enum("noise", c.noise, parse_noise_mode);
  r.get("inference_alpha_bar", c.inference_alpha_bar);
  r.get("seed", c.seed);
  r.get_enum("on_lost", c.on_lost, parse_on_lost);
  r.get_enum("horizons", c.horizons, parse_horizons);
  r.finish();
}

json synth_json(const SynthSpec& s) {
  json occ = json::array();
  for (const auto& e : s.occlusions) {
    occ.push_back({{"start", e.start}, {"duration", e.duration}, {"coverage", e.coverage}});
  }
  return {{"frame_count", s.frame_count},
          {"frame_width", s.frame_width},
          {"frame_height", s.frame_height},
          {"target_width", s.target_width},
          {"target_height", s.target_height},
          {"texture_seed", s.texture_seed},
          {"motion", to_string(s.motion)},
          {"velocity_x", s.velocity_x},
          {"velocity_y", s.velocity_y},
          {"amplitude", s.amplitude},
          {"period", s.period},
          {"segment_frames", s.segment_frames},
          {"segment_speed", s.segment_speed},
          {"occlusions", occ},
          {"illumination_amplitude", s.illumination_amplitude},
          {"distractor_count", s.distractor_count},
          {"target_texture", s.target_texture},
          {"background_texture", s.background_texture}};
}

void read_synth(const json& j, SynthSpec& s) {
  Reader r(j, "synth");
  r.get("frame_count", s.frame_count);
  r.get("frame_width", s.frame_width);
  r.get("frame_height", s.frame_height);
  r.get("target_width", s.target_width);
  r.get("target_height", s.target_height);
  r.get("texture_seed", s.texture_seed);
  r.get_enum("motion", s.motion, parse_motion_model);
  r.get("velocity_x", s.velocity_x);
  r.get("velocity_y", s.velocity_y);
  r.get("amplitude", s.amplitude);
  r.get("period", s.period);
  r.get("segment_frames", s.segment_frames);
  r.get("segment_speed", s.segment_speed);
  if (const json* occ = r.child("occlusions")) {
    if (!occ->is_array()) throw InputError("config: 'synth.occlusions' must be an array");
    s.occlusions.clear();
    for (const auto& e : *occ) {
      OcclusionEvent ev;
      Reader er(e, "synth.occlusions[]");
      er.get("start", ev.start);
      er.get("duration", ev.duration);
      er.get("coverage", ev.coverage);
      er.finish();
      s.occlusions.push_back(ev);
    }
  }
  r.get("illumination_amplitude", s.illumination_amplitude);
  r.get("distractor_count", s.distractor_count);
  r.get("target_texture", s.target_texture);
  r.get("background_texture", s.background_texture);
  r.finish();
}

json to_json_doc(const Config& c) {
  json j;
  j["seed"] = c.seed;
  j["backbone"] = backbone_json(c.backbone);
  j["learner"] = learner_json(c.learner);
  j["updater"] = updater_json(c.updater);
  j["track"] = track_json(c.track);
  j["synth"] = synth_json(c.synth);
  j["train_clips"] = c.train_clips;
  return j;
}

Config from_json_doc(const json& j) {
  Config c;
  Reader r(j, "config");
  r.get("seed", c.seed);
  if (const json* b = r.child("backbone")) read_backbone(*b, c.backbone);
  if (const json* l = r.child("learner")) read_learner(*l, c.learner);
  if (const json* u = r.child("updater")) read_updater(*u, c.updater);
  if (const json* t = r.child("track")) read_track(*t, c.track);
  if (const json* s = r.child("synth")) read_synth(*s, c.synth);
  r.get("train_clips", c.train_clips);
  r.finish();
  return c;
}

}  // namespace

std::string to_string(HorizonSet h) {
  switch (h) {
    case HorizonSet::kBoth: return "both";
    case HorizonSet::kLongOnly: return "long";
    case HorizonSet::kShortOnly: return "short";
  }
  return "both";
}

HorizonSet parse_horizons(const std::string& name) {
  if (name == "both") return HorizonSet::kBoth;
  if (name == "long") return HorizonSet::kLongOnly;
  if (name == "short") return HorizonSet::kShortOnly;
  throw InputError("unknown horizon set '" + name + "' (both, long, short)");
}

std::string to_string(NoiseMode m) { return m == NoiseMode::kZero ? "zero" : "sampled"; }

NoiseMode parse_noise_mode(const std::string& name) {
  if (name == "zero") return NoiseMode::kZero;
  if (name == "sampled") return NoiseMode::kSampled;
  throw InputError("unknown noise mode '" + name + "' (zero, sampled)");
}

UpdaterConfig Config::updater_config() const {
  UpdaterConfig u = updater;
  u.learner = learner;
  if (u.seed == 0) u.seed = seed;
  return u;
}

TrackConfig Config::track_config() const {
  TrackConfig t = track;
  t.learner = learner;
  if (t.seed == 0) t.seed = seed;
  return t;
}

Config config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return from_json_doc(j);
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream oss;
  oss << in.rdbuf();
  return config_from_json(oss.str());
}

std::string config_to_json(const Config& cfg) { return to_json_doc(cfg).dump(2); }

void set_config_value(Config& cfg, const std::string& key, const std::string& value) {
  json doc = to_json_doc(cfg);
  std::string pointer = "/" + key;
  for (char& ch : pointer) {
    if (ch == '.') ch = '/';
  }
  const json::json_pointer ptr(pointer);
  if (!doc.contains(ptr)) throw InputError("config: unknown key '" + key + "'");
  json v;
  try {
    v = json::parse(value);
  } catch (const json::parse_error&) {
    v = value;
  }
  doc[ptr] = v;
  cfg = from_json_doc(doc);
}

}  // namespace promptrack

// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "promptrack/dataset.hpp"
#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

using Rgb = std::array<double, 3>;

Rgb hsv_to_rgb(double h, double s, double v) {
  h = std::fmod(std::fmod(h, 360.0) + 360.0, 360.0);
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = v - c;
  Rgb rgb{};
  switch (static_cast<int>(h / 60.0)) {
    case 0: rgb = {c, x, 0}; break;
    case 1: rgb = {x, c, 0}; break;
    case 2: rgb = {0, c, x}; break;
    case 3: rgb = {0, x, c}; break;
    case 4: rgb = {x, 0, c}; break;
    default: rgb = {c, 0, x}; break;
  }
  for (double& ch : rgb) ch = (ch + m) * 255.0;
  return rgb;
}

// Folds p into [lo, hi] as if bouncing off both walls.
double reflect(double p, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double q = std::fmod(p - lo, 2.0 * span);
  if (q < 0.0) q += 2.0 * span;
  return lo + (q <= span ? q : 2.0 * span - q);
}

// Smooth value noise on a coarse grid, sampled at (u, v) in [0, 1].
class ValueNoise {
 public:
  ValueNoise(std::mt19937_64& rng, int cells) : cells_(cells) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    grid_.resize(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (double& g : grid_) g = u(rng);
  }

  double operator()(double u, double v) const {
    const double x = std::clamp(u, 0.0, 1.0) * cells_;
    const double y = std::clamp(v, 0.0, 1.0) * cells_;
    const int x0 = std::min(static_cast<int>(x), cells_ - 1);
    const int y0 = std::min(static_cast<int>(y), cells_ - 1);
    const double ax = x - x0;
    const double ay = y - y0;
    auto at = [&](int i, int j) { return grid_[static_cast<std::size_t>(j) * (cells_ + 1) + i]; };
    const double top = (1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0);
    const double bot = (1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1);
    return (1 - ay) * top + ay * bot;
  }

 private:
  int cells_;
  std::vector<double> grid_;
};

struct Grating {
  double kx, ky, phase, amp;
};

struct Mover {
  int w = 0;
  int h = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  Rgb color{};
};

std::vector<std::array<double, 2>> trajectory(const SynthSpec& spec, std::mt19937_64& rng) {
  const double max_x = spec.frame_width - spec.target_width;
  const double max_y = spec.frame_height - spec.target_height;
  const int n = spec.frame_count;
  std::vector<std::array<double, 2>> pos(static_cast<std::size_t>(n));
  auto uniform = [&](double lo, double hi) {
    return lo >= hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  switch (spec.motion) {
    case MotionModel::kStatic: {
      const double x = std::round(uniform(0.0, max_x));
      const double y = std::round(uniform(0.0, max_y));
      for (auto& p : pos) p = {x, y};
      break;
    }
    case MotionModel::kLinear: {
      const double span_x = spec.velocity_x * (n - 1);
      const double span_y = spec.velocity_y * (n - 1);
      const double x0 = std::round(uniform(std::max(0.0, -span_x), std::min(max_x, max_x - span_x)));
      const double y0 = std::round(uniform(std::max(0.0, -span_y), std::min(max_y, max_y - span_y)));
      for (int k = 0; k < n; ++k) {
        pos[static_cast<std::size_t>(k)] = {reflect(std::round(x0 + spec.velocity_x * k), 0.0, max_x),
                                            reflect(std::round(y0 + spec.velocity_y * k), 0.0, max_y)};
      }
      break;
    }
    case MotionModel::kSinusoidal: {
      const double ax = std::min(spec.amplitude, 0.5 * max_x);
      const double ay = std::min(0.5 * spec.amplitude, 0.5 * max_y);
      const double cx = uniform(ax, max_x - ax);
      const double cy = uniform(ay, max_y - ay);
      const double phase = uniform(0.0, 2.0 * std::numbers::pi);
      const double w = 2.0 * std::numbers::pi / std::max(1.0, spec.period);
      for (int k = 0; k < n; ++k) {
        pos[static_cast<std::size_t>(k)] = {std::round(cx + ax * std::sin(w * k)),
                                            std::round(cy + ay * std::sin(2.0 * w * k + phase))};
      }
      break;
    }
    case MotionModel::kPiecewise: {
      double x = uniform(0.0, max_x);
      double y = uniform(0.0, max_y);
      double vx = 0.0;
      double vy = 0.0;
      for (int k = 0; k < n; ++k) {
        if (k % std::max(1, spec.segment_frames) == 0) {
          const double angle = uniform(0.0, 2.0 * std::numbers::pi);
          vx = spec.segment_speed * std::cos(angle);
          vy = spec.segment_speed * std::sin(angle);
        }
        if (k > 0) {
          x += vx;
          y += vy;
          if (x < 0.0 || x > max_x) vx = -vx;
          if (y < 0.0 || y > max_y) vy = -vy;
          x = reflect(x, 0.0, max_x);
          y = reflect(y, 0.0, max_y);
        }
        pos[static_cast<std::size_t>(k)] = {std::round(x), std::round(y)};
      }
      break;
    }
  }
  return pos;
}

void validate(const SynthSpec& spec) {
  if (spec.frame_count < 1) throw InputError("synth: frame_count must be >= 1");
  if (spec.frame_width < 1 || spec.frame_height < 1) throw InputError("synth: empty frame");
  if (spec.target_width < 1 || spec.target_height < 1) throw InputError("synth: empty target");
  if (spec.target_width > spec.frame_width || spec.target_height > spec.frame_height) {
    throw InputError("synth: target larger than frame");
  }
  for (const auto& o : spec.occlusions) {
    if (!(o.coverage >= 0.0 && o.coverage <= 1.0) || o.duration < 0) {
      throw InputError("synth: occlusion coverage must lie in [0, 1]");
    }
  }
  if (spec.distractor_count < 0) throw InputError("synth: negative distractor count");
}

}  // namespace

MotionModel parse_motion_model(const std::string& name) {
  if (name == "static") return MotionModel::kStatic;
  if (name == "linear") return MotionModel::kLinear;
  if (name == "sinusoidal") return MotionModel::kSinusoidal;
  if (name == "piecewise") return MotionModel::kPiecewise;
  throw InputError("unknown motion model '" + name + "'");
}

std::string to_string(MotionModel m) {
  switch (m) {
    case MotionModel::kStatic: return "static";
    case MotionModel::kLinear: return "linear";
    case MotionModel::kSinusoidal: return "sinusoidal";
    case MotionModel::kPiecewise: return "piecewise";
  }
  return "linear";
}

SynthClip generate_synthetic_clip(const SynthSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  std::mt19937_64 texture_rng(spec.texture_seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double hue = uniform(0.0, 360.0);
  const Rgb target_color = hsv_to_rgb(hue, uniform(0.8, 1.0), uniform(0.8, 0.95));
  const Rgb background_color = hsv_to_rgb(hue + 180.0 + uniform(-40.0, 40.0), uniform(0.15, 0.35),
                                          uniform(0.4, 0.6));
  std::array<Grating, 3> gratings{};
  for (auto& g : gratings) {
    const double wavelength = uniform(40.0, 140.0);
    const double angle = uniform(0.0, std::numbers::pi);
    g = {std::cos(angle) * 2.0 * std::numbers::pi / wavelength,
         std::sin(angle) * 2.0 * std::numbers::pi / wavelength, uniform(0.0, 6.3), uniform(0.5, 1.0)};
  }
  const ValueNoise target_noise(texture_rng, 6);

  const auto pos = trajectory(spec, rng);

  std::vector<Mover> distractors(static_cast<std::size_t>(spec.distractor_count));
  for (auto& d : distractors) {
    d.w = static_cast<int>(std::round(spec.target_width * uniform(0.8, 1.2)));
    d.h = static_cast<int>(std::round(spec.target_height * uniform(0.8, 1.2)));
    d.w = std::min(d.w, spec.frame_width);
    d.h = std::min(d.h, spec.frame_height);
    d.x = uniform(0.0, spec.frame_width - d.w);
    d.y = uniform(0.0, spec.frame_height - d.h);
    d.vx = uniform(-1.5, 1.5);
    d.vy = uniform(-1.5, 1.5);
    const double offset = (uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(70.0, 110.0);
    d.color = hsv_to_rgb(hue + offset, uniform(0.8, 1.0), uniform(0.8, 0.95));
  }

  // The static background is rendered once.
  std::vector<double> background(static_cast<std::size_t>(spec.frame_width) * spec.frame_height * 3);
  for (int y = 0; y < spec.frame_height; ++y) {
    for (int x = 0; x < spec.frame_width; ++x) {
      double t = 0.0;
      for (const auto& g : gratings) t += g.amp * std::sin(g.kx * x + g.ky * y + g.phase);
      t /= 3.0;
      for (int c = 0; c < 3; ++c) {
        const double shade = 1.0 + spec.background_texture * t * (1.0 + 0.3 * (c - 1));
        background[(static_cast<std::size_t>(y) * spec.frame_width + x) * 3 + c] =
            background_color[static_cast<std::size_t>(c)] * shade;
      }
    }
  }

  SynthClip clip;
  for (int c = 0; c < 3; ++c) {
    clip.target_color[static_cast<std::size_t>(c)] =
        static_cast<std::uint8_t>(std::clamp(std::lround(target_color[static_cast<std::size_t>(c)]), 0L, 255L));
  }
  clip.frames.reserve(static_cast<std::size_t>(spec.frame_count));
  std::vector<double> canvas;
  for (int k = 0; k < spec.frame_count; ++k) {
    canvas = background;
    auto paint = [&](int x, int y, const Rgb& rgb) {
      if (x < 0 || y < 0 || x >= spec.frame_width || y >= spec.frame_height) return;
      double* px = &canvas[(static_cast<std::size_t>(y) * spec.frame_width + x) * 3];
      px[0] = rgb[0];
      px[1] = rgb[1];
      px[2] = rgb[2];
    };

    for (auto& d : distractors) {
      if (k > 0) {
        d.x += d.vx;
        d.y += d.vy;
        if (d.x < 0.0 || d.x > spec.frame_width - d.w) d.vx = -d.vx;
        if (d.y < 0.0 || d.y > spec.frame_height - d.h) d.vy = -d.vy;
        d.x = reflect(d.x, 0.0, spec.frame_width - d.w);
        d.y = reflect(d.y, 0.0, spec.frame_height - d.h);
      }
      const int x0 = static_cast<int>(std::round(d.x));
      const int y0 = static_cast<int>(std::round(d.y));
      for (int y = 0; y < d.h; ++y) {
        for (int x = 0; x < d.w; ++x) {
          const double shade = 1.0 + spec.target_texture * target_noise(1.0 - (x + 0.5) / d.w, (y + 0.5) / d.h);
          paint(x0 + x, y0 + y, {d.color[0] * shade, d.color[1] * shade, d.color[2] * shade});
        }
      }
    }

    const auto [tx, ty] = pos[static_cast<std::size_t>(k)];
    const int x0 = static_cast<int>(tx);
    const int y0 = static_cast<int>(ty);
    for (int y = 0; y < spec.target_height; ++y) {
      for (int x = 0; x < spec.target_width; ++x) {
        const double shade =
            1.0 + spec.target_texture * target_noise((x + 0.5) / spec.target_width, (y + 0.5) / spec.target_height);
        paint(x0 + x, y0 + y,
              {target_color[0] * shade, target_color[1] * shade, target_color[2] * shade});
      }
    }

    for (const auto& o : spec.occlusions) {
      if (k < o.start || k >= o.start + o.duration) continue;
      const int cover = static_cast<int>(std::round(o.coverage * spec.target_width));
      for (int y = -4; y < spec.target_height + 4; ++y) {
        for (int x = 0; x < cover; ++x) paint(x0 + x, y0 + y, {118.0, 118.0, 118.0});
      }
    }

    const double light =
        1.0 + spec.illumination_amplitude *
                  std::sin(2.0 * std::numbers::pi * k / std::max(1, spec.frame_count));
    Image frame(spec.frame_width, spec.frame_height, 3);
    for (std::size_t i = 0; i < canvas.size(); ++i) {
      frame.data[i] = static_cast<std::uint8_t>(std::clamp(std::lround(canvas[i] * light), 0L, 255L));
    }
    clip.frames.push_back(std::move(frame));
    clip.boxes.push_back({tx, ty, static_cast<double>(spec.target_width),
                          static_cast<double>(spec.target_height)});
  }
  return clip;
}

SyntheticLabelSource::SyntheticLabelSource(SynthSpec spec, std::size_t count,
                                           std::uint64_t base_seed)
    : spec_(std::move(spec)), count_(count), base_seed_(base_seed) {}

LabeledClip SyntheticLabelSource::clip(std::size_t index) const {
  if (index >= count_) throw InputError("SyntheticLabelSource: clip index out of range");
  SynthSpec spec = spec_;
  spec.texture_seed += index;
  SynthClip c = generate_synthetic_clip(spec, base_seed_ + index);
  return {"synthetic_" + std::to_string(index), std::move(c.frames), std::move(c.boxes)};
}

DirectoryLabelSource::DirectoryLabelSource(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw IoError(root.string() + " is not a directory");
  }
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "groundtruth.txt")) {
      dirs_.push_back(entry.path());
    }
  }
  std::sort(dirs_.begin(), dirs_.end());
  if (dirs_.empty()) throw IoError(root.string() + " holds no labelled clips");
}

LabeledClip DirectoryLabelSource::clip(std::size_t index) const {
  if (index >= dirs_.size()) throw InputError("DirectoryLabelSource: clip index out of range");
  Sequence seq = load_sequence(dirs_[index]);
  return {dirs_[index].filename().string(), std::move(seq.frames), std::move(*seq.boxes)};
}

}  // namespace promptrack

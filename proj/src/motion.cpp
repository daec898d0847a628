// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/motion.hpp"

#include <cmath>
#include <sstream>

#include "promptrack/backbone.hpp"
#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

constexpr int kTokenPatch = 4;
constexpr int kHidden = 64;
constexpr int kTemplateGrid = 16;

/// Box-average an RGB image whose sides are multiples of `grid` down to
/// grid x grid, centred to [-0.5, 0.5].
std::vector<double> pool(const Image& img, int grid) {
  const int bx = img.width / grid;
  const int by = img.height / grid;
  const double inv = 1.0 / (255.0 * bx * by);
  std::vector<double> out(static_cast<std::size_t>(grid) * grid * 3, 0.0);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int y = gy * by; y < (gy + 1) * by; ++y) {
          for (int x = gx * bx; x < (gx + 1) * bx; ++x) s += img.at(x, y, c);
        }
        out[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c] = s * inv - 0.5;
      }
    }
  }
  return out;
}

/// Rows are kTokenPatch^2 patches of a grid x grid x channels image.
Eigen::MatrixXd patchify(const std::vector<double>& planes, int grid, int channels) {
  const int per_side = grid / kTokenPatch;
  Eigen::MatrixXd tokens(per_side * per_side, kTokenPatch * kTokenPatch * channels);
  for (int ty = 0; ty < per_side; ++ty) {
    for (int tx = 0; tx < per_side; ++tx) {
      const int row = ty * per_side + tx;
      int col = 0;
      for (int y = 0; y < kTokenPatch; ++y) {
        for (int x = 0; x < kTokenPatch; ++x) {
          const std::size_t pix =
              static_cast<std::size_t>(ty * kTokenPatch + y) * grid + (tx * kTokenPatch + x);
          for (int c = 0; c < channels; ++c) tokens(row, col++) = planes[pix * channels + c];
        }
      }
    }
  }
  return tokens;
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

void mask_relu(const Eigen::MatrixXd& pre, Eigen::MatrixXd& grad) {
  for (Eigen::Index k = 0; k < grad.size(); ++k) {
    if (!(pre.data()[k] > 0.0)) grad.data()[k] = 0.0;
  }
}

}  // namespace

MotionFrame make_motion_frame(const Image& frame) {
  if (frame.width != kInputSize || frame.height != kInputSize || frame.channels != 3) {
    std::ostringstream oss;
    oss << "motion: expected " << kInputSize << "x" << kInputSize << " RGB frames, got "
        << frame.width << "x" << frame.height << "x" << frame.channels;
    throw InputError(oss.str());
  }
  return {pool(frame, kMotionGrid)};
}

MotionEncoder::MotionEncoder(int frames, Horizon horizon, std::mt19937_64& rng)
    : frames_(frames), horizon_(horizon) {
  if (frames < 1) throw InputError("MotionEncoder: needs at least one frame");
  const int channels = (2 * frames - 1) * 3;
  embed = Linear::random(kTokenPatch * kTokenPatch * channels, kHidden, rng, std::sqrt(2.0));
  out = Linear::random(kHidden, kMotionDim, rng);
}

Eigen::MatrixXd MotionEncoder::prepare(std::span<const MotionFrame> clip) const {
  if (static_cast<int>(clip.size()) != frames_) {
    std::ostringstream oss;
    oss << "MotionEncoder: expected " << frames_ << " frames, got " << clip.size();
    throw InputError(oss.str());
  }
  const std::size_t pixels = static_cast<std::size_t>(kMotionGrid) * kMotionGrid;
  for (const auto& f : clip) {
    if (f.values.size() != pixels * 3) throw InputError("MotionEncoder: malformed motion frame");
  }
  const int channels = (2 * frames_ - 1) * 3;
  std::vector<double> planes(pixels * channels);
  for (std::size_t p = 0; p < pixels; ++p) {
    double* dst = &planes[p * channels];
    int c = 0;
    for (int f = 0; f < frames_; ++f) {
      for (int k = 0; k < 3; ++k) dst[c++] = clip[f].values[p * 3 + k];
    }
    for (int f = 1; f < frames_; ++f) {
      for (int k = 0; k < 3; ++k) dst[c++] = clip[f].values[p * 3 + k] - clip[f - 1].values[p * 3 + k];
    }
  }
  return patchify(planes, kMotionGrid, channels);
}

MotionTokens MotionEncoder::encode(std::span<const MotionFrame> clip, Cache* cache) const {
  Eigen::MatrixXd x = prepare(clip);
  Eigen::MatrixXd pre = embed.forward_rows(x);
  MotionTokens t{out.forward_rows(relu(pre)), horizon_};
  if (cache != nullptr) {
    cache->input = std::move(x);
    cache->hidden_pre = std::move(pre);
  }
  return t;
}

void MotionEncoder::backward(const Cache& cache, const Eigen::MatrixXd& grad_tokens,
                             MotionEncoder& grad) const {
  Eigen::MatrixXd g_hidden = out.backward_rows(relu(cache.hidden_pre), grad_tokens, grad.out);
  mask_relu(cache.hidden_pre, g_hidden);
  embed.backward_rows(cache.input, g_hidden, grad.embed);
}

void MotionEncoder::collect(const std::string& prefix, std::vector<ParamView>& params) {
  embed.collect(prefix + ".embed", params);
  out.collect(prefix + ".out", params);
}

QueryExtractor::QueryExtractor(std::mt19937_64& rng) {
  embed = Linear::random(kTokenPatch * kTokenPatch * 3, kHidden, rng, std::sqrt(2.0));
  out = Linear::random(kHidden, kMotionDim, rng);
}

Eigen::MatrixXd QueryExtractor::prepare(const Image& crop) {
  if (crop.empty() || crop.width < 1 || crop.height < 1) {
    throw InputError("target_query: empty template");
  }
  if (crop.channels != 3) throw InputError("target_query: template must be RGB");
  const Image resized = resize_image(crop, kTemplateSize, kTemplateSize);
  return patchify(pool(resized, kTemplateGrid), kTemplateGrid, 3);
}

TargetQuery QueryExtractor::forward(const Eigen::MatrixXd& tokens, Cache* cache) const {
  Eigen::MatrixXd pre = embed.forward_rows(tokens);
  const Eigen::VectorXd pooled = relu(pre).colwise().mean().transpose();
  TargetQuery q{out.forward(pooled)};
  if (cache != nullptr) {
    cache->input = tokens;
    cache->hidden_pre = std::move(pre);
  }
  return q;
}

void QueryExtractor::backward(const Cache& cache, const Eigen::VectorXd& grad_q,
                              QueryExtractor& grad) const {
  const Eigen::VectorXd pooled = relu(cache.hidden_pre).colwise().mean().transpose();
  const Eigen::VectorXd g_pooled = out.backward(pooled, grad_q, grad.out);
  const auto n = cache.hidden_pre.rows();
  Eigen::MatrixXd g_hidden =
      (g_pooled / static_cast<double>(n)).transpose().replicate(n, 1);
  mask_relu(cache.hidden_pre, g_hidden);
  embed.backward_rows(cache.input, g_hidden, grad.embed);
}

void QueryExtractor::collect(const std::string& prefix, std::vector<ParamView>& params) {
  embed.collect(prefix + ".embed", params);
  out.collect(prefix + ".out", params);
}

CrossAttention::CrossAttention(int width, std::mt19937_64& rng)
    : key(Linear::random(width, width, rng, 1.0, false)),
      value(Linear::random(width, width, rng, 1.0, false)) {}

ConditionedMotion CrossAttention::forward(const TargetQuery& q, const MotionTokens& m,
                                          Cache* cache) const {
  const int d = width();
  if (q.q.size() != d || m.tokens.cols() != d) {
    throw ContractError("condition_motion: query and token widths must agree");
  }
  if (m.tokens.rows() < 1) throw ContractError("condition_motion: no motion tokens");
  Eigen::MatrixXd keys = key.forward_rows(m.tokens);
  Eigen::MatrixXd values = value.forward_rows(m.tokens);
  Eigen::VectorXd logits = keys * q.q / std::sqrt(static_cast<double>(d));
  const double peak = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - peak).exp().matrix();
  w /= w.sum();
  ConditionedMotion out{values.transpose() * w};
  if (cache != nullptr) {
    cache->q = q.q;
    cache->m = m.tokens;
    cache->keys = std::move(keys);
    cache->values = std::move(values);
    cache->weights = std::move(w);
  }
  return out;
}

Eigen::VectorXd CrossAttention::backward(const Cache& cache, const Eigen::VectorXd& grad_out,
                                         Eigen::MatrixXd& grad_m, CrossAttention& grad) const {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(width()));
  const Eigen::VectorXd& w = cache.weights;
  const Eigen::MatrixXd g_values = w * grad_out.transpose();
  const Eigen::VectorXd g_w = cache.values * grad_out;
  const Eigen::VectorXd g_logits = w.cwiseProduct((g_w.array() - w.dot(g_w)).matrix());
  const Eigen::MatrixXd g_keys = g_logits * cache.q.transpose() * inv_sqrt;
  const Eigen::VectorXd g_q = cache.keys.transpose() * g_logits * inv_sqrt;
  grad_m += key.backward_rows(cache.m, g_keys, grad.key);
  grad_m += value.backward_rows(cache.m, g_values, grad.value);
  return g_q;
}

void CrossAttention::collect(const std::string& prefix, std::vector<ParamView>& params) {
  key.collect(prefix + ".key", params);
  value.collect(prefix + ".value", params);
}

MotionModules MotionModules::create(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MotionModules m;
  m.long_encoder = MotionEncoder(kWindow + 1, Horizon::kLong, rng);
  m.short_encoder = MotionEncoder(2, Horizon::kShort, rng);
  m.query = QueryExtractor(rng);
  m.long_attention = CrossAttention(kMotionDim, rng);
  m.short_attention = CrossAttention(kMotionDim, rng);
  m.fusion = Mlp2::random(2 * kMotionDim, 2 * kMotionDim, kMotionDim, rng);
  return m;
}

void MotionModules::collect(const std::string& prefix, std::vector<ParamView>& out) {
  long_encoder.collect(prefix + "long_encoder", out);
  short_encoder.collect(prefix + "short_encoder", out);
  query.collect(prefix + "query", out);
  long_attention.collect(prefix + "long_attention", out);
  short_attention.collect(prefix + "short_attention", out);
  fusion.collect(prefix + "fusion", out);
}

MotionTokens encode_long_term(const MotionModules& m, std::span<const MotionFrame> window) {
  return m.long_encoder.encode(window);
}

MotionTokens encode_short_term(const MotionModules& m, const MotionFrame& curr,
                               const MotionFrame& prev) {
  const MotionFrame pair[2] = {prev, curr};
  return m.short_encoder.encode(pair);
}

TargetQuery target_query(const MotionModules& m, const Image& template_crop) {
  return m.query.forward(QueryExtractor::prepare(template_crop));
}

ConditionedMotion condition_motion(const CrossAttention& attention, const TargetQuery& q,
                                   const MotionTokens& tokens) {
  return attention.forward(q, tokens);
}

ConditionedMotion fuse_motion(const Mlp2& fusion, const ConditionedMotion& l_long,
                              const ConditionedMotion& l_short) {
  if (l_long.v.size() != l_short.v.size() ||
      l_long.v.size() + l_short.v.size() != fusion.in_features()) {
    throw ContractError("fuse_motion: width mismatch");
  }
  Eigen::VectorXd x(l_long.v.size() + l_short.v.size());
  x << l_long.v, l_short.v;
  return {fusion.forward(x)};
}

ConditionedMotion extract_motion(const MotionModules& m, std::span<const MotionFrame> window,
                                 const Eigen::MatrixXd& template_tokens, HorizonSet horizons,
                                 MotionCache* cache) {
  if (static_cast<int>(window.size()) != kWindow + 1) {
    std::ostringstream oss;
    oss << "extract_motion: window must hold " << kWindow + 1 << " frames, got " << window.size();
    throw InputError(oss.str());
  }
  MotionCache local;
  MotionCache& c = cache != nullptr ? *cache : local;
  const TargetQuery q = m.query.forward(template_tokens, &c.query);
  ConditionedMotion l_long{Eigen::VectorXd::Zero(kMotionDim)};
  ConditionedMotion l_short{Eigen::VectorXd::Zero(kMotionDim)};
  if (horizons != HorizonSet::kShortOnly) {
    c.long_tokens = m.long_encoder.encode(window, &c.long_encoder);
    l_long = m.long_attention.forward(q, c.long_tokens, &c.long_attention);
  }
  if (horizons != HorizonSet::kLongOnly) {
    c.short_tokens = m.short_encoder.encode(window.subspan(window.size() - 2), &c.short_encoder);
    l_short = m.short_attention.forward(q, c.short_tokens, &c.short_attention);
  }
  Eigen::VectorXd x(2 * kMotionDim);
  x << l_long.v, l_short.v;
  return {m.fusion.forward(x, &c.fusion)};
}

void extract_motion_backward(const MotionModules& m, const MotionCache& cache,
                             HorizonSet horizons, const Eigen::VectorXd& grad_out,
                             MotionModules& grad) {
  const Eigen::VectorXd g_x = m.fusion.backward(cache.fusion, grad_out, grad.fusion);
  Eigen::VectorXd g_q = Eigen::VectorXd::Zero(kMotionDim);
  if (horizons != HorizonSet::kShortOnly) {
    Eigen::MatrixXd g_m = Eigen::MatrixXd::Zero(cache.long_tokens.tokens.rows(), kMotionDim);
    g_q += m.long_attention.backward(cache.long_attention, g_x.head(kMotionDim), g_m,
                                     grad.long_attention);
    m.long_encoder.backward(cache.long_encoder, g_m, grad.long_encoder);
  }
  if (horizons != HorizonSet::kLongOnly) {
    Eigen::MatrixXd g_m = Eigen::MatrixXd::Zero(cache.short_tokens.tokens.rows(), kMotionDim);
    g_q += m.short_attention.backward(cache.short_attention, g_x.tail(kMotionDim), g_m,
                                      grad.short_attention);
    m.short_encoder.backward(cache.short_encoder, g_m, grad.short_encoder);
  }
  m.query.backward(cache.query, g_q, grad.query);
}

}  // namespace promptrack

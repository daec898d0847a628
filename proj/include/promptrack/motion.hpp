// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Target-conditioned motion: two small video encoders (long and short
// horizon), a template feature extractor producing the target query, one
// single-query cross-attention per horizon and a fusion MLP.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "promptrack/image.hpp"
#include "promptrack/nn.hpp"

namespace promptrack {

/// Frames preceding the current one in the long-horizon window.
inline constexpr int kWindow = 5;
inline constexpr int kMotionDim = 256;
/// Encoders see frames box-averaged to this square size.
inline constexpr int kMotionGrid = 32;
inline constexpr int kTemplateSize = 128;

/// A frame reduced for the motion encoders: kMotionGrid^2 x 3 values in
/// [-0.5, 0.5], pixel-major.
struct MotionFrame {
  std::vector<double> values;
  bool operator==(const MotionFrame&) const = default;
};

/// `frame` must be kInputSize x kInputSize RGB.
MotionFrame make_motion_frame(const Image& frame);

enum class Horizon { kLong, kShort };

struct MotionTokens {
  Eigen::MatrixXd tokens;  // N x kMotionDim
  Horizon horizon = Horizon::kLong;
};

struct TargetQuery {
  Eigen::VectorXd q;  // kMotionDim
};

struct ConditionedMotion {
  Eigen::VectorXd v;  // kMotionDim
};

/// Patch tokens of a video clip: each 4 x 4 patch of the stacked raw frames
/// and consecutive differences, linear -> ReLU -> linear.
class MotionEncoder {
 public:
  struct Cache {
    Eigen::MatrixXd input;       // tokens x (16 * channels)
    Eigen::MatrixXd hidden_pre;  // tokens x hidden
  };

  MotionEncoder() = default;
  MotionEncoder(int frames, Horizon horizon, std::mt19937_64& rng);

  int frames() const { return frames_; }
  Horizon horizon() const { return horizon_; }

  /// Stacked encoder input for `clip` (chronological, exactly frames()).
  Eigen::MatrixXd prepare(std::span<const MotionFrame> clip) const;

  MotionTokens encode(std::span<const MotionFrame> clip, Cache* cache = nullptr) const;
  /// Accumulates parameter gradients into `grad`.
  void backward(const Cache& cache, const Eigen::MatrixXd& grad_tokens,
                MotionEncoder& grad) const;

  void collect(const std::string& prefix, std::vector<ParamView>& out);

  Linear embed;
  Linear out;

 private:
  int frames_ = 0;
  Horizon horizon_ = Horizon::kLong;
};

/// Appearance features of the first-frame template, mean-pooled to a query.
class QueryExtractor {
 public:
  struct Cache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd hidden_pre;
  };

  QueryExtractor() = default;
  explicit QueryExtractor(std::mt19937_64& rng);

  /// Resizes `crop` to kTemplateSize^2 and returns its 4 x 4-patch tokens.
  /// Throws InputError on an empty or non-RGB crop.
  static Eigen::MatrixXd prepare(const Image& crop);

  TargetQuery forward(const Eigen::MatrixXd& tokens, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Eigen::VectorXd& grad_q, QueryExtractor& grad) const;

  void collect(const std::string& prefix, std::vector<ParamView>& out);

  Linear embed;
  Linear out;
};

/// weights = softmax(K(m) q / sqrt(d)), output = weights . V(m).
class CrossAttention {
 public:
  struct Cache {
    Eigen::VectorXd q;
    Eigen::MatrixXd m;
    Eigen::MatrixXd keys;
    Eigen::MatrixXd values;
    Eigen::VectorXd weights;
  };

  CrossAttention() = default;
  CrossAttention(int width, std::mt19937_64& rng);

  int width() const { return static_cast<int>(key.weight.rows()); }

  ConditionedMotion forward(const TargetQuery& q, const MotionTokens& m,
                            Cache* cache = nullptr) const;
  /// Returns d/dq; adds d/dm to `grad_m` and parameter gradients to `grad`.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::VectorXd& grad_out,
                           Eigen::MatrixXd& grad_m, CrossAttention& grad) const;

  void collect(const std::string& prefix, std::vector<ParamView>& out);

  Linear key;
  Linear value;
};

/// The trainable motion path.
struct MotionModules {
  MotionEncoder long_encoder;
  MotionEncoder short_encoder;
  QueryExtractor query;
  CrossAttention long_attention;
  CrossAttention short_attention;
  /// concat(lL, lS) -> hidden -> kMotionDim.
  Mlp2 fusion;

  static MotionModules create(std::uint64_t seed);

  void collect(const std::string& prefix, std::vector<ParamView>& out);
};

MotionTokens encode_long_term(const MotionModules& m, std::span<const MotionFrame> window);
MotionTokens encode_short_term(const MotionModules& m, const MotionFrame& curr,
                               const MotionFrame& prev);
TargetQuery target_query(const MotionModules& m, const Image& template_crop);
ConditionedMotion condition_motion(const CrossAttention& attention, const TargetQuery& q,
                                   const MotionTokens& tokens);
ConditionedMotion fuse_motion(const Mlp2& fusion, const ConditionedMotion& l_long,
                              const ConditionedMotion& l_short);

/// Which horizons feed the fusion head; a disabled one contributes zeros.
enum class HorizonSet { kBoth, kLongOnly, kShortOnly };

struct MotionCache {
  MotionEncoder::Cache long_encoder;
  MotionEncoder::Cache short_encoder;
  QueryExtractor::Cache query;
  CrossAttention::Cache long_attention;
  CrossAttention::Cache short_attention;
  Mlp2::Cache fusion;
  MotionTokens long_tokens;
  MotionTokens short_tokens;
};

/// Full motion path for one frame. `window` holds kWindow + 1 frames ending
/// at the current one; `template_tokens` come from QueryExtractor::prepare.
ConditionedMotion extract_motion(const MotionModules& m, std::span<const MotionFrame> window,
                                 const Eigen::MatrixXd& template_tokens, HorizonSet horizons,
                                 MotionCache* cache = nullptr);

/// Backward of extract_motion given d/d(fused motion).
void extract_motion_backward(const MotionModules& m, const MotionCache& cache,
                             HorizonSet horizons, const Eigen::VectorXd& grad_out,
                             MotionModules& grad);

}  // namespace promptrack

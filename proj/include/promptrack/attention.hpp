// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Attention-map algebra: harmonization of a cross-attention map with a
// self-attention tensor, blending, resizing, box-shaped target maps, the
// normalized MSE loss and box extraction from an activated area.
//
// All functions are pure; gradients (`*_vjp`) are provided for the pieces
// that sit on the differentiable path from a prompt to the loss.

#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <vector>

namespace promptrack {

/// Axis-aligned box in pixels, top-left origin.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }
  double area() const { return w * h; }

  bool operator==(const BBox&) const = default;
};

/// True when w, h > 0 and every field is finite.
bool is_valid(const BBox& b);

/// True when `b` has a non-empty overlap with [0, frame_w) x [0, frame_h).
bool intersects_frame(const BBox& b, double frame_w, double frame_h);

/// Clamps `b` to the frame. The result keeps at least a 1 px extent.
BBox clip_to_frame(const BBox& b, double frame_w, double frame_h);

/// H x W grid of attention values, row-major.
class AttentionMap {
 public:
  AttentionMap() = default;
  AttentionMap(int height, int width, double fill = 0.0);
  AttentionMap(int height, int width, std::vector<double> values);

  static AttentionMap from_rows(
      std::initializer_list<std::initializer_list<double>> rows);

  int height() const { return height_; }
  int width() const { return width_; }
  int size() const { return height_ * width_; }
  bool empty() const { return values_.empty(); }

  double& operator()(int i, int j) { return values_[static_cast<std::size_t>(i) * width_ + j]; }
  double operator()(int i, int j) const { return values_[static_cast<std::size_t>(i) * width_ + j]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double sum() const;
  double max() const;

  bool operator==(const AttentionMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// H x W x H x W self-attention tensor. The slice at (i, j) is the attention
/// distribution of pixel (i, j) over all pixels. Stored in single precision:
/// at 64 x 64 a slice-complete tensor is 16.7M entries.
class SelfAttentionTensor {
 public:
  SelfAttentionTensor() = default;
  SelfAttentionTensor(int height, int width);
  SelfAttentionTensor(int height, int width, std::vector<float> values);

  /// Each (i, j) slice is the one-hot map at (i, j).
  static SelfAttentionTensor identity(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  int positions() const { return height_ * width_; }

  std::span<float> slice(int i, int j) { return row(i * width_ + j); }
  std::span<const float> slice(int i, int j) const { return row(i * width_ + j); }

  /// Slice addressed by flattened position r = i * W + j.
  std::span<float> row(int r) {
    return {values_.data() + static_cast<std::size_t>(r) * positions(),
            static_cast<std::size_t>(positions())};
  }
  std::span<const float> row(int r) const {
    return {values_.data() + static_cast<std::size_t>(r) * positions(),
            static_cast<std::size_t>(positions())};
  }

  std::span<const float> values() const { return values_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

/// M'(:,:) = sum_ij mc(i,j) * ms(i,j,:,:).
AttentionMap harmonize(const AttentionMap& mc, const SelfAttentionTensor& ms);

/// Gradient of a scalar w.r.t. `mc` given its gradient w.r.t. the
/// harmonized map: g_mc(r) = sum_c ms(r, c) * grad(c).
std::vector<double> harmonize_vjp(std::span<const double> grad_out,
                                  const SelfAttentionTensor& ms);

/// (1 - alpha) * mc_prime + alpha * mc.
AttentionMap blend(const AttentionMap& mc_prime, const AttentionMap& mc,
                   double alpha);

/// Center-aligned bilinear resize with edge clamping; identity when the
/// size already matches.
AttentionMap resize_map(const AttentionMap& m, int height, int width);

/// Transpose of `resize_map` from (in_h, in_w) to the shape of `grad_out`.
std::vector<double> resize_map_vjp(std::span<const double> grad_out,
                                   int out_h, int out_w, int in_h, int in_w);

/// Binary map: 1 where the cell center, mapped to frame pixels, lies inside
/// `b`. When no center falls inside, the cell holding the box center is set.
AttentionMap gt_map_from_bbox(const BBox& b, double frame_w, double frame_h,
                              int height, int width);

/// Mean squared difference of the two maps after per-map min-max
/// normalization to [0, 1]. A constant map normalizes to zeros.
double map_mse(const AttentionMap& m, const AttentionMap& f);

/// Gradient of `map_mse` w.r.t. `m` (subgradient at min/max ties).
std::vector<double> map_mse_grad(const AttentionMap& m, const AttentionMap& f);

/// Tight box around the 4-connected component of cells >= tau * max with
/// the greatest summed mass, scaled to the frame (a cell maps to its full
/// pixel footprint). Throws LostTarget when the map has no positive entry.
BBox extract_bbox(const AttentionMap& m, double frame_w, double frame_h,
                  double tau);

/// "ATTN" magic, u32 H, u32 W, then H*W row-major f32, all little-endian.
void write_attention_dump(const std::filesystem::path& path,
                          const AttentionMap& m);
AttentionMap read_attention_dump(const std::filesystem::path& path);

}  // namespace promptrack

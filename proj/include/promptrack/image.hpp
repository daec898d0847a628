// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "promptrack/attention.hpp"

namespace promptrack {

/// Interleaved 8-bit image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c = 3, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool empty() const { return data.empty(); }

  bool operator==(const Image&) const = default;
};

/// Bilinear resize (center-aligned).
Image resize_image(const Image& src, int width, int height);

/// Pixels of `box` after rounding outward to integer pixels and clipping to
/// the image. Throws InputError when nothing remains.
Image crop(const Image& src, const BBox& box);

/// Aspect-preserving fit of an arbitrary frame into a square input, padded
/// with mid-grey (zero after the encoder's centring). Boxes convert between
/// the two coordinate systems.
class Letterbox {
 public:
  Letterbox() = default;
  Letterbox(int src_width, int src_height, int size);

  Image apply(const Image& src) const;
  BBox to_input(const BBox& b) const;
  BBox to_source(const BBox& b) const;
  /// The frame's area in input coordinates.
  BBox content() const;

  bool is_identity() const { return scale_ == 1.0 && pad_x_ == 0 && pad_y_ == 0; }
  int source_width() const { return src_w_; }
  int source_height() const { return src_h_; }
  int size() const { return size_; }

 private:
  int src_w_ = 0;
  int src_h_ = 0;
  int size_ = 0;
  int scaled_w_ = 0;
  int scaled_h_ = 0;
  int pad_x_ = 0;
  int pad_y_ = 0;
  double scale_ = 1.0;
};

}  // namespace promptrack

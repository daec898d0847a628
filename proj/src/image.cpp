// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/image.hpp"

#include <algorithm>
#include <cmath>

#include "promptrack/errors.hpp"

namespace promptrack {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c) {
  if (w < 1 || h < 1 || c < 1) throw InputError("Image: empty shape");
  data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

Image resize_image(const Image& src, int width, int height) {
  if (src.empty()) throw InputError("resize_image: empty source");
  if (width == src.width && height == src.height) return src;
  Image out(width, height, src.channels);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double ay = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double ax = fx - x0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = (1 - ax) * src.at(x0, y0, c) + ax * src.at(x1, y0, c);
        const double bot = (1 - ax) * src.at(x0, y1, c) + ax * src.at(x1, y1, c);
        const double v = (1 - ay) * top + ay * bot;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

Image crop(const Image& src, const BBox& box) {
  if (!is_valid(box)) throw InputError("crop: degenerate box");
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
  const int x1 = std::min(src.width, static_cast<int>(std::ceil(box.right())));
  const int y1 = std::min(src.height, static_cast<int>(std::ceil(box.bottom())));
  if (x1 <= x0 || y1 <= y0) throw InputError("crop: box does not overlap the image");
  Image out(x1 - x0, y1 - y0, src.channels);
  for (int y = y0; y < y1; ++y) {
    const auto* row = &src.data[(static_cast<std::size_t>(y) * src.width + x0) * src.channels];
    std::copy(row, row + static_cast<std::size_t>(x1 - x0) * src.channels,
              &out.data[static_cast<std::size_t>(y - y0) * out.width * out.channels]);
  }
  return out;
}

Letterbox::Letterbox(int src_width, int src_height, int size)
    : src_w_(src_width), src_h_(src_height), size_(size) {
  if (src_width < 1 || src_height < 1 || size < 1) {
    throw InputError("Letterbox: empty shape");
  }
  scale_ = static_cast<double>(size) / std::max(src_width, src_height);
  if (src_width == size && src_height == size) scale_ = 1.0;
  scaled_w_ = std::max(1, static_cast<int>(std::lround(src_width * scale_)));
  scaled_h_ = std::max(1, static_cast<int>(std::lround(src_height * scale_)));
  pad_x_ = (size - scaled_w_) / 2;
  pad_y_ = (size - scaled_h_) / 2;
}

Image Letterbox::apply(const Image& src) const {
  if (src.width != src_w_ || src.height != src_h_) {
    throw ContractError("Letterbox: frame size differs from the session's");
  }
  if (is_identity()) return src;
  const Image scaled = resize_image(src, scaled_w_, scaled_h_);
  Image out(size_, size_, src.channels, 128);
  for (int y = 0; y < scaled_h_; ++y) {
    const auto* row = &scaled.data[static_cast<std::size_t>(y) * scaled_w_ * src.channels];
    std::copy(row, row + static_cast<std::size_t>(scaled_w_) * src.channels,
              &out.data[(static_cast<std::size_t>(y + pad_y_) * size_ + pad_x_) * src.channels]);
  }
  return out;
}

BBox Letterbox::to_input(const BBox& b) const {
  const double sx = static_cast<double>(scaled_w_) / src_w_;
  const double sy = static_cast<double>(scaled_h_) / src_h_;
  return {b.x * sx + pad_x_, b.y * sy + pad_y_, b.w * sx, b.h * sy};
}

BBox Letterbox::content() const {
  return {static_cast<double>(pad_x_), static_cast<double>(pad_y_), static_cast<double>(scaled_w_),
          static_cast<double>(scaled_h_)};
}

BBox Letterbox::to_source(const BBox& b) const {
  const double sx = static_cast<double>(scaled_w_) / src_w_;
  const double sy = static_cast<double>(scaled_h_) / src_h_;
  return {(b.x - pad_x_) / sx, (b.y - pad_y_) / sy, b.w / sx, b.h / sy};
}

}  // namespace promptrack

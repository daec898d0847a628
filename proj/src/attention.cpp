// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/attention.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw InputError(std::string(what) + ": non-finite value");
    }
  }
}

void require_same_shape(const AttentionMap& a, const AttentionMap& b,
                        const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    std::ostringstream oss;
    oss << what << ": shape mismatch " << a.height() << "x" << a.width()
        << " vs " << b.height() << "x" << b.width();
    throw ContractError(oss.str());
  }
}

// Source taps of a center-aligned bilinear resize along one axis.
struct Tap {
  int i0;
  int i1;
  double frac;
};

std::vector<Tap> bilinear_taps(int n_in, int n_out) {
  std::vector<Tap> taps(static_cast<std::size_t>(n_out));
  const double scale = static_cast<double>(n_in) / n_out;
  for (int o = 0; o < n_out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, n_in - 1);
    taps[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
  }
  return taps;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {
      static_cast<char>(v & 0xffu), static_cast<char>((v >> 8) & 0xffu),
      static_cast<char>((v >> 16) & 0xffu), static_cast<char>((v >> 24) & 0xffu)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  if (!is) throw IoError("attention dump: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

bool is_valid(const BBox& b) {
  return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.w) &&
         std::isfinite(b.h) && b.w > 0.0 && b.h > 0.0;
}

bool intersects_frame(const BBox& b, double frame_w, double frame_h) {
  return b.right() > 0.0 && b.bottom() > 0.0 && b.x < frame_w && b.y < frame_h;
}

BBox clip_to_frame(const BBox& b, double frame_w, double frame_h) {
  const double x0 = std::clamp(b.x, 0.0, frame_w - 1.0);
  const double y0 = std::clamp(b.y, 0.0, frame_h - 1.0);
  const double x1 = std::clamp(b.right(), x0 + 1.0, frame_w);
  const double y1 = std::clamp(b.bottom(), y0 + 1.0, frame_h);
  return {x0, y0, x1 - x0, y1 - y0};
}

AttentionMap::AttentionMap(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) throw InputError("AttentionMap: empty shape");
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

AttentionMap::AttentionMap(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height < 1 || width < 1) throw InputError("AttentionMap: empty shape");
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ContractError("AttentionMap: value count does not match shape");
  }
}

AttentionMap AttentionMap::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = h > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(h) * w);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != w) {
      throw ContractError("AttentionMap::from_rows: ragged rows");
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  return AttentionMap(h, w, std::move(values));
}

double AttentionMap::sum() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

double AttentionMap::max() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

SelfAttentionTensor::SelfAttentionTensor(int height, int width)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) throw InputError("SelfAttentionTensor: empty shape");
  const auto n = static_cast<std::size_t>(height) * width;
  values_.assign(n * n, 0.0f);
}

SelfAttentionTensor::SelfAttentionTensor(int height, int width,
                                         std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height < 1 || width < 1) throw InputError("SelfAttentionTensor: empty shape");
  const auto n = static_cast<std::size_t>(height) * width;
  if (values_.size() != n * n) {
    throw ContractError("SelfAttentionTensor: value count does not match shape");
  }
}

SelfAttentionTensor SelfAttentionTensor::identity(int height, int width) {
  SelfAttentionTensor t(height, width);
  for (int r = 0; r < t.positions(); ++r) t.row(r)[static_cast<std::size_t>(r)] = 1.0f;
  return t;
}

AttentionMap harmonize(const AttentionMap& mc, const SelfAttentionTensor& ms) {
  if (mc.height() != ms.height() || mc.width() != ms.width()) {
    throw ContractError("harmonize: cross map and self-attention shapes differ");
  }
  require_finite(mc.values(), "harmonize");
  const int n = mc.size();
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  const auto in = mc.values();
  for (int r = 0; r < n; ++r) {
    const double weight = in[static_cast<std::size_t>(r)];
    if (weight == 0.0) continue;
    const float* row = ms.row(r).data();
    double* dst = out.data();
    for (int c = 0; c < n; ++c) dst[c] += weight * static_cast<double>(row[c]);
  }
  return AttentionMap(mc.height(), mc.width(), std::move(out));
}

std::vector<double> harmonize_vjp(std::span<const double> grad_out,
                                  const SelfAttentionTensor& ms) {
  const int n = ms.positions();
  if (static_cast<int>(grad_out.size()) != n) {
    throw ContractError("harmonize_vjp: gradient size does not match tensor");
  }
  std::vector<double> grad(static_cast<std::size_t>(n));
  const double* g = grad_out.data();
  for (int r = 0; r < n; ++r) {
    const float* row = ms.row(r).data();
    // Four independent partial sums keep the reduction vectorizable and the
    // summation order fixed.
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int c = 0;
    for (; c + 4 <= n; c += 4) {
      s0 += static_cast<double>(row[c]) * g[c];
      s1 += static_cast<double>(row[c + 1]) * g[c + 1];
      s2 += static_cast<double>(row[c + 2]) * g[c + 2];
      s3 += static_cast<double>(row[c + 3]) * g[c + 3];
    }
    for (; c < n; ++c) s0 += static_cast<double>(row[c]) * g[c];
    grad[static_cast<std::size_t>(r)] = (s0 + s1) + (s2 + s3);
  }
  return grad;
}

AttentionMap blend(const AttentionMap& mc_prime, const AttentionMap& mc,
                   double alpha) {
  require_same_shape(mc_prime, mc, "blend");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InputError("blend: alpha must lie in [0, 1]");
  }
  AttentionMap out(mc.height(), mc.width());
  const auto a = mc_prime.values();
  const auto b = mc.values();
  auto o = out.values();
  const double keep = 1.0 - alpha;
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = keep * a[k] + alpha * b[k];
  return out;
}

AttentionMap resize_map(const AttentionMap& m, int height, int width) {
  if (height < 1 || width < 1) throw InputError("resize_map: empty target shape");
  require_finite(m.values(), "resize_map");
  if (height == m.height() && width == m.width()) return m;
  const auto ty = bilinear_taps(m.height(), height);
  const auto tx = bilinear_taps(m.width(), width);
  AttentionMap out(height, width);
  for (int i = 0; i < height; ++i) {
    const Tap& y = ty[static_cast<std::size_t>(i)];
    for (int j = 0; j < width; ++j) {
      const Tap& x = tx[static_cast<std::size_t>(j)];
      const double top = (1.0 - x.frac) * m(y.i0, x.i0) + x.frac * m(y.i0, x.i1);
      const double bot = (1.0 - x.frac) * m(y.i1, x.i0) + x.frac * m(y.i1, x.i1);
      out(i, j) = (1.0 - y.frac) * top + y.frac * bot;
    }
  }
  return out;
}

std::vector<double> resize_map_vjp(std::span<const double> grad_out, int out_h,
                                   int out_w, int in_h, int in_w) {
  if (static_cast<int>(grad_out.size()) != out_h * out_w) {
    throw ContractError("resize_map_vjp: gradient size does not match shape");
  }
  std::vector<double> grad(static_cast<std::size_t>(in_h) * in_w, 0.0);
  if (out_h == in_h && out_w == in_w) {
    std::copy(grad_out.begin(), grad_out.end(), grad.begin());
    return grad;
  }
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  auto at = [&](int i, int j) -> double& {
    return grad[static_cast<std::size_t>(i) * in_w + j];
  };
  for (int i = 0; i < out_h; ++i) {
    const Tap& y = ty[static_cast<std::size_t>(i)];
    for (int j = 0; j < out_w; ++j) {
      const Tap& x = tx[static_cast<std::size_t>(j)];
      const double g = grad_out[static_cast<std::size_t>(i) * out_w + j];
      at(y.i0, x.i0) += (1.0 - y.frac) * (1.0 - x.frac) * g;
      at(y.i0, x.i1) += (1.0 - y.frac) * x.frac * g;
      at(y.i1, x.i0) += y.frac * (1.0 - x.frac) * g;
      at(y.i1, x.i1) += y.frac * x.frac * g;
    }
  }
  return grad;
}

AttentionMap gt_map_from_bbox(const BBox& b, double frame_w, double frame_h,
                              int height, int width) {
  if (!is_valid(b)) throw InputError("gt_map_from_bbox: degenerate box");
  if (!(frame_w > 0.0 && frame_h > 0.0)) {
    throw InputError("gt_map_from_bbox: empty frame");
  }
  if (!intersects_frame(b, frame_w, frame_h)) {
    throw InputError("gt_map_from_bbox: box lies outside the frame");
  }
  AttentionMap out(height, width);
  const double cell_w = frame_w / width;
  const double cell_h = frame_h / height;
  bool any = false;
  for (int i = 0; i < height; ++i) {
    const double cy = (i + 0.5) * cell_h;
    if (cy < b.y || cy >= b.bottom()) continue;
    for (int j = 0; j < width; ++j) {
      const double cx = (j + 0.5) * cell_w;
      if (cx >= b.x && cx < b.right()) {
        out(i, j) = 1.0;
        any = true;
      }
    }
  }
  if (!any) {
    const BBox c = clip_to_frame(b, frame_w, frame_h);
    const int i = std::clamp(static_cast<int>(c.center_y() / cell_h), 0, height - 1);
    const int j = std::clamp(static_cast<int>(c.center_x() / cell_w), 0, width - 1);
    out(i, j) = 1.0;
  }
  return out;
}

namespace {

struct MinMax {
  std::size_t argmin = 0;
  std::size_t argmax = 0;
  double lo = 0.0;
  double range = 0.0;
};

MinMax min_max(std::span<const double> v) {
  MinMax mm;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] < v[mm.argmin]) mm.argmin = k;
    if (v[k] > v[mm.argmax]) mm.argmax = k;
  }
  mm.lo = v[mm.argmin];
  mm.range = v[mm.argmax] - mm.lo;
  return mm;
}

std::vector<double> normalized(std::span<const double> v, const MinMax& mm) {
  std::vector<double> out(v.size(), 0.0);
  if (mm.range > 0.0) {
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = (v[k] - mm.lo) / mm.range;
  }
  return out;
}

}  // namespace

double map_mse(const AttentionMap& m, const AttentionMap& f) {
  require_same_shape(m, f, "map_mse");
  require_finite(m.values(), "map_mse");
  require_finite(f.values(), "map_mse");
  const auto nm = normalized(m.values(), min_max(m.values()));
  const auto nf = normalized(f.values(), min_max(f.values()));
  double s = 0.0;
  for (std::size_t k = 0; k < nm.size(); ++k) {
    const double d = nm[k] - nf[k];
    s += d * d;
  }
  return s / static_cast<double>(nm.size());
}

std::vector<double> map_mse_grad(const AttentionMap& m, const AttentionMap& f) {
  require_same_shape(m, f, "map_mse_grad");
  const auto mv = m.values();
  const MinMax mm = min_max(mv);
  std::vector<double> grad(mv.size(), 0.0);
  if (!(mm.range > 0.0)) return grad;
  const auto nm = normalized(mv, mm);
  const auto nf = normalized(f.values(), min_max(f.values()));
  const double n = static_cast<double>(mv.size());
  double sum_a = 0.0;
  double sum_an = 0.0;
  for (std::size_t k = 0; k < mv.size(); ++k) {
    const double a = 2.0 * (nm[k] - nf[k]) / n;
    grad[k] = a / mm.range;
    sum_a += a;
    sum_an += a * nm[k];
  }
  grad[mm.argmin] += (sum_an - sum_a) / mm.range;
  grad[mm.argmax] -= sum_an / mm.range;
  return grad;
}

BBox extract_bbox(const AttentionMap& m, double frame_w, double frame_h,
                  double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("extract_bbox: tau must lie in (0, 1)");
  require_finite(m.values(), "extract_bbox");
  const double peak = m.max();
  if (!(peak > 0.0)) throw LostTarget("extract_bbox: no activated area");

  const double threshold = tau * peak;
  const int h = m.height();
  const int w = m.width();
  std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
  std::vector<int> stack;

  struct Component {
    double mass = 0.0;
    int i0, i1, j0, j1;
  };
  Component best{-1.0, 0, 0, 0, 0};
  int next_label = 0;
  for (int seed = 0; seed < h * w; ++seed) {
    const auto s = static_cast<std::size_t>(seed);
    if (label[s] >= 0 || m.values()[s] < threshold) continue;
    Component comp{0.0, h, -1, w, -1};
    label[s] = next_label;
    stack.assign(1, seed);
    while (!stack.empty()) {
      const int r = stack.back();
      stack.pop_back();
      const int i = r / w;
      const int j = r % w;
      comp.mass += m(i, j);
      comp.i0 = std::min(comp.i0, i);
      comp.i1 = std::max(comp.i1, i);
      comp.j0 = std::min(comp.j0, j);
      comp.j1 = std::max(comp.j1, j);
      const std::array<std::array<int, 2>, 4> nbrs = {{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
      for (const auto& [ni, nj] : nbrs) {
        if (ni < 0 || nj < 0 || ni >= h || nj >= w) continue;
        const auto q = static_cast<std::size_t>(ni) * w + nj;
        if (label[q] >= 0 || m.values()[q] < threshold) continue;
        label[q] = next_label;
        stack.push_back(ni * w + nj);
      }
    }
    ++next_label;
    if (comp.mass > best.mass) best = comp;
  }

  const double cell_w = frame_w / w;
  const double cell_h = frame_h / h;
  return {best.j0 * cell_w, best.i0 * cell_h, (best.j1 + 1 - best.j0) * cell_w,
          (best.i1 + 1 - best.i0) * cell_h};
}

void write_attention_dump(const std::filesystem::path& path,
                          const AttentionMap& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write("ATTN", 4);
  put_u32(os, static_cast<std::uint32_t>(m.height()));
  put_u32(os, static_cast<std::uint32_t>(m.width()));
  for (double v : m.values()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!os) throw IoError("failed writing " + path.string());
}

AttentionMap read_attention_dump(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (!is || std::memcmp(magic.data(), "ATTN", 4) != 0) {
    throw IoError(path.string() + ": not an attention dump");
  }
  const auto h = get_u32(is);
  const auto w = get_u32(is);
  if (h == 0 || w == 0 || h > 65536 || w > 65536) {
    throw IoError(path.string() + ": bad dimensions");
  }
  std::vector<double> values(static_cast<std::size_t>(h) * w);
  for (double& v : values) v = std::bit_cast<float>(get_u32(is));
  return AttentionMap(static_cast<int>(h), static_cast<int>(w), std::move(values));
}

}  // namespace promptrack

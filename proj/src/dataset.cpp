// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool is_png(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

std::vector<double> parse_numbers(const std::string& line) {
  std::vector<double> out;
  std::string token;
  std::string cleaned = line;
  std::replace_if(cleaned.begin(), cleaned.end(), [](char c) { return c == ',' || c == '\t'; }, ' ');
  std::istringstream fields(cleaned);
  while (fields >> token) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw IoError("cannot parse number '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng: out of memory");
  }
  Image image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("cannot decode PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  image = Image(w, h, 3);
  rows.resize(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = &image.data[static_cast<std::size_t>(y) * w * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw InputError("write_png: expected an RGB image");
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng: out of memory");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 3);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(&image.data[static_cast<std::size_t>(y) * image.width * 3]);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Sequence load_sequence(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_png(entry.path())) files.push_back(entry.path());
  }
  if (files.empty()) throw IoError(dir.string() + " contains no frames");
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

  Sequence seq;
  for (const auto& f : files) {
    seq.frame_names.push_back(f.filename().string());
    seq.frames.push_back(read_png(f));
  }
  const auto gt = dir / "groundtruth.txt";
  if (std::filesystem::exists(gt)) {
    seq.boxes = read_boxes(gt);
    if (seq.boxes->size() != seq.frames.size()) {
      std::ostringstream oss;
      oss << dir.string() << ": " << seq.frames.size() << " frames but " << seq.boxes->size()
          << " boxes";
      throw IoError(oss.str());
    }
  }
  return seq;
}

void save_sequence(const std::filesystem::path& dir, const std::vector<Image>& frames,
                   const std::vector<BBox>* boxes) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::array<char, 32> name{};
    std::snprintf(name.data(), name.size(), "%08zu.png", k + 1);
    write_png(dir / name.data(), frames[k]);
  }
  if (boxes != nullptr) write_boxes(dir / "groundtruth.txt", *boxes);
}

std::vector<BBox> read_boxes(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<BBox> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<double> v;
    try {
      v = parse_numbers(line);
    } catch (const IoError& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (v.size() != 4) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected x,y,w,h");
    }
    boxes.push_back({v[0], v[1], v[2], v[3]});
  }
  return boxes;
}

void write_boxes(const std::filesystem::path& path, const std::vector<BBox>& boxes) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& b : boxes) {
    os << format_number(b.x) << ',' << format_number(b.y) << ',' << format_number(b.w) << ','
       << format_number(b.h) << '\n';
  }
}

void write_trajectory(const std::filesystem::path& path,
                      const std::vector<TrajectoryEntry>& trajectory) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& e : trajectory) {
    os << format_number(e.box.x) << ',' << format_number(e.box.y) << ',' << format_number(e.box.w)
       << ',' << format_number(e.box.h);
    if (e.lost) os << ",L";
    os << '\n';
  }
}

std::vector<TrajectoryEntry> read_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<TrajectoryEntry> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    TrajectoryEntry e;
    e.frame_index = static_cast<int>(out.size()) + 1;
    if (line.size() >= 2 && line.compare(line.size() - 2, 2, ",L") == 0) {
      e.lost = true;
      line.resize(line.size() - 2);
    }
    const auto v = parse_numbers(line);
    if (v.size() != 4) throw IoError(path.string() + ": expected x,y,w,h per line");
    e.box = {v[0], v[1], v[2], v[3]};
    out.push_back(e);
  }
  return out;
}

}  // namespace promptrack

// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "promptrack/attention.hpp"
#include "promptrack/image.hpp"

namespace promptrack {

/// 8-bit RGB PNG. Grey and RGBA inputs are converted to RGB.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

struct Sequence {
  std::vector<std::string> frame_names;
  std::vector<Image> frames;
  std::optional<std::vector<BBox>> boxes;
};

/// Numbered PNG frames of `dir` in lexicographic order, plus groundtruth.txt
/// when present. Throws IoError on an empty directory, an unreadable frame
/// or a frame/box count mismatch.
Sequence load_sequence(const std::filesystem::path& dir);

/// Writes frames as zero-padded 8-digit PNG names (1-based) and, when boxes
/// are given, groundtruth.txt.
void save_sequence(const std::filesystem::path& dir, const std::vector<Image>& frames,
                   const std::vector<BBox>* boxes = nullptr);

/// "x,y,w,h" per line. Also accepts tab/space separators.
std::vector<BBox> read_boxes(const std::filesystem::path& path);
void write_boxes(const std::filesystem::path& path, const std::vector<BBox>& boxes);

struct TrajectoryEntry {
  int frame_index = 0;  // 1-based
  BBox box;
  double confidence = 0.0;
  bool lost = false;
};

/// One "x,y,w,h" line per frame; lost frames carry a trailing ",L".
void write_trajectory(const std::filesystem::path& path,
                      const std::vector<TrajectoryEntry>& trajectory);
std::vector<TrajectoryEntry> read_trajectory(const std::filesystem::path& path);

/// Shortest round-trip decimal for a double.
std::string format_number(double v);

}  // namespace promptrack

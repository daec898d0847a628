// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// OTB/TrackingNet-style overlap and centre-error scores, and a reset-based
// approximation of VOT accuracy, robustness and EAO.
//
// Conventions:
//  * success: 21 thresholds 0, 0.05, ..., 1; a frame succeeds at theta when
//    IoU >= theta; the score is the mean success rate over thresholds.
//  * precision: centre distance <= threshold pixels (default 20).
//  * normalized precision: centre offset divided per axis by the GT width
//    and height, success when its Euclidean norm <= 0.2.
//  * robustness: failures per 100 frames.
//  * eao_approx: mean over segments (initialisation to failure or sequence
//    end) of the segment's mean overlap, failure frames counting as 0.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "promptrack/attention.hpp"

namespace promptrack {

inline constexpr int kSuccessThresholds = 21;

/// Throws InputError on a box with non-positive or non-finite size.
double iou(const BBox& a, const BBox& b);
double center_error(const BBox& pred, const BBox& gt);
double normalized_center_error(const BBox& pred, const BBox& gt);

/// Success rate at each of the 21 thresholds.
std::vector<double> success_curve(std::span<const BBox> preds, std::span<const BBox> gts);
double success_auc(std::span<const BBox> preds, std::span<const BBox> gts);

/// Precision at thresholds 0..max_threshold pixels (inclusive).
std::vector<double> precision_curve(std::span<const BBox> preds, std::span<const BBox> gts,
                                    int max_threshold = 50);
double precision_score(std::span<const BBox> preds, std::span<const BBox> gts,
                       double threshold = 20.0);
double normalized_precision(std::span<const BBox> preds, std::span<const BBox> gts,
                            double threshold = 0.2);

struct SequenceEval {
  std::vector<double> ious;
  std::vector<double> center_errors;
  std::vector<double> normalized_errors;
  int failures = 0;  // frames with zero overlap
};

SequenceEval evaluate_sequence(std::span<const BBox> preds, std::span<const BBox> gts);

enum class VotStatus { kInit, kTracked, kFailure, kSkipped };

/// Per-frame output of a reset-protocol run. Boxes of skipped frames are
/// ignored.
struct VotRun {
  std::vector<BBox> boxes;
  std::vector<VotStatus> status;
};

struct VotResult {
  double eao_approx = 0.0;
  /// Mean IoU over frames that carry a prediction and are not failures.
  double accuracy = 0.0;
  double robustness = 0.0;
  int failures = 0;
};

VotResult vot_eval(const VotRun& run, std::span<const BBox> gts);

/// A run without resets: frame 1 is the initialisation and every later
/// frame with zero overlap a failure.
VotRun vot_run_from_trajectory(std::span<const BBox> preds, std::span<const BBox> gts);

/// "x,y,w,h,status" per frame, status one of init, tracked, failure, skipped.
void write_vot_run(const std::filesystem::path& path, const VotRun& run);
VotRun read_vot_run(const std::filesystem::path& path);

struct MetricReport {
  double suc = 0.0;
  double pre = 0.0;
  double npre = 0.0;
  double eao_approx = 0.0;
  double acc = 0.0;
  double rob = 0.0;
};

/// All six scores; the VOT ones come from `run`, or from
/// vot_run_from_trajectory when it is null.
MetricReport make_report(std::span<const BBox> preds, std::span<const BBox> gts,
                         const VotRun* run = nullptr);

/// {"sequences": {name: {...}}, "mean": {...}} with the six keys above.
std::string report_json(std::span<const std::pair<std::string, MetricReport>> sequences);

/// CSV files "<stem>_success.csv" (threshold,rate) and
/// "<stem>_precision.csv" (pixels,rate).
void write_curves(const std::filesystem::path& dir, const std::string& stem,
                  std::span<const BBox> preds, std::span<const BBox> gts);

}  // namespace promptrack

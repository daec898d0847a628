// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include <sstream>

#include "promptrack/dataset.hpp"
#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

void check_box(const BBox& b) {
  if (!(std::isfinite(b.x) && std::isfinite(b.y) && b.w > 0.0 && b.h > 0.0 &&
        std::isfinite(b.w) && std::isfinite(b.h))) {
    throw InputError("metrics: degenerate box");
  }
}

void check_lengths(std::span<const BBox> preds, std::span<const BBox> gts) {
  if (preds.size() != gts.size()) throw InputError("metrics: prediction and GT lengths differ");
  if (preds.empty()) throw InputError("metrics: empty sequence");
}

double threshold_at(int i) { return i / 20.0; }

nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["suc"] = r.suc;
  j["pre"] = r.pre;
  j["npre"] = r.npre;
  j["eao_approx"] = r.eao_approx;
  j["acc"] = r.acc;
  j["rob"] = r.rob;
  return j;
}

const char* status_name(VotStatus s) {
  switch (s) {
    case VotStatus::kInit: return "init";
    case VotStatus::kTracked: return "tracked";
    case VotStatus::kFailure: return "failure";
    case VotStatus::kSkipped: return "skipped";
  }
  return "skipped";
}

VotStatus parse_status(const std::string& s) {
  if (s == "init") return VotStatus::kInit;
  if (s == "tracked") return VotStatus::kTracked;
  if (s == "failure") return VotStatus::kFailure;
  if (s == "skipped") return VotStatus::kSkipped;
  throw IoError("unknown frame status '" + s + "'");
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
  check_box(a);
  check_box(b);
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double center_error(const BBox& pred, const BBox& gt) {
  return std::hypot(pred.center_x() - gt.center_x(), pred.center_y() - gt.center_y());
}

double normalized_center_error(const BBox& pred, const BBox& gt) {
  check_box(gt);
  return std::hypot((pred.center_x() - gt.center_x()) / gt.w,
                    (pred.center_y() - gt.center_y()) / gt.h);
}

std::vector<double> success_curve(std::span<const BBox> preds, std::span<const BBox> gts) {
  check_lengths(preds, gts);
  std::vector<double> overlaps(preds.size());
  for (std::size_t k = 0; k < preds.size(); ++k) overlaps[k] = iou(preds[k], gts[k]);
  std::vector<double> curve(kSuccessThresholds);
  for (int i = 0; i < kSuccessThresholds; ++i) {
    const double theta = threshold_at(i);
    const auto hits = std::count_if(overlaps.begin(), overlaps.end(),
                                    [theta](double v) { return v >= theta; });
    curve[static_cast<std::size_t>(i)] =
        static_cast<double>(hits) / static_cast<double>(overlaps.size());
  }
  return curve;
}

double success_auc(std::span<const BBox> preds, std::span<const BBox> gts) {
  const auto curve = success_curve(preds, gts);
  double s = 0.0;
  for (double v : curve) s += v;
  return s / kSuccessThresholds;
}

std::vector<double> precision_curve(std::span<const BBox> preds, std::span<const BBox> gts,
                                    int max_threshold) {
  check_lengths(preds, gts);
  std::vector<double> curve;
  for (int px = 0; px <= max_threshold; ++px) curve.push_back(precision_score(preds, gts, px));
  return curve;
}

double precision_score(std::span<const BBox> preds, std::span<const BBox> gts,
                       double threshold) {
  check_lengths(preds, gts);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (center_error(preds[k], gts[k]) <= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double normalized_precision(std::span<const BBox> preds, std::span<const BBox> gts,
                            double threshold) {
  check_lengths(preds, gts);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (normalized_center_error(preds[k], gts[k]) <= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

SequenceEval evaluate_sequence(std::span<const BBox> preds, std::span<const BBox> gts) {
  check_lengths(preds, gts);
  SequenceEval e;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const double o = iou(preds[k], gts[k]);
    e.ious.push_back(o);
    e.center_errors.push_back(center_error(preds[k], gts[k]));
    e.normalized_errors.push_back(normalized_center_error(preds[k], gts[k]));
    if (o == 0.0) ++e.failures;
  }
  return e;
}

VotResult vot_eval(const VotRun& run, std::span<const BBox> gts) {
  if (run.boxes.size() != gts.size() || run.status.size() != gts.size()) {
    throw InputError("vot_eval: run and GT lengths differ");
  }
  if (gts.empty()) throw InputError("vot_eval: empty sequence");
  VotResult r;
  double acc_sum = 0.0;
  int acc_count = 0;
  double seg_sum = 0.0;
  int seg_len = 0;
  double eao_sum = 0.0;
  int segments = 0;
  auto close_segment = [&] {
    if (seg_len > 0) {
      eao_sum += seg_sum / seg_len;
      ++segments;
    }
    seg_sum = 0.0;
    seg_len = 0;
  };
  for (std::size_t k = 0; k < gts.size(); ++k) {
    switch (run.status[k]) {
      case VotStatus::kSkipped:
        break;
      case VotStatus::kFailure:
        ++r.failures;
        ++seg_len;
        close_segment();
        break;
      case VotStatus::kInit:
        close_segment();
        [[fallthrough]];
      case VotStatus::kTracked: {
        const double o = iou(run.boxes[k], gts[k]);
        acc_sum += o;
        ++acc_count;
        seg_sum += o;
        ++seg_len;
        break;
      }
    }
  }
  close_segment();
  r.accuracy = acc_count > 0 ? acc_sum / acc_count : 0.0;
  r.robustness = 100.0 * r.failures / static_cast<double>(gts.size());
  r.eao_approx = segments > 0 ? eao_sum / segments : 0.0;
  return r;
}

VotRun vot_run_from_trajectory(std::span<const BBox> preds, std::span<const BBox> gts) {
  check_lengths(preds, gts);
  VotRun run;
  run.boxes.assign(preds.begin(), preds.end());
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (k == 0) {
      run.status.push_back(VotStatus::kInit);
    } else {
      run.status.push_back(iou(preds[k], gts[k]) == 0.0 ? VotStatus::kFailure : VotStatus::kTracked);
    }
  }
  return run;
}

void write_vot_run(const std::filesystem::path& path, const VotRun& run) {
  if (run.boxes.size() != run.status.size()) throw InputError("write_vot_run: length mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (std::size_t k = 0; k < run.boxes.size(); ++k) {
    const BBox& b = run.boxes[k];
    os << format_number(b.x) << ',' << format_number(b.y) << ',' << format_number(b.w) << ','
       << format_number(b.h) << ',' << status_name(run.status[k]) << '\n';
  }
}

VotRun read_vot_run(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  VotRun run;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw IoError(path.string() + ": expected x,y,w,h,status per line");
    BBox b;
    try {
      b = {std::stod(fields[0]), std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3])};
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed number");
    }
    run.boxes.push_back(b);
    run.status.push_back(parse_status(fields[4]));
  }
  return run;
}

MetricReport make_report(std::span<const BBox> preds, std::span<const BBox> gts,
                         const VotRun* run) {
  MetricReport r;
  r.suc = success_auc(preds, gts);
  r.pre = precision_score(preds, gts);
  r.npre = normalized_precision(preds, gts);
  const VotResult v = vot_eval(run != nullptr ? *run : vot_run_from_trajectory(preds, gts), gts);
  r.eao_approx = v.eao_approx;
  r.acc = v.accuracy;
  r.rob = v.robustness;
  return r;
}

std::string report_json(std::span<const std::pair<std::string, MetricReport>> sequences) {
  nlohmann::ordered_json doc;
  doc["sequences"] = nlohmann::ordered_json::object();
  MetricReport mean;
  for (const auto& [name, r] : sequences) {
    doc["sequences"][name] = to_json(r);
    mean.suc += r.suc;
    mean.pre += r.pre;
    mean.npre += r.npre;
    mean.eao_approx += r.eao_approx;
    mean.acc += r.acc;
    mean.rob += r.rob;
  }
  if (!sequences.empty()) {
    const double n = static_cast<double>(sequences.size());
    mean.suc /= n;
    mean.pre /= n;
    mean.npre /= n;
    mean.eao_approx /= n;
    mean.acc /= n;
    mean.rob /= n;
  }
  doc["mean"] = to_json(mean);
  return doc.dump(2);
}

void write_curves(const std::filesystem::path& dir, const std::string& stem,
                  std::span<const BBox> preds, std::span<const BBox> gts) {
  std::filesystem::create_directories(dir);
  const auto success = success_curve(preds, gts);
  std::ofstream s(dir / (stem + "_success.csv"));
  if (!s) throw IoError("cannot write curves to " + dir.string());
  s << "threshold,rate\n";
  for (int i = 0; i < kSuccessThresholds; ++i) {
    s << threshold_at(i) << ',' << success[static_cast<std::size_t>(i)] << '\n';
  }
  const auto precision = precision_curve(preds, gts);
  std::ofstream p(dir / (stem + "_precision.csv"));
  p << "pixels,rate\n";
  for (std::size_t px = 0; px < precision.size(); ++px) p << px << ',' << precision[px] << '\n';
}

}  // namespace promptrack

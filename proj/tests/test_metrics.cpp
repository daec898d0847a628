// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "oracles.hpp"
#include "promptrack/errors.hpp"
#include "promptrack/metrics.hpp"

using namespace promptrack;

namespace {

std::vector<BBox> random_int_boxes(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> pos(0, 60), size(1, 30);
  std::vector<BBox> out;
  for (int k = 0; k < n; ++k) out.push_back({double(pos(rng)), double(pos(rng)), double(size(rng)), double(size(rng))});
  return out;
}

// Predictions near the GT so every threshold sees some hits.
std::vector<BBox> jitter(const std::vector<BBox>& gts, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-6, 6);
  std::vector<BBox> out;
  for (const BBox& g : gts) out.push_back({g.x + d(rng), g.y + d(rng), std::max(1.0, g.w + d(rng)), std::max(1.0, g.h + d(rng))});
  return out;
}

}  // namespace

TEST_CASE("iou hand cases") {
  CHECK(iou({0, 0, 2, 1}, {1, 0, 2, 1}) == 1.0 / 3.0);
  CHECK(iou({0, 0, 4, 4}, {0, 0, 4, 4}) == 1.0);
  CHECK(iou({0, 0, 4, 4}, {4, 0, 4, 4}) == 0.0);
  CHECK_THROWS_AS(iou({0, 0, 0, 4}, {0, 0, 4, 4}), InputError);
  CHECK_THROWS_AS(iou({0, 0, 4, 4}, {0, 0, 4, -1}), InputError);
}

TEST_CASE("success auc hand case") {
  // IoU 0.58 clears thresholds 0 .. 0.55, twelve of twenty-one.
  const std::vector<BBox> p{{0, 0, 10, 10}};
  const std::vector<BBox> g{{0, 0, 10, 5.8}};
  CHECK(success_auc(p, g) == doctest::Approx(12.0 / 21.0).epsilon(1e-15));
  const std::vector<BBox> same{{3, 3, 5, 5}};
  CHECK(success_auc(same, same) == 1.0);
}

TEST_CASE("metrics equal brute-force references exactly") {
  std::mt19937_64 rng(11);
  for (int c = 0; c < 50; ++c) {
    const std::vector<BBox> g = random_int_boxes(rng, 40);
    const std::vector<BBox> p = c % 2 == 0 ? jitter(g, rng) : random_int_boxes(rng, 40);
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(iou(p[k], g[k]) == oracle::iou_pixels(p[k], g[k]));
    CHECK(success_auc(p, g) == oracle::success_auc(p, g));
    CHECK(precision_score(p, g) == oracle::precision(p, g, 20.0));
    CHECK(precision_score(p, g, 5.0) == oracle::precision(p, g, 5.0));
    CHECK(normalized_precision(p, g) == oracle::normalized_precision(p, g));
  }
}

TEST_CASE("vot scores equal the segment-splitting reference exactly") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> st(0, 9);
  for (int c = 0; c < 50; ++c) {
    const std::vector<BBox> g = random_int_boxes(rng, 30);
    VotRun run;
    run.boxes = jitter(g, rng);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const int s = st(rng);
      run.status.push_back(k == 0 ? VotStatus::kInit
                           : s == 0 ? VotStatus::kFailure
                           : s == 1 ? VotStatus::kSkipped
                           : s == 2 ? VotStatus::kInit
                                    : VotStatus::kTracked);
    }
    const VotResult r = vot_eval(run, g);
    const oracle::Vot o = oracle::vot(run, g);
    CHECK(r.eao_approx == doctest::Approx(o.eao).epsilon(1e-14));
    CHECK(r.accuracy == doctest::Approx(o.acc).epsilon(1e-14));
    CHECK(r.robustness == o.rob);
  }
}

TEST_CASE("vot hand case") {
  const std::vector<BBox> g(5, BBox{0, 0, 4, 4});
  VotRun run;
  run.boxes = {{0, 0, 4, 4}, {0, 0, 4, 2}, {10, 10, 4, 4}, {0, 0, 0, 0}, {0, 0, 4, 4}};
  run.status = {VotStatus::kInit, VotStatus::kTracked, VotStatus::kFailure, VotStatus::kSkipped,
                VotStatus::kInit};
  const VotResult r = vot_eval(run, g);
  // Segments (1, 0.5, 0) and (1).
  CHECK(r.failures == 1);
  CHECK(r.robustness == 20.0);
  CHECK(r.accuracy == doctest::Approx(2.5 / 3.0));
  CHECK(r.eao_approx == doctest::Approx((0.5 + 1.0) / 2.0));
}

TEST_CASE("a plain trajectory becomes an init plus tracked/failure run") {
  const std::vector<BBox> g(3, BBox{0, 0, 4, 4});
  const std::vector<BBox> p{{0, 0, 4, 4}, {9, 9, 2, 2}, {1, 1, 4, 4}};
  const VotRun run = vot_run_from_trajectory(p, g);
  CHECK(run.status == std::vector<VotStatus>{VotStatus::kInit, VotStatus::kFailure, VotStatus::kTracked});
}

TEST_CASE("vot runs round-trip through text") {
  VotRun run;
  run.boxes = {{1.5, 2, 3, 4}, {0.1, 0.2, 0.3, 0.4}};
  run.status = {VotStatus::kInit, VotStatus::kSkipped};
  const auto path = std::filesystem::temp_directory_path() / "promptrack_test.vot.txt";
  write_vot_run(path, run);
  const VotRun back = read_vot_run(path);
  CHECK(back.boxes == run.boxes);
  CHECK(back.status == run.status);
  std::ofstream(path) << "1,2,3\n";
  CHECK_THROWS_AS(read_vot_run(path), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("reports carry all six scores per sequence and as a mean") {
  const std::vector<BBox> g{{0, 0, 10, 10}, {5, 5, 10, 10}};
  const std::vector<BBox> p{{0, 0, 10, 10}, {6, 5, 10, 10}};
  const MetricReport r = make_report(p, g);
  CHECK(r.pre == 1.0);
  CHECK(r.rob == 0.0);
  const std::vector<std::pair<std::string, MetricReport>> rows{{"a", r}, {"b", r}};
  const auto doc = nlohmann::json::parse(report_json(rows));
  for (const char* key : {"suc", "pre", "npre", "eao_approx", "acc", "rob"}) {
    CHECK(doc["mean"].contains(key));
    CHECK(doc["sequences"]["a"].contains(key));
  }
  CHECK(doc["mean"]["suc"].get<double>() == doctest::Approx(r.suc));
}

TEST_CASE("length mismatches are rejected") {
  const std::vector<BBox> a{{0, 0, 1, 1}};
  const std::vector<BBox> b{{0, 0, 1, 1}, {0, 0, 1, 1}};
  CHECK_THROWS_AS(success_auc(a, b), InputError);
  CHECK_THROWS_AS(precision_score(a, b), InputError);
}

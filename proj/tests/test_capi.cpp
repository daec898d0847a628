// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Exercises the shared library through its C interface only.

#include <doctest.h>

#include <cstring>
#include <string>
#include <vector>

#include "promptrack/promptrack.h"

namespace {

// Grey background with a red block at (x, y), both with per-pixel texture.
// A perfectly flat two-tone scene gives a two-valued map, on which the
// min-max normalized loss has no gradient.
std::vector<uint8_t> frame_with_block(int x, int y) {
  std::vector<uint8_t> px(512 * 512 * 3);
  for (int r = 0; r < 512; ++r) {
    for (int c = 0; c < 512; ++c) {
      uint8_t* p = &px[(static_cast<size_t>(r) * 512 + c) * 3];
      const bool in = c >= x && c < x + 80 && r >= y && r < y + 64;
      const int t = static_cast<int>((static_cast<unsigned>(c) * 73856093u ^ static_cast<unsigned>(r) * 19349663u) % 31u) - 15;
      p[0] = static_cast<uint8_t>((in ? 200 : 90) + t);
      p[1] = static_cast<uint8_t>((in ? 40 : 110) + t);
      p[2] = static_cast<uint8_t>((in ? 30 : 100) + t);
    }
  }
  return px;
}

ptk_config* fast_config() {
  ptk_config* cfg = nullptr;
  REQUIRE(ptk_config_create(nullptr, &cfg) == PTK_OK);
  REQUIRE(ptk_config_set(cfg, "learner.epochs", "1") == PTK_OK);
  REQUIRE(ptk_config_set(cfg, "learner.steps_per_epoch", "40") == PTK_OK);
  return cfg;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(ptk_version()) > 0);
  CHECK(std::string(ptk_status_name(PTK_ERR_IO)).size() > 0);
}

TEST_CASE("config create, set and serialise") {
  ptk_config* cfg = fast_config();
  CHECK(ptk_config_set(cfg, "track.beta", "0.25") == PTK_OK);
  char* json = nullptr;
  REQUIRE(ptk_config_to_json(cfg, &json) == PTK_OK);
  CHECK(std::string(json).find("0.25") != std::string::npos);
  ptk_free_string(json);
  CHECK(ptk_config_set(cfg, "track.unknown", "1") == PTK_ERR_INPUT);
  ptk_config_destroy(cfg);
}

TEST_CASE("bad input reports a status and a message") {
  ptk_config* cfg = nullptr;
  CHECK(ptk_config_create("{broken", &cfg) == PTK_ERR_INPUT);
  CHECK(cfg == nullptr);
  CHECK(std::strlen(ptk_last_error()) > 0);
  CHECK(ptk_config_create(nullptr, nullptr) == PTK_ERR_NULL_ARGUMENT);
  CHECK(ptk_config_load("/nonexistent/promptrack.json", &cfg) == PTK_ERR_IO);
  CHECK(ptk_session_step(nullptr, nullptr, nullptr) == PTK_ERR_NULL_ARGUMENT);
}

TEST_CASE("a session follows a moving block") {
  ptk_config* cfg = fast_config();
  ptk_backbone* bb = nullptr;
  ptk_modules* mods = nullptr;
  REQUIRE(ptk_backbone_create(cfg, &bb) == PTK_OK);
  REQUIRE(ptk_modules_create(cfg, &mods) == PTK_OK);
  const int dim = ptk_backbone_prompt_dim(bb);
  CHECK(dim > 0);

  const auto f1 = frame_with_block(200, 200);
  const ptk_image img1{512, 512, f1.data()};
  ptk_session* s = nullptr;
  REQUIRE(ptk_session_open(bb, mods, cfg, &img1, ptk_bbox{200, 200, 80, 64}, &s) == PTK_OK);

  size_t n = 0;
  REQUIRE(ptk_session_prompt(s, nullptr, 0, &n) == PTK_OK);
  CHECK(n == static_cast<size_t>(dim));
  std::vector<double> p(n);
  CHECK(ptk_session_prompt(s, p.data(), 1, &n) == PTK_ERR_INPUT);
  REQUIRE(ptk_session_prompt(s, p.data(), p.size(), &n) == PTK_OK);

  for (int k = 1; k <= 6; ++k) {
    const auto f = frame_with_block(200 + 4 * k, 200);
    const ptk_image img{512, 512, f.data()};
    ptk_track_result r{};
    REQUIRE(ptk_session_step(s, &img, &r) == PTK_OK);
    CHECK(r.frame_index == k + 1);
    CHECK(r.lost == 0);
    CHECK(std::abs(r.box.x + 0.5 * r.box.w - (240 + 4 * k)) <= 10.0);
    CHECK(std::abs(r.box.y + 0.5 * r.box.h - 232) <= 10.0);
  }
  const ptk_image bad{512, 512, nullptr};
  ptk_track_result r{};
  CHECK(ptk_session_step(s, &bad, &r) == PTK_ERR_INPUT);

  ptk_session_destroy(s);
  ptk_modules_destroy(mods);
  ptk_backbone_destroy(bb);
  ptk_config_destroy(cfg);
}

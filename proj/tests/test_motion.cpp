// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "promptrack/errors.hpp"
#include "promptrack/motion.hpp"
#include "promptrack/synth.hpp"

using namespace promptrack;

namespace {

std::vector<MotionFrame> window_of(const SynthClip& clip, std::size_t end) {
  std::vector<MotionFrame> w;
  for (std::size_t k = end - kWindow; k <= end; ++k) w.push_back(make_motion_frame(clip.frames[k]));
  return w;
}

SynthClip moving_clip() {
  SynthSpec spec;
  spec.frame_count = 8;
  spec.velocity_x = 6.0;
  return generate_synthetic_clip(spec, 21);
}

}  // namespace

TEST_CASE("motion frames need 512 x 512 RGB and are centred") {
  const SynthClip clip = moving_clip();
  const MotionFrame f = make_motion_frame(clip.frames[0]);
  CHECK(f.values.size() == static_cast<std::size_t>(3 * kMotionGrid * kMotionGrid));
  for (double v : f.values) {
    CHECK(v >= -0.5);
    CHECK(v <= 0.5);
  }
  CHECK_THROWS_AS(make_motion_frame(Image(256, 256)), InputError);
}

TEST_CASE("encoders and the query produce motion-width outputs") {
  const SynthClip clip = moving_clip();
  const MotionModules m = MotionModules::create(1);
  const auto w = window_of(clip, kWindow);
  const MotionTokens lt = encode_long_term(m, w);
  const MotionTokens st = encode_short_term(m, w[kWindow], w[kWindow - 1]);
  CHECK(lt.tokens.cols() == kMotionDim);
  CHECK(st.tokens.cols() == kMotionDim);
  CHECK(lt.horizon == Horizon::kLong);
  CHECK(st.horizon == Horizon::kShort);
  const TargetQuery q = target_query(m, crop(clip.frames[0], clip.boxes[0]));
  CHECK(q.q.size() == kMotionDim);
  CHECK_THROWS_AS(encode_long_term(m, std::span(w).subspan(0, 3)), InputError);
}

TEST_CASE("query extraction rejects an empty crop") {
  CHECK_THROWS_AS(QueryExtractor::prepare(Image()), InputError);
}

TEST_CASE("cross attention hand case") {
  CrossAttention att;
  att.key = Linear(2, 2, false);
  att.value = Linear(2, 2, false);
  att.key.weight.setIdentity();
  att.value.weight.setIdentity();
  MotionTokens m;
  m.tokens.resize(2, 2);
  m.tokens << 1.0, 0.0,
              0.0, 1.0;
  const TargetQuery q{Eigen::Vector2d(std::sqrt(2.0) * std::log(3.0), 0.0)};
  // logits (log 3, 0) -> weights (3/4, 1/4) -> output (3/4, 1/4).
  const ConditionedMotion l = condition_motion(att, q, m);
  CHECK(l.v[0] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(l.v[1] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("cross attention weights form a distribution") {
  std::mt19937_64 rng(3);
  const CrossAttention att(kMotionDim, rng);
  MotionTokens m;
  m.tokens = Eigen::MatrixXd::Random(10, kMotionDim);
  CrossAttention::Cache cache;
  att.forward(TargetQuery{Eigen::VectorXd::Random(kMotionDim)}, m, &cache);
  CHECK(cache.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cache.weights.minCoeff() >= 0.0);
}

TEST_CASE("fusion with [I | 0] weights passes the long-term vector through") {
  const int d = kMotionDim;
  Linear fc1(2 * d, 2 * d);
  Linear fc2(2 * d, d);
  for (int k = 0; k < d; ++k) {
    fc1.weight(k, k) = 1.0;       // relu(x)
    fc1.weight(d + k, k) = -1.0;  // relu(-x)
    fc2.weight(k, k) = 1.0;
    fc2.weight(k, d + k) = -1.0;
  }
  const Mlp2 fusion(std::move(fc1), std::move(fc2));
  const ConditionedMotion l_long{Eigen::VectorXd::Random(d)};
  const ConditionedMotion l_short{Eigen::VectorXd::Random(d)};
  CHECK(fuse_motion(fusion, l_long, l_short).v == l_long.v);
  CHECK_THROWS_AS(fuse_motion(fusion, l_long, ConditionedMotion{Eigen::VectorXd::Zero(3)}),
                  ContractError);
}

TEST_CASE("extract_motion is deterministic and honours the horizon set") {
  const SynthClip clip = moving_clip();
  const MotionModules m = MotionModules::create(2);
  const auto w = window_of(clip, kWindow + 1);
  const Eigen::MatrixXd tmpl = QueryExtractor::prepare(crop(clip.frames[0], clip.boxes[0]));
  const ConditionedMotion a = extract_motion(m, w, tmpl, HorizonSet::kBoth);
  const ConditionedMotion b = extract_motion(m, w, tmpl, HorizonSet::kBoth);
  CHECK(a.v == b.v);
  CHECK(a.v.size() == kMotionDim);
  const ConditionedMotion lo = extract_motion(m, w, tmpl, HorizonSet::kLongOnly);
  const ConditionedMotion so = extract_motion(m, w, tmpl, HorizonSet::kShortOnly);
  CHECK(lo.v != a.v);
  CHECK(so.v != a.v);
  CHECK_THROWS_AS(extract_motion(m, std::span(w).subspan(1), tmpl, HorizonSet::kBoth), InputError);
}

TEST_CASE("module creation is seeded") {
  MotionModules a = MotionModules::create(5);
  MotionModules b = MotionModules::create(5);
  MotionModules c = MotionModules::create(6);
  std::vector<ParamView> pa, pb, pc;
  a.collect("", pa);
  b.collect("", pb);
  c.collect("", pc);
  REQUIRE(pa.size() == pc.size());
  bool same_ab = true, same_ac = true;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    same_ab = same_ab && std::equal(pa[i].data.begin(), pa[i].data.end(), pb[i].data.begin());
    same_ac = same_ac && std::equal(pa[i].data.begin(), pa[i].data.end(), pc[i].data.begin());
  }
  CHECK(same_ab);
  CHECK_FALSE(same_ac);
}

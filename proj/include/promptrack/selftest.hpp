// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Finite-difference gradient probes and the runtime invariant suite behind
// `promptrack selftest`.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "promptrack/backbone.hpp"
#include "promptrack/updater.hpp"

namespace promptrack {

struct GradCheck {
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

/// |a - n| / max(|a|, |n|); 0 when both are below `floor`.
double relative_error(double analytic, double numeric, double floor = 1e-12);

/// Directional derivative of prompt_loss along a seeded random unit
/// direction, against a central difference with step h.
GradCheck check_prompt_gradient(const Backbone& backbone, const LatentImage& z_t, int t,
                                std::span<const double> eps, const PromptEmbedding& p,
                                const AttentionMap& gt, double alpha, double dm_weight,
                                std::uint64_t direction_seed, double h = 1e-5);

/// Parameter groups of UpdaterModules: "motion.long_encoder", ...,
/// "blend_head", "projection".
std::vector<std::string> updater_parameter_groups();

/// One directional check of updater_step's loss per parameter group, along
/// the sum of a seeded random unit vector and the analytic gradient's unit
/// direction. The
/// step grows from h up to 100 h for groups whose directional derivative is
/// too small for h to resolve.
std::vector<GradCheck> check_updater_gradients(const Backbone& backbone,
                                               const UpdaterModules& modules,
                                               const Eigen::MatrixXd& template_tokens,
                                               const PromptEmbedding& p_prev,
                                               const UpdaterFrame& frame,
                                               const UpdaterConfig& cfg,
                                               std::uint64_t direction_seed, double h = 1e-5);

struct SelftestRow {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs every check; `on_row` sees each row as it completes.
std::vector<SelftestRow> run_selftest(const std::function<void(const SelftestRow&)>& on_row = {});

}  // namespace promptrack

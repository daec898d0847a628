// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal dense layers with hand-written backward passes, plus Adam.
// Gradients accumulate into a structurally identical "grad" instance.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace promptrack {

/// Named, mutable view of one parameter tensor (row-major shape, storage in
/// Eigen's column-major order).
struct ParamView {
  std::string name;
  std::vector<int> shape;
  std::span<double> data;
  /// Multiplier on the optimizer's learning rate for this tensor.
  double lr_scale = 1.0;
};

struct Linear {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out, or empty when the layer has no bias

  Linear() = default;
  Linear(int in, int out, bool with_bias = true);

  /// Uniform(-s, s) weights with s = gain / sqrt(in); zero bias.
  static Linear random(int in, int out, std::mt19937_64& rng, double gain = 1.0,
                       bool with_bias = true);

  int in_features() const { return static_cast<int>(weight.cols()); }
  int out_features() const { return static_cast<int>(weight.rows()); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  /// Row-wise application: X is n x in, result n x out.
  Eigen::MatrixXd forward_rows(const Eigen::MatrixXd& x) const;

  /// Accumulates parameter gradients into `grad`; returns d/d(input).
  Eigen::VectorXd backward(const Eigen::VectorXd& x, const Eigen::VectorXd& grad_out,
                           Linear& grad) const;
  Eigen::MatrixXd backward_rows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& grad_out,
                                Linear& grad) const;

  /// Weight and bias carry a 1 / in_features learning-rate multiplier so an
  /// Adam step moves the output by O(lr) whatever the layer width.
  void collect(const std::string& prefix, std::vector<ParamView>& out);
};

/// fc2(relu(fc1(x))).
struct Mlp2 {
  Linear fc1;
  Linear fc2;

  struct Cache {
    Eigen::VectorXd input;
    Eigen::VectorXd hidden_pre;
  };

  Mlp2() = default;
  Mlp2(Linear first, Linear second);

  static Mlp2 random(int in, int hidden, int out, std::mt19937_64& rng);

  int in_features() const { return fc1.in_features(); }
  int out_features() const { return fc2.out_features(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x, Cache* cache = nullptr) const;
  Eigen::VectorXd backward(const Cache& cache, const Eigen::VectorXd& grad_out,
                           Mlp2& grad) const;

  void collect(const std::string& prefix, std::vector<ParamView>& out);
};

/// Zeroes every parameter listed.
void zero_params(std::span<ParamView> params);

/// Sum of squares over all listed parameters.
double squared_norm(std::span<const ParamView> params);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(AdamConfig config, std::span<const ParamView> params);

  /// One bias-corrected update. `grads` must mirror `params` one-to-one.
  void step(std::span<ParamView> params, std::span<const ParamView> grads);

  int steps_taken() const { return step_; }

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  int step_ = 0;
};

}  // namespace promptrack

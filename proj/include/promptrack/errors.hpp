// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace promptrack {

enum class ErrorCode {
  kInput = 1,
  kContract = 2,
  kLostTarget = 3,
  kOptimization = 4,
  kIo = 5,
  kInternal = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed or out-of-domain input (non-finite values, degenerate boxes,
/// wrong image sizes).
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorCode::kInput, what) {}
};

/// A caller broke a precondition between two values it controls, e.g. shapes
/// that must agree.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error(ErrorCode::kContract, what) {}
};

/// The attention map carries no activation; the pipeline turns this into a
/// lost-target frame.
class LostTarget : public Error {
 public:
  explicit LostTarget(const std::string& what)
      : Error(ErrorCode::kLostTarget, what) {}
};

/// Optimization diverged. Carries the per-step loss history recorded before
/// the failure.
class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& what, std::vector<double> losses)
      : Error(ErrorCode::kOptimization, what), losses_(std::move(losses)) {}

  const std::vector<double>& losses() const noexcept { return losses_; }

 private:
  std::vector<double> losses_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

}  // namespace promptrack

// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

// On-disk formats for trained state.
//
// Named-tensor archive: a JSON manifest
//   {"format": "promptrack-tensors", "version": 1, "blob": "<file>",
//    "tensors": [{"name", "shape", "offset", "count"}, ...]}
// next to a blob of row-major 32-bit little-endian floats; "offset" is in
// bytes. Prompts use a manifest {"format": "promptrack-prompt", "dim",
// "seed", "config", "blob"} and a raw float vector of length dim.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "promptrack/backbone.hpp"
#include "promptrack/nn.hpp"
#include "promptrack/updater.hpp"

namespace promptrack {

/// Blob path used for a manifest: same stem, ".bin".
std::filesystem::path blob_path_for(const std::filesystem::path& manifest);

void save_tensors(const std::filesystem::path& manifest, std::span<const ParamView> tensors);

/// Fills every view from the archive. Throws IoError when a tensor is
/// missing, has another shape, or the blob is short.
void load_tensors(const std::filesystem::path& manifest, std::span<ParamView> tensors);

void save_modules(const std::filesystem::path& manifest, UpdaterModules& modules);
UpdaterModules load_modules(const std::filesystem::path& manifest);

struct StoredPrompt {
  PromptEmbedding prompt;
  std::uint64_t seed = 0;
  /// JSON text echoing the configuration the prompt was learned with.
  std::string config_json = "{}";
};

void save_prompt(const std::filesystem::path& manifest, const StoredPrompt& prompt);
StoredPrompt load_prompt(const std::filesystem::path& manifest);

}  // namespace promptrack

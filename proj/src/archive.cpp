// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "promptrack/errors.hpp"

namespace promptrack {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kTensorFormat = "promptrack-tensors";
constexpr const char* kPromptFormat = "promptrack-prompt";

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

void put_f32(std::string& out, double v) {
  const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  char b[4];
  std::memcpy(b, &bits, 4);
  out.append(b, 4);
}

double get_f32(const std::string& blob, std::size_t offset) {
  std::uint32_t bits;
  std::memcpy(&bits, blob.data() + offset, 4);
  return static_cast<double>(std::bit_cast<float>(to_le(bits)));
}

// Row-major index -> storage index. 2-D views are stored column-major.
std::size_t storage_index(const ParamView& v, std::size_t row_major) {
  if (v.shape.size() != 2) return row_major;
  const auto rows = static_cast<std::size_t>(v.shape[0]);
  const auto cols = static_cast<std::size_t>(v.shape[1]);
  const std::size_t r = row_major / cols;
  const std::size_t c = row_major % cols;
  return c * rows + r;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

json read_manifest(const fs::path& path, const char* format) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("format", std::string{}) != format) {
    throw IoError(path.string() + ": not a " + std::string(format) + " manifest");
  }
  return doc;
}

fs::path blob_for(const fs::path& manifest, const json& doc) {
  const std::string name = doc.value("blob", std::string{});
  if (name.empty()) return blob_path_for(manifest);
  return manifest.parent_path() / name;
}

}  // namespace

fs::path blob_path_for(const fs::path& manifest) {
  fs::path p = manifest;
  p.replace_extension(".bin");
  return p;
}

void save_tensors(const fs::path& manifest, std::span<const ParamView> tensors) {
  json doc;
  doc["format"] = kTensorFormat;
  doc["version"] = 1;
  const fs::path blob = blob_path_for(manifest);
  doc["blob"] = blob.filename().string();
  doc["tensors"] = json::array();
  std::string bytes;
  for (const auto& t : tensors) {
    json entry;
    entry["name"] = t.name;
    entry["shape"] = t.shape;
    entry["offset"] = bytes.size();
    entry["count"] = t.data.size();
    doc["tensors"].push_back(entry);
    for (std::size_t i = 0; i < t.data.size(); ++i) put_f32(bytes, t.data[storage_index(t, i)]);
  }
  write_file(blob, bytes);
  write_file(manifest, doc.dump(2) + "\n");
}

void load_tensors(const fs::path& manifest, std::span<ParamView> tensors) {
  const json doc = read_manifest(manifest, kTensorFormat);
  const std::string blob = read_file(blob_for(manifest, doc));
  std::map<std::string, const json*> index;
  for (const auto& entry : doc.at("tensors")) index[entry.at("name").get<std::string>()] = &entry;
  for (auto& t : tensors) {
    const auto it = index.find(t.name);
    if (it == index.end()) throw IoError(manifest.string() + ": missing tensor '" + t.name + "'");
    const json& entry = *it->second;
    if (entry.at("shape").get<std::vector<int>>() != t.shape) {
      throw IoError(manifest.string() + ": tensor '" + t.name + "' has another shape");
    }
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (count != t.data.size() || offset + 4 * count > blob.size()) {
      throw IoError(manifest.string() + ": tensor '" + t.name + "' overruns the blob");
    }
    for (std::size_t i = 0; i < count; ++i) t.data[storage_index(t, i)] = get_f32(blob, offset + 4 * i);
  }
}

void save_modules(const fs::path& manifest, UpdaterModules& modules) {
  const auto params = modules.parameters();
  save_tensors(manifest, params);
}

UpdaterModules load_modules(const fs::path& manifest) {
  const json doc = read_manifest(manifest, kTensorFormat);
  int dim = 0;
  for (const auto& entry : doc.at("tensors")) {
    if (entry.at("name") == "projection.weight") dim = entry.at("shape").at(0).get<int>();
  }
  if (dim < 1) throw IoError(manifest.string() + ": no projection.weight tensor");
  UpdaterModules modules = UpdaterModules::create(0, dim);
  auto params = modules.parameters();
  load_tensors(manifest, params);
  return modules;
}

void save_prompt(const fs::path& manifest, const StoredPrompt& prompt) {
  json doc;
  doc["format"] = kPromptFormat;
  doc["dim"] = prompt.prompt.dim();
  doc["seed"] = prompt.seed;
  try {
    doc["config"] = json::parse(prompt.config_json);
  } catch (const json::parse_error&) {
    throw InputError("save_prompt: config echo is not JSON");
  }
  const fs::path blob = blob_path_for(manifest);
  doc["blob"] = blob.filename().string();
  std::string bytes;
  for (double v : prompt.prompt.values) put_f32(bytes, v);
  write_file(blob, bytes);
  write_file(manifest, doc.dump(2) + "\n");
}

StoredPrompt load_prompt(const fs::path& manifest) {
  const json doc = read_manifest(manifest, kPromptFormat);
  const std::string blob = read_file(blob_for(manifest, doc));
  const int dim = doc.at("dim").get<int>();
  if (dim < 1 || blob.size() != 4 * static_cast<std::size_t>(dim)) {
    throw IoError(manifest.string() + ": prompt blob size does not match dim");
  }
  StoredPrompt out;
  out.prompt.values.resize(dim);
  for (int i = 0; i < dim; ++i) out.prompt.values[i] = get_f32(blob, 4 * static_cast<std::size_t>(i));
  out.seed = doc.value("seed", std::uint64_t{0});
  out.config_json = doc.contains("config") ? doc["config"].dump() : "{}";
  return out;
}

}  // namespace promptrack

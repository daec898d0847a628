// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0
//
// promptrack: batch front end over the C API.
//
//   promptrack synth         --count N --out DIR
//   promptrack train-updater [--clips DIR] --out updater.json
//   promptrack learn-prompt  --sequence DIR --out prompt.json
//   promptrack track         --sequence DIR... [--modules updater.json] [--vot] --out DIR
//   promptrack eval          --sequence DIR... --results DIR --out report.json
//   promptrack selftest
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "promptrack/promptrack.h"

namespace {

namespace fs = std::filesystem;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  std::string what;
};

void check(ptk_status s, const char* action) {
  if (s != PTK_OK) {
    throw Failure{std::string(action) + ": " + ptk_status_name(s) + ": " + ptk_last_error()};
  }
}

// RAII wrappers over the C handles.
template <class T, void (*Destroy)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Destroy(p); }
};

using Config = Handle<ptk_config, ptk_config_destroy>;
using Backbone = Handle<ptk_backbone, ptk_backbone_destroy>;
using Modules = Handle<ptk_modules, ptk_modules_destroy>;

std::string sequence_name(const std::string& dir) {
  fs::path p(dir);
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

void print_line(const char* line, void*) { std::printf("%s\n", line); }

void print_epoch(int epoch, double loss, void*) {
  std::printf("epoch %3d  loss %.6g\n", epoch + 1, loss);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-based visual tracking with attention harmonization"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string seed;
  std::string out;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Global seed");
  app.add_option("--out", out, "Output file or directory");
  app.add_option("--set", overrides, "Override a config field, key=value (repeatable)");

  auto* synth = app.add_subcommand("synth", "Write synthetic clips");
  int count = 1;
  synth->add_option("--count", count, "Number of clips")->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train-updater", "Train the online prompt updater");
  std::string clips;
  train->add_option("--clips", clips, "Directory of clip directories (default: synthetic)");

  auto* learn = app.add_subcommand("learn-prompt", "Learn the frame-1 prompt of a sequence");
  std::string learn_sequence;
  learn->add_option("--sequence", learn_sequence, "Sequence directory")->required();

  auto* track = app.add_subcommand("track", "Track sequences from their first GT box");
  std::vector<std::string> track_sequences;
  std::string modules_path;
  std::string attention_dir;
  bool vot = false;
  track->add_option("--sequence", track_sequences, "Sequence directories")->required();
  track->add_option("--modules", modules_path, "Trained updater (default: frozen prompt)");
  track->add_flag("--vot", vot, "Also run the reset protocol");
  track->add_option("--attention-dir", attention_dir, "Write per-frame ATTN dumps here");

  auto* eval = app.add_subcommand("eval", "Score trajectories");
  std::vector<std::string> eval_sequences;
  std::string results;
  std::string curves;
  eval->add_option("--sequence", eval_sequences, "Sequence directories")->required();
  eval->add_option("--results", results, "Directory of <sequence>.txt trajectories")->required();
  eval->add_option("--curves", curves, "Write success/precision CSVs here");

  auto* selftest = app.add_subcommand("selftest", "Run the invariant and gradient suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    Config cfg;
    if (config_path.empty()) {
      check(ptk_config_create(nullptr, &cfg.p), "config");
    } else {
      check(ptk_config_load(config_path.c_str(), &cfg.p), "config");
    }
    if (!seed.empty()) check(ptk_config_set(cfg.p, "seed", seed.c_str()), "--seed");
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "--set expects key=value, got '%s'\n", kv.c_str());
        return kExitUsage;
      }
      check(ptk_config_set(cfg.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()), "--set");
    }

    if (synth->parsed()) {
      const std::string dir = out.empty() ? "clips" : out;
      check(ptk_synth_write(cfg.p, dir.c_str(), count), "synth");
      std::printf("wrote %d clip(s) to %s\n", count, dir.c_str());
      return 0;
    }

    if (selftest->parsed()) {
      int failures = 0;
      check(ptk_selftest(print_line, nullptr, &failures), "selftest");
      std::printf("%s: %d failing check(s)\n", failures == 0 ? "PASS" : "FAIL", failures);
      return failures == 0 ? 0 : kExitFailure;
    }

    Backbone backbone;
    check(ptk_backbone_create(cfg.p, &backbone.p), "backbone");

    if (train->parsed()) {
      const std::string manifest = out.empty() ? "updater.json" : out;
      Modules modules;
      check(ptk_modules_create(cfg.p, &modules.p), "modules");
      double loss = 0.0;
      check(ptk_train_updater(modules.p, backbone.p, cfg.p, clips.empty() ? nullptr : clips.c_str(),
                              print_epoch, nullptr, &loss),
            "train-updater");
      check(ptk_modules_save(modules.p, manifest.c_str()), "save");
      std::printf("final loss %.6g, weights in %s\n", loss, manifest.c_str());
      return 0;
    }

    if (learn->parsed()) {
      const std::string manifest = out.empty() ? "prompt.json" : out;
      double first = 0.0;
      double last = 0.0;
      check(ptk_learn_prompt(backbone.p, cfg.p, learn_sequence.c_str(), manifest.c_str(), &first, &last),
            "learn-prompt");
      std::printf("loss %.6g -> %.6g, prompt in %s\n", first, last, manifest.c_str());
      return 0;
    }

    if (track->parsed()) {
      const fs::path dir = out.empty() ? fs::path("results") : fs::path(out);
      Modules modules;
      if (!modules_path.empty()) check(ptk_modules_load(modules_path.c_str(), &modules.p), "modules");
      for (const auto& seq : track_sequences) {
        const std::string name = sequence_name(seq);
        const std::string traj = (dir / (name + ".txt")).string();
        const std::string vot_path = (dir / (name + ".vot.txt")).string();
        const std::string attn = attention_dir.empty() ? "" : (fs::path(attention_dir) / name).string();
        check(ptk_track_sequence(backbone.p, modules.p, cfg.p, seq.c_str(), traj.c_str(),
                                 vot ? vot_path.c_str() : nullptr, attn.empty() ? nullptr : attn.c_str()),
              ("track " + name).c_str());
        std::printf("%s -> %s\n", name.c_str(), traj.c_str());
      }
      return 0;
    }

    if (eval->parsed()) {
      const std::string report = out.empty() ? "report.json" : out;
      std::vector<std::string> trajectories;
      std::vector<const char*> seq_ptrs;
      std::vector<const char*> traj_ptrs;
      for (const auto& seq : eval_sequences) {
        trajectories.push_back((fs::path(results) / (sequence_name(seq) + ".txt")).string());
      }
      for (std::size_t i = 0; i < eval_sequences.size(); ++i) {
        seq_ptrs.push_back(eval_sequences[i].c_str());
        traj_ptrs.push_back(trajectories[i].c_str());
      }
      check(ptk_evaluate(seq_ptrs.data(), traj_ptrs.data(), seq_ptrs.size(), report.c_str(),
                         curves.empty() ? nullptr : curves.c_str()),
            "eval");
      std::printf("report in %s\n", report.c_str());
      return 0;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.what.c_str());
    return kExitFailure;
  }
  return kExitUsage;
}

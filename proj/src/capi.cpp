// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptrack/promptrack.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "promptrack/archive.hpp"
#include "promptrack/config.hpp"
#include "promptrack/dataset.hpp"
#include "promptrack/errors.hpp"
#include "promptrack/metrics.hpp"
#include "promptrack/pipeline.hpp"
#include "promptrack/selftest.hpp"
#include "promptrack/synth.hpp"

struct ptk_config {
  promptrack::Config cfg;
};

struct ptk_backbone {
  std::unique_ptr<promptrack::SyntheticBackbone> backbone;
};

struct ptk_modules {
  promptrack::UpdaterModules modules;
};

struct ptk_session {
  std::unique_ptr<promptrack::TrackSession> session;
};

namespace {

namespace fs = std::filesystem;
using namespace promptrack;

thread_local std::string g_last_error;

ptk_status fail(ptk_status status, const std::string& what) {
  g_last_error = what;
  return status;
}

// Maps exceptions to status codes; every exported function goes through here.
template <class F>
ptk_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return PTK_OK;
  } catch (const Error& e) {
    return fail(static_cast<ptk_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PTK_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PTK_ERR_INTERNAL, e.what());
  }
}

Image to_image(const ptk_image* img) {
  if (img->width <= 0 || img->height <= 0 || img->data == nullptr) {
    throw InputError("image has no pixels");
  }
  Image out(img->width, img->height, 3);
  std::memcpy(out.data.data(), img->data, out.data.size());
  return out;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

const UpdaterModules* modules_or_null(const ptk_modules* m) {
  return m == nullptr ? nullptr : &m->modules;
}

}  // namespace

extern "C" {

const char* ptk_version(void) { return "0.1.0"; }

const char* ptk_last_error(void) { return g_last_error.c_str(); }

const char* ptk_status_name(ptk_status status) {
  switch (status) {
    case PTK_OK: return "ok";
    case PTK_ERR_INPUT: return "input error";
    case PTK_ERR_CONTRACT: return "contract error";
    case PTK_ERR_LOST_TARGET: return "lost target";
    case PTK_ERR_OPTIMIZATION: return "optimization error";
    case PTK_ERR_IO: return "i/o error";
    case PTK_ERR_INTERNAL: return "internal error";
    case PTK_ERR_NULL_ARGUMENT: return "null argument";
  }
  return "unknown status";
}

void ptk_free_string(char* s) { std::free(s); }

ptk_status ptk_config_create(const char* json, ptk_config** out) {
  if (out == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "out is null");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<ptk_config>();
    if (json != nullptr) c->cfg = config_from_json(json);
    *out = c.release();
  });
}

ptk_status ptk_config_load(const char* path, ptk_config** out) {
  if (out == nullptr || path == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "path or out is null");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<ptk_config>();
    c->cfg = load_config(path);
    *out = c.release();
  });
}

ptk_status ptk_config_set(ptk_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr || key == nullptr || value == nullptr) {
    return fail(PTK_ERR_NULL_ARGUMENT, "config, key or value is null");
  }
  return guarded([&] { set_config_value(cfg->cfg, key, value); });
}

ptk_status ptk_config_to_json(const ptk_config* cfg, char** out) {
  if (cfg == nullptr || out == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "config or out is null");
  *out = nullptr;
  return guarded([&] { *out = dup_string(config_to_json(cfg->cfg)); });
}

void ptk_config_destroy(ptk_config* cfg) { delete cfg; }

ptk_status ptk_backbone_create(const ptk_config* cfg, ptk_backbone** out) {
  if (cfg == nullptr || out == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "config or out is null");
  *out = nullptr;
  return guarded([&] {
    auto b = std::make_unique<ptk_backbone>();
    b->backbone = std::make_unique<SyntheticBackbone>(cfg->cfg.backbone);
    *out = b.release();
  });
}

int ptk_backbone_prompt_dim(const ptk_backbone* backbone) {
  return backbone == nullptr ? 0 : backbone->backbone->prompt_dim();
}

void ptk_backbone_destroy(ptk_backbone* backbone) { delete backbone; }

ptk_status ptk_modules_create(const ptk_config* cfg, ptk_modules** out) {
  if (cfg == nullptr || out == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "config or out is null");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<ptk_modules>();
    m->modules = UpdaterModules::create(cfg->cfg.updater_config().seed, cfg->cfg.backbone.prompt_dim);
    *out = m.release();
  });
}

ptk_status ptk_modules_load(const char* manifest, ptk_modules** out) {
  if (manifest == nullptr || out == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "manifest or out is null");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<ptk_modules>();
    m->modules = load_modules(manifest);
    *out = m.release();
  });
}

ptk_status ptk_modules_save(const ptk_modules* modules, const char* manifest) {
  if (modules == nullptr || manifest == nullptr) {
    return fail(PTK_ERR_NULL_ARGUMENT, "modules or manifest is null");
  }
  return guarded([&] {
    UpdaterModules copy = modules->modules;
    save_modules(manifest, copy);
  });
}

void ptk_modules_destroy(ptk_modules* modules) { delete modules; }

ptk_status ptk_train_updater(ptk_modules* modules, const ptk_backbone* backbone,
                             const ptk_config* cfg, const char* clips_root,
                             ptk_progress_fn progress, void* user, double* final_loss) {
  if (modules == nullptr || backbone == nullptr || cfg == nullptr) {
    return fail(PTK_ERR_NULL_ARGUMENT, "modules, backbone or config is null");
  }
  return guarded([&] {
    const UpdaterConfig ucfg = cfg->cfg.updater_config();
    TrainProgress cb;
    if (progress != nullptr) cb = [&](int epoch, double loss) { progress(epoch, loss, user); };
    TrainReport report;
    if (clips_root != nullptr) {
      report = train_updater(DirectoryLabelSource(clips_root), *backbone->backbone, ucfg,
                             modules->modules, cb);
    } else {
      const SyntheticLabelSource source(cfg->cfg.synth,
                                        static_cast<std::size_t>(cfg->cfg.train_clips), ucfg.seed);
      report = train_updater(source, *backbone->backbone, ucfg, modules->modules, cb);
    }
    if (final_loss != nullptr) *final_loss = report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back();
  });
}

ptk_status ptk_synth_write(const ptk_config* cfg, const char* out_dir, int count) {
  if (cfg == nullptr || out_dir == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "config or out_dir is null");
  return guarded([&] {
    if (count < 1) throw InputError("synth: count must be positive");
    const SyntheticLabelSource source(cfg->cfg.synth, static_cast<std::size_t>(count), cfg->cfg.seed);
    for (int i = 0; i < count; ++i) {
      const LabeledClip clip = source.clip(static_cast<std::size_t>(i));
      char name[32];
      std::snprintf(name, sizeof(name), "clip_%03d", i);
      save_sequence(fs::path(out_dir) / name, clip.frames, &clip.boxes);
    }
  });
}

ptk_status ptk_learn_prompt(const ptk_backbone* backbone, const ptk_config* cfg,
                            const char* sequence_dir, const char* out_manifest,
                            double* initial_loss, double* final_loss) {
  if (backbone == nullptr || cfg == nullptr || sequence_dir == nullptr || out_manifest == nullptr) {
    return fail(PTK_ERR_NULL_ARGUMENT, "backbone, config, sequence_dir or out_manifest is null");
  }
  return guarded([&] {
    const Sequence seq = load_sequence(sequence_dir);
    if (!seq.boxes || seq.boxes->empty()) throw InputError("learn-prompt: sequence has no groundtruth.txt");
    const TrackConfig tcfg = cfg->cfg.track_config();
    const Image& f1 = seq.frames.front();
    const Letterbox lb(f1.width, f1.height, kInputSize);
    LearnerConfig lcfg = tcfg.learner;
    lcfg.alpha = tcfg.alpha;
    lcfg.noise = tcfg.noise;
    lcfg.inference_alpha_bar = tcfg.inference_alpha_bar;
    lcfg.seed = tcfg.seed;
    const LearnResult r = learn_initial_prompt(lb.apply(f1), lb.to_input(seq.boxes->front()),
                                               *backbone->backbone, lcfg);
    if (initial_loss != nullptr) *initial_loss = r.trace.total.empty() ? 0.0 : r.trace.total.front();
    if (final_loss != nullptr) *final_loss = r.trace.total.empty() ? 0.0 : r.trace.total.back();
    save_prompt(out_manifest, StoredPrompt{r.prompt, lcfg.seed, config_to_json(cfg->cfg)});
  });
}

ptk_status ptk_session_open(const ptk_backbone* backbone, const ptk_modules* modules,
                            const ptk_config* cfg, const ptk_image* frame1, ptk_bbox bbox1,
                            ptk_session** out) {
  if (backbone == nullptr || cfg == nullptr || frame1 == nullptr || out == nullptr) {
    return fail(PTK_ERR_NULL_ARGUMENT, "backbone, config, frame or out is null");
  }
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<ptk_session>();
    s->session = std::make_unique<TrackSession>(to_image(frame1), BBox{bbox1.x, bbox1.y, bbox1.w, bbox1.h},
                                                *backbone->backbone, modules_or_null(modules),
                                                cfg->cfg.track_config());
    *out = s.release();
  });
}

ptk_status ptk_session_step(ptk_session* session, const ptk_image* frame, ptk_track_result* result) {
  if (session == nullptr || frame == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "session or frame is null");
  return guarded([&] {
    const TrajectoryEntry& e = session->session->step(to_image(frame));
    if (result != nullptr) {
      *result = {e.frame_index, {e.box.x, e.box.y, e.box.w, e.box.h}, e.confidence, e.lost ? 1 : 0};
    }
  });
}

ptk_status ptk_session_prompt(const ptk_session* session, double* out, size_t capacity, size_t* dim) {
  if (session == nullptr || dim == nullptr) return fail(PTK_ERR_NULL_ARGUMENT, "session or dim is null");
  return guarded([&] {
    const auto& p = session->session->prompt().values;
    *dim = static_cast<size_t>(p.size());
    if (out == nullptr) return;
    if (capacity < *dim) throw InputError("prompt buffer too small");
    std::memcpy(out, p.data(), *dim * sizeof(double));
  });
}

void ptk_session_destroy(ptk_session* session) { delete session; }

ptk_status ptk_track_sequence(const ptk_backbone* backbone, const ptk_modules* modules,
                              const ptk_config* cfg, const char* sequence_dir,
                              const char* trajectory_path, const char* vot_path,
                              const char* attention_dir) {
  if (backbone == nullptr || cfg == nullptr || sequence_dir == nullptr || trajectory_path == nullptr) {
    return fail(PTK_ERR_NULL_ARGUMENT, "backbone, config, sequence_dir or trajectory_path is null");
  }
  return guarded([&] {
    const Sequence seq = load_sequence(sequence_dir);
    if (!seq.boxes || seq.boxes->empty()) throw InputError("track: sequence has no groundtruth.txt");
    const TrackConfig tcfg = cfg->cfg.track_config();
    const UpdaterModules* m = modules_or_null(modules);
    TrackSession session(seq.frames[0], seq.boxes->front(), *backbone->backbone, m, tcfg);
    auto dump = [&](int index) {
      if (attention_dir == nullptr) return;
      char name[32];
      std::snprintf(name, sizeof(name), "%08d.attn", index);
      write_attention_dump(fs::path(attention_dir) / name, session.last_map());
    };
    if (attention_dir != nullptr) fs::create_directories(attention_dir);
    dump(1);
    for (std::size_t k = 1; k < seq.frames.size(); ++k) {
      session.step(seq.frames[k]);
      dump(static_cast<int>(k) + 1);
    }
    const fs::path traj(trajectory_path);
    if (traj.has_parent_path()) fs::create_directories(traj.parent_path());
    write_trajectory(traj, session.trajectory());
    if (vot_path != nullptr) {
      write_vot_run(vot_path, track_with_resets(seq.frames, *seq.boxes, *backbone->backbone, m, tcfg));
    }
  });
}

ptk_status ptk_evaluate(const char* const* sequence_dirs, const char* const* trajectory_paths,
                        size_t count, const char* report_path, const char* curves_dir) {
  if (sequence_dirs == nullptr || trajectory_paths == nullptr || report_path == nullptr) {
    return fail(PTK_ERR_NULL_ARGUMENT, "sequence_dirs, trajectory_paths or report_path is null");
  }
  return guarded([&] {
    if (count == 0) throw InputError("eval: no sequences");
    std::vector<std::pair<std::string, MetricReport>> reports;
    for (size_t i = 0; i < count; ++i) {
      const fs::path seq_dir(sequence_dirs[i]);
      const std::vector<BBox> gts = read_boxes(seq_dir / "groundtruth.txt");
      const fs::path traj(trajectory_paths[i]);
      std::vector<BBox> preds;
      for (const auto& e : read_trajectory(traj)) preds.push_back(e.box);
      if (preds.size() != gts.size()) {
        throw InputError("eval: " + traj.string() + " has " + std::to_string(preds.size()) +
                         " boxes for " + std::to_string(gts.size()) + " frames");
      }
      const fs::path vot = traj.parent_path() / (traj.stem().string() + ".vot.txt");
      std::optional<VotRun> run;
      if (fs::exists(vot)) run = read_vot_run(vot);
      std::string name = seq_dir.filename().string();
      if (name.empty()) name = seq_dir.parent_path().filename().string();
      reports.emplace_back(name, make_report(preds, gts, run ? &*run : nullptr));
      if (curves_dir != nullptr) write_curves(curves_dir, name, preds, gts);
    }
    const fs::path report(report_path);
    if (report.has_parent_path()) fs::create_directories(report.parent_path());
    std::FILE* f = std::fopen(report.c_str(), "w");
    if (f == nullptr) throw IoError("cannot write " + report.string());
    const std::string text = report_json(reports) + "\n";
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    std::fclose(f);
    if (!ok) throw IoError("short write to " + report.string());
  });
}

ptk_status ptk_selftest(ptk_line_fn line, void* user, int* failures) {
  return guarded([&] {
    int failed = 0;
    run_selftest([&](const SelftestRow& row) {
      if (!row.passed) ++failed;
      if (line != nullptr) {
        char buf[512];
        std::snprintf(buf, sizeof(buf), "%-4s  %-58s %7.2fs  %s", row.passed ? "PASS" : "FAIL",
                      row.name.c_str(), row.seconds, row.detail.c_str());
        line(buf, user);
      }
    });
    if (failures != nullptr) *failures = failed;
  });
}

}  // extern "C"

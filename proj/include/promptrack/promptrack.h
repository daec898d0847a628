/* Copyright 2026 The promptrack Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the promptrack shared library.
 *
 * Every function returns a ptk_status; on failure the message is available
 * from ptk_last_error() on the calling thread until the next call. Handles
 * are opaque and owned by the caller, who releases them with the matching
 * *_destroy function (NULL is accepted). A session borrows its backbone and
 * modules: both must outlive it. Handles are not thread-safe; distinct
 * handles may be used from distinct threads.
 */
#ifndef PROMPTRACK_H_
#define PROMPTRACK_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PTK_API __declspec(dllexport)
#else
#define PTK_API __attribute__((visibility("default")))
#endif

typedef enum ptk_status {
  PTK_OK = 0,
  PTK_ERR_INPUT = 1,
  PTK_ERR_CONTRACT = 2,
  PTK_ERR_LOST_TARGET = 3,
  PTK_ERR_OPTIMIZATION = 4,
  PTK_ERR_IO = 5,
  PTK_ERR_INTERNAL = 6,
  PTK_ERR_NULL_ARGUMENT = 7
} ptk_status;

typedef struct ptk_config ptk_config;
typedef struct ptk_backbone ptk_backbone;
typedef struct ptk_modules ptk_modules;
typedef struct ptk_session ptk_session;

typedef struct ptk_bbox {
  double x, y, w, h;
} ptk_bbox;

/* Borrowed 8-bit interleaved RGB pixels, row stride width * 3. */
typedef struct ptk_image {
  int width;
  int height;
  const uint8_t* data;
} ptk_image;

typedef struct ptk_track_result {
  int frame_index; /* 1-based */
  ptk_bbox box;
  double confidence;
  int lost;
} ptk_track_result;

typedef void (*ptk_progress_fn)(int epoch, double mean_loss, void* user);
typedef void (*ptk_line_fn)(const char* line, void* user);

PTK_API const char* ptk_version(void);
PTK_API const char* ptk_last_error(void);
PTK_API const char* ptk_status_name(ptk_status status);
/* Releases strings returned through char** out-parameters. */
PTK_API void ptk_free_string(char* s);

/* Configuration. `json` may be NULL for defaults. */
PTK_API ptk_status ptk_config_create(const char* json, ptk_config** out);
PTK_API ptk_status ptk_config_load(const char* path, ptk_config** out);
/* Dotted key ("track.beta") and JSON value ("0.7"); bare words are strings. */
PTK_API ptk_status ptk_config_set(ptk_config* cfg, const char* key, const char* value);
PTK_API ptk_status ptk_config_to_json(const ptk_config* cfg, char** out);
PTK_API void ptk_config_destroy(ptk_config* cfg);

/* Synthetic attention backbone built from cfg.backbone. */
PTK_API ptk_status ptk_backbone_create(const ptk_config* cfg, ptk_backbone** out);
PTK_API int ptk_backbone_prompt_dim(const ptk_backbone* backbone);
PTK_API void ptk_backbone_destroy(ptk_backbone* backbone);

/* Updater modules: fresh (seeded from cfg), or from a tensor archive. */
PTK_API ptk_status ptk_modules_create(const ptk_config* cfg, ptk_modules** out);
PTK_API ptk_status ptk_modules_load(const char* manifest, ptk_modules** out);
PTK_API ptk_status ptk_modules_save(const ptk_modules* modules, const char* manifest);
PTK_API void ptk_modules_destroy(ptk_modules* modules);

/* Trains `modules` on every clip directory under `clips_root`, or on
 * cfg.train_clips synthetic clips from cfg.synth when it is NULL.
 * `progress` may be NULL. */
PTK_API ptk_status ptk_train_updater(ptk_modules* modules, const ptk_backbone* backbone,
                                     const ptk_config* cfg, const char* clips_root,
                                     ptk_progress_fn progress, void* user,
                                     double* final_loss);

/* Writes `count` synthetic clips as out_dir/clip_NNN/{frames, groundtruth.txt}. */
PTK_API ptk_status ptk_synth_write(const ptk_config* cfg, const char* out_dir, int count);

/* Learns p1 on the first frame of a sequence directory and stores it as a
 * prompt manifest. Losses may be NULL. */
PTK_API ptk_status ptk_learn_prompt(const ptk_backbone* backbone, const ptk_config* cfg,
                                    const char* sequence_dir, const char* out_manifest,
                                    double* initial_loss, double* final_loss);

/* Interactive tracking. `modules` may be NULL (prompt frozen at p1). */
PTK_API ptk_status ptk_session_open(const ptk_backbone* backbone, const ptk_modules* modules,
                                    const ptk_config* cfg, const ptk_image* frame1,
                                    ptk_bbox bbox1, ptk_session** out);
PTK_API ptk_status ptk_session_step(ptk_session* session, const ptk_image* frame,
                                    ptk_track_result* result);
/* Copies the current prompt; `dim` receives its length. `out` may be NULL
 * to query the length only. */
PTK_API ptk_status ptk_session_prompt(const ptk_session* session, double* out, size_t capacity,
                                      size_t* dim);
PTK_API void ptk_session_destroy(ptk_session* session);

/* Tracks a sequence directory from its first ground-truth box. Writes the
 * trajectory; when `vot_path` is given, also runs the reset protocol and
 * writes its per-frame status. `attention_dir` (optional) receives one ATTN
 * dump per frame. */
PTK_API ptk_status ptk_track_sequence(const ptk_backbone* backbone, const ptk_modules* modules,
                                      const ptk_config* cfg, const char* sequence_dir,
                                      const char* trajectory_path, const char* vot_path,
                                      const char* attention_dir);

/* Scores trajectories against their sequences' ground truth and writes the
 * JSON report; `curves_dir` (optional) receives success/precision CSVs. A
 * reset-protocol file "<trajectory stem>.vot.txt" is used when present. */
PTK_API ptk_status ptk_evaluate(const char* const* sequence_dirs,
                                const char* const* trajectory_paths, size_t count,
                                const char* report_path, const char* curves_dir);

/* Runs the invariant and gradient suite, one line per check. */
PTK_API ptk_status ptk_selftest(ptk_line_fn line, void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif /* PROMPTRACK_H_ */

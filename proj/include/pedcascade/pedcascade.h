#ifndef PEDCASCADE_H
#define PEDCASCADE_H

/* C interface of the pedcascade library.
 *
 * Every function returns a pc_status; on failure pc_last_error() describes
 * the problem (per thread, valid until the next call on that thread).
 * Objects are opaque handles released with their *_free function; strings
 * returned through char** are released with pc_free_string. Configs are
 * passed as JSON text; NULL or "" means defaults. */

#include <stddef.h>
#include <stdint.h>

#if defined(PEDCASCADE_BUILD)
#define PC_API __attribute__((visibility("default")))
#else
#define PC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pc_status {
  PC_OK = 0,
  PC_ERR_INVALID_ARGUMENT = 1,
  PC_ERR_DATA = 2,
  PC_ERR_NUMERIC = 3,
  PC_ERR_IO = 4,
  PC_ERR_INTERNAL = 5
} pc_status;

typedef struct pc_dataset pc_dataset;
typedef struct pc_forest pc_forest;
typedef struct pc_compiled pc_compiled;
typedef struct pc_net pc_net;
typedef struct pc_svm pc_svm;
typedef struct pc_cascade pc_cascade;
typedef struct pc_detections pc_detections;
typedef struct pc_curve pc_curve;

PC_API const char* pc_version(void);
PC_API const char* pc_last_error(void);
PC_API void pc_free_string(char* s);
PC_API const char* pc_status_name(pc_status status);

/* SHA-256 of a file, or of every file below a directory (sorted relative
 * paths and contents), as lowercase hex. */
PC_API pc_status pc_sha256_path(const char* path, char** hex_out);

/* Datasets: images plus annotations. */
PC_API pc_status pc_dataset_synth(const char* spec_json, uint64_t seed, pc_dataset** out);
/* Directory holding annotations.json (or that file itself) and the images it names. */
PC_API pc_status pc_dataset_load(const char* path, pc_dataset** out);
/* Images from `image_dir` named frame id + ".ppm"/".pgm" with KITTI labels
 * from `label_dir` (one <id>.txt per frame). */
PC_API pc_status pc_dataset_load_kitti(const char* image_dir, const char* label_dir, pc_dataset** out);
PC_API pc_status pc_dataset_save(const pc_dataset* ds, const char* dir);
PC_API size_t pc_dataset_size(const pc_dataset* ds);
PC_API pc_status pc_dataset_annotations_json(const pc_dataset* ds, char** json_out);
/* Keeps every stride-th frame. */
PC_API pc_status pc_dataset_resample(pc_dataset* ds, int stride);
/* Turns GT lower than min_height or more occluded than max_occlusion into ignore regions. */
PC_API pc_status pc_dataset_reasonable(pc_dataset* ds, double min_height, int max_occlusion);
PC_API void pc_dataset_free(pc_dataset* ds);

/* Proposal forest. Training config: forest stage JSON; report is JSON. */
PC_API pc_status pc_forest_train(const pc_dataset* ds, const char* config_json, pc_forest** out, char** report_json);
PC_API pc_status pc_forest_load(const char* path, pc_forest** out);
PC_API pc_status pc_forest_save(const pc_forest* f, const char* path);
PC_API size_t pc_forest_trees(const pc_forest* f);
PC_API void pc_forest_free(pc_forest* f);

/* Forest compiled to a step (sharpness <= 0 or infinite) or sigmoid network. */
PC_API pc_status pc_compile_forest(const pc_forest* f, double sharpness, pc_compiled** out);
/* options: {"samples", "seed", "min_margin"}; report: windows, skipped,
 * decision_mismatches, max_score_diff. */
PC_API pc_status pc_compiled_verify(const pc_forest* f, const pc_compiled* c, const char* options_json,
                                    char** report_json);
/* Dense network in the binary net format. */
PC_API pc_status pc_compiled_save_net(const pc_compiled* c, const char* path);
PC_API void pc_compiled_free(pc_compiled* c);

/* Convnet rescorer trained on the forest's proposals. Config: rescorer JSON
 * plus optional "sliding". */
PC_API pc_status pc_net_train(const pc_dataset* ds, const pc_forest* f, const char* config_json, pc_net** out,
                              char** report_json);
PC_API pc_status pc_net_load(const char* path, pc_net** out);
PC_API pc_status pc_net_save(const pc_net* n, const char* path);
PC_API pc_status pc_net_spec_json(const pc_net* n, char** json_out);
PC_API pc_status pc_net_log_csv(const pc_net* n, char** csv_out);
PC_API size_t pc_net_parameters(const pc_net* n);
PC_API void pc_net_free(pc_net* n);

/* SVM head on a trained net's features. Config: SVM JSON plus optional
 * "train_proposal_avg", "sliding" and "channels" (the net's input channels). */
PC_API pc_status pc_svm_train(const pc_dataset* ds, const pc_forest* f, const pc_net* n, const char* config_json,
                              pc_svm** out);
PC_API pc_status pc_svm_load(const char* path, pc_svm** out);
PC_API pc_status pc_svm_save(const pc_svm* s, const char* path);
PC_API void pc_svm_free(pc_svm* s);

/* Cascade from components. rescorer: "identity", "softmax", "svm" or
 * "compiled" (net/svm may be NULL when unused); options: cascade JSON plus
 * "net_channels" and "sharpness". */
PC_API pc_status pc_cascade_create(const pc_forest* f, const char* rescorer, const pc_net* n, const pc_svm* s,
                                   const char* options_json, pc_cascade** out);
PC_API pc_status pc_cascade_load(const char* dir, pc_cascade** out);
PC_API pc_status pc_cascade_save(const pc_cascade* c, const char* dir);
/* Any of the outputs may be NULL. Timing is a JSON report. */
PC_API pc_status pc_cascade_run(const pc_cascade* c, const pc_dataset* ds, int jobs, pc_detections** detections,
                                pc_detections** proposals, char** timing_json);
PC_API void pc_cascade_free(pc_cascade* c);

PC_API pc_status pc_detections_load(const char* path, pc_detections** out);
PC_API pc_status pc_detections_save(const pc_detections* d, const char* path);
PC_API size_t pc_detections_count(const pc_detections* d);
PC_API void pc_detections_free(pc_detections* d);

/* kind: lamr, ap, recall, fp-hist, touching-fp, heights. dets may be NULL
 * for heights. Options: {"match_iou", "bins", "bin_width", "iou_step"}. */
PC_API pc_status pc_evaluate(const char* kind, const pc_detections* dets, const pc_dataset* annotations,
                             const char* options_json, pc_curve** out);
/* Annotations only (no images), JSON or KITTI ("json" / "kitti"). */
PC_API pc_status pc_annotations_load(const char* path, const char* format, pc_dataset** out);
PC_API double pc_curve_summary(const pc_curve* c);
PC_API pc_status pc_curve_csv(const pc_curve* c, char** csv_out);
PC_API pc_status pc_curve_svg(const pc_curve* c, char** svg_out);
/* kind, summary and meta (for touching-fp: both summaries and the delta). */
PC_API pc_status pc_curve_info_json(const pc_curve* c, char** json_out);
PC_API void pc_curve_free(pc_curve* c);

/* Grid sweep from a sweep config; CSV with mean and std per cell. */
PC_API pc_status pc_sweep(const char* config_json, int jobs, char** csv_out);
/* Single synthetic train/test experiment; result JSON with metrics and timing. */
PC_API pc_status pc_experiment(const char* config_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif

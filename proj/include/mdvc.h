/* C interface to the multi-modal dense video captioning library.
 *
 * Every call returns an mdvc_status. On failure, mdvc_last_error() returns a
 * message for the calling thread that stays valid until that thread's next
 * call into the library. Strings returned through char** are owned by the
 * caller and released with mdvc_string_free. */
#ifndef MDVC_H
#define MDVC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(MDVC_BUILDING)
#    define MDVC_API __declspec(dllexport)
#  else
#    define MDVC_API __declspec(dllimport)
#  endif
#else
#  define MDVC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mdvc_status {
  MDVC_OK = 0,
  MDVC_ERR_DIMENSION = 1,
  MDVC_ERR_INDEX = 2,
  MDVC_ERR_DEGENERATE_MASK = 3,
  MDVC_ERR_PARAMETER = 4,
  MDVC_ERR_CONTRACT = 5,
  MDVC_ERR_CONFIG = 6,
  MDVC_ERR_NUMERIC_FAULT = 7,
  MDVC_ERR_RANGE = 8,
  MDVC_ERR_PARSE = 9,
  MDVC_ERR_CHECKPOINT = 10,
  MDVC_ERR_ALIGNMENT = 11,
  MDVC_ERR_FUSION = 12,
  MDVC_ERR_IO = 13,
  MDVC_ERR_INVALID_ARGUMENT = 14,
  MDVC_ERR_INTERNAL = 15
} mdvc_status;

typedef struct mdvc_model mdvc_model;

/* Called once per finished epoch with {"epoch", "train_loss", "val_score"}. */
typedef void (*mdvc_epoch_fn)(const char* record_json, void* user);

MDVC_API const char* mdvc_version(void);
MDVC_API const char* mdvc_status_name(mdvc_status status);
MDVC_API const char* mdvc_last_error(void);
MDVC_API void mdvc_string_free(char* s);

/* Writes manifest.json and feature files under out_dir. config_json may be
 * NULL for defaults. The summary lists video and sample counts. */
MDVC_API mdvc_status mdvc_synth(const char* config_json, const char* out_dir, char** out_summary_json);

/* Trains on the "train" split of the manifest, validating on "val", and
 * writes checkpoint.mdvc, history.jsonl and summary.json under out_dir. */
MDVC_API mdvc_status mdvc_train(const char* settings_json, const char* manifest_path, const char* out_dir,
                                mdvc_epoch_fn on_epoch, void* user, char** out_summary_json);

/* Resolves settings_json against its preset and returns the full settings. */
MDVC_API mdvc_status mdvc_resolve_settings(const char* settings_json, char** out_settings_json);

MDVC_API mdvc_status mdvc_model_load(const char* checkpoint_path, mdvc_model** out_model);
MDVC_API void mdvc_model_free(mdvc_model* model);
/* {"model": <config>, "vocab_size", "parameters", "weights_hash"} */
MDVC_API mdvc_status mdvc_model_info(const mdvc_model* model, char** out_info_json);

/* Captions every proposal in proposals_json ({video_id: [{start, end}]})
 * using videos from the manifest. Per-proposal failures are recorded in the
 * output and counted in out_failures; they do not fail the call. Safe to call
 * concurrently on one model. */
MDVC_API mdvc_status mdvc_model_caption(const mdvc_model* model, const char* manifest_path,
                                        const char* proposals_json, uint64_t seed, char** out_submission_json,
                                        size_t* out_failures);

/* Fuses a forward and backward confidence stream into proposals for one
 * video, returned as a JSON array of {start, end, score}. */
MDVC_API mdvc_status mdvc_propose(const char* forward_json, const char* backward_json, double threshold,
                                  size_t max_count, char** out_proposals_json);

/* Scores a submission against one or more reference sets with BLEU_1..max_n.
 * thresholds may be NULL for 0.3, 0.5, 0.7, 0.9. */
MDVC_API mdvc_status mdvc_evaluate(const char* submission_json, const char* const* reference_jsons,
                                   size_t reference_count, const double* thresholds, size_t threshold_count,
                                   int max_n, size_t max_proposals, char** out_report_json);

#ifdef __cplusplus
}
#endif

#endif /* MDVC_H */

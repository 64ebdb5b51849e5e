/* C API for the unist style-transfer library.
 *
 * All entry points return a status code and report failures through an
 * optional errptr: when non-NULL, *errptr receives a malloc'd message the
 * caller releases with unist_string_free. Handles are opaque; every
 * unist_model* from a create/load call is released with unist_model_free.
 */
#ifndef UNIST_UNIST_H_
#define UNIST_UNIST_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the CLI maps these directly onto its exit codes. */
enum {
    UNIST_OK = 0,
    UNIST_ERR_VERIFY = 1,  /* a verification suite reported a failure */
    UNIST_ERR_INPUT = 2,   /* bad paths, malformed files, shape/config violations */
    UNIST_ERR_NUMERIC = 3  /* non-finite values or broken determinism */
};

typedef struct unist_model unist_model;

/* Mirrors the transformer configuration. variant: 0 standard, 1 takes the
 * first axial stage's output as Q/K/V of the second, 2 keeps K and V from
 * the original inputs. */
typedef struct unist_config {
    int32_t n_c;
    int32_t n_s;
    int32_t n_t;
    int32_t embed_dim;
    int32_t heads;
    int32_t interaction_enabled;
    int32_t unimodal;
    int32_t variant;
    int32_t codec_base_channels;
} unist_config;

/* Full-scale defaults: blocks (2,1,3), D=512, 8 heads, 64 base channels. */
void unist_config_defaults(unist_config* cfg);
/* Desk-test defaults: D=16, 2 heads, 4 base channels. */
void unist_config_test_defaults(unist_config* cfg);

unist_model* unist_model_create(const unist_config* cfg, uint64_t seed, char** errptr);
unist_model* unist_model_load(const char* checkpoint_path, char** errptr);
int unist_model_save(const unist_model* model, const char* checkpoint_path, char** errptr);
void unist_model_free(unist_model* model);

/* Inference-mode overrides; pass -1 to keep a setting. */
int unist_model_set_mode(unist_model* model, int32_t interaction_enabled, int32_t unimodal,
                         int32_t variant, char** errptr);

typedef struct unist_metrics {
    double d_c;
    double d_s;
    double gram_texture_diff;
    double color_diff;
} unist_metrics;

/* Stylizes 1..T content frames (binary PPM, uniform size, dims divisible
 * by 8) against one style image. Writes stylized_###.ppm frames plus
 * metrics.json into out_dir. out_metrics may be NULL. */
int unist_stylize(const unist_model* model, const char* const* content_paths, size_t n_content,
                  const char* style_path, const char* out_dir, unist_metrics* out_metrics,
                  char** errptr);

/* Runs a verification suite ("amsa", "grads", "flops", "losses",
 * "determinism" or "all"). *report_out (optional) receives the formatted
 * per-check table. Returns UNIST_ERR_VERIFY when any check fails. */
int unist_verify(const char* suite, char** report_out, char** errptr);

/* Cost sweep over square token grids. Writes CSV and/or JSON when paths
 * are given; *report_out (optional) receives the CSV text. When
 * include_reference_row is nonzero the JSON carries the published
 * 32x32/D=512 comparison figures as an annotation. */
int unist_bench(const int32_t* sizes, size_t n_sizes, int32_t embed_dim, int32_t heads,
                int32_t include_reference_row, const char* csv_path, const char* json_path,
                char** report_out, char** errptr);

/* Overfit check on the procedural toy dataset. cfg NULL means the desk-test
 * configuration; total_frames spreads 1:1 over video and image halves.
 * Nonpositive steps/lr/image_size/total_frames keep their defaults. Writes
 * the loss curve CSV and final checkpoint when paths are given. */
int unist_traincheck(const unist_config* cfg, uint64_t seed, int32_t steps, double lr,
                     int32_t image_size, int32_t total_frames, const char* curve_csv_path,
                     const char* checkpoint_path, double* initial_loss, double* final_loss,
                     char** errptr);

void unist_string_free(char* s);
const char* unist_version(void);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* UNIST_UNIST_H_ */

#ifndef DIVSEG_DIVSEG_H
#define DIVSEG_DIVSEG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DIVSEG_API __declspec(dllexport)
#else
#define DIVSEG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum divseg_status {
  DIVSEG_OK = 0,
  DIVSEG_ERR_ARGUMENT = 1, /* null handle or bad enum string */
  DIVSEG_ERR_CONFIG = 2,
  DIVSEG_ERR_PARSE = 3,
  DIVSEG_ERR_IO = 4,
  DIVSEG_ERR_SHAPE = 5,
  DIVSEG_ERR_DOMAIN = 6,
  DIVSEG_ERR_CONTRACT = 7,
  DIVSEG_ERR_NUMERIC = 8,
  DIVSEG_ERR_INTERNAL = 9
} divseg_status;

typedef struct divseg_config divseg_config;
typedef struct divseg_model divseg_model;
typedef struct divseg_report divseg_report;

typedef struct divseg_epoch {
  uint64_t epoch;
  double dice;
  double mi;
  double hd;
  double total;
} divseg_epoch;

typedef void (*divseg_epoch_fn)(const divseg_epoch* epoch, void* user);
/* Called once per trained ablation variant, possibly from a worker thread.
   The model handle is only valid during the call. */
typedef void (*divseg_variant_fn)(size_t index, const char* label, const divseg_model* model,
                                  void* user);

DIVSEG_API const char* divseg_version(void);
DIVSEG_API const char* divseg_status_name(divseg_status s);
/* Message of the last failed call on this thread; empty when none. */
DIVSEG_API const char* divseg_last_error(void);
DIVSEG_API void divseg_string_free(char* s);

DIVSEG_API divseg_status divseg_config_default(divseg_config** out);
DIVSEG_API divseg_status divseg_config_load(const char* path, divseg_config** out);
DIVSEG_API divseg_status divseg_config_from_json(const char* json, divseg_config** out);
DIVSEG_API divseg_status divseg_config_set_seed(divseg_config* c, uint64_t seed);
DIVSEG_API divseg_status divseg_config_seed(const divseg_config* c, uint64_t* out);
DIVSEG_API divseg_status divseg_config_set_out_dir(divseg_config* c, const char* dir);
DIVSEG_API divseg_status divseg_config_set_data_root(divseg_config* c, const char* root);
/* Newly allocated string; release with divseg_string_free. */
DIVSEG_API divseg_status divseg_config_out_dir(const divseg_config* c, char** out);
DIVSEG_API divseg_status divseg_config_to_json(const divseg_config* c, char** out);
DIVSEG_API void divseg_config_free(divseg_config* c);

/* Writes the train and test splits described by the config's data section. */
DIVSEG_API divseg_status divseg_generate_data(const divseg_config* c);

DIVSEG_API divseg_status divseg_train(const divseg_config* c, divseg_epoch_fn on_epoch, void* user,
                                      divseg_model** out);
DIVSEG_API divseg_status divseg_model_load(const divseg_config* c, const char* path,
                                           divseg_model** out);
DIVSEG_API divseg_status divseg_model_save(const divseg_model* m, const char* path);
/* epoch,dice,mi,hd,total; header only for a loaded model. */
DIVSEG_API divseg_status divseg_model_train_log_csv(const divseg_model* m, char** out);
DIVSEG_API divseg_status divseg_model_param_count(const divseg_model* m, size_t* out);
DIVSEG_API void divseg_model_free(divseg_model* m);

/* Mean test DSC for all 15 modality subsets. jobs >= 1. */
DIVSEG_API divseg_status divseg_evaluate(const divseg_config* c, const divseg_model* m,
                                         uint32_t jobs, divseg_report** out);
/* axis: divergence_family, alpha_sweep or loss_components. */
DIVSEG_API divseg_status divseg_ablate(const divseg_config* c, const char* axis, uint32_t jobs,
                                       divseg_variant_fn on_variant, void* user,
                                       divseg_report** out);
DIVSEG_API divseg_status divseg_report_from_json(const char* json, divseg_report** out);
DIVSEG_API divseg_status divseg_report_load(const char* path, divseg_report** out);
DIVSEG_API divseg_status divseg_report_to_json(const divseg_report* r, char** out);
/* format: csv or markdown. */
DIVSEG_API divseg_status divseg_report_emit(const divseg_report* r, const char* format, char** out);
/* Grand-average DSC in [0,1]; variant is ignored for a single-model report. */
DIVSEG_API divseg_status divseg_report_grand_average(const divseg_report* r, size_t variant,
                                                     double* out);
DIVSEG_API divseg_status divseg_report_variant_count(const divseg_report* r, size_t* out);
DIVSEG_API void divseg_report_free(divseg_report* r);

/* Finite-difference check of every differentiable op and loss. *passed is
   1 when all suites are within tolerance. */
DIVSEG_API divseg_status divseg_gradcheck(uint64_t seed, int* passed, char** text);

#ifdef __cplusplus
}
#endif

#endif

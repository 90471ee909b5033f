/* C interface to the dancenet library. Objects are opaque handles created
 * and destroyed through this API. Every fallible call returns a dn_status;
 * on failure dn_last_error() describes the problem (per thread). */
#ifndef DANCENET_H
#define DANCENET_H

#include <stddef.h>

#if defined(_WIN32)
#define DN_API __declspec(dllexport)
#else
#define DN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dn_status {
  DN_OK = 0,
  DN_ERR_SIZE = 1,
  DN_ERR_EMPTY_INPUT = 2,
  DN_ERR_INDEX = 3,
  DN_ERR_CONFIG = 4,
  DN_ERR_SHAPE = 5,
  DN_ERR_STATE = 6,
  DN_ERR_PARSE = 7,
  DN_ERR_LABEL = 8,
  DN_ERR_NUMERIC = 9,
  DN_ERR_DATA = 10,
  DN_ERR_VERSION = 11,
  DN_ERR_IO = 12,
  DN_ERR_DETERMINISM = 13,
  DN_CHECK_FAILED = 14,
  DN_ERR_INTERNAL = 15,
  DN_ERR_ARGUMENT = 16
} dn_status;

typedef struct dn_config dn_config;
typedef struct dn_cloud dn_cloud;
typedef struct dn_model dn_model;

/* Receives text produced by the workflow calls. */
typedef void (*dn_write_fn)(const char* text, size_t length, void* user);

DN_API const char* dn_version(void);
DN_API const char* dn_status_name(dn_status status);
/* Message of the last failed call on this thread; "" when none. */
DN_API const char* dn_last_error(void);

/* Run configuration: flat string keys; unknown keys are rejected. */
DN_API dn_status dn_config_create(dn_config** out);
DN_API void dn_config_destroy(dn_config* config);
DN_API dn_status dn_config_set(dn_config* config, const char* key, const char* value);
DN_API dn_status dn_config_load_file(dn_config* config, const char* path);
/* Copies the effective value (NUL-terminated) into buf when capacity
 * allows; *needed, when non-null, receives the length without the NUL. */
DN_API dn_status dn_config_get(const dn_config* config, const char* key, char* buf, size_t capacity,
                               size_t* needed);
DN_API dn_status dn_config_dump(const dn_config* config, char* buf, size_t capacity, size_t* needed);

/* Point clouds. */
DN_API dn_status dn_cloud_read(const char* path, dn_cloud** out);
/* Synthetic scene of the config's synth_preset (desk when unset). */
DN_API dn_status dn_cloud_synth(const dn_config* config, dn_cloud** out);
DN_API void dn_cloud_destroy(dn_cloud* cloud);
DN_API size_t dn_cloud_size(const dn_cloud* cloud);
DN_API int dn_cloud_has_labels(const dn_cloud* cloud);
/* xyz receives 3 * size values. */
DN_API dn_status dn_cloud_positions(const dn_cloud* cloud, double* xyz);
DN_API dn_status dn_cloud_labels(const dn_cloud* cloud, int* labels);
DN_API dn_status dn_cloud_write(const dn_cloud* cloud, const char* path);

/* Models. */
DN_API dn_status dn_model_create(const dn_config* config, dn_model** out);
DN_API dn_status dn_model_load(const dn_config* config, const char* checkpoint, dn_model** out);
DN_API dn_status dn_model_save(const dn_model* model, const char* path);
DN_API void dn_model_destroy(dn_model* model);
DN_API size_t dn_model_parameter_count(const dn_model* model);
DN_API size_t dn_model_num_classes(const dn_model* model);
/* Per-point labels in cloud order; labels receives dn_cloud_size values. */
DN_API dn_status dn_model_predict(dn_model* model, const dn_config* config, const dn_cloud* cloud, int* labels);

/* Overall accuracy and average F1 of n predictions; per_class_f1 may be
 * null, else receives classes values. */
DN_API dn_status dn_scores(const int* predicted, const int* truth, size_t n, size_t classes, double* overall_accuracy,
                           double* average_f1, double* per_class_f1);

/* Workflows behind the command-line subcommands. dn_cmd_gradcheck returns
 * DN_CHECK_FAILED when a parameter group breaches the tolerance. */
DN_API dn_status dn_cmd_train(const dn_config* config, dn_write_fn write, void* user);
DN_API dn_status dn_cmd_eval(const dn_config* config, dn_write_fn write, void* user);
DN_API dn_status dn_cmd_predict(const dn_config* config, dn_write_fn write, void* user);
DN_API dn_status dn_cmd_gradcheck(const dn_config* config, dn_write_fn write, void* user);
DN_API dn_status dn_cmd_synth(const dn_config* config, dn_write_fn write, void* user);

/* Test hook: while enabled, the matrix-multiply backward rule scales its
 * weight gradient by 1.01. */
DN_API void dn_debug_set_backward_fault(int enabled);

#ifdef __cplusplus
}
#endif

#endif

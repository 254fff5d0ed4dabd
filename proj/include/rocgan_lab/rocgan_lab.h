#ifndef ROCGAN_LAB_H
#define ROCGAN_LAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define RL_API __declspec(dllexport)
#else
#define RL_API __attribute__((visibility("default")))
#endif

typedef enum {
    RL_OK = 0,
    RL_ERR_INTERNAL = 1,
    RL_ERR_CONFIG = 2,
    RL_ERR_DIVERGENCE = 3,
    RL_ERR_IO = 4,
    RL_ERR_CONTRACT = 5
} rl_status;

typedef struct rl_config rl_config;
typedef struct rl_tensor rl_tensor;

/* Thread-local details of the last failed call on this thread. */
RL_API const char* rl_last_error_message(void);
RL_API const char* rl_last_error_field(void); /* config field path, "" if none */
RL_API uint64_t rl_last_error_seed(void);     /* divergent seed, 0 if none */
/* {"status":..,"message":..,"field":..,"seed":..} */
RL_API const char* rl_last_error_json(void);

RL_API const char* rl_version(void);

/* Experiment configs. */
RL_API rl_status rl_config_load(const char* path, rl_config** out);
RL_API rl_status rl_config_from_json(const char* json, rl_config** out);
/* Every field with defaults materialized. The string lives until the next call on `cfg`. */
RL_API rl_status rl_config_resolved_json(rl_config* cfg, const char** out);
RL_API void rl_config_free(rl_config* cfg);

typedef void (*rl_line_fn)(const char* line, void* user);

/* Runs every seed; progress lines go to `on_line` when non-null. */
RL_API rl_status rl_run(const rl_config* cfg, rl_line_fn on_line, void* user);

/* kind: "curve", "histogram" or "manifold3d". Schema mismatch -> RL_ERR_CONFIG. */
RL_API rl_status rl_plot(const char* csv_path, const char* kind, const char* svg_path);

/* group: "fast", "synthetic", "shared", "images" or "all". One line per criterion.
   *failed receives the number of failing criteria. */
RL_API rl_status rl_verify(const char* group, const char* work_dir, rl_line_fn on_line, void* user, int* failed);

/* Dense f64 tensors. */
RL_API rl_status rl_tensor_create(const size_t* shape, size_t rank, const double* data, rl_tensor** out);
RL_API size_t rl_tensor_rank(const rl_tensor* t);
RL_API size_t rl_tensor_dim(const rl_tensor* t, size_t axis);
RL_API size_t rl_tensor_numel(const rl_tensor* t);
RL_API const double* rl_tensor_data(const rl_tensor* t);
RL_API rl_status rl_tensor_read(const char* path, rl_tensor** out);
/* dtype: 1 = f32, 2 = f64 */
RL_API rl_status rl_tensor_write(const char* path, const rl_tensor* t, int dtype);
RL_API void rl_tensor_free(rl_tensor* t);

/* a, b: C x H x W (or H x W) in [0, 1]. */
RL_API rl_status rl_ssim(const rl_tensor* a, const rl_tensor* b, double* out);
/* label: "x/y" noise, e.g. "25/0". */
RL_API rl_status rl_corrupt(const rl_tensor* img, const char* label, uint64_t seed, rl_tensor** out);

#ifdef __cplusplus
}
#endif

#endif

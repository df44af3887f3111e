/*
 * C interface to the asyncdsb library.
 *
 * Every object is an opaque handle created by an adsb_*_create / load / make
 * call and released with the matching adsb_*_free (NULL is accepted). Calls
 * that can fail return an adsb_status; on failure adsb_last_error() holds a
 * message for the calling thread until its next failing call.
 *
 * Grid times are step indices k in [0, T] with t = k / T. Images are row-major
 * H x W x C doubles with channels innermost; masks hold 1 for corrupted pixels.
 */
#ifndef ASYNCDSB_H
#define ASYNCDSB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ASYNCDSB_BUILDING)
#    define ADSB_API __declspec(dllexport)
#  else
#    define ADSB_API __declspec(dllimport)
#  endif
#else
#  define ADSB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum adsb_status {
  ADSB_OK = 0,
  ADSB_ERR_VALIDATION = 1, /* bad argument, shape or range */
  ADSB_ERR_CONFIG = 2,     /* inconsistent configuration */
  ADSB_ERR_IO = 3,
  ADSB_ERR_INTERNAL = 4,
  ADSB_ERR_SINGULAR = 5    /* division by sigma_t at t = 0 */
} adsb_status;

ADSB_API const char* adsb_version(void);
ADSB_API const char* adsb_last_error(void);

typedef struct adsb_image_t adsb_image;
typedef struct adsb_mask_t adsb_mask;
typedef struct adsb_map_t adsb_map; /* H x W reals: gradient or tau map */
typedef struct adsb_schedule_t adsb_schedule; /* global schedule or per-pixel field */
typedef struct adsb_trajectory_t adsb_trajectory;
typedef struct adsb_curve_t adsb_curve;

/* ---- schedules -------------------------------------------------------- */

typedef struct adsb_schedule_config {
  uint32_t steps;
  double total_mass;
  double beta_min;
  double base_apex;
} adsb_schedule_config;

ADSB_API void adsb_schedule_config_default(adsb_schedule_config* out);
/* Overlays `key=value` lines from a file onto *inout. */
ADSB_API adsb_status adsb_schedule_config_load(const char* path, adsb_schedule_config* inout);
ADSB_API adsb_status adsb_schedule_config_validate(const adsb_schedule_config* cfg);

ADSB_API adsb_status adsb_schedule_symmetric(const adsb_schedule_config* cfg, adsb_schedule** out);
ADSB_API adsb_status adsb_schedule_shifted(const adsb_schedule_config* cfg, double tau,
                                           adsb_schedule** out);
ADSB_API adsb_status adsb_schedule_field(const adsb_schedule_config* cfg, const adsb_map* tau,
                                         adsb_schedule** out);
ADSB_API void adsb_schedule_free(adsb_schedule* s);

ADSB_API int adsb_schedule_is_field(const adsb_schedule* s);
ADSB_API uint32_t adsb_schedule_steps(const adsb_schedule* s);
ADSB_API double adsb_schedule_total_mass(const adsb_schedule* s);
/* T betas of pixel (i, j); the pixel is ignored for a global schedule. */
ADSB_API adsb_status adsb_schedule_betas(const adsb_schedule* s, uint32_t i, uint32_t j,
                                         double* out, size_t len);
/* T + 1 accumulated variances of pixel (i, j). */
ADSB_API adsb_status adsb_schedule_variances(const adsb_schedule* s, uint32_t i, uint32_t j,
                                             double* sigma2, double* sigma2_bar, size_t len);
/* `t,beta` CSV; a field writes its region-free pixel average. */
ADSB_API adsb_status adsb_schedule_export_csv(const adsb_schedule* s, const char* path);
/* `t,beta,i,j` CSV for n pixels given as interleaved (i, j) pairs. */
ADSB_API adsb_status adsb_schedule_export_field_csv(const adsb_schedule* s, const uint32_t* ij,
                                                    size_t n_pixels, const char* path);
/* SVG of beta over t in [0,1]; fields also draw the listed pixel slices. */
ADSB_API adsb_status adsb_schedule_plot_svg(const adsb_schedule* s, const uint32_t* ij,
                                            size_t n_pixels, const char* path);

/* ---- images and masks ------------------------------------------------- */

ADSB_API adsb_status adsb_image_create(uint32_t h, uint32_t w, uint32_t c, const double* data,
                                       adsb_image** out);
ADSB_API adsb_status adsb_image_load_png(const char* path, adsb_image** out);
ADSB_API adsb_status adsb_image_save_png(const adsb_image* img, const char* path);
/* Little-endian float32 dump plus `<path>.json` sidecar. */
ADSB_API adsb_status adsb_image_save_raw(const adsb_image* img, const char* path);
ADSB_API adsb_status adsb_image_load_raw(const char* path, adsb_image** out);
ADSB_API void adsb_image_dims(const adsb_image* img, uint32_t* h, uint32_t* w, uint32_t* c);
ADSB_API adsb_status adsb_image_copy_data(const adsb_image* img, double* out, size_t len);
ADSB_API void adsb_image_free(adsb_image* img);

ADSB_API adsb_status adsb_image_mse(const adsb_image* a, const adsb_image* b, double* out);
ADSB_API adsb_status adsb_ssim(const adsb_image* a, const adsb_image* b, double* out);
/* Image `index` of the synthetic corpus for `seed`. */
ADSB_API adsb_status adsb_synth_image(uint64_t seed, uint32_t index, uint32_t h, uint32_t w,
                                      uint32_t channels, adsb_image** out);

typedef enum adsb_mask_kind {
  ADSB_MASK_CENTER = 0,
  ADSB_MASK_HALF = 1,
  ADSB_MASK_WIDE = 2,
  ADSB_MASK_NARROW = 3
} adsb_mask_kind;

ADSB_API adsb_status adsb_mask_kind_parse(const char* name, adsb_mask_kind* out);
ADSB_API adsb_status adsb_mask_make(adsb_mask_kind kind, uint32_t h, uint32_t w, uint64_t seed,
                                    adsb_mask** out);
/* Thin-stroke mask whose corrupted ratio lies in the given bucket (1..4). */
ADSB_API adsb_status adsb_mask_make_bucket(int bucket, uint32_t h, uint32_t w, uint64_t seed,
                                           adsb_mask** out);
ADSB_API adsb_status adsb_mask_create(uint32_t h, uint32_t w, const uint8_t* bits,
                                      adsb_mask** out);
ADSB_API adsb_status adsb_mask_load_png(const char* path, adsb_mask** out);
ADSB_API adsb_status adsb_mask_save_png(const adsb_mask* m, const char* path);
ADSB_API void adsb_mask_dims(const adsb_mask* m, uint32_t* h, uint32_t* w);
ADSB_API adsb_status adsb_mask_copy_bits(const adsb_mask* m, uint8_t* out, size_t len);
ADSB_API double adsb_mask_ratio(const adsb_mask* m);
/* 1..4 for ratios in (0,10%], (10,20%], (20,30%], (30,40%]; 0 otherwise. */
ADSB_API int adsb_mask_ratio_bucket(double ratio);
ADSB_API void adsb_mask_free(adsb_mask* m);

ADSB_API adsb_status adsb_apply_mask(const adsb_image* x_g, const adsb_mask* m, adsb_image** out);

/* ---- gradient prior --------------------------------------------------- */

typedef enum adsb_completer { ADSB_COMPLETER_ORACLE = 0, ADSB_COMPLETER_HARMONIC = 1 } adsb_completer;

typedef struct adsb_async_config {
  double tau_min;
  double tau_max;
  double gauss_sigma;
  int normalize_over_region; /* nonzero: min/max over the corrupted region */
} adsb_async_config;

ADSB_API void adsb_async_config_default(adsb_async_config* out);
ADSB_API adsb_status adsb_async_config_validate(const adsb_async_config* cfg);

ADSB_API adsb_status adsb_map_create(uint32_t h, uint32_t w, const double* values, adsb_map** out);
ADSB_API void adsb_map_dims(const adsb_map* m, uint32_t* h, uint32_t* w);
ADSB_API adsb_status adsb_map_copy_values(const adsb_map* m, double* out, size_t len);
/* 16-bit PNG scaled to the map's [min, max]; range stored in `<path>.json`. */
ADSB_API adsb_status adsb_map_save_png16(const adsb_map* m, const char* path);
ADSB_API adsb_status adsb_map_load_png16(const char* path, adsb_map** out);
ADSB_API adsb_status adsb_map_save_raw(const adsb_map* m, const char* path);
ADSB_API adsb_status adsb_map_load_raw(const char* path, adsb_map** out);
ADSB_API void adsb_map_free(adsb_map* m);

ADSB_API adsb_status adsb_sobel_magnitude(const adsb_image* img, adsb_map** out);
ADSB_API adsb_status adsb_gaussian_filter(const adsb_map* m, double sigma, adsb_map** out);
/* ground_truth may be NULL unless the oracle completer is requested. */
ADSB_API adsb_status adsb_complete_gradient(const adsb_image* x_c, const adsb_mask* x_m,
                                            const adsb_map* x_cg, adsb_completer completer,
                                            const adsb_image* ground_truth, adsb_map** out);
/* region may be NULL. */
ADSB_API adsb_status adsb_tau_from_gradient(const adsb_map* g_hat, const adsb_async_config* cfg,
                                            const adsb_mask* region, adsb_map** out);

/* ---- reverse sampling ------------------------------------------------- */

typedef struct adsb_sampler_config {
  uint32_t steps;
  uint64_t seed;
  int clamp_visible;
  uint32_t record_every;
} adsb_sampler_config;

ADSB_API void adsb_sampler_config_default(adsb_sampler_config* out);

/*
 * User score model. Receives the state x_t (h*w*c values), the grid step and
 * sigma_t per pixel (h*w values); writes the normalized score (x_t - x0)/sigma_t
 * estimate into `out` (h*w*c values). Returns 0 on success.
 */
typedef int (*adsb_score_fn)(void* user, const double* x_t, uint32_t h, uint32_t w, uint32_t c,
                             uint32_t step, uint32_t steps, const double* sigma, double* out);

typedef enum adsb_score_kind {
  ADSB_SCORE_ORACLE = 0,   /* exact score from `x0` */
  ADSB_SCORE_HARMONIC = 1, /* harmonic fill of the visible pixels of x1 */
  ADSB_SCORE_CALLBACK = 2
} adsb_score_kind;

typedef struct adsb_score_model {
  adsb_score_kind kind;
  const adsb_image* x0; /* ADSB_SCORE_ORACLE */
  adsb_score_fn fn;     /* ADSB_SCORE_CALLBACK */
  void* user;
} adsb_score_model;

/* mask / visible may be NULL when clamp_visible is 0 (the harmonic model needs the mask). */
ADSB_API adsb_status adsb_run_reverse(const adsb_image* x1, const adsb_score_model* model,
                                      const adsb_schedule* schedule,
                                      const adsb_sampler_config* cfg, const adsb_mask* mask,
                                      const adsb_image* visible, adsb_trajectory** out);

ADSB_API size_t adsb_trajectory_size(const adsb_trajectory* tr);
ADSB_API uint32_t adsb_trajectory_steps(const adsb_trajectory* tr);
/* state may be NULL; otherwise receives a new image handle. */
ADSB_API adsb_status adsb_trajectory_entry(const adsb_trajectory* tr, size_t index, uint32_t* step,
                                           double* t, adsb_image** state);
/* `step,t,mse,ssim`; x_g may be NULL (metric columns left empty), region may be NULL. */
ADSB_API adsb_status adsb_trajectory_export_csv(const adsb_trajectory* tr, const adsb_image* x_g,
                                                const adsb_mask* region, const char* path);
/* One `state_tXXXX.png` per recorded state (XXXX = grid step). */
ADSB_API adsb_status adsb_trajectory_save_pngs(const adsb_trajectory* tr, const char* dir);
ADSB_API adsb_status adsb_trajectory_save_raw(const adsb_trajectory* tr, const char* path);
ADSB_API adsb_status adsb_trajectory_load_raw(const char* path, adsb_trajectory** out);
ADSB_API void adsb_trajectory_free(adsb_trajectory* tr);

/* ---- diagnostics ------------------------------------------------------ */

typedef struct adsb_mismatch {
  double peak_lag;
  double l1_gap;
} adsb_mismatch;

ADSB_API adsb_status adsb_curve_create(const double* ts, const double* values, size_t n,
                                       adsb_curve** out);
ADSB_API size_t adsb_curve_size(const adsb_curve* c);
ADSB_API adsb_status adsb_curve_copy(const adsb_curve* c, double* ts, double* values, size_t n);
ADSB_API adsb_status adsb_curve_peak_time(const adsb_curve* c, double* out);
ADSB_API adsb_status adsb_curve_export_csv(const adsb_curve* c, const char* path);
ADSB_API adsb_status adsb_curve_load_csv(const char* path, adsb_curve** out);
ADSB_API void adsb_curve_free(adsb_curve* c);

ADSB_API adsb_status adsb_restoration_curve(const adsb_trajectory* tr, const adsb_image* x_g,
                                            const adsb_mask* region, adsb_curve** out);
ADSB_API adsb_status adsb_normalized_derivative(const adsb_curve* c, adsb_curve** out);
/* For a field the per-pixel curves are averaged over region (NULL = all pixels). */
ADSB_API adsb_status adsb_theoretical_curve(const adsb_schedule* s, const adsb_mask* region,
                                            adsb_curve** out);
ADSB_API adsb_status adsb_band_split(const adsb_map* g, const adsb_mask* region, adsb_mask** high,
                                     adsb_mask** mid, adsb_mask** low);
ADSB_API adsb_status adsb_mismatch_report(const adsb_curve* theory, const adsb_curve* empirical,
                                          adsb_mismatch* out);
/* `{"peak_lag": .., "l1_gap": ..}` */
ADSB_API adsb_status adsb_mismatch_write_json(const adsb_mismatch* m, const char* path);

typedef struct adsb_plot_series {
  const char* label;
  const adsb_curve* curve;
  const char* color; /* SVG color, e.g. "#1f77b4" */
  int dashed;
} adsb_plot_series;

/* Reverse-time axis (t = 1 on the left), y fixed to [-1, 1]. */
ADSB_API adsb_status adsb_plot_curves_svg(const char* path, const char* title, const char* y_label,
                                          const adsb_plot_series* series, size_t n);
/* values are row-major rows x cols; NaN marks an invalid cell. */
ADSB_API adsb_status adsb_plot_heatmap_svg(const char* path, const char* title,
                                           const char* const* row_labels, size_t rows,
                                           const char* const* col_labels, size_t cols,
                                           const double* values, const char* row_axis,
                                           const char* col_axis);

#ifdef __cplusplus
}
#endif

#endif /* ASYNCDSB_H */

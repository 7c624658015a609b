#ifndef SHEARLAB_H
#define SHEARLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Configuration, resolution and numerical failures use the
 * same values as the command-line exit codes.
 */
typedef enum ShlStatus {
  SHL_STATUS_OK = 0,
  SHL_STATUS_CONFIG = 2,
  SHL_STATUS_RESOLUTION = 3,
  SHL_STATUS_NUMERICAL = 4,
  SHL_STATUS_IO = 5,
  SHL_STATUS_PARSE = 6,
  SHL_STATUS_NULL_ARGUMENT = 7,
  SHL_STATUS_PANIC = 8,
} ShlStatus;

/**
 * Opaque spectral field.
 */
typedef struct ShlField ShlField;

/**
 * Opaque stage program.
 */
typedef struct ShlSchedule ShlSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *shl_last_error(void);

/**
 * Universal program for `alpha` in (0, 1) truncated at `j_max`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum ShlStatus shl_schedule_universal(double alpha, uint32_t j_max, struct ShlSchedule **out);

/**
 * Parses the key-value schedule text.
 *
 * # Safety
 * `text_ptr` must be a NUL-terminated string; `out` must be writable.
 */
enum ShlStatus shl_schedule_from_text(const char *text_ptr, struct ShlSchedule **out);

/**
 * Number of stages including identity ones, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t shl_schedule_stage_count(const struct ShlSchedule *s);

/**
 * Key-value text of the schedule; release with `shl_string_free`.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
char *shl_schedule_to_text(const struct ShlSchedule *s);

/**
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void shl_schedule_free(struct ShlSchedule *s);

/**
 * Initial data from a harmonic spec such as "sinsin:1,1". With a schedule
 * the field uses the storage layout that program needs, otherwise a plain grid.
 *
 * # Safety
 * `spec` must be NUL-terminated, `schedule` null or live, `out` writable.
 */
enum ShlStatus shl_field_harmonic(const char *spec,
                                  size_t nx,
                                  size_t ny,
                                  const struct ShlSchedule *schedule,
                                  struct ShlField **out);

/**
 * Reads a binary field dump.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` writable.
 */
enum ShlStatus shl_field_load(const char *path, struct ShlField **out);

/**
 * # Safety
 * `f` must be live; `path` NUL-terminated.
 */
enum ShlStatus shl_field_save(const struct ShlField *f, const char *path);

/**
 * L² norm on the torus.
 *
 * # Safety
 * `f` must be null or live. Returns NaN for null.
 */
double shl_field_l2(const struct ShlField *f);

/**
 * Homogeneous Sobolev norm of order `s`.
 *
 * # Safety
 * `f` must be live; `out` writable.
 */
enum ShlStatus shl_field_sobolev(const struct ShlField *f, double s, double *out);

/**
 * # Safety
 * `f` must be null or a handle not yet freed.
 */
void shl_field_free(struct ShlField *f);

/**
 * Viscous run along the program. Writes the terminal field, the
 * dissipation χ(T) and the largest energy-balance residual.
 *
 * # Safety
 * `theta0` and `schedule` must be live; the out pointers writable.
 */
enum ShlStatus shl_run_viscous(const struct ShlField *theta0,
                               const struct ShlSchedule *schedule,
                               double kappa,
                               size_t substeps,
                               struct ShlField **out_field,
                               double *out_chi,
                               double *out_residual);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void shl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHEARLAB_H */

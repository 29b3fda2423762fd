#ifndef SSMROT_H
#define SSMROT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum SsmrotStatus {
  SsmrotStatus_Ok = 0,
  SsmrotStatus_NullPointer = 1,
  SsmrotStatus_InvalidArgument = 2,
  SsmrotStatus_Computation = 3,
  SsmrotStatus_Io = 4,
  SsmrotStatus_BufferTooSmall = 5,
  SsmrotStatus_Panic = 6,
} SsmrotStatus;

/**
 * Opaque second-order model handle.
 */
typedef struct SsmrotModel SsmrotModel;

/**
 * Opaque reduced-order model handle: the shifted system, its first-order
 * embedding, and the autonomous SSM expansion.
 */
typedef struct SsmrotRom SsmrotRom;

/**
 * Rotating-cantilever parameters (mirrors the beam builder).
 */
typedef struct SsmrotBeamParams {
  double length;
  double width;
  double thickness;
  double youngs_modulus;
  double poisson;
  double density;
  double hub_offset;
  double spin_speed;
  uint32_t n_elements;
  double tip_spring_stiffness;
  bool include_coriolis;
  double asymmetry_preload;
} SsmrotBeamParams;

/**
 * Reduction parameters. Set `damping_xi1` or `damping_alpha` to a negative
 * value to disable that entry (both negative = undamped); `n_master_pairs`
 * of 0 selects resonant pairs automatically.
 */
typedef struct SsmrotReduceParams {
  uint32_t order;
  double damping_xi1;
  double damping_alpha;
  uint32_t n_master_pairs;
  double inner_tol;
  double ext_tol;
} SsmrotReduceParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version string (static storage).
 */
const char *ssmrot_version(void);

/**
 * Thread-local description of the last error.
 */
const char *ssmrot_last_error(void);

/**
 * Build a rotating cantilever model.
 *
 * # Safety
 * `params` and `out` must be valid pointers; `*out` receives an owned
 * handle to release with [`ssmrot_model_free`].
 */
enum SsmrotStatus ssmrot_model_beam(const struct SsmrotBeamParams *params,
                                    struct SsmrotModel **out);

/**
 * Load a tensor-backed model from a JSON manifest path.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as in
 * [`ssmrot_model_beam`].
 */
enum SsmrotStatus ssmrot_model_load_manifest(const char *path, struct SsmrotModel **out);

/**
 * # Safety
 * `model` must come from a ssmrot constructor (or be NULL).
 */
void ssmrot_model_free(struct SsmrotModel *model);

/**
 * Number of displacement DOFs, 0 on null input.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
uintptr_t ssmrot_model_dofs(const struct SsmrotModel *model);

/**
 * Solve the equilibrium, shift, eigenanalyze, and expand the SSM.
 *
 * # Safety
 * `model`, `params`, `out` must be valid; `*out` receives an owned handle
 * for [`ssmrot_rom_free`].
 */
enum SsmrotStatus ssmrot_reduce(const struct SsmrotModel *model,
                                const struct SsmrotReduceParams *params,
                                struct SsmrotRom **out);

/**
 * # Safety
 * `rom` must come from [`ssmrot_reduce`] (or be NULL).
 */
void ssmrot_rom_free(struct SsmrotRom *rom);

/**
 * Expansion order of the ROM, 0 on null input.
 *
 * # Safety
 * `rom` must be a live handle or NULL.
 */
uint32_t ssmrot_rom_order(const struct SsmrotRom *rom);

/**
 * Master-subspace linear frequencies [rad/s]. Writes up to `cap` values
 * and stores the available count in `n_out`.
 *
 * # Safety
 * `rom` live; `freqs` points to `cap` doubles; `n_out` valid.
 */
enum SsmrotStatus ssmrot_rom_frequencies(const struct SsmrotRom *rom,
                                         double *freqs,
                                         uintptr_t cap,
                                         uintptr_t *n_out);

/**
 * Backbone curve on a uniform reduced-amplitude grid: fills `n` entries of
 * (rho, response frequency [rad/s], physical amplitude at the model's
 * first output DOF).
 *
 * # Safety
 * `rom` live; `rho`, `omega`, `amp` point to `n` doubles each.
 */
enum SsmrotStatus ssmrot_rom_backbone(const struct SsmrotRom *rom,
                                      double rho_max,
                                      uintptr_t n,
                                      double *rho,
                                      double *omega,
                                      double *amp);

/**
 * Forced response curve over [omega_lo, omega_hi] at forcing scale `eps`.
 * Writes up to `cap` points of (Ω, amplitude at the first output DOF,
 * stability flag) and stores the produced count in `n_out`. Returns
 * `BufferTooSmall` (with `n_out` set) when the branch holds more points
 * than `cap`.
 *
 * # Safety
 * `rom` live; `omega`, `amp` point to `cap` doubles; `stable` to `cap`
 * int32; `n_out` valid.
 */
enum SsmrotStatus ssmrot_rom_frc(const struct SsmrotRom *rom,
                                 double omega_lo,
                                 double omega_hi,
                                 double eps,
                                 uintptr_t cap,
                                 double *omega,
                                 double *amp,
                                 int32_t *stable,
                                 uintptr_t *n_out);

/**
 * Serialize the ROM to ssm.json at `path`.
 *
 * # Safety
 * `rom` live; `path` NUL-terminated.
 */
enum SsmrotStatus ssmrot_rom_save_json(const struct SsmrotRom *rom, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSMROT_H */

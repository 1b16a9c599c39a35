#ifndef DOMAIN_STABILITY_H
#define DOMAIN_STABILITY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_UTF8 = 2,
  DS_STATUS_INVALID_JSON = 3,
  DS_STATUS_BUFFER_TOO_SMALL = 4,
  DS_STATUS_PANIC = 5,
  DS_STATUS_DOMAIN_ERROR = 10,
  DS_STATUS_EMPTY_DOMAIN = 11,
  DS_STATUS_MARGIN_ERROR = 12,
  DS_STATUS_MODULUS_ERROR = 13,
  DS_STATUS_COEFFICIENT_ERROR = 14,
  DS_STATUS_NUMERICS_ERROR = 15,
  DS_STATUS_STATE_ERROR = 16,
  DS_STATUS_RANK_ERROR = 17,
  DS_STATUS_RESOLUTION_ERROR = 18,
  DS_STATUS_INAPPLICABLE_ERROR = 19,
  DS_STATUS_GAP_ERROR = 20,
  DS_STATUS_CONFIG_ERROR = 21,
  DS_STATUS_IO_ERROR = 22,
} DsStatus;

// Raster domain on a grid.
typedef struct DsDomain DsDomain;

// Raster grid on a square box.
typedef struct DsGrid DsGrid;

// Assembled stiffness and mass matrices on the whole box.
typedef struct DsSystem DsSystem;

// The four Hausdorff-type distances between two domains.
typedef struct DsHausdorff {
  // Hausdorff distance of the closures.
  double closed;
  // Hausdorff distance of the complements.
  double open;
  // Maximum of `closed` and `open`.
  double pompeiu;
  // Weakest of the four distances.
  double weakest;
} DsHausdorff;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ds_version(void);

// Message of the last failure on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *ds_last_error_message(void);

// Clears the last error message of this thread.
void ds_clear_error(void);

// Grid of `n × n` square cells covering `[x0, x0 + side] × [y0, y0 + side]`.
enum DsStatus ds_grid_new(double x0, double y0, double side, size_t n, struct DsGrid **out);

void ds_grid_free(struct DsGrid *grid);

// Mesh width of the grid, or NaN for a null handle.
double ds_grid_h(const struct DsGrid *grid);

// Rasterizes a shape given as JSON, e.g.
// `{"kind":"disk","center":[0.5,0.5],"radius":0.3}`.
enum DsStatus ds_domain_from_shape(const struct DsGrid *grid,
                                   const char *shape_json,
                                   struct DsDomain **out);

// Domain from a row-major cell mask of `n × n` bytes, nonzero meaning inside.
enum DsStatus ds_domain_from_mask(const struct DsGrid *grid,
                                  const uint8_t *mask,
                                  size_t len,
                                  struct DsDomain **out);

void ds_domain_free(struct DsDomain *domain);

// Number of cells in the domain, or 0 for a null handle.
size_t ds_domain_cell_count(const struct DsDomain *domain);

// Area of the domain, or NaN for a null handle.
double ds_domain_area(const struct DsDomain *domain);

// Points within `eps` of the domain.
enum DsStatus ds_domain_dilate(const struct DsDomain *domain, double eps, struct DsDomain **out);

// Points whose `eps`-neighbourhood lies in the domain.
enum DsStatus ds_domain_erode(const struct DsDomain *domain, double eps, struct DsDomain **out);

enum DsStatus ds_hausdorff(const struct DsDomain *x,
                           const struct DsDomain *y,
                           struct DsHausdorff *out);

// Assembles `−div(A∇u)` on the whole box. `coefficient_json` may be NULL
// for the identity, otherwise e.g. `{"kind":"diagonal","values":[1,4]}`.
enum DsStatus ds_system_new(const struct DsGrid *grid,
                            const char *coefficient_json,
                            struct DsSystem **out);

void ds_system_free(struct DsSystem *system);

// Number of interior nodes of the box, i.e. the length of nodal vectors.
size_t ds_system_dim(const struct DsSystem *system);

// Friedrichs constant `1/λ_min` of the whole box.
enum DsStatus ds_system_friedrichs(const struct DsSystem *system, double *out);

// The `k` smallest Dirichlet eigenvalues on `domain`, ascending. `written`
// receives the number of values produced even when the buffer is too small.
enum DsStatus ds_eigenvalues(const struct DsSystem *system,
                             const struct DsDomain *domain,
                             size_t k,
                             double *values,
                             size_t cap,
                             size_t *written);

// Solves the Dirichlet problem on `domain` for a load given as JSON, e.g.
// `{"kind":"constant","value":1}`. The zero-extended nodal solution has
// `ds_system_dim` entries; `energy` (may be NULL) receives its energy norm.
enum DsStatus ds_solve(const struct DsSystem *system,
                       const struct DsDomain *domain,
                       const char *load_json,
                       double *u,
                       size_t cap,
                       size_t *written,
                       double *energy);

// Executes a run config (the JSON read by `domain-stability run`). A
// non-NULL `out_dir` overrides the output directory of the config.
enum DsStatus ds_run_config(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DOMAIN_STABILITY_H */

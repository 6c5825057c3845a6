#ifndef FIBERSCAT_H
#define FIBERSCAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum FsStatus {
  FS_STATUS_OK = 0,
  FS_STATUS_NULL_POINTER = 1,
  FS_STATUS_CONFIG = 2,
  FS_STATUS_DIMENSION = 3,
  FS_STATUS_NUMERICAL = 4,
  FS_STATUS_DOMAIN = 5,
  FS_STATUS_CONVERGENCE = 6,
  FS_STATUS_BOUNDARY = 7,
  FS_STATUS_INTERNAL = 8,
  FS_STATUS_PANIC = 9,
} FsStatus;

/*
 Eigendecomposition of a fiber operator.
 */
typedef struct FsEigen FsEigen;

/*
 Discretized fiber operator at one total momentum.
 */
typedef struct FsFiber FsFiber;

/*
 Periodic momentum grid.
 */
typedef struct FsGrid FsGrid;

/*
 Dispersion relations and coupling.
 */
typedef struct FsModel FsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *fs_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *fs_version(void);

/*
 Preset model `"polaron"`, `"nelson"` or `"relativistic"` in `nu` dimensions.

 # Safety
 `name` must be a NUL-terminated string and `out` writable.
 */
enum FsStatus fs_model_preset(const char *name, size_t nu, struct FsModel **out);

/*
 Replaces the coupling by `g exp(-sigma^2 k^2 / 2)`.

 # Safety
 `model` must be a live handle.
 */
enum FsStatus fs_model_set_gaussian_coupling(struct FsModel *model, double g, double sigma);

/*
 Bottom of the essential spectrum of the fiber at `p[0..p_len]`.

 # Safety
 Handles must be live, `p` readable for `p_len` values and `out` writable.
 */
enum FsStatus fs_model_sigma_ess(const struct FsModel *model,
                                 const double *p,
                                 size_t p_len,
                                 double *out);

/*
 # Safety
 `model` must come from this library and not be used afterwards; null is ignored.
 */
void fs_model_free(struct FsModel *model);

/*
 Grid of `n` points per axis on `[-kmax, kmax)` in `nu` dimensions.

 # Safety
 `out` must be writable.
 */
enum FsStatus fs_grid_new(size_t nu, size_t n, double kmax, struct FsGrid **out);

/*
 Number of grid points, `n^nu`.

 # Safety
 Handles must be live and `out` writable.
 */
enum FsStatus fs_grid_len(const struct FsGrid *grid, size_t *out);

/*
 # Safety
 See [`fs_model_free`].
 */
void fs_grid_free(struct FsGrid *grid);

/*
 Fiber operator at total momentum `p[0..p_len]`.

 # Safety
 Handles must be live, `p` readable and `out` writable.
 */
enum FsStatus fs_fiber_assemble(const struct FsModel *model,
                                const struct FsGrid *grid,
                                const double *p,
                                size_t p_len,
                                struct FsFiber **out);

/*
 Dimension of the fiber space: grid points plus the vacuum.

 # Safety
 Handles must be live and `out` writable.
 */
enum FsStatus fs_fiber_dim(const struct FsFiber *fiber, size_t *out);

/*
 `H(P) psi` for interleaved states of `2 * dim` doubles.

 # Safety
 `psi` readable and `out` writable for `len` doubles.
 */
enum FsStatus fs_fiber_apply(const struct FsFiber *fiber,
                             const double *psi,
                             double *out,
                             size_t len);

/*
 Mass-shell energy at `p`; `found` is set to 0 when there is no bound state.

 # Safety
 Handles must be live, `p` readable, `energy` and `found` writable.
 */
enum FsStatus fs_mass_shell(const struct FsModel *model,
                            const struct FsGrid *grid,
                            const double *p,
                            size_t p_len,
                            double *energy,
                            int32_t *found);

/*
 # Safety
 See [`fs_model_free`].
 */
void fs_fiber_free(struct FsFiber *fiber);

/*
 Eigendecomposition of a fiber operator by the secular-equation solver.

 # Safety
 `fiber` must be live and `out` writable.
 */
enum FsStatus fs_eigen_new(const struct FsFiber *fiber, struct FsEigen **out);

/*
 Number of eigenvalues.

 # Safety
 Handles must be live and `out` writable.
 */
enum FsStatus fs_eigen_len(const struct FsEigen *eigen, size_t *out);

/*
 Copies the ascending eigenvalues into `out`, which holds `capacity` doubles.

 # Safety
 `out` must be writable for `capacity` doubles.
 */
enum FsStatus fs_eigen_values(const struct FsEigen *eigen, double *out, size_t capacity);

/*
 Eigenvector `index` as `2 * len` interleaved doubles.

 # Safety
 `out` must be writable for `capacity` doubles.
 */
enum FsStatus fs_eigen_vector(const struct FsEigen *eigen,
                              size_t index,
                              double *out,
                              size_t capacity);

/*
 `e^{-itH} psi` for interleaved states of `len = 2 * dim` doubles; `out` may alias `psi`.

 # Safety
 `psi` readable and `out` writable for `len` doubles.
 */
enum FsStatus fs_eigen_propagate(const struct FsEigen *eigen,
                                 const double *psi,
                                 double t,
                                 double *out,
                                 size_t len);

/*
 # Safety
 See [`fs_model_free`].
 */
void fs_eigen_free(struct FsEigen *eigen);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIBERSCAT_H */

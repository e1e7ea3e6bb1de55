#ifndef HOPF_HEAT_H
#define HOPF_HEAT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum HhStatus {
  HH_STATUS_OK = 0,
  HH_STATUS_DOMAIN = 1,
  HH_STATUS_NON_CONVERGENCE = 2,
  HH_STATUS_CONDITIONING = 3,
  HH_STATUS_CONFIG = 4,
  HH_STATUS_IO = 5,
  HH_STATUS_NULL_POINTER = 6,
  HH_STATUS_PANIC = 7,
} HhStatus;

typedef enum HhEmbeddingKind {
  /*
   Into the unit sphere of R^4.
   */
  HH_EMBEDDING_KIND_S3 = 0,
  /*
   Into the unit sphere of R^3, constant on fibers.
   */
  HH_EMBEDDING_KIND_S2 = 1,
} HhEmbeddingKind;

/*
 A fitted embedding model.
 */
typedef struct HhEmbedding HhEmbedding;

/*
 Numerical policy (tolerance, representation switch, quadrature sizes).
 */
typedef struct HhPolicy HhPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer
 stays valid until the next `hh_*` call on the same thread.
 */
const char *hh_last_error(void);

/*
 New policy with default settings.
 */
struct HhPolicy *hh_policy_new(void);

/*
 # Safety
 `p` must come from [`hh_policy_new`] and not have been freed; null is a no-op.
 */
void hh_policy_free(struct HhPolicy *p);

/*
 # Safety
 `p` must be a live policy.
 */
enum HhStatus hh_policy_set_tol(struct HhPolicy *p, double tol);

/*
 # Safety
 `p` must be a live policy.
 */
enum HhStatus hh_policy_set_t_switch(struct HhPolicy *p, double t_switch);

/*
 # Safety
 `p` must be a live policy.
 */
enum HhStatus hh_policy_set_quad_nodes(struct HhPolicy *p, size_t nodes);

/*
 # Safety
 `p` must be a live policy.
 */
enum HhStatus hh_policy_set_y_cut(struct HhPolicy *p, double y_cut);

/*
 Nodes per axis of the Haar product quadrature.

 # Safety
 `p` must be a live policy.
 */
enum HhStatus hh_policy_set_haar_grid(struct HhPolicy *p, size_t n);

/*
 Subelliptic kernel by its eigenfunction series.

 # Safety
 `policy` is null or live; `out` is writable.
 */
enum HhStatus hh_p_series(const struct HhPolicy *policy,
                          double t,
                          double r,
                          double theta,
                          double *out);

/*
 Subelliptic kernel by the line integral over the round kernel.

 # Safety
 `policy` is null or live; `out` is writable.
 */
enum HhStatus hh_p_integral(const struct HhPolicy *policy,
                            double t,
                            double r,
                            double theta,
                            double *out);

/*
 `q(t, x)` for `x > -1`.

 # Safety
 `policy` is null or live; `out` is writable.
 */
enum HhStatus hh_q_eval(const struct HhPolicy *policy, double t, double x, double *out);

/*
 Round kernel on S³ at distance `delta`.

 # Safety
 `policy` is null or live; `out` is writable.
 */
enum HhStatus hh_q_t(const struct HhPolicy *policy, double t, double delta, double *out);

/*
 Quotient kernel on S².

 # Safety
 `policy` is null or live; `out` is writable.
 */
enum HhStatus hh_q_tilde(const struct HhPolicy *policy, double t, double r, double *out);

/*
 Eigenterm `p_{k,n}(r, theta)`.

 # Safety
 `out` is writable.
 */
enum HhStatus hh_eigen_term(uint32_t k, int32_t n, double r, double theta, double *out);

/*
 `(r, theta, delta)` of a pair of quaternions `(q0, q1, q2, q3)`, each
 normalized first.

 # Safety
 `x` and `y` point to 4 doubles; `out` to 3 writable doubles.
 */
enum HhStatus hh_pair_coords(const double *x, const double *y, double *out);

/*
 Fit an embedding on `n` Haar samples drawn with `seed`.

 # Safety
 `out` is writable; on success `*out` must later go to [`hh_embedding_free`].
 */
enum HhStatus hh_embedding_new(enum HhEmbeddingKind kind,
                               size_t n,
                               uint64_t seed,
                               struct HhEmbedding **out);

/*
 # Safety
 `e` must come from [`hh_embedding_new`]; null is a no-op.
 */
void hh_embedding_free(struct HhEmbedding *e);

/*
 Dimension of the target space (4 or 3), or 0 for null.

 # Safety
 `e` is null or live.
 */
size_t hh_embedding_dim(const struct HhEmbedding *e);

/*
 Smallest eigenvalue of the model's Gram matrix.

 # Safety
 `e` is live; `out` is writable.
 */
enum HhStatus hh_embedding_min_eigenvalue(const struct HhEmbedding *e, double *out);

/*
 Sample indices of the base points; `len` must be at least the dimension.

 # Safety
 `e` is live; `out` has room for `len` values.
 */
enum HhStatus hh_embedding_base_ids(const struct HhEmbedding *e, size_t *out, size_t len);

/*
 Image of the quaternion `q` (4 doubles, normalized first; zero or
 non-finite input is a domain error); writes `dim` doubles.

 # Safety
 `e` is live; `q` points to 4 doubles; `out` has room for `len` values.
 */
enum HhStatus hh_embedding_embed(const struct HhEmbedding *e,
                                 const double *q,
                                 double *out,
                                 size_t len);

/*
 Run a verification suite. Writes the JSON report to `*report` (release
 with [`hh_string_free`]) and whether every check passed to `*passed`.

 # Safety
 `suite` is a NUL-terminated string; `policy` is null or live; `report`
 and `passed` are writable.
 */
enum HhStatus hh_verify(const char *suite,
                        uint64_t seed,
                        const struct HhPolicy *policy,
                        char **report,
                        bool *passed);

/*
 # Safety
 `s` must come from this library; null is a no-op.
 */
void hh_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOPF_HEAT_H */

/* viper -- offline RL with randomized-ensemble pessimism.
 *
 * C interface to the viper core library. All objects are opaque handles
 * created and destroyed through this API; every fallible call returns a
 * viper_status and leaves a human-readable message retrievable with
 * viper_last_error() (thread local).
 *
 * Conventions:
 *   - steps h are 1-based, 1 <= h <= H
 *   - states of the two-state hard MDP are 0 or 1, actions are 0..99
 *   - bandit states are dense double vectors of length state_dim
 *   - all matrices passed through this API are row-major
 */
#ifndef VIPER_H
#define VIPER_H

#include <stdint.h>
#include <stddef.h>

#if defined(_WIN32)
#define VIPER_API __declspec(dllexport)
#else
#define VIPER_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int32_t viper_status;

enum {
  VIPER_OK = 0,
  VIPER_ERR_INVALID_ARGUMENT = 1, /* null pointer, bad handle, bad enum tag */
  VIPER_ERR_DOMAIN = 2,           /* index or value outside the documented domain */
  VIPER_ERR_CONFIG = 3,           /* inconsistent configuration */
  VIPER_ERR_FORMAT = 4,           /* malformed file contents */
  VIPER_ERR_NUMERIC = 5,          /* divergence or factorization failure */
  VIPER_ERR_IO = 6,               /* filesystem failure */
  VIPER_ERR_UNKNOWN = 7
};

VIPER_API const char* viper_version(void);

/* Message describing the most recent failure on this thread. Never NULL. */
VIPER_API const char* viper_last_error(void);

/* ------------------------------------------------------------------ */
/* Hard linear MDP (2 states, 100 actions, 10-dim features)           */
/* ------------------------------------------------------------------ */

typedef struct viper_mdp viper_mdp;

VIPER_API viper_status viper_mdp_create(int32_t horizon, uint64_t seed,
                                        viper_mdp** out);
VIPER_API void viper_mdp_free(viper_mdp* mdp);

VIPER_API viper_status viper_mdp_save(const viper_mdp* mdp, const char* path);
VIPER_API viper_status viper_mdp_load(const char* path, viper_mdp** out);

VIPER_API int32_t viper_mdp_horizon(const viper_mdp* mdp);
VIPER_API int32_t viper_mdp_n_states(const viper_mdp* mdp);
VIPER_API int32_t viper_mdp_n_actions(const viper_mdp* mdp);
VIPER_API int32_t viper_mdp_feat_dim(const viper_mdp* mdp);

/* out must hold feat_dim doubles. */
VIPER_API viper_status viper_mdp_feature(const viper_mdp* mdp, int32_t s,
                                         int32_t a, double* out);
VIPER_API viper_status viper_mdp_transition_prob(const viper_mdp* mdp,
                                                 int32_t h, int32_t s,
                                                 int32_t a, int32_t s_next,
                                                 double* out);
VIPER_API viper_status viper_mdp_mean_reward(const viper_mdp* mdp, int32_t h,
                                             int32_t s, int32_t a,
                                             double* out);

/* ------------------------------------------------------------------ */
/* Contextual bandit tasks                                             */
/* ------------------------------------------------------------------ */

typedef struct viper_bandit viper_bandit;

/* kind is one of "cos", "exp". epsilon is the behaviour-policy probability
 * of a non-optimal action; obs_noise is the observation noise std dev
 * (0 for noiseless rewards). */
VIPER_API viper_status viper_bandit_create(const char* kind, int32_t dim,
                                           int32_t n_actions, double epsilon,
                                           double obs_noise, uint64_t seed,
                                           viper_bandit** out);

/* MNIST task: reward 1 when the action equals the image label. Loads the
 * two IDX files from disk; n_actions is fixed to 10. */
VIPER_API viper_status viper_bandit_create_mnist(const char* images_path,
                                                 const char* labels_path,
                                                 double epsilon,
                                                 double obs_noise,
                                                 viper_bandit** out);

VIPER_API void viper_bandit_free(viper_bandit* bandit);

VIPER_API int32_t viper_bandit_state_dim(const viper_bandit* bandit);
VIPER_API int32_t viper_bandit_n_actions(const viper_bandit* bandit);

VIPER_API viper_status viper_bandit_mean_reward(const viper_bandit* bandit,
                                                const double* state,
                                                int32_t dim, int32_t action,
                                                double* out);

/* Block embedding of (state, action): state copied into block `action` of
 * an (dim * n_actions)-vector, zeros elsewhere, renormalized to unit
 * length. out must hold dim * n_actions doubles. */
VIPER_API viper_status viper_action_embedding(const double* state, int32_t dim,
                                              int32_t action,
                                              int32_t n_actions, double* out);

/* ------------------------------------------------------------------ */
/* Offline datasets                                                    */
/* ------------------------------------------------------------------ */

typedef struct viper_dataset viper_dataset;

/* 1-based inclusive bounds of the step-h trajectory bucket. */
VIPER_API viper_status viper_split_indices(int32_t K, int32_t H, int32_t h,
                                           int32_t* lo, int32_t* hi);

VIPER_API viper_status viper_collect_mdp(const viper_mdp* mdp, int32_t K,
                                         uint64_t seed, int32_t split_enabled,
                                         viper_dataset** out);
VIPER_API viper_status viper_collect_bandit(const viper_bandit* bandit,
                                            int32_t K, uint64_t seed,
                                            int32_t split_enabled,
                                            viper_dataset** out);

VIPER_API void viper_dataset_free(viper_dataset* ds);
VIPER_API viper_status viper_dataset_save(const viper_dataset* ds,
                                          const char* path);
VIPER_API viper_status viper_dataset_load(const char* path,
                                          viper_dataset** out);

VIPER_API int32_t viper_dataset_k(const viper_dataset* ds);
VIPER_API int32_t viper_dataset_h(const viper_dataset* ds);

/* ------------------------------------------------------------------ */
/* Fitting                                                             */
/* ------------------------------------------------------------------ */

typedef struct viper_policy viper_policy;

typedef struct viper_fit_config {
  int32_t ensemble_size;   /* M >= 1 */
  double sigma;            /* perturbation scale, all steps */
  const double* sigma_per_step; /* optional length-H override, may be NULL */
  double beta;             /* LCB uncertainty multiplier */
  double lambda;           /* ridge weight > 0 */
  double eta;              /* gradient descent step size */
  int32_t gd_steps;        /* J >= 0 */
  double psi;              /* truncation cutoff margin >= 0 */
  int32_t width;           /* hidden width m (even) for neural families */
  int32_t split_enabled;   /* honour dataset split buckets */
  int32_t fit_threads;     /* parallel ensemble training, 1 = sequential */
  int32_t net_depth;       /* 1 = single-hidden-layer net trained by GD,
                              2 = two-hidden-layer net trained by Adam */
  double adam_lr;
  int32_t adam_epochs;
  int32_t adam_batch;
  int32_t per_member_init; /* 0 = one shared initialization, 1 = fresh */
  int32_t lcb_grad_at_init;/* NeuraLCB features at W0 instead of trained W */
  uint64_t seed;
} viper_fit_config;

VIPER_API void viper_fit_config_default(viper_fit_config* cfg);

/* algo is one of:
 *   "Lin-VIPeR" "Neural-VIPeR" "LinLCB" "LinGreedy"
 *   "NeuraLCB" "NeuraLCB-Diag" "NeuralGreedy"
 */
VIPER_API viper_status viper_fit_mdp(const viper_mdp* mdp,
                                     const viper_dataset* ds, const char* algo,
                                     const viper_fit_config* cfg,
                                     viper_policy** out);
VIPER_API viper_status viper_fit_bandit(const viper_bandit* bandit,
                                        const viper_dataset* ds,
                                        const char* algo,
                                        const viper_fit_config* cfg,
                                        viper_policy** out);

/* ------------------------------------------------------------------ */
/* Policies                                                            */
/* ------------------------------------------------------------------ */

VIPER_API void viper_policy_free(viper_policy* policy);

VIPER_API viper_status viper_policy_select_mdp(const viper_policy* policy,
                                               int32_t h, int32_t s,
                                               int32_t* action);
VIPER_API viper_status viper_policy_select_bandit(const viper_policy* policy,
                                                  const double* state,
                                                  int32_t dim, int32_t* action);

VIPER_API viper_status viper_policy_value_mdp(const viper_policy* policy,
                                              int32_t h, int32_t s, int32_t a,
                                              double* out);
VIPER_API viper_status viper_policy_value_bandit(const viper_policy* policy,
                                                 const double* state,
                                                 int32_t dim, int32_t a,
                                                 double* out);

VIPER_API viper_status viper_policy_save(const viper_policy* policy,
                                         const char* path);
VIPER_API viper_status viper_policy_load(const char* path, viper_policy** out);

/* ------------------------------------------------------------------ */
/* Evaluation                                                          */
/* ------------------------------------------------------------------ */

/* Exact dynamic-programming suboptimality under the uniform initial
 * distribution of the two-state hard MDP. */
VIPER_API viper_status viper_eval_mdp_subopt(const viper_mdp* mdp,
                                             const viper_policy* policy,
                                             double* subopt);

/* Optimal initial value of a state, for reference output. */
VIPER_API viper_status viper_eval_mdp_optimal_value(const viper_mdp* mdp,
                                                    int32_t s, double* value);

/* Monte-Carlo suboptimality on n_eval freshly drawn states (fixed by
 * seed). Also reports the standard error of the estimate. */
VIPER_API viper_status viper_eval_bandit_subopt(const viper_bandit* bandit,
                                                const viper_policy* policy,
                                                int32_t n_eval, uint64_t seed,
                                                double* subopt,
                                                double* stderr_out);

/* Median / p95 per-action-selection latency in microseconds over
 * n_states probe states x repeats selections, after `warmup` discarded
 * selections. If samples_path is non-NULL the raw samples are written
 * there, one value per line. */
VIPER_API viper_status viper_bench_bandit_select(
    const viper_bandit* bandit, const viper_policy* policy, int32_t n_states,
    int32_t repeats, int32_t warmup, uint64_t seed, const char* samples_path,
    double* median_us, double* p95_us);

VIPER_API viper_status viper_bench_mdp_select(const viper_mdp* mdp,
                                              const viper_policy* policy,
                                              int32_t repeats, int32_t warmup,
                                              const char* samples_path,
                                              double* median_us,
                                              double* p95_us);

/* ------------------------------------------------------------------ */
/* Uncertainty toolbox                                                 */
/* ------------------------------------------------------------------ */

/* Closed-form ReLU tangent kernel value for unit vectors x, y of
 * length d: (x.y) (pi - arccos(clamp(x.y))) / (2 pi). */
VIPER_API viper_status viper_ntk_closed_form(const double* x, const double* y,
                                             int32_t d, double* out);

/* logdet(I + gram/lambda) / log(1 + kprime/lambda); gram is n x n
 * row-major positive semidefinite. */
VIPER_API viper_status viper_effective_dimension(const double* gram, int32_t n,
                                                 double lambda, int32_t kprime,
                                                 double* out);

/* Smallest ensemble size M with
 * M >= log(H S A / delta) / log(1 / (1 - Phi(-1))), clamped to >= 1. */
VIPER_API viper_status viper_ensemble_size(double delta, int32_t H, int32_t S,
                                           int32_t A, int32_t* out);

/* Statistical validation of the perturbed ridge solution: draws n_draws
 * closed-form solutions on a random (d, K) fixture and compares the
 * empirical mean and covariance of theta~ - theta^ against N(0,
 * sigma^2 Lambda^-1). The law is exact for lambda = 1. */
typedef struct viper_law_report {
  double max_mean_abs_err;     /* max coordinate |mean - expected| */
  double mean_err_bound;       /* 4 sigma ||Lambda^-1/2|| / sqrt(n) */
  double cov_fro_rel_err;      /* ||C_emp - C||_F / ||C||_F */
  int32_t mean_ok;
  int32_t cov_ok;              /* cov_fro_rel_err <= 0.05 */
} viper_law_report;

VIPER_API viper_status viper_gaussian_law_test(int32_t d, int32_t K,
                                               double sigma, double lambda,
                                               int32_t n_draws, uint64_t seed,
                                               viper_law_report* out);

/* Frequency of the one-sided shift event <g, draw> <= -sigma ||g|| over
 * single draws, and of the min over M independent draws per trial. */
typedef struct viper_anticonc_report {
  double single_freq;          /* expect Phi(-1) ~ 0.15866 */
  double single_expected;
  double ensemble_freq;        /* expect >= 1 - delta */
  int32_t ensemble_m;
} viper_anticonc_report;

VIPER_API viper_status viper_anticoncentration_test(
    int32_t d, int32_t K, double sigma, double lambda, int32_t n_draws,
    int32_t ensemble_m, int32_t n_trials, uint64_t seed,
    viper_anticonc_report* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* VIPER_H */

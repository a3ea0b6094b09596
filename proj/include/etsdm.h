/* C interface to the etsdm core library.
 *
 * Conventions:
 *   - Every fallible function returns an etsdm_status; 0 is success.
 *   - On failure, etsdm_last_error() returns a thread-local message valid
 *     until the next failing call on the same thread.
 *   - Objects are opaque handles created by *_create/*_new functions and
 *     released with the matching *_free (NULL-safe).
 *   - Sample buffers are row-major double arrays, one row per sample.
 */
#ifndef ETSDM_H
#define ETSDM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ETSDM_API __declspec(dllexport)
#else
#define ETSDM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int etsdm_status;
enum {
    ETSDM_OK = 0,
    ETSDM_ERR_INVALID_ARGUMENT = 1,
    ETSDM_ERR_DOMAIN = 2,
    ETSDM_ERR_RUNTIME = 3,
    ETSDM_ERR_IO = 4
};

ETSDM_API const char* etsdm_last_error(void);
ETSDM_API const char* etsdm_version(void);

/* ---------- schedules ---------- */

enum {
    ETSDM_SCHEDULE_LINEAR = 0,
    ETSDM_SCHEDULE_QUADRATIC = 1,
    ETSDM_SCHEDULE_COSINE = 2,
    ETSDM_SCHEDULE_COSINE_SHIFT = 3,
    ETSDM_SCHEDULE_ZERO_TERMINAL_SNR = 4
};

typedef struct etsdm_schedule_spec {
    int kind;
    double beta_min_bar;  /* 0.1 */
    double beta_max_bar;  /* 20.0 */
    double cosine_offset; /* 0.008 */
    double shift_factor;  /* 0.25 */
    int modified_ns;      /* boolean */
    int T;                /* 1000 */
} etsdm_schedule_spec;

typedef struct etsdm_schedule etsdm_schedule;

ETSDM_API void etsdm_schedule_spec_default(etsdm_schedule_spec* spec);
ETSDM_API etsdm_status etsdm_schedule_kind_from_name(const char* name, int* out_kind);
ETSDM_API etsdm_status etsdm_schedule_create(const etsdm_schedule_spec* spec,
                                             etsdm_schedule** out);
ETSDM_API void etsdm_schedule_free(etsdm_schedule* s);

ETSDM_API etsdm_status etsdm_schedule_alpha(const etsdm_schedule* s, double tau, double* out);
ETSDM_API etsdm_status etsdm_schedule_sigma(const etsdm_schedule* s, double tau, double* out);
ETSDM_API etsdm_status etsdm_schedule_dalpha(const etsdm_schedule* s, double tau, double* out);
/* *diverges is set to 1 when dsigma/dtau blows up at tau (value undefined). */
ETSDM_API etsdm_status etsdm_schedule_dsigma(const etsdm_schedule* s, double tau, int* diverges,
                                             double* value);
ETSDM_API etsdm_status etsdm_schedule_snr(const etsdm_schedule* s, double tau, double* out);
ETSDM_API etsdm_status etsdm_schedule_sde_coeffs(const etsdm_schedule* s, double tau,
                                                 double* drift_coeff, double* diffusion_sq);
ETSDM_API etsdm_status etsdm_schedule_singular_at_zero(const etsdm_schedule* s, int* out);
/* Spec after the Modified-NS repair was applied (identity otherwise). */
ETSDM_API etsdm_status etsdm_schedule_resolved_spec(const etsdm_schedule* s,
                                                    etsdm_schedule_spec* out);

/* ---------- data distributions ---------- */

typedef struct etsdm_mixture etsdm_mixture;

ETSDM_API etsdm_status etsdm_mixture_standard_normal(int dim, etsdm_mixture** out);
ETSDM_API etsdm_status etsdm_mixture_ring(int k, double radius, double component_std,
                                          etsdm_mixture** out);
ETSDM_API void etsdm_mixture_free(etsdm_mixture* m);
ETSDM_API etsdm_status etsdm_mixture_dim(const etsdm_mixture* m, int* out);
ETSDM_API etsdm_status etsdm_mixture_sample(const etsdm_mixture* m, int n, uint64_t seed,
                                            double* out /* n x dim */);
ETSDM_API etsdm_status etsdm_mixture_log_density(const etsdm_mixture* m, const double* x, int d,
                                                 double* out);
ETSDM_API etsdm_status etsdm_mixture_score(const etsdm_mixture* m, const double* x, int d,
                                           double* out /* d */);
/* Draws from the exact noised marginal q_tau. */
ETSDM_API etsdm_status etsdm_mixture_sample_marginal(const etsdm_mixture* m,
                                                     const etsdm_schedule* s, double tau, int n,
                                                     uint64_t seed, double* out);

/* ---------- condition-sharing partitions ---------- */

typedef struct etsdm_partition etsdm_partition;

ETSDM_API etsdm_status etsdm_partition_create(double t_tilde, int n, etsdm_partition** out);
ETSDM_API void etsdm_partition_free(etsdm_partition* p);
ETSDM_API etsdm_status etsdm_partition_map(const etsdm_partition* p, double t, double* out);
ETSDM_API etsdm_status etsdm_partition_boundaries(const etsdm_partition* p,
                                                  double* out /* n + 1 */);

typedef struct etsdm_theorem2_record {
    double k_x;
    double b_x;
    double delta_sigma_max;
    double bound;
    double max_actual_error;
    int holds;
} etsdm_theorem2_record;

ETSDM_API etsdm_status etsdm_theorem2_bound(const etsdm_mixture* m, const etsdm_schedule* s,
                                            const etsdm_partition* p, const double* x, int d,
                                            int grid_per_subinterval,
                                            etsdm_theorem2_record* out);

/* Log-log slope of max shared-condition error vs delta_t over the n sweep.
 * delta_ts/max_errors are filled per entry of n_values (may be NULL). */
ETSDM_API etsdm_status etsdm_convergence_order(const etsdm_mixture* m, const etsdm_schedule* s,
                                               double t_tilde, const int* n_values, int count,
                                               const double* xs /* k x d */, int k,
                                               int probes_per_subinterval, double* slope,
                                               double* limit_ratio, double* delta_ts,
                                               double* max_errors);

/* ---------- predictors ---------- */

typedef struct etsdm_predictor etsdm_predictor;

ETSDM_API etsdm_status etsdm_predictor_analytic_eps(const etsdm_mixture* m,
                                                    const etsdm_schedule* s,
                                                    etsdm_predictor** out);
ETSDM_API etsdm_status etsdm_predictor_analytic_v(const etsdm_mixture* m, const etsdm_schedule* s,
                                                  etsdm_predictor** out);
ETSDM_API etsdm_status etsdm_predictor_shared_analytic(const etsdm_mixture* m,
                                                       const etsdm_schedule* s,
                                                       const etsdm_partition* p,
                                                       etsdm_predictor** out);
ETSDM_API void etsdm_predictor_free(etsdm_predictor* p);
ETSDM_API etsdm_status etsdm_predictor_dim(const etsdm_predictor* p, int* out);
ETSDM_API etsdm_status etsdm_predictor_eval(const etsdm_predictor* p, const double* x, int d,
                                            double t, double* out /* d */);

/* K(t, t+dt) along the grid; x drawn from the exact marginal at each t. */
ETSDM_API etsdm_status etsdm_lipschitz_scan(const etsdm_predictor* p, const etsdm_mixture* m,
                                            const etsdm_schedule* s, const double* t_grid,
                                            int n_grid, double dt, int n_mc, uint64_t seed,
                                            double* values, double* std_errors /* nullable */);

/* Mean one-step-x0 output change per input perturbation scale. */
ETSDM_API etsdm_status etsdm_perturbation_probe(const etsdm_predictor* p, const etsdm_schedule* s,
                                                double t_tilde, const double* scales,
                                                int n_scales, const etsdm_mixture* m, int n,
                                                uint64_t seed, double* values);

/* ---------- samplers ---------- */

enum {
    ETSDM_SAMPLER_ANCESTRAL = 0,
    ETSDM_SAMPLER_REVERSE_SDE_EULER = 1,
    ETSDM_SAMPLER_DDIM = 2,
    ETSDM_SAMPLER_DPM_SOLVER_1 = 3,
    ETSDM_SAMPLER_DPM_SOLVER_2 = 4,
    ETSDM_SAMPLER_DPM_SOLVER_3 = 5
};

/* Step spacing for the deterministic solvers (DDIM / DPM-Solver). */
enum {
    ETSDM_GRID_UNIFORM_T = 0,  /* uniform in t (default) */
    ETSDM_GRID_LOG_SNR = 1,    /* uniform in log(alpha/sigma) */
    ETSDM_GRID_SIGMA_ANGLE = 2 /* uniform in arcsin(sigma) */
};

typedef struct etsdm_sampler_config {
    int kind;
    int nfe;
    uint64_t seed;
    double eta;        /* DDIM stochasticity; 0 = deterministic */
    int time_grid;     /* ETSDM_GRID_*; step spacing for DDIM / DPM-Solver */
    int has_partition; /* boolean; route conditions through f_T below */
    double t_tilde;
    int n_sub;
} etsdm_sampler_config;

ETSDM_API etsdm_status etsdm_sampler_kind_from_name(const char* name, int* out_kind);
ETSDM_API etsdm_status etsdm_sample(const etsdm_predictor* p, const etsdm_schedule* s,
                                    const etsdm_sampler_config* cfg, int n_samples,
                                    double* out /* n x d */, int* n_warnings /* nullable */);

/* ---------- trainer ---------- */

enum { ETSDM_OBJECTIVE_EPS = 0, ETSDM_OBJECTIVE_V = 1 };
enum { ETSDM_COND_IDENTITY = 0, ETSDM_COND_SHARED = 1, ETSDM_COND_REMAP = 2 };
enum { ETSDM_REMAP_INVERSE_T = 0, ETSDM_REMAP_INVERSE_SIGMOID = 1 };
enum { ETSDM_TIME_UNIFORM_T = 0, ETSDM_TIME_UNIFORM_LAMBDA = 1 };
enum { ETSDM_ACT_SILU = 0, ETSDM_ACT_RELU = 1 };

typedef struct etsdm_train_config {
    int objective;
    int condition_map;
    double t_tilde; /* Shared only */
    int n_sub;      /* Shared only */
    int remap_kind;
    int time_sampling;
    double lambda_cap;
    double reg_weight;
    double reg_dt;
    int reg_random_offset;
    double lr;
    int batch_size;
    int steps;
    uint64_t seed;
    double ema_decay;
    int hidden_width;
    int hidden_depth;
    int embedding_dim;
    int activation;
} etsdm_train_config;

typedef struct etsdm_model etsdm_model;

ETSDM_API void etsdm_train_config_default(etsdm_train_config* cfg);
ETSDM_API etsdm_status etsdm_train(const etsdm_mixture* m, const etsdm_schedule* s,
                                   const etsdm_train_config* cfg, etsdm_model** out,
                                   double* loss_curve /* nullable, cfg->steps entries */);
ETSDM_API etsdm_status etsdm_train_resume(const etsdm_mixture* m, const etsdm_schedule* s,
                                          const etsdm_train_config* cfg,
                                          const char* checkpoint_path, etsdm_model** out,
                                          double* loss_curve /* nullable */);
ETSDM_API void etsdm_model_free(etsdm_model* model);
ETSDM_API etsdm_status etsdm_model_save(const etsdm_model* model, const char* path);
/* Predictor view over the model's EMA weights (model may be freed after). */
ETSDM_API etsdm_status etsdm_model_predictor(const etsdm_model* model, etsdm_predictor** out);

/* Realized nominal times t under the config's time sampling. */
ETSDM_API etsdm_status etsdm_sample_training_times(const etsdm_train_config* cfg, int n,
                                                   uint64_t seed, int T, double* out);

/* ---------- metrics ---------- */

ETSDM_API etsdm_status etsdm_sliced_wasserstein(const double* a, int na, const double* b, int nb,
                                                int d, int n_projections, uint64_t seed,
                                                double* value, double* std_error /* nullable */);
ETSDM_API etsdm_status etsdm_wasserstein_1d(const double* a, int na, const double* b, int nb,
                                            double* out);
ETSDM_API etsdm_status etsdm_ks_statistic(const double* a, int na, const double* b, int nb,
                                          double* out);
ETSDM_API etsdm_status etsdm_snr_ratio_curve(const etsdm_schedule* a, const etsdm_schedule* b,
                                             const double* grid, int n, double* out);

#ifdef __cplusplus
}
#endif

#endif /* ETSDM_H */

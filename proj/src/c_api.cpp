#include "etsdm.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "mixture.hpp"
#include "partition.hpp"
#include "predictor.hpp"
#include "sampler.hpp"
#include "schedule.hpp"
#include "metrics.hpp"
#include "train.hpp"

namespace {

thread_local std::string g_last_error;

etsdm_status set_error(etsdm_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// Maps C++ exceptions from the core onto status codes.
template <typename Fn>
etsdm_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        return set_error(ETSDM_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::domain_error& e) {
        return set_error(ETSDM_ERR_DOMAIN, e.what());
    } catch (const std::ios_base::failure& e) {
        return set_error(ETSDM_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return set_error(ETSDM_ERR_RUNTIME, "out of memory");
    } catch (const std::exception& e) {
        return set_error(ETSDM_ERR_RUNTIME, e.what());
    }
}

etsdm_status require(bool cond, const char* msg) {
    return cond ? ETSDM_OK : set_error(ETSDM_ERR_INVALID_ARGUMENT, msg);
}

etsdm::ScheduleSpec to_cpp(const etsdm_schedule_spec& s) {
    etsdm::ScheduleSpec spec;
    switch (s.kind) {
        case ETSDM_SCHEDULE_LINEAR: spec.kind = etsdm::ScheduleKind::Linear; break;
        case ETSDM_SCHEDULE_QUADRATIC: spec.kind = etsdm::ScheduleKind::Quadratic; break;
        case ETSDM_SCHEDULE_COSINE: spec.kind = etsdm::ScheduleKind::Cosine; break;
        case ETSDM_SCHEDULE_COSINE_SHIFT: spec.kind = etsdm::ScheduleKind::CosineShift; break;
        case ETSDM_SCHEDULE_ZERO_TERMINAL_SNR:
            spec.kind = etsdm::ScheduleKind::ZeroTerminalSnr;
            break;
        default: throw std::invalid_argument("unknown schedule kind code");
    }
    spec.beta_min_bar = s.beta_min_bar;
    spec.beta_max_bar = s.beta_max_bar;
    spec.cosine_offset = s.cosine_offset;
    spec.shift_factor = s.shift_factor;
    spec.modified_ns = s.modified_ns != 0;
    spec.T = s.T;
    return spec;
}

etsdm_schedule_spec to_c(const etsdm::ScheduleSpec& s) {
    etsdm_schedule_spec out;
    switch (s.kind) {
        case etsdm::ScheduleKind::Linear: out.kind = ETSDM_SCHEDULE_LINEAR; break;
        case etsdm::ScheduleKind::Quadratic: out.kind = ETSDM_SCHEDULE_QUADRATIC; break;
        case etsdm::ScheduleKind::Cosine: out.kind = ETSDM_SCHEDULE_COSINE; break;
        case etsdm::ScheduleKind::CosineShift: out.kind = ETSDM_SCHEDULE_COSINE_SHIFT; break;
        default: out.kind = ETSDM_SCHEDULE_ZERO_TERMINAL_SNR; break;
    }
    out.beta_min_bar = s.beta_min_bar;
    out.beta_max_bar = s.beta_max_bar;
    out.cosine_offset = s.cosine_offset;
    out.shift_factor = s.shift_factor;
    out.modified_ns = s.modified_ns ? 1 : 0;
    out.T = s.T;
    return out;
}

etsdm::TrainConfig to_cpp(const etsdm_train_config& c) {
    etsdm::TrainConfig cfg;
    cfg.objective =
        c.objective == ETSDM_OBJECTIVE_V ? etsdm::Objective::VPrediction
                                         : etsdm::Objective::EpsPrediction;
    switch (c.condition_map) {
        case ETSDM_COND_IDENTITY: cfg.condition_map = etsdm::ConditionMapKind::Identity; break;
        case ETSDM_COND_SHARED:
            cfg.condition_map = etsdm::ConditionMapKind::Shared;
            cfg.partition = etsdm::PartitionSchedule(c.t_tilde, c.n_sub);
            break;
        case ETSDM_COND_REMAP: cfg.condition_map = etsdm::ConditionMapKind::Remap; break;
        default: throw std::invalid_argument("unknown condition_map code");
    }
    cfg.remap_kind = c.remap_kind == ETSDM_REMAP_INVERSE_SIGMOID
                         ? etsdm::RemapKind::InverseSigmoid
                         : etsdm::RemapKind::InverseT;
    cfg.time_sampling = c.time_sampling == ETSDM_TIME_UNIFORM_LAMBDA
                            ? etsdm::TimeSampling::UniformLambda
                            : etsdm::TimeSampling::UniformT;
    cfg.lambda_cap = c.lambda_cap;
    cfg.reg_weight = c.reg_weight;
    cfg.reg_dt = c.reg_dt;
    cfg.reg_random_offset = c.reg_random_offset != 0;
    cfg.lr = c.lr;
    cfg.batch_size = c.batch_size;
    cfg.steps = c.steps;
    cfg.seed = c.seed;
    cfg.ema_decay = c.ema_decay;
    cfg.mlp.hidden.assign(static_cast<size_t>(c.hidden_depth), c.hidden_width);
    cfg.mlp.embedding_dim = c.embedding_dim;
    cfg.mlp.activation =
        c.activation == ETSDM_ACT_RELU ? etsdm::Activation::ReLU : etsdm::Activation::SiLU;
    return cfg;
}

}  // namespace

struct etsdm_schedule {
    std::shared_ptr<const etsdm::Schedule> p;
};
struct etsdm_mixture {
    std::shared_ptr<const etsdm::GaussianMixture> p;
};
struct etsdm_partition {
    etsdm::PartitionSchedule p;
};
struct etsdm_predictor {
    std::shared_ptr<const etsdm::Predictor> p;
};
struct etsdm_model {
    std::shared_ptr<const etsdm::Mlp> net;
    etsdm::TrainConfig cfg;
    std::shared_ptr<const etsdm::Checkpoint> ck;
};

extern "C" {

const char* etsdm_last_error(void) { return g_last_error.c_str(); }
const char* etsdm_version(void) { return "0.1.0"; }

/* ---------- schedules ---------- */

void etsdm_schedule_spec_default(etsdm_schedule_spec* spec) {
    if (spec) *spec = to_c(etsdm::ScheduleSpec{});
}

etsdm_status etsdm_schedule_kind_from_name(const char* name, int* out_kind) {
    if (auto st = require(name && out_kind, "null argument")) return st;
    return guarded([&] {
        *out_kind = to_c(etsdm::ScheduleSpec{etsdm::schedule_kind_from_string(name)}).kind;
        return ETSDM_OK;
    });
}

etsdm_status etsdm_schedule_create(const etsdm_schedule_spec* spec, etsdm_schedule** out) {
    if (auto st = require(spec && out, "null argument")) return st;
    return guarded([&] {
        auto sched = std::make_shared<const etsdm::Schedule>(to_cpp(*spec));
        *out = new etsdm_schedule{std::move(sched)};
        return ETSDM_OK;
    });
}

void etsdm_schedule_free(etsdm_schedule* s) { delete s; }

etsdm_status etsdm_schedule_alpha(const etsdm_schedule* s, double tau, double* out) {
    if (auto st = require(s && out, "null argument")) return st;
    return guarded([&] {
        *out = s->p->alpha(tau);
        return ETSDM_OK;
    });
}

etsdm_status etsdm_schedule_sigma(const etsdm_schedule* s, double tau, double* out) {
    if (auto st = require(s && out, "null argument")) return st;
    return guarded([&] {
        *out = s->p->sigma(tau);
        return ETSDM_OK;
    });
}

etsdm_status etsdm_schedule_dalpha(const etsdm_schedule* s, double tau, double* out) {
    if (auto st = require(s && out, "null argument")) return st;
    return guarded([&] {
        *out = s->p->dalpha_dt(tau);
        return ETSDM_OK;
    });
}

etsdm_status etsdm_schedule_dsigma(const etsdm_schedule* s, double tau, int* diverges,
                                   double* value) {
    if (auto st = require(s && diverges && value, "null argument")) return st;
    return guarded([&] {
        const auto r = s->p->dsigma_dt(tau);
        *diverges = r.diverges ? 1 : 0;
        *value = r.value;
        return ETSDM_OK;
    });
}

etsdm_status etsdm_schedule_snr(const etsdm_schedule* s, double tau, double* out) {
    if (auto st = require(s && out, "null argument")) return st;
    return guarded([&] {
        *out = s->p->snr(tau);
        return ETSDM_OK;
    });
}

etsdm_status etsdm_schedule_sde_coeffs(const etsdm_schedule* s, double tau, double* drift_coeff,
                                       double* diffusion_sq) {
    if (auto st = require(s && drift_coeff && diffusion_sq, "null argument")) return st;
    return guarded([&] {
        const auto c = s->p->sde_coeffs(tau);
        *drift_coeff = c.drift_coeff;
        *diffusion_sq = c.diffusion_sq;
        return ETSDM_OK;
    });
}

etsdm_status etsdm_schedule_singular_at_zero(const etsdm_schedule* s, int* out) {
    if (auto st = require(s && out, "null argument")) return st;
    *out = s->p->singular_at_zero() ? 1 : 0;
    return ETSDM_OK;
}

etsdm_status etsdm_schedule_resolved_spec(const etsdm_schedule* s, etsdm_schedule_spec* out) {
    if (auto st = require(s && out, "null argument")) return st;
    *out = to_c(s->p->spec());
    return ETSDM_OK;
}

/* ---------- data distributions ---------- */

etsdm_status etsdm_mixture_standard_normal(int dim, etsdm_mixture** out) {
    if (auto st = require(out != nullptr, "null argument")) return st;
    return guarded([&] {
        auto gm = std::make_shared<const etsdm::GaussianMixture>(
            etsdm::GaussianMixture::standard_normal(dim));
        *out = new etsdm_mixture{std::move(gm)};
        return ETSDM_OK;
    });
}

etsdm_status etsdm_mixture_ring(int k, double radius, double component_std, etsdm_mixture** out) {
    if (auto st = require(out != nullptr, "null argument")) return st;
    return guarded([&] {
        auto gm = std::make_shared<const etsdm::GaussianMixture>(
            etsdm::GaussianMixture::ring(k, radius, component_std));
        *out = new etsdm_mixture{std::move(gm)};
        return ETSDM_OK;
    });
}

void etsdm_mixture_free(etsdm_mixture* m) { delete m; }

etsdm_status etsdm_mixture_dim(const etsdm_mixture* m, int* out) {
    if (auto st = require(m && out, "null argument")) return st;
    *out = m->p->dim();
    return ETSDM_OK;
}

etsdm_status etsdm_mixture_sample(const etsdm_mixture* m, int n, uint64_t seed, double* out) {
    if (auto st = require(m && out && n > 0, "null argument or n < 1")) return st;
    return guarded([&] {
        etsdm::Rng rng(seed);
        const etsdm::Mat s = m->p->sample(n, rng);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m->p->dim(); ++j) out[i * m->p->dim() + j] = s(i, j);
        return ETSDM_OK;
    });
}

etsdm_status etsdm_mixture_log_density(const etsdm_mixture* m, const double* x, int d,
                                       double* out) {
    if (auto st = require(m && x && out, "null argument")) return st;
    if (auto st = require(d == m->p->dim(), "dimension mismatch")) return st;
    return guarded([&] {
        *out = m->p->log_density(Eigen::Map<const etsdm::Vec>(x, d));
        return ETSDM_OK;
    });
}

etsdm_status etsdm_mixture_score(const etsdm_mixture* m, const double* x, int d, double* out) {
    if (auto st = require(m && x && out, "null argument")) return st;
    if (auto st = require(d == m->p->dim(), "dimension mismatch")) return st;
    return guarded([&] {
        const etsdm::Vec s = m->p->score(Eigen::Map<const etsdm::Vec>(x, d));
        for (int j = 0; j < d; ++j) out[j] = s[j];
        return ETSDM_OK;
    });
}

etsdm_status etsdm_mixture_sample_marginal(const etsdm_mixture* m, const etsdm_schedule* s,
                                           double tau, int n, uint64_t seed, double* out) {
    if (auto st = require(m && s && out && n > 0, "null argument or n < 1")) return st;
    return guarded([&] {
        const auto marg = m->p->marginal_at(*s->p, tau);
        etsdm::Rng rng(seed);
        const etsdm::Mat samples = marg.sample(n, rng);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < marg.dim(); ++j) out[i * marg.dim() + j] = samples(i, j);
        return ETSDM_OK;
    });
}

/* ---------- partitions ---------- */

etsdm_status etsdm_partition_create(double t_tilde, int n, etsdm_partition** out) {
    if (auto st = require(out != nullptr, "null argument")) return st;
    return guarded([&] {
        *out = new etsdm_partition{etsdm::PartitionSchedule(t_tilde, n)};
        return ETSDM_OK;
    });
}

void etsdm_partition_free(etsdm_partition* p) { delete p; }

etsdm_status etsdm_partition_map(const etsdm_partition* p, double t, double* out) {
    if (auto st = require(p && out, "null argument")) return st;
    return guarded([&] {
        *out = p->p.map(t);
        return ETSDM_OK;
    });
}

etsdm_status etsdm_partition_boundaries(const etsdm_partition* p, double* out) {
    if (auto st = require(p && out, "null argument")) return st;
    const auto& b = p->p.boundaries();
    for (size_t i = 0; i < b.size(); ++i) out[i] = b[i];
    return ETSDM_OK;
}

etsdm_status etsdm_theorem2_bound(const etsdm_mixture* m, const etsdm_schedule* s,
                                  const etsdm_partition* p, const double* x, int d,
                                  int grid_per_subinterval, etsdm_theorem2_record* out) {
    if (auto st = require(m && s && p && x && out, "null argument")) return st;
    if (auto st = require(d == m->p->dim(), "dimension mismatch")) return st;
    return guarded([&] {
        const auto rec = etsdm::theorem2_bound(*m->p, *s->p, p->p,
                                               Eigen::Map<const etsdm::Vec>(x, d),
                                               grid_per_subinterval);
        out->k_x = rec.k_x;
        out->b_x = rec.b_x;
        out->delta_sigma_max = rec.delta_sigma_max;
        out->bound = rec.bound;
        out->max_actual_error = rec.max_actual_error;
        out->holds = rec.holds ? 1 : 0;
        return ETSDM_OK;
    });
}

etsdm_status etsdm_convergence_order(const etsdm_mixture* m, const etsdm_schedule* s,
                                     double t_tilde, const int* n_values, int count,
                                     const double* xs, int k, int probes_per_subinterval,
                                     double* slope, double* limit_ratio, double* delta_ts,
                                     double* max_errors) {
    if (auto st = require(m && s && n_values && xs && slope && limit_ratio, "null argument"))
        return st;
    if (auto st = require(count > 0 && k > 0, "need at least one n value and one x")) return st;
    return guarded([&] {
        const int d = m->p->dim();
        std::vector<etsdm::Vec> x_set;
        x_set.reserve(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i)
            x_set.push_back(Eigen::Map<const etsdm::Vec>(xs + i * d, d));
        const auto rep = etsdm::convergence_order(*m->p, *s->p, t_tilde,
                                                  std::vector<int>(n_values, n_values + count),
                                                  x_set, probes_per_subinterval);
        *slope = rep.slope;
        *limit_ratio = rep.limit_ratio;
        if (delta_ts)
            for (int i = 0; i < count; ++i) delta_ts[i] = rep.delta_ts[static_cast<size_t>(i)];
        if (max_errors)
            for (int i = 0; i < count; ++i)
                max_errors[i] = rep.max_errors[static_cast<size_t>(i)];
        return ETSDM_OK;
    });
}

/* ---------- predictors ---------- */

etsdm_status etsdm_predictor_analytic_eps(const etsdm_mixture* m, const etsdm_schedule* s,
                                          etsdm_predictor** out) {
    if (auto st = require(m && s && out, "null argument")) return st;
    return guarded([&] {
        *out = new etsdm_predictor{std::make_shared<etsdm::AnalyticEpsPredictor>(m->p, s->p)};
        return ETSDM_OK;
    });
}

etsdm_status etsdm_predictor_analytic_v(const etsdm_mixture* m, const etsdm_schedule* s,
                                        etsdm_predictor** out) {
    if (auto st = require(m && s && out, "null argument")) return st;
    return guarded([&] {
        *out = new etsdm_predictor{std::make_shared<etsdm::AnalyticVPredictor>(m->p, s->p)};
        return ETSDM_OK;
    });
}

etsdm_status etsdm_predictor_shared_analytic(const etsdm_mixture* m, const etsdm_schedule* s,
                                             const etsdm_partition* p, etsdm_predictor** out) {
    if (auto st = require(m && s && p && out, "null argument")) return st;
    return guarded([&] {
        *out = new etsdm_predictor{
            std::make_shared<etsdm::SharedAnalyticPredictor>(m->p, s->p, p->p)};
        return ETSDM_OK;
    });
}

void etsdm_predictor_free(etsdm_predictor* p) { delete p; }

etsdm_status etsdm_predictor_dim(const etsdm_predictor* p, int* out) {
    if (auto st = require(p && out, "null argument")) return st;
    *out = p->p->dim();
    return ETSDM_OK;
}

etsdm_status etsdm_predictor_eval(const etsdm_predictor* p, const double* x, int d, double t,
                                  double* out) {
    if (auto st = require(p && x && out, "null argument")) return st;
    if (auto st = require(d == p->p->dim(), "dimension mismatch")) return st;
    return guarded([&] {
        const etsdm::Vec y = p->p->eval(Eigen::Map<const etsdm::Vec>(x, d), t);
        for (int j = 0; j < d; ++j) out[j] = y[j];
        return ETSDM_OK;
    });
}

etsdm_status etsdm_lipschitz_scan(const etsdm_predictor* p, const etsdm_mixture* m,
                                  const etsdm_schedule* s, const double* t_grid, int n_grid,
                                  double dt, int n_mc, uint64_t seed, double* values,
                                  double* std_errors) {
    if (auto st = require(p && m && s && t_grid && values, "null argument")) return st;
    if (auto st = require(n_grid > 0, "empty grid")) return st;
    return guarded([&] {
        const auto curve = etsdm::singularity_scan(
            *p->p, *m->p, *s->p, std::vector<double>(t_grid, t_grid + n_grid), dt, n_mc, seed);
        for (int i = 0; i < n_grid; ++i) {
            values[i] = curve[static_cast<size_t>(i)].value;
            if (std_errors) std_errors[i] = curve[static_cast<size_t>(i)].std_error;
        }
        return ETSDM_OK;
    });
}

etsdm_status etsdm_perturbation_probe(const etsdm_predictor* p, const etsdm_schedule* s,
                                      double t_tilde, const double* scales, int n_scales,
                                      const etsdm_mixture* m, int n, uint64_t seed,
                                      double* values) {
    if (auto st = require(p && s && scales && m && values, "null argument")) return st;
    if (auto st = require(n_scales > 0 && n > 0, "need scales and n >= 1")) return st;
    return guarded([&] {
        const auto curve = etsdm::perturbation_probe(
            *p->p, *s->p, t_tilde, std::vector<double>(scales, scales + n_scales), *m->p, n, seed);
        for (int i = 0; i < n_scales; ++i) values[i] = curve[static_cast<size_t>(i)].value;
        return ETSDM_OK;
    });
}

/* ---------- samplers ---------- */

etsdm_status etsdm_sampler_kind_from_name(const char* name, int* out_kind) {
    if (auto st = require(name && out_kind, "null argument")) return st;
    return guarded([&] {
        switch (etsdm::sampler_kind_from_string(name)) {
            case etsdm::SamplerKind::Ancestral: *out_kind = ETSDM_SAMPLER_ANCESTRAL; break;
            case etsdm::SamplerKind::ReverseSdeEuler:
                *out_kind = ETSDM_SAMPLER_REVERSE_SDE_EULER;
                break;
            case etsdm::SamplerKind::Ddim: *out_kind = ETSDM_SAMPLER_DDIM; break;
            case etsdm::SamplerKind::DpmSolver1: *out_kind = ETSDM_SAMPLER_DPM_SOLVER_1; break;
            case etsdm::SamplerKind::DpmSolver2: *out_kind = ETSDM_SAMPLER_DPM_SOLVER_2; break;
            case etsdm::SamplerKind::DpmSolver3: *out_kind = ETSDM_SAMPLER_DPM_SOLVER_3; break;
            default: throw std::invalid_argument("sampler kind not exposed through the C API");
        }
        return ETSDM_OK;
    });
}

etsdm_status etsdm_sample(const etsdm_predictor* p, const etsdm_schedule* s,
                          const etsdm_sampler_config* cfg, int n_samples, double* out,
                          int* n_warnings) {
    if (auto st = require(p && s && cfg && out, "null argument")) return st;
    if (auto st = require(n_samples > 0, "n_samples < 1")) return st;
    return guarded([&] {
        etsdm::SamplerConfig c;
        switch (cfg->kind) {
            case ETSDM_SAMPLER_ANCESTRAL: c.kind = etsdm::SamplerKind::Ancestral; break;
            case ETSDM_SAMPLER_REVERSE_SDE_EULER:
                c.kind = etsdm::SamplerKind::ReverseSdeEuler;
                break;
            case ETSDM_SAMPLER_DDIM: c.kind = etsdm::SamplerKind::Ddim; break;
            case ETSDM_SAMPLER_DPM_SOLVER_1: c.kind = etsdm::SamplerKind::DpmSolver1; break;
            case ETSDM_SAMPLER_DPM_SOLVER_2: c.kind = etsdm::SamplerKind::DpmSolver2; break;
            case ETSDM_SAMPLER_DPM_SOLVER_3: c.kind = etsdm::SamplerKind::DpmSolver3; break;
            default: throw std::invalid_argument("unknown sampler kind code");
        }
        c.nfe = cfg->nfe;
        c.seed = cfg->seed;
        c.eta = cfg->eta;
        switch (cfg->time_grid) {
            case ETSDM_GRID_UNIFORM_T: c.time_grid = etsdm::TimeGridKind::UniformT; break;
            case ETSDM_GRID_LOG_SNR: c.time_grid = etsdm::TimeGridKind::LogSnr; break;
            case ETSDM_GRID_SIGMA_ANGLE: c.time_grid = etsdm::TimeGridKind::SigmaAngle; break;
            default: throw std::invalid_argument("unknown time grid code");
        }
        if (cfg->has_partition)
            c.partition = etsdm::PartitionSchedule(cfg->t_tilde, cfg->n_sub);
        const auto rec = etsdm::sample(*p->p, *s->p, c, n_samples, p->p->dim());
        const int d = p->p->dim();
        for (int i = 0; i < n_samples; ++i)
            for (int j = 0; j < d; ++j) out[i * d + j] = rec.samples(i, j);
        if (n_warnings) *n_warnings = static_cast<int>(rec.warnings.size());
        return ETSDM_OK;
    });
}

/* ---------- trainer ---------- */

void etsdm_train_config_default(etsdm_train_config* cfg) {
    if (!cfg) return;
    std::memset(cfg, 0, sizeof(*cfg));
    cfg->objective = ETSDM_OBJECTIVE_EPS;
    cfg->condition_map = ETSDM_COND_IDENTITY;
    cfg->t_tilde = 0.1;
    cfg->n_sub = 5;
    cfg->remap_kind = ETSDM_REMAP_INVERSE_T;
    cfg->time_sampling = ETSDM_TIME_UNIFORM_T;
    cfg->lambda_cap = 1000.0;
    cfg->reg_weight = 0.0;
    cfg->reg_dt = 1e-3;
    cfg->lr = 1e-3;
    cfg->batch_size = 256;
    cfg->steps = 20000;
    cfg->seed = 0;
    cfg->ema_decay = 0.999;
    cfg->hidden_width = 128;
    cfg->hidden_depth = 3;
    cfg->embedding_dim = 32;
    cfg->activation = ETSDM_ACT_SILU;
}

namespace {

etsdm_status train_impl(const etsdm_mixture* m, const etsdm_schedule* s,
                        const etsdm_train_config* cfg, const char* checkpoint_path,
                        etsdm_model** out, double* loss_curve) {
    if (auto st = require(m && s && cfg && out, "null argument")) return st;
    return guarded([&] {
        const etsdm::TrainConfig c = to_cpp(*cfg);
        std::unique_ptr<etsdm::Checkpoint> resume;
        if (checkpoint_path) {
            std::ifstream f(checkpoint_path, std::ios::binary);
            if (!f) throw std::ios_base::failure(std::string("cannot open checkpoint ") +
                                                 checkpoint_path);
            resume = std::make_unique<etsdm::Checkpoint>(etsdm::load_checkpoint(f));
        }
        auto res = etsdm::train_resumable(*m->p, *s->p, c, resume.get(), true);
        if (loss_curve) {
            const size_t offset = static_cast<size_t>(cfg->steps) - res.loss_curve.size();
            for (size_t i = 0; i < res.loss_curve.size(); ++i)
                loss_curve[offset + i] = res.loss_curve[i];
        }
        auto* model = new etsdm_model;
        model->net = std::shared_ptr<const etsdm::Mlp>(std::move(res.ema));
        model->cfg = c;
        model->ck = std::shared_ptr<const etsdm::Checkpoint>(std::move(res.checkpoint));
        *out = model;
        return ETSDM_OK;
    });
}

}  // namespace

etsdm_status etsdm_train(const etsdm_mixture* m, const etsdm_schedule* s,
                         const etsdm_train_config* cfg, etsdm_model** out, double* loss_curve) {
    return train_impl(m, s, cfg, nullptr, out, loss_curve);
}

etsdm_status etsdm_train_resume(const etsdm_mixture* m, const etsdm_schedule* s,
                                const etsdm_train_config* cfg, const char* checkpoint_path,
                                etsdm_model** out, double* loss_curve) {
    if (auto st = require(checkpoint_path != nullptr, "null checkpoint path")) return st;
    return train_impl(m, s, cfg, checkpoint_path, out, loss_curve);
}

void etsdm_model_free(etsdm_model* model) { delete model; }

etsdm_status etsdm_model_save(const etsdm_model* model, const char* path) {
    if (auto st = require(model && path, "null argument")) return st;
    return guarded([&] {
        if (!model->ck) throw std::runtime_error("model carries no checkpoint state");
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::ios_base::failure(std::string("cannot open ") + path);
        etsdm::save_checkpoint(f, *model->ck);
        if (!f) throw std::ios_base::failure(std::string("write failed: ") + path);
        return ETSDM_OK;
    });
}

etsdm_status etsdm_model_predictor(const etsdm_model* model, etsdm_predictor** out) {
    if (auto st = require(model && out, "null argument")) return st;
    return guarded([&] {
        *out = new etsdm_predictor{
            std::make_shared<etsdm::TrainedPredictor>(model->net, model->cfg)};
        return ETSDM_OK;
    });
}

etsdm_status etsdm_sample_training_times(const etsdm_train_config* cfg, int n, uint64_t seed,
                                         int T, double* out) {
    if (auto st = require(cfg && out && n > 0, "null argument or n < 1")) return st;
    return guarded([&] {
        const auto ts = etsdm::sample_training_times(to_cpp(*cfg), n, seed, T);
        for (int i = 0; i < n; ++i) out[i] = ts[static_cast<size_t>(i)];
        return ETSDM_OK;
    });
}

/* ---------- metrics ---------- */

etsdm_status etsdm_sliced_wasserstein(const double* a, int na, const double* b, int nb, int d,
                                      int n_projections, uint64_t seed, double* value,
                                      double* std_error) {
    if (auto st = require(a && b && value, "null argument")) return st;
    if (auto st = require(na > 0 && nb > 0 && d > 0, "empty sample set")) return st;
    return guarded([&] {
        const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>
            A(a, na, d), B(b, nb, d);
        const auto rep = etsdm::sliced_wasserstein(A, B, n_projections, seed);
        *value = rep.value;
        if (std_error) *std_error = rep.std_error;
        return ETSDM_OK;
    });
}

etsdm_status etsdm_wasserstein_1d(const double* a, int na, const double* b, int nb, double* out) {
    if (auto st = require(a && b && out && na > 0 && nb > 0, "null or empty input")) return st;
    return guarded([&] {
        *out = etsdm::wasserstein_1d(std::vector<double>(a, a + na),
                                     std::vector<double>(b, b + nb));
        return ETSDM_OK;
    });
}

etsdm_status etsdm_ks_statistic(const double* a, int na, const double* b, int nb, double* out) {
    if (auto st = require(a && b && out && na > 0 && nb > 0, "null or empty input")) return st;
    return guarded([&] {
        *out = etsdm::ks_statistic(std::vector<double>(a, a + na),
                                   std::vector<double>(b, b + nb));
        return ETSDM_OK;
    });
}

etsdm_status etsdm_snr_ratio_curve(const etsdm_schedule* a, const etsdm_schedule* b,
                                   const double* grid, int n, double* out) {
    if (auto st = require(a && b && grid && out && n > 0, "null or empty input")) return st;
    return guarded([&] {
        const auto curve =
            etsdm::snr_ratio_curve(*a->p, *b->p, std::vector<double>(grid, grid + n));
        for (int i = 0; i < n; ++i) out[i] = curve[static_cast<size_t>(i)].ratio;
        return ETSDM_OK;
    });
}

}  // extern "C"

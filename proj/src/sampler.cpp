#include "sampler.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace etsdm {

namespace {

double cond_of(const PartitionSchedule* part, double t) {
    return part ? part->map(t) : t;
}

void check_finite(const Mat& x, const char* where, int step) {
    if (!x.allFinite())
        throw std::runtime_error(std::string("sampler: non-finite state in ") + where +
                                 " at step " + std::to_string(step));
}

Mat draw_normal(std::vector<Rng>& lanes, int d) {
    Mat z(static_cast<Eigen::Index>(lanes.size()), d);
    for (size_t i = 0; i < lanes.size(); ++i)
        for (int j = 0; j < d; ++j) z(static_cast<Eigen::Index>(i), j) = lanes[i].normal();
    return z;
}

}  // namespace

SamplerKind sampler_kind_from_string(const std::string& name) {
    if (name == "ancestral") return SamplerKind::Ancestral;
    if (name == "reverse_sde_euler") return SamplerKind::ReverseSdeEuler;
    if (name == "ddim") return SamplerKind::Ddim;
    if (name == "dpm_solver_1") return SamplerKind::DpmSolver1;
    if (name == "dpm_solver_2") return SamplerKind::DpmSolver2;
    if (name == "dpm_solver_3") return SamplerKind::DpmSolver3;
    if (name == "forward_euler") return SamplerKind::ForwardEuler;
    throw std::invalid_argument("unknown sampler kind: " + name);
}

TimeGridKind time_grid_from_string(const std::string& name) {
    if (name == "uniform_t") return TimeGridKind::UniformT;
    if (name == "log_snr") return TimeGridKind::LogSnr;
    if (name == "sigma_angle") return TimeGridKind::SigmaAngle;
    throw std::invalid_argument("unknown time grid kind: " + name);
}

std::string to_string(TimeGridKind kind) {
    switch (kind) {
        case TimeGridKind::UniformT: return "uniform_t";
        case TimeGridKind::LogSnr: return "log_snr";
        case TimeGridKind::SigmaAngle: return "sigma_angle";
    }
    return "?";
}

std::string to_string(SamplerKind kind) {
    switch (kind) {
        case SamplerKind::Ancestral: return "ancestral";
        case SamplerKind::ReverseSdeEuler: return "reverse_sde_euler";
        case SamplerKind::Ddim: return "ddim";
        case SamplerKind::DpmSolver1: return "dpm_solver_1";
        case SamplerKind::DpmSolver2: return "dpm_solver_2";
        case SamplerKind::DpmSolver3: return "dpm_solver_3";
        case SamplerKind::ForwardEuler: return "forward_euler";
    }
    return "?";
}

Mat ancestral_step(const Predictor& pred, const Schedule& sched, const Mat& x_t, int t_index,
                   int T_steps, const PartitionSchedule* part, const Mat& z) {
    if (t_index < 1 || t_index > T_steps)
        throw std::invalid_argument("ancestral_step: index out of range");
    const double tau = static_cast<double>(t_index) / T_steps;
    const double tau_prev = static_cast<double>(t_index - 1) / T_steps;
    const double a_t = sched.alpha(tau);
    const double a_prev = sched.alpha(tau_prev);
    const double s_t = sched.sigma(tau);
    if (!(s_t > 0.0)) throw std::domain_error("ancestral_step: sigma must be positive");
    const double ratio = a_t / a_prev;
    const double beta = 1.0 - ratio * ratio;
    const Mat eps = pred.eval_batch(x_t, cond_of(part, tau));
    return (x_t - (beta / s_t) * eps) / ratio + std::sqrt(std::max(0.0, beta)) * z;
}

Mat reverse_sde_euler_step(const Predictor& pred, const Schedule& sched, const Mat& x, double tau,
                           double dtau, const PartitionSchedule* part, const Mat& noise) {
    if (!(dtau > 0.0)) throw std::invalid_argument("reverse_sde_euler_step: dtau must be > 0");
    const SdeCoeffs c = sched.sde_coeffs(tau);
    const double s = sched.sigma(tau);
    if (!(s > 0.0)) throw std::domain_error("reverse_sde_euler_step: sigma must be positive");
    const Mat eps = pred.eval_batch(x, cond_of(part, tau));
    const Mat score = -eps / s;
    return x - (c.drift_coeff * x - c.diffusion_sq * score) * dtau +
           std::sqrt(c.diffusion_sq * dtau) * noise;
}

Mat forward_euler_step(const Schedule& sched, const Mat& x, double tau, double dtau,
                       const Mat& noise) {
    const SdeCoeffs c = sched.sde_coeffs(tau);
    return x + c.drift_coeff * x * dtau + std::sqrt(c.diffusion_sq * dtau) * noise;
}

Mat ddim_step(const Predictor& pred, const Schedule& sched, const Mat& x, double t_from,
              double t_to, double eta, const PartitionSchedule* part, const Mat* noise) {
    if (!(t_from > t_to && t_to >= 0.0))
        throw std::invalid_argument("ddim_step: need t_from > t_to >= 0");
    const double a_f = sched.alpha(t_from);
    const double s_f = sched.sigma(t_from);
    const double a_to = sched.alpha(t_to);
    const double s_to = sched.sigma(t_to);
    const Mat eps = pred.eval_batch(x, cond_of(part, t_from));
    const Mat x0 = (x - s_f * eps) / a_f;
    double sig_noise = 0.0;
    if (eta > 0.0) {
        const double r = a_f / a_to;
        sig_noise = eta * (s_to / s_f) * std::sqrt(std::max(0.0, 1.0 - r * r));
    }
    const double dir = std::sqrt(std::max(0.0, s_to * s_to - sig_noise * sig_noise));
    Mat out = a_to * x0 + dir * eps;
    if (sig_noise > 0.0) {
        if (!noise) throw std::invalid_argument("ddim_step: eta > 0 needs a noise draw");
        out += sig_noise * (*noise);
    }
    return out;
}

Mat dpm_solver_step(int order, const Predictor& pred, const Schedule& sched, const Mat& x,
                    double t_from, double t_to, const PartitionSchedule* part) {
    if (order < 1 || order > 3) throw std::invalid_argument("dpm_solver_step: order must be 1..3");
    if (!(t_from > t_to && t_to > 0.0))
        throw std::invalid_argument("dpm_solver_step: t_to below the terminal floor");
    const double lam_f = sched.log_snr_half(t_from);
    const double lam_to = sched.log_snr_half(t_to);
    const double h = lam_to - lam_f;
    const double a_f = sched.alpha(t_from);
    const double a_to = sched.alpha(t_to);
    const double s_to = sched.sigma(t_to);

    const Mat eps0 = pred.eval_batch(x, cond_of(part, t_from));
    if (order == 1) return (a_to / a_f) * x - s_to * std::expm1(h) * eps0;

    if (order == 2) {
        // Midpoint in lambda.
        const double t_mid = sched.tau_from_log_snr_half(lam_f + 0.5 * h);
        const double a_m = sched.alpha(t_mid);
        const double s_m = sched.sigma(t_mid);
        const Mat u = (a_m / a_f) * x - s_m * std::expm1(0.5 * h) * eps0;
        const Mat eps_m = pred.eval_batch(u, cond_of(part, t_mid));
        return (a_to / a_f) * x - s_to * std::expm1(h) * eps_m;
    }

    // Order 3, nodes at r1 = 1/3 and r2 = 2/3 of the lambda step.
    const double r1 = 1.0 / 3.0;
    const double r2 = 2.0 / 3.0;
    const double t1 = sched.tau_from_log_snr_half(lam_f + r1 * h);
    const double t2 = sched.tau_from_log_snr_half(lam_f + r2 * h);
    const double a1 = sched.alpha(t1), s1 = sched.sigma(t1);
    const double a2 = sched.alpha(t2), s2 = sched.sigma(t2);

    const Mat u1 = (a1 / a_f) * x - s1 * std::expm1(r1 * h) * eps0;
    const Mat d1 = pred.eval_batch(u1, cond_of(part, t1)) - eps0;
    const double phi2 = std::expm1(r2 * h) / (r2 * h) - 1.0;
    const Mat u2 =
        (a2 / a_f) * x - s2 * std::expm1(r2 * h) * eps0 - s2 * (r2 / r1) * phi2 * d1;
    const Mat d2 = pred.eval_batch(u2, cond_of(part, t2)) - eps0;
    const double phi = std::expm1(h) / h - 1.0;
    return (a_to / a_f) * x - s_to * std::expm1(h) * eps0 - (s_to / r2) * phi * d2;
}

Mat simulate_forward(const GaussianMixture& data, const Schedule& sched, double tau_end, int steps,
                     int n_samples, uint64_t seed) {
    if (steps < 1) throw std::invalid_argument("simulate_forward: steps must be >= 1");
    std::vector<Rng> lanes;
    lanes.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) lanes.emplace_back(seed, static_cast<uint64_t>(i));
    Mat x(n_samples, data.dim());
    for (int i = 0; i < n_samples; ++i) x.row(i) = data.sample(lanes[i]).transpose();
    const double dtau = tau_end / steps;
    for (int k = 0; k < steps; ++k) {
        const Mat z = draw_normal(lanes, data.dim());
        x = forward_euler_step(sched, x, k * dtau, dtau, z);
        check_finite(x, "forward_euler", k);
    }
    return x;
}

TrajectoryRecord sample(const Predictor& pred, const Schedule& sched, const SamplerConfig& cfg,
                        int n_samples, int d, const GaussianMixture* data) {
    if (cfg.nfe < 1) throw std::invalid_argument("sample: nfe must be positive");
    const auto t_start = std::chrono::steady_clock::now();

    TrajectoryRecord rec;
    rec.config = cfg;
    if (sched.alpha(1.0) > 0.05)
        rec.warnings.push_back("alpha(1) is appreciably positive; the N(0, I) prior mismatches "
                               "the terminal marginal");

    std::vector<Rng> lanes;
    lanes.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) lanes.emplace_back(cfg.seed, static_cast<uint64_t>(i));
    const PartitionSchedule* part = cfg.partition ? &*cfg.partition : nullptr;
    const double tau_floor = 1.0 / sched.spec().T;

    Mat x;
    if (cfg.kind == SamplerKind::ForwardEuler) {
        if (!data) throw std::invalid_argument("sample: forward_euler needs a data distribution");
        x = simulate_forward(*data, sched, 1.0, cfg.nfe, n_samples, cfg.seed);
        for (int k = 0; k <= cfg.nfe; ++k) rec.times.push_back(static_cast<double>(k) / cfg.nfe);
    } else {
        x = draw_normal(lanes, d);
        switch (cfg.kind) {
            case SamplerKind::Ancestral: {
                const int T = cfg.nfe;
                for (int t = T; t >= 1; --t) {
                    Mat z = (t > 1) ? draw_normal(lanes, d) : Mat::Zero(n_samples, d);
                    x = ancestral_step(pred, sched, x, t, T, part, z);
                    check_finite(x, "ancestral", t);
                    rec.times.push_back(static_cast<double>(t - 1) / T);
                }
                break;
            }
            case SamplerKind::ReverseSdeEuler: {
                const int steps = cfg.nfe;
                const double dtau = (1.0 - tau_floor) / steps;
                for (int k = 0; k < steps; ++k) {
                    const double tau = 1.0 - k * dtau;
                    const Mat z = draw_normal(lanes, d);
                    x = reverse_sde_euler_step(pred, sched, x, tau, dtau, part, z);
                    check_finite(x, "reverse_sde_euler", k);
                    rec.times.push_back(tau - dtau);
                }
                x = (x - sched.sigma(tau_floor) *
                             pred.eval_batch(x, cond_of(part, tau_floor))) /
                    sched.alpha(tau_floor);
                rec.times.push_back(0.0);
                break;
            }
            case SamplerKind::Ddim:
            case SamplerKind::DpmSolver1:
            case SamplerKind::DpmSolver2:
            case SamplerKind::DpmSolver3: {
                int order = 1;
                if (cfg.kind == SamplerKind::DpmSolver2) order = 2;
                if (cfg.kind == SamplerKind::DpmSolver3) order = 3;
                const int steps = std::max(1, cfg.nfe / order);
                std::vector<double> grid(static_cast<size_t>(steps) + 1);
                switch (cfg.time_grid) {
                    case TimeGridKind::UniformT:
                        for (int k = 0; k <= steps; ++k)
                            grid[static_cast<size_t>(k)] = 1.0 - (1.0 - tau_floor) * k / steps;
                        break;
                    case TimeGridKind::LogSnr: {
                        const double lam_hi = sched.log_snr_half(1.0);
                        const double lam_lo = sched.log_snr_half(tau_floor);
                        for (int k = 0; k <= steps; ++k)
                            grid[static_cast<size_t>(k)] = sched.tau_from_log_snr_half(
                                lam_hi + (lam_lo - lam_hi) * k / steps);
                        break;
                    }
                    case TimeGridKind::SigmaAngle: {
                        // theta = arcsin(sigma); lambda = log(cot(theta)).
                        const double th_hi = std::asin(sched.sigma(1.0));
                        const double th_lo = std::asin(sched.sigma(tau_floor));
                        for (int k = 0; k <= steps; ++k) {
                            const double th = th_hi + (th_lo - th_hi) * k / steps;
                            grid[static_cast<size_t>(k)] =
                                sched.tau_from_log_snr_half(std::log(1.0 / std::tan(th)));
                        }
                        break;
                    }
                }
                grid.front() = 1.0;
                grid.back() = tau_floor;
                for (int k = 0; k < steps; ++k) {
                    const double t_from = grid[static_cast<size_t>(k)];
                    const double t_to = grid[static_cast<size_t>(k) + 1];
                    if (cfg.kind == SamplerKind::Ddim) {
                        if (cfg.eta > 0.0) {
                            const Mat z = draw_normal(lanes, d);
                            x = ddim_step(pred, sched, x, t_from, t_to, cfg.eta, part, &z);
                        } else {
                            x = ddim_step(pred, sched, x, t_from, t_to, 0.0, part, nullptr);
                        }
                    } else {
                        x = dpm_solver_step(order, pred, sched, x, t_from, t_to, part);
                    }
                    check_finite(x, "solver", k);
                    rec.times.push_back(t_to);
                }
                x = (x - sched.sigma(tau_floor) *
                             pred.eval_batch(x, cond_of(part, tau_floor))) /
                    sched.alpha(tau_floor);
                rec.times.push_back(0.0);
                break;
            }
            default:
                throw std::invalid_argument("sample: unsupported sampler kind");
        }
    }
    check_finite(x, "final", -1);
    rec.samples = std::move(x);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rec;
}

}  // namespace etsdm

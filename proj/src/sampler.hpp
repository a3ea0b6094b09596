#ifndef ETSDM_SAMPLER_HPP
#define ETSDM_SAMPLER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixture.hpp"
#include "partition.hpp"
#include "predictor.hpp"
#include "schedule.hpp"

namespace etsdm {

enum class SamplerKind {
    Ancestral,
    ReverseSdeEuler,
    Ddim,
    DpmSolver1,
    DpmSolver2,
    DpmSolver3,
    ForwardEuler,
};

SamplerKind sampler_kind_from_string(const std::string& name);
std::string to_string(SamplerKind kind);

// Step spacing for the deterministic solvers (DDIM / DPM-Solver).
//  - UniformT: uniform in t (default). Concentrates almost the entire
//    log-SNR span into the final step, which hurts the exponential
//    integrators badly at low NFE.
//  - LogSnr: uniform in lambda = log(alpha/sigma); the natural grid for the
//    exponential integrators.
//  - SigmaAngle: uniform in theta = arcsin(sigma). Minimizes the accumulated
//    variance-shrinkage of low-order solvers (per-step shrink factor is
//    cos(delta theta)).
enum class TimeGridKind { UniformT, LogSnr, SigmaAngle };

TimeGridKind time_grid_from_string(const std::string& name);
std::string to_string(TimeGridKind kind);

struct SamplerConfig {
    SamplerKind kind = SamplerKind::Ancestral;
    int nfe = 1000;
    std::optional<PartitionSchedule> partition;
    uint64_t seed = 0;
    double eta = 0.0;  // DDIM stochasticity; 0 = deterministic
    TimeGridKind time_grid = TimeGridKind::UniformT;
};

struct TrajectoryRecord {
    Mat samples;                 // n x d final samples
    std::vector<double> times;   // time grid walked by the sampler
    SamplerConfig config;
    double wall_seconds = 0.0;
    std::vector<std::string> warnings;
};

// Full reverse-time generation from x_T ~ N(0, I). Deterministic in
// (config, seed): chain i draws from its own seed-derived stream.
// `data` is only consulted for ForwardEuler (initial x0 draws).
TrajectoryRecord sample(const Predictor& pred, const Schedule& sched, const SamplerConfig& cfg,
                        int n_samples, int d, const GaussianMixture* data = nullptr);

// Single steps, exposed for direct verification. Batch variants operate on
// n x d row-major sample matrices.

// One draw of the discrete reverse kernel from time index t (1..T_steps) on
// the uniform grid tau = t / T_steps; z must be zero at t = 1.
Mat ancestral_step(const Predictor& pred, const Schedule& sched, const Mat& x_t, int t_index,
                   int T_steps, const PartitionSchedule* part, const Mat& z);

// Euler-Maruyama step of the reverse SDE from tau to tau - dtau.
Mat reverse_sde_euler_step(const Predictor& pred, const Schedule& sched, const Mat& x, double tau,
                           double dtau, const PartitionSchedule* part, const Mat& noise);

// Euler-Maruyama step of the forward SDE from tau to tau + dtau.
Mat forward_euler_step(const Schedule& sched, const Mat& x, double tau, double dtau,
                       const Mat& noise);

Mat ddim_step(const Predictor& pred, const Schedule& sched, const Mat& x, double t_from,
              double t_to, double eta, const PartitionSchedule* part, const Mat* noise);

// Exponential-integrator update in half-log-SNR time; orders 1-3. Order 1
// coincides with DDIM eta=0.
Mat dpm_solver_step(int order, const Predictor& pred, const Schedule& sched, const Mat& x,
                    double t_from, double t_to, const PartitionSchedule* part);

// Forward simulation of data draws up to tau_end; marginal-validation helper.
Mat simulate_forward(const GaussianMixture& data, const Schedule& sched, double tau_end, int steps,
                     int n_samples, uint64_t seed);

}  // namespace etsdm

#endif

#ifndef ETSDM_PARTITION_HPP
#define ETSDM_PARTITION_HPP

#include <vector>

#include "mixture.hpp"
#include "schedule.hpp"

namespace etsdm {

// Uniform partition of the shared interval [0, t_tilde) into n sub-intervals.
// Below t_tilde the condition fed to a predictor is the left endpoint of the
// containing sub-interval; above it the identity.
class PartitionSchedule {
  public:
    PartitionSchedule(double t_tilde, int n);

    double t_tilde() const { return t_tilde_; }
    int n() const { return n_; }
    double delta_t() const { return t_tilde_ / n_; }
    const std::vector<double>& boundaries() const { return boundaries_; }

    // f_T: piecewise-constant left endpoint for t < t_tilde, identity above.
    double map(double t) const;
    // Index i (1-based) of the sub-interval [t_{i-1}, t_i) containing t < t_tilde.
    int interval_index(double t) const;

  private:
    double t_tilde_;
    int n_;
    std::vector<double> boundaries_;
};

// E[eps(x, tau)] over the sub-interval containing t (Gauss-Legendre order 32;
// the first sub-interval, where the integrand steepens toward 0, is handled
// by adaptive subdivision). Delegates to eps_optimal for t >= t_tilde.
Vec shared_optimal_eps(const GaussianMixture& gm, const Schedule& sched,
                       const PartitionSchedule& part, const Vec& x, double t);

struct Theorem2Record {
    double k_x = 0.0;             // grid sup of ||h(t) - h(tau)|| / |t - tau|
    double b_x = 0.0;             // grid sup of ||h(t)||
    double delta_sigma_max = 0.0;
    double bound = 0.0;
    double max_actual_error = 0.0;
    bool holds = false;
    int grid_per_subinterval = 0;
};

Theorem2Record theorem2_bound(const GaussianMixture& gm, const Schedule& sched,
                              const PartitionSchedule& part, const Vec& x,
                              int grid_per_subinterval = 2048);

struct ConvergenceReport {
    double slope = 0.0;            // log-log regression slope of max error vs delta_t
    double residual_rms = 0.0;
    std::vector<double> delta_ts;
    std::vector<double> max_errors;
    double limit_ratio = 0.0;      // delta_sigma_max / sqrt(delta_t) at the largest n
};

ConvergenceReport convergence_order(const GaussianMixture& gm, const Schedule& sched,
                                    double t_tilde, const std::vector<int>& n_values,
                                    const std::vector<Vec>& x_set,
                                    int probes_per_subinterval = 5);

}  // namespace etsdm

#endif

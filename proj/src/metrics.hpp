#ifndef ETSDM_METRICS_HPP
#define ETSDM_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mixture.hpp"
#include "predictor.hpp"
#include "schedule.hpp"

namespace etsdm {

struct MetricReport {
    std::string name;
    double value = 0.0;
    double std_error = 0.0;
    int n_a = 0;
    int n_b = 0;
    uint64_t config_hash = 0;
};

// Mean over random unit directions of the 1-D 2-Wasserstein distance between
// the projected empirical distributions. Deterministic given the seed.
MetricReport sliced_wasserstein(const Mat& a, const Mat& b, int n_projections, uint64_t seed);

// Exact 1-D 2-Wasserstein between two sample sets (sorted-quantile form,
// linear interpolation when sizes differ).
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

struct RatioPoint {
    double tau = 0.0;
    double ratio = 0.0;
};

// Pointwise snr(a)/snr(b) over a grid.
std::vector<RatioPoint> snr_ratio_curve(const Schedule& a, const Schedule& b,
                                        const std::vector<double>& grid);

struct LipschitzSummary {
    double max_k = 0.0;
    double argmax_t = 0.0;
    double auc = 0.0;  // trapezoidal area under the curve
};

// Summary statistics of a singularity-scan curve (over its full t range).
LipschitzSummary summarize_lipschitz_curve(const std::vector<CurvePoint>& curve);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace etsdm

#endif

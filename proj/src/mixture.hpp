#ifndef ETSDM_MIXTURE_HPP
#define ETSDM_MIXTURE_HPP

#include <Eigen/Dense>
#include <vector>

#include "rng.hpp"
#include "schedule.hpp"

namespace etsdm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Gaussian mixture with SPD covariances; the analytic data distribution q0.
class GaussianMixture {
  public:
    GaussianMixture(std::vector<double> weights, std::vector<Vec> means,
                    std::vector<Mat> covariances);

    static GaussianMixture standard_normal(int dim);
    // k components evenly spaced on a circle of given radius, isotropic
    // per-component std. The 2-D desk-scale benchmark.
    static GaussianMixture ring(int k, double radius, double component_std);

    int dim() const { return dim_; }
    int components() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<Vec>& means() const { return means_; }
    const std::vector<Mat>& covariances() const { return covs_; }

    double log_density(const Vec& x) const;
    // Exact score, responsibilities in log domain.
    Vec score(const Vec& x) const;

    // Exact ancestral draw: component by weight, then Gaussian.
    Vec sample(Rng& rng) const;
    Mat sample(int n, Rng& rng) const;  // n x d

    // Perturbed marginal q_tau: N(alpha mu_i, alpha^2 Sigma_i + sigma^2 I).
    GaussianMixture marginal_at(const Schedule& sched, double tau) const;

  private:
    struct Component {
        Eigen::LLT<Mat> llt;
        double log_norm;  // -d/2 log(2pi) - 1/2 log|Sigma|
    };

    int dim_;
    std::vector<double> weights_;
    std::vector<double> log_weights_;
    std::vector<Vec> means_;
    std::vector<Mat> covs_;
    std::vector<Component> comps_;
};

// Optimal predictors for analytic data.
Vec eps_optimal(const GaussianMixture& gm, const Schedule& sched, double tau, const Vec& x);
Vec v_optimal(const GaussianMixture& gm, const Schedule& sched, double tau, const Vec& x);

}  // namespace etsdm

#endif

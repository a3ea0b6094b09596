#include "mixture.hpp"

#include <cmath>
#include <stdexcept>

namespace etsdm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vec> means,
                                 std::vector<Mat> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covariances)) {
    if (weights_.empty() || weights_.size() != means_.size() || weights_.size() != covs_.size())
        throw std::invalid_argument("mixture: inconsistent component counts");
    dim_ = static_cast<int>(means_[0].size());
    double wsum = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0)) throw std::invalid_argument("mixture: weights must be positive");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("mixture: weights must sum to 1");
    comps_.reserve(weights_.size());
    log_weights_.reserve(weights_.size());
    for (size_t i = 0; i < weights_.size(); ++i) {
        if (means_[i].size() != dim_ || covs_[i].rows() != dim_ || covs_[i].cols() != dim_)
            throw std::invalid_argument("mixture: dimension mismatch");
        Component c;
        c.llt.compute(covs_[i]);
        if (c.llt.info() != Eigen::Success)
            throw std::invalid_argument("mixture: covariance is not SPD");
        double log_det = 0.0;
        for (int j = 0; j < dim_; ++j) log_det += 2.0 * std::log(c.llt.matrixL()(j, j));
        c.log_norm = -0.5 * (dim_ * kLog2Pi + log_det);
        comps_.push_back(std::move(c));
        log_weights_.push_back(std::log(weights_[i]));
    }
}

GaussianMixture GaussianMixture::standard_normal(int dim) {
    return GaussianMixture({1.0}, {Vec::Zero(dim)}, {Mat::Identity(dim, dim)});
}

GaussianMixture GaussianMixture::ring(int k, double radius, double component_std) {
    std::vector<double> w(static_cast<size_t>(k), 1.0 / k);
    std::vector<Vec> mu;
    std::vector<Mat> cov;
    const double var = component_std * component_std;
    for (int i = 0; i < k; ++i) {
        const double ang = 2.0 * 3.14159265358979323846 * i / k;
        Vec m(2);
        m << radius * std::cos(ang), radius * std::sin(ang);
        mu.push_back(m);
        cov.push_back(var * Mat::Identity(2, 2));
    }
    return GaussianMixture(std::move(w), std::move(mu), std::move(cov));
}

double GaussianMixture::log_density(const Vec& x) const {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> lp(comps_.size());
    for (size_t i = 0; i < comps_.size(); ++i) {
        const Vec r = x - means_[i];
        const double quad = r.dot(comps_[i].llt.solve(r));
        lp[i] = log_weights_[i] + comps_[i].log_norm - 0.5 * quad;
        best = std::max(best, lp[i]);
    }
    double acc = 0.0;
    for (double v : lp) acc += std::exp(v - best);
    return best + std::log(acc);
}

Vec GaussianMixture::score(const Vec& x) const {
    if (x.size() != dim_) throw std::invalid_argument("mixture: x dimension mismatch");
    std::vector<double> lp(comps_.size());
    std::vector<Vec> grads(comps_.size());
    double best = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < comps_.size(); ++i) {
        const Vec r = x - means_[i];
        const Vec solved = comps_[i].llt.solve(r);
        lp[i] = log_weights_[i] + comps_[i].log_norm - 0.5 * r.dot(solved);
        grads[i] = -solved;
        best = std::max(best, lp[i]);
    }
    double denom = 0.0;
    Vec acc = Vec::Zero(dim_);
    for (size_t i = 0; i < comps_.size(); ++i) {
        const double p = std::exp(lp[i] - best);
        denom += p;
        acc += p * grads[i];
    }
    return acc / denom;
}

Vec GaussianMixture::sample(Rng& rng) const {
    // Component by cumulative weight.
    double u = rng.uniform();
    size_t pick = comps_.size() - 1;
    double cum = 0.0;
    for (size_t i = 0; i < weights_.size(); ++i) {
        cum += weights_[i];
        if (u <= cum) {
            pick = i;
            break;
        }
    }
    Vec z(dim_);
    for (int j = 0; j < dim_; ++j) z[j] = rng.normal();
    return means_[pick] + comps_[pick].llt.matrixL() * z;
}

Mat GaussianMixture::sample(int n, Rng& rng) const {
    Mat out(n, dim_);
    for (int i = 0; i < n; ++i) out.row(i) = sample(rng).transpose();
    return out;
}

GaussianMixture GaussianMixture::marginal_at(const Schedule& sched, double tau) const {
    const double a = sched.alpha(tau);
    const double s = sched.sigma(tau);
    std::vector<Vec> mu;
    std::vector<Mat> cov;
    mu.reserve(means_.size());
    cov.reserve(covs_.size());
    for (size_t i = 0; i < means_.size(); ++i) {
        mu.push_back(a * means_[i]);
        cov.push_back(a * a * covs_[i] + s * s * Mat::Identity(dim_, dim_));
    }
    return GaussianMixture(weights_, std::move(mu), std::move(cov));
}

Vec eps_optimal(const GaussianMixture& gm, const Schedule& sched, double tau, const Vec& x) {
    const double s = sched.sigma(tau);
    if (s == 0.0) return Vec::Zero(gm.dim());
    return -s * gm.marginal_at(sched, tau).score(x);
}

Vec v_optimal(const GaussianMixture& gm, const Schedule& sched, double tau, const Vec& x) {
    const double a = sched.alpha(tau);
    if (a <= 0.0) throw std::domain_error("v_optimal: alpha must be positive");
    const double s = sched.sigma(tau);
    return -(s / a) * (x + gm.marginal_at(sched, tau).score(x));
}

}  // namespace etsdm

#include "predictor.hpp"

#include <cmath>
#include <stdexcept>

namespace etsdm {

Mat Predictor::eval_batch(const Mat& X, double t) const {
    Mat out(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out.row(i) = eval(X.row(i).transpose(), t).transpose();
    return out;
}

Vec AnalyticEpsPredictor::eval(const Vec& x, double t) const {
    return eps_optimal(*gm_, *sched_, t, x);
}

Mat AnalyticEpsPredictor::eval_batch(const Mat& X, double t) const {
    const double s = sched_->sigma(t);
    Mat out(X.rows(), X.cols());
    if (s == 0.0) {
        out.setZero();
        return out;
    }
    const GaussianMixture marginal = gm_->marginal_at(*sched_, t);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        out.row(i) = -s * marginal.score(X.row(i).transpose()).transpose();
    return out;
}

Vec AnalyticVPredictor::eval(const Vec& x, double t) const {
    return v_optimal(*gm_, *sched_, t, x);
}

Vec SharedAnalyticPredictor::eval(const Vec& x, double t) const {
    return shared_optimal_eps(*gm_, *sched_, part_, x, t);
}

LipschitzEstimate lipschitz_K(const Predictor& pred, const GaussianMixture& q_t, double t,
                              double t_prime, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("lipschitz_K: need n >= 1");
    const double dt = std::abs(t - t_prime);
    if (dt < 1e-12) throw std::invalid_argument("lipschitz_K: degenerate time pair");
    const Mat X = q_t.sample(n, rng);
    const Mat a = pred.eval_batch(X, t);
    const Mat b = pred.eval_batch(X, t_prime);
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = (a.row(i) - b.row(i)).norm();
        sum += d;
        sumsq += d * d;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sumsq / n - mean * mean);
    LipschitzEstimate est;
    est.k = mean / dt;
    est.std_error = std::sqrt(var / n) / dt;
    est.n = n;
    return est;
}

std::vector<CurvePoint> singularity_scan(const Predictor& pred, const GaussianMixture& data,
                                         const Schedule& sched, const std::vector<double>& t_grid,
                                         double dt, int n, uint64_t seed) {
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] <= t_grid[i - 1])
            throw std::invalid_argument("singularity_scan: grid must be sorted ascending");
    std::vector<CurvePoint> curve;
    curve.reserve(t_grid.size());
    for (size_t i = 0; i < t_grid.size(); ++i) {
        Rng rng(seed, i);
        const GaussianMixture q_t = data.marginal_at(sched, t_grid[i]);
        const LipschitzEstimate est = lipschitz_K(pred, q_t, t_grid[i], t_grid[i] + dt, n, rng);
        curve.push_back({t_grid[i], est.k, est.std_error});
    }
    return curve;
}

std::vector<CurvePoint> perturbation_probe(const Predictor& pred, const Schedule& sched,
                                           double t_tilde, const std::vector<double>& scales,
                                           const GaussianMixture& data, int n, uint64_t seed) {
    if (!(t_tilde > 0.0 && t_tilde < 1.0))
        throw std::domain_error("perturbation_probe: t_tilde must lie in (0,1)");
    const double a = sched.alpha(t_tilde);
    const double s = sched.sigma(t_tilde);
    const int d = data.dim();
    Rng rng(seed);
    const GaussianMixture q = data.marginal_at(sched, t_tilde);
    const Mat X = q.sample(n, rng);
    Mat Z(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) Z(i, j) = rng.normal();

    // One-step x0 prediction: (x - sigma * eps(x, t)) / alpha.
    const auto x0_hat = [&](const Mat& pts) -> Mat {
        return (pts - s * pred.eval_batch(pts, t_tilde)) / a;
    };
    const Mat base = x0_hat(X);
    std::vector<CurvePoint> curve;
    for (double scale : scales) {
        if (scale < 0.0) throw std::domain_error("perturbation_probe: scales must be >= 0");
        const Mat shifted = x0_hat(X + scale * Z);
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double e = (shifted.row(i) - base.row(i)).norm();
            sum += e;
            sumsq += e * e;
        }
        const double mean = sum / n;
        const double var = std::max(0.0, sumsq / n - mean * mean);
        curve.push_back({scale, mean, std::sqrt(var / n)});
    }
    return curve;
}

}  // namespace etsdm

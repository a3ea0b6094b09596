#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace etsdm {

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d: empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const size_t nq = std::max(a.size(), b.size());
    // Quantile at the midpoint rank, linear interpolation between order stats.
    const auto quantile = [](const std::vector<double>& v, double q) {
        const double pos = q * static_cast<double>(v.size()) - 0.5;
        if (pos <= 0.0) return v.front();
        if (pos >= static_cast<double>(v.size() - 1)) return v.back();
        const size_t lo = static_cast<size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
    };
    double acc = 0.0;
    if (a.size() == b.size()) {
        for (size_t i = 0; i < nq; ++i) {
            const double d = a[i] - b[i];
            acc += d * d;
        }
    } else {
        for (size_t i = 0; i < nq; ++i) {
            const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(nq);
            const double d = quantile(a, q) - quantile(b, q);
            acc += d * d;
        }
    }
    return std::sqrt(acc / static_cast<double>(nq));
}

MetricReport sliced_wasserstein(const Mat& a, const Mat& b, int n_projections, uint64_t seed) {
    if (a.rows() == 0 || b.rows() == 0)
        throw std::invalid_argument("sliced_wasserstein: empty sample set");
    if (a.cols() != b.cols())
        throw std::invalid_argument("sliced_wasserstein: dimension mismatch");
    if (n_projections < 1)
        throw std::invalid_argument("sliced_wasserstein: need n_projections >= 1");
    const int d = static_cast<int>(a.cols());
    Rng rng(seed);
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> pa(static_cast<size_t>(a.rows()));
    std::vector<double> pb(static_cast<size_t>(b.rows()));
    for (int p = 0; p < n_projections; ++p) {
        Vec dir(d);
        do {
            for (int j = 0; j < d; ++j) dir[j] = rng.normal();
        } while (dir.norm() == 0.0);
        dir /= dir.norm();
        for (Eigen::Index i = 0; i < a.rows(); ++i) pa[static_cast<size_t>(i)] = a.row(i).dot(dir);
        for (Eigen::Index i = 0; i < b.rows(); ++i) pb[static_cast<size_t>(i)] = b.row(i).dot(dir);
        const double w = wasserstein_1d(pa, pb);
        sum += w;
        sumsq += w * w;
    }
    MetricReport rep;
    rep.name = "sliced_wasserstein";
    rep.value = sum / n_projections;
    const double var = std::max(0.0, sumsq / n_projections - rep.value * rep.value);
    rep.std_error = std::sqrt(var / n_projections);
    rep.n_a = static_cast<int>(a.rows());
    rep.n_b = static_cast<int>(b.rows());
    return rep;
}

std::vector<RatioPoint> snr_ratio_curve(const Schedule& a, const Schedule& b,
                                        const std::vector<double>& grid) {
    std::vector<RatioPoint> out;
    out.reserve(grid.size());
    for (double tau : grid) {
        const double sb = b.snr(tau);
        if (sb == 0.0) throw std::domain_error("snr_ratio_curve: reference SNR is zero");
        out.push_back({tau, a.snr(tau) / sb});
    }
    return out;
}

LipschitzSummary summarize_lipschitz_curve(const std::vector<CurvePoint>& curve) {
    if (curve.empty()) throw std::invalid_argument("summarize_lipschitz_curve: empty curve");
    LipschitzSummary s;
    s.max_k = curve[0].value;
    s.argmax_t = curve[0].t;
    for (size_t i = 0; i < curve.size(); ++i) {
        if (curve[i].value > s.max_k) {
            s.max_k = curve[i].value;
            s.argmax_t = curve[i].t;
        }
        if (i > 0)
            s.auc += 0.5 * (curve[i].value + curve[i - 1].value) * (curve[i].t - curve[i - 1].t);
    }
    return s;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        // Advance past ties on both sides before comparing the CDFs, so equal
        // values never produce a spurious transient gap.
        const double v = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] == v) ++ia;
        while (ib < b.size() && b[ib] == v) ++ib;
        const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
        const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

}  // namespace etsdm

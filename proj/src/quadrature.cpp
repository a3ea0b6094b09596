#include "quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace etsdm {

namespace {

GaussLegendreRule compute_rule(int order) {
    if (order < 1) throw std::invalid_argument("quadrature order must be >= 1");
    GaussLegendreRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < order; ++i) {
        // Chebyshev-based initial guess for the i-th root.
        double x = std::cos(pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            // Legendre recurrence for P_n(x) and P'_n(x).
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

}  // namespace

const GaussLegendreRule& gauss_legendre(int order) {
    static std::mutex mu;
    static std::map<int, GaussLegendreRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, compute_rule(order)).first;
    return it->second;
}

Eigen::VectorXd gl_integrate(const VecFn& f, double a, double b, int order) {
    const auto& rule = gauss_legendre(order);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    Eigen::VectorXd acc;
    for (int i = 0; i < order; ++i) {
        const Eigen::VectorXd v = f(mid + half * rule.nodes[i]);
        if (acc.size() == 0) acc = Eigen::VectorXd::Zero(v.size());
        acc += rule.weights[i] * v;
    }
    return half * acc;
}

namespace {
Eigen::VectorXd adaptive_impl(const VecFn& f, double a, double b, const Eigen::VectorXd& whole,
                              double tol, int depth) {
    const double mid = 0.5 * (a + b);
    const Eigen::VectorXd left = gl_integrate(f, a, mid);
    const Eigen::VectorXd right = gl_integrate(f, mid, b);
    const double err = (left + right - whole).norm();
    if (err < tol || depth <= 0) return left + right;
    return adaptive_impl(f, a, mid, left, tol * 0.5, depth - 1) +
           adaptive_impl(f, mid, b, right, tol * 0.5, depth - 1);
}
}  // namespace

Eigen::VectorXd adaptive_integrate(const VecFn& f, double a, double b, double tol, int max_depth) {
    return adaptive_impl(f, a, b, gl_integrate(f, a, b), tol, max_depth);
}

double gl_integrate_scalar(const std::function<double(double)>& f, double a, double b, int order) {
    return gl_integrate([&f](double t) { return Eigen::VectorXd::Constant(1, f(t)); }, a, b,
                        order)(0);
}

}  // namespace etsdm

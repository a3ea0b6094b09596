#ifndef ETSDM_QUADRATURE_HPP
#define ETSDM_QUADRATURE_HPP

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace etsdm {

struct GaussLegendreRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// Nodes/weights by Newton iteration on the Legendre polynomial; cached per order.
const GaussLegendreRule& gauss_legendre(int order);

using VecFn = std::function<Eigen::VectorXd(double)>;

Eigen::VectorXd gl_integrate(const VecFn& f, double a, double b, int order = 32);

// Recursive bisection with a GL-32 vs two-halves error estimate.
Eigen::VectorXd adaptive_integrate(const VecFn& f, double a, double b, double tol = 1e-10,
                                   int max_depth = 30);

double gl_integrate_scalar(const std::function<double(double)>& f, double a, double b,
                           int order = 32);

}  // namespace etsdm

#endif

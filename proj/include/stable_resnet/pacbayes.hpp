#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "error.hpp"
#include "gp.hpp"

namespace sresnet {

inline double bernoulli_kl(double a, double p)
{
    if (!(a >= 0.0 && a <= 1.0) || !(p >= 0.0 && p <= 1.0))
        throw ContractError("bernoulli_kl: arguments must lie in [0,1]");
    if ((p == 0.0 && a > 0.0) || (p == 1.0 && a < 1.0))
        return std::numeric_limits<double>::infinity();
    double v = 0.0;
    if (a > 0.0)
        v += a * std::log(a / p);
    if (a < 1.0)
        v += (1.0 - a) * std::log((1.0 - a) / (1.0 - p));
    return std::max(v, 0.0);
}

// sup { p in [a,1] : kl(a||p) <= eps } by bisection.
inline double kl_inverse(double a, double eps)
{
    if (!(a >= 0.0 && a <= 1.0) || !(eps >= 0.0))
        throw ContractError("kl_inverse: need a in [0,1] and eps >= 0");
    if (bernoulli_kl(a, 1.0) <= eps)
        return 1.0;
    double lo = a, hi = 1.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (bernoulli_kl(a, mid) <= eps)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

inline double pac_bound(double r_S, double kl_div, long N, double delta)
{
    if (!(r_S >= 0.0 && r_S <= 1.0) || !(kl_div >= 0.0) || N < 1 || !(delta > 0.0 && delta <= 1.0))
        throw ContractError("pac_bound: argument out of range");
    if (std::isinf(kl_div))
        return 1.0;
    const double eps = (kl_div + std::log(2.0 * std::sqrt(static_cast<double>(N)) / delta)) / static_cast<double>(N);
    return kl_inverse(r_S, eps);
}

struct PacBayesReport {
    double kl_divergence = 0.0;
    double logdet_term = 0.0; // 1/2 log det(Q + s I) - N/2 log s
    double trace_term = 0.0;  // -1/2 Tr(Q (Q + s I)^{-1})
    double quad_term = 0.0;   // 1/2 y' (Q + s I)^{-1} Q (Q + s I)^{-1} y
    double jitter = 0.0;
};

// KL between the GP posterior and prior restricted to the training inputs.
inline PacBayesReport gp_kl(const Eigen::MatrixXd& Q, const Eigen::VectorXd& y, double sigma2)
{
    if (Q.rows() != y.size())
        throw ContractError("gp_kl: shape mismatch");
    const Factorization f = factorize(Q, sigma2);
    const long n = Q.rows();
    const Eigen::MatrixXd L = f.llt.matrixL();
    double logdet = 0.0;
    for (long i = 0; i < n; ++i)
        logdet += 2.0 * std::log(L(i, i));
    const Eigen::VectorXd v = f.llt.solve(y);
    const Eigen::MatrixXd X = f.llt.solve(Q);
    PacBayesReport r;
    r.jitter = f.jitter;
    r.logdet_term = 0.5 * logdet - 0.5 * n * std::log(sigma2);
    r.trace_term = -0.5 * X.trace();
    r.quad_term = 0.5 * v.dot(Q * v);
    r.kl_divergence = r.logdet_term + r.trace_term + r.quad_term;
    return r;
}

} // namespace sresnet

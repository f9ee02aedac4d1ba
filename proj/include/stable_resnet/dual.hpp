#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"

namespace sresnet {

namespace detail {

inline double clamp_corr(double g)
{
    constexpr double tol = 1e-12;
    if (!(std::abs(g) <= 1.0 + tol))
        throw DomainError("correlation outside [-1,1]: " + std::to_string(g));
    return g > 1.0 ? 1.0 : (g < -1.0 ? -1.0 : g);
}

} // namespace detail

// E[relu(u) relu(v)] dual pieces for unit-variance Gaussians with correlation g.
inline double relu_f(double g)
{
    g = detail::clamp_corr(g);
    return (std::sqrt(1.0 - g * g) - g * std::acos(g)) / std::numbers::pi;
}

inline double relu_fhat(double g)
{
    g = detail::clamp_corr(g);
    return (g * std::asin(g) + std::sqrt(1.0 - g * g)) / std::numbers::pi + 0.5 * g;
}

inline double relu_fprime(double g)
{
    g = detail::clamp_corr(g);
    return -std::acos(g) / std::numbers::pi;
}

// d/dg fhat = 1 + f'
inline double relu_fhat_prime(double g)
{
    g = detail::clamp_corr(g);
    return std::asin(g) / std::numbers::pi + 0.5;
}

struct TaylorSeries {
    std::vector<double> coefficients;
    int order = 0;

    double operator()(double g) const
    {
        double acc = 0.0;
        for (int n = order; n >= 0; --n)
            acc = acc * g + coefficients[n];
        return acc;
    }
};

// Coefficients of fhat around 0. The even coefficients come from the
// polynomials b_k in  d^{2k} fhat / dg^{2k} = b_k(g^2) / (pi (1-g^2)^{(4k-3)/2}).
// All b_{k,j} are positive; they are carried as log(b_{k,j} / (2k)!).
inline TaylorSeries fhat_taylor(int n_max = 60)
{
    if (n_max < 0)
        throw ContractError("fhat_taylor: n_max must be >= 0");
    TaylorSeries s;
    s.order = n_max;
    s.coefficients.assign(n_max + 1, 0.0);
    s.coefficients[0] = 1.0 / std::numbers::pi;
    if (n_max >= 1)
        s.coefficients[1] = 0.5;

    constexpr double none = -std::numeric_limits<double>::infinity();
    auto lse = [](double a, double b) {
        if (a == none)
            return b;
        if (b == none)
            return a;
        const double m = std::max(a, b);
        return m + std::log(std::exp(a - m) + std::exp(b - m));
    };
    std::vector<double> lc{-std::log(2.0)};
    for (int k = 1; 2 * k <= n_max; ++k) {
        s.coefficients[2 * k] = std::exp(lc[0]) / std::numbers::pi;
        const double kk = k;
        const double lscale = -std::log((2 * kk + 1) * (2 * kk + 2));
        std::vector<double> next(lc.size() + 1, none);
        for (std::size_t j = 0; j < next.size(); ++j) {
            const double jj = static_cast<double>(j);
            double v = none;
            if (j + 1 < lc.size())
                v = lse(v, std::log(2 * (jj + 1) * (2 * jj + 1)) + lc[j + 1]);
            if (j < lc.size())
                v = lse(v, std::log((4 * jj + 1) * (2 * kk + 2 * jj - 1)) + lc[j]);
            if (j >= 1 && 2 * kk + 2 * jj - 3 > 0)
                v = lse(v, std::log((2 * kk + 2 * jj - 3) * (2 * kk + 2 * jj - 1)) + lc[j - 1]);
            next[j] = v + lscale;
        }
        lc = std::move(next);
    }
    for (double a : s.coefficients)
        if (!std::isfinite(a))
            throw NumericError("fhat_taylor: non-finite coefficient");
    return s;
}

} // namespace sresnet

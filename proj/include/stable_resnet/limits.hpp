#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "dual.hpp"
#include "kernels.hpp"
#include "scaling.hpp"

namespace sresnet {

struct ContinuumState {
    double t = 0.0;
    double q_ab = 0.0;
    double q_aa = 0.0;
    double q_bb = 0.0;
    double theta_ab = 0.0;
};

namespace detail {

using Ode4 = std::array<double, 4>; // q_ab, q_aa, q_bb, theta

inline Ode4 ode_rhs(const Ode4& y, const KernelHyper& h)
{
    const double a = 0.5 * h.sigma_w_sq;
    const double r = std::sqrt(y[1] * y[2]);
    if (!(r > 0.0))
        throw ContractError("ode: zero diagonal");
    const double c = y[0] / r;
    const double qdot = h.sigma_b_sq + a * relu_fhat(c) * r;
    return {qdot, h.sigma_b_sq + a * y[1], h.sigma_b_sq + a * y[2], qdot + a * relu_fhat_prime(c) * y[3]};
}

inline Ode4 rk4(const Ode4& y, double dt, const KernelHyper& h)
{
    auto axpy = [](const Ode4& u, double s, const Ode4& v) {
        return Ode4{u[0] + s * v[0], u[1] + s * v[1], u[2] + s * v[2], u[3] + s * v[3]};
    };
    const Ode4 k1 = ode_rhs(y, h);
    const Ode4 k2 = ode_rhs(axpy(y, 0.5 * dt, k1), h);
    const Ode4 k3 = ode_rhs(axpy(y, 0.5 * dt, k2), h);
    const Ode4 k4 = ode_rhs(axpy(y, dt, k3), h);
    Ode4 out;
    for (int i = 0; i < 4; ++i)
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

inline ContinuumState to_state(double t, const Ode4& y) { return {t, y[0], y[1], y[2], y[3]}; }

inline void check_ode_args(double t_end, long steps)
{
    if (!(t_end >= 0.0 && t_end <= 1.0))
        throw ContractError("t_end must lie in [0,1]");
    if (steps < 1)
        throw ContractError("steps must be >= 1");
}

} // namespace detail

// Depth-continuum of the uniformly scaled network, integrated with fixed-step RK4.
inline ContinuumState ode_uniform(const PairState& start, const KernelHyper& h, double t_end, long steps)
{
    h.validate();
    detail::check_ode_args(t_end, steps);
    detail::Ode4 y{start.q_ab, start.q_aa, start.q_bb, start.q_ab};
    const double dt = t_end / static_cast<double>(steps);
    for (long i = 0; i < steps && dt > 0.0; ++i)
        y = detail::rk4(y, dt, h);
    return detail::to_state(t_end, y);
}

inline ContinuumState ode_uniform(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, const KernelHyper& h,
                                  double t_end, long steps)
{
    return ode_uniform(q0(x, xp, h), h, t_end, steps);
}

// Same integrator; theta carried alongside q.
inline ContinuumState ntk_ode(const PairState& start, const KernelHyper& h, double t_end, long steps)
{
    return ode_uniform(start, h, t_end, steps);
}

inline ContinuumState ntk_ode(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, const KernelHyper& h,
                              double t_end, long steps)
{
    return ode_uniform(q0(x, xp, h), h, t_end, steps);
}

// States at t = l/L, l = 0..L, with `substeps` RK4 steps per layer.
inline std::vector<ContinuumState> ode_trajectory(const PairState& start, const KernelHyper& h, long L, long substeps = 1)
{
    h.validate();
    if (L < 1 || substeps < 1)
        throw ContractError("ode_trajectory: L and substeps must be >= 1");
    detail::Ode4 y{start.q_ab, start.q_aa, start.q_bb, start.q_ab};
    const double dt = 1.0 / static_cast<double>(L * substeps);
    std::vector<ContinuumState> out;
    out.reserve(L + 1);
    out.push_back(detail::to_state(0.0, y));
    for (long l = 1; l <= L; ++l) {
        for (long s = 0; s < substeps; ++s)
            y = detail::rk4(y, dt, h);
        out.push_back(detail::to_state(static_cast<double>(l) / L, y));
    }
    return out;
}

// theta_t = e^{G_t} (q_0 + int_0^t qdot_s e^{-G_s} ds),  G_t = int_0^t (sw/2)(1 + f'(c_s)) ds,
// with q from RK4 and both integrals by Simpson's rule on 2*steps intervals.
inline double ntk_ode_explicit(const PairState& start, const KernelHyper& h, double t_end, long steps)
{
    h.validate();
    detail::check_ode_args(t_end, steps);
    const long m = 2 * steps;
    const double dt = t_end / static_cast<double>(m);
    const double a = 0.5 * h.sigma_w_sq;
    std::vector<double> g(m + 1), qdot(m + 1);
    detail::Ode4 y{start.q_ab, start.q_aa, start.q_bb, start.q_ab};
    for (long i = 0; i <= m; ++i) {
        const double r = std::sqrt(y[1] * y[2]);
        const double c = y[0] / r;
        g[i] = a * relu_fhat_prime(c);
        qdot[i] = h.sigma_b_sq + a * relu_fhat(c) * r;
        if (i < m)
            y = detail::rk4(y, dt, h);
    }
    if (dt == 0.0)
        return start.q_ab;

    // cumulative integral at every node: Simpson on pairs, a 3-point rule for odd nodes
    auto cumulative = [&](const std::vector<double>& f) {
        std::vector<double> F(m + 1, 0.0);
        for (long i = 0; i + 2 <= m; i += 2) {
            F[i + 1] = F[i] + dt * (5.0 * f[i] + 8.0 * f[i + 1] - f[i + 2]) / 12.0;
            F[i + 2] = F[i] + dt * (f[i] + 4.0 * f[i + 1] + f[i + 2]) / 3.0;
        }
        return F;
    };
    const std::vector<double> G = cumulative(g);
    std::vector<double> w(m + 1);
    for (long i = 0; i <= m; ++i)
        w[i] = qdot[i] * std::exp(-G[i]);
    const std::vector<double> I = cumulative(w);
    return std::exp(G[m]) * (start.q_ab + I[m]);
}

inline double ode_diagonal_closed_form(double q0_diag, const KernelHyper& h, double t)
{
    const double e = std::exp(0.5 * h.sigma_w_sq * t);
    return e * q0_diag + 2.0 * h.sigma_b_sq / h.sigma_w_sq * (e - 1.0);
}

struct QInfinity {
    double q_inf = 0.0;
    long depth_used = 0;
};

// Truncated limit kernel of the decreasing scheme with a certified tail:
// |Q_L - Q_inf| <= kappa * sum_{k>L} lambda_k^2 <= tol.
inline QInfinity q_infinity_decreasing(const PairState& start, const KernelHyper& h, double tol,
                                       long max_depth = 2'000'000)
{
    h.validate();
    if (!(tol > 0.0))
        throw ContractError("q_infinity_decreasing: tol must be > 0");
    const ScalingScheme s = ScalingScheme::decreasing();
    const double tail_max = decreasing_tail_sq(max_depth);
    const double total = sum_lambda_sq(s, max_depth) + tail_max;
    const double shift = 2.0 * h.sigma_b_sq / h.sigma_w_sq;
    const double q_max = std::exp(0.5 * h.sigma_w_sq * total) * (std::max(start.q_aa, start.q_bb) + shift);
    const double kappa = h.sigma_b_sq + h.sigma_w_sq * q_max;
    const double target = tol / kappa;
    if (tail_max >= target)
        throw std::range_error("q_infinity_decreasing: tolerance " + std::to_string(tol) +
                               " needs more than " + std::to_string(max_depth) +
                               " layers (the tail decays like 1/log L)");
    long L = max_depth;
    double tail = tail_max;
    while (L > 1) {
        const double v = decreasing_lambda(L);
        if (tail + v * v >= target)
            break;
        tail += v * v;
        --L;
    }
    PairState p = start;
    p.theta_ab.reset();
    for (long l = 1; l <= L; ++l)
        p = nngp_step(p, decreasing_lambda(l), h);
    return {p.q_ab, L};
}

inline QInfinity q_infinity_decreasing(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, const KernelHyper& h,
                                       double tol, long max_depth = 2'000'000)
{
    return q_infinity_decreasing(q0(x, xp, h), h, tol, max_depth);
}

} // namespace sresnet

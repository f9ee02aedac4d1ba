#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dual.hpp"
#include "error.hpp"
#include "scaling.hpp"

namespace sresnet {

struct KernelHyper {
    double sigma_w_sq = 2.0;
    double sigma_b_sq = 0.0;
    int input_dim = 1;

    void validate() const
    {
        if (!(sigma_w_sq > 0.0))
            throw ContractError("sigma_w^2 must be > 0");
        if (!(sigma_b_sq >= 0.0))
            throw ContractError("sigma_b^2 must be >= 0");
        if (input_dim < 1)
            throw ContractError("input dimension must be >= 1");
    }
};

struct PairState {
    double q_ab = 0.0;
    double q_aa = 0.0;
    double q_bb = 0.0;
    std::optional<double> theta_ab;
    long layer = 0;

    double corr() const
    {
        const double r = std::sqrt(q_aa * q_bb);
        if (!(r > 0.0))
            throw ContractError("correlation undefined: zero diagonal at layer " + std::to_string(layer));
        return q_ab / r;
    }
};

// Largest magnitude a covariance may reach before we call it an overflow.
inline constexpr double kOverflowLimit = std::numeric_limits<double>::max() / 16.0;

inline PairState q0_from_dots(double dot_ab, double dot_aa, double dot_bb, const KernelHyper& h)
{
    const double s = h.sigma_w_sq / h.input_dim;
    PairState p;
    p.q_ab = h.sigma_b_sq + s * dot_ab;
    p.q_aa = h.sigma_b_sq + s * dot_aa;
    p.q_bb = h.sigma_b_sq + s * dot_bb;
    p.theta_ab = p.q_ab;
    return p;
}

inline PairState q0(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, const KernelHyper& h)
{
    h.validate();
    if (x.size() != h.input_dim || xp.size() != h.input_dim)
        throw ContractError("q0: input length " + std::to_string(x.size()) + "/" + std::to_string(xp.size()) +
                            " does not match input_dim " + std::to_string(h.input_dim));
    return q0_from_dots(x.dot(xp), x.squaredNorm(), xp.squaredNorm(), h);
}

namespace detail {

inline void check_finite(const PairState& s)
{
    auto bad = [](double v) { return !std::isfinite(v) || std::abs(v) > kOverflowLimit; };
    if (bad(s.q_ab) || bad(s.q_aa) || bad(s.q_bb) || (s.theta_ab && bad(*s.theta_ab)))
        throw KernelOverflow("covariance overflows at layer " + std::to_string(s.layer) +
                             "; use the correlation kernel or the normalized NTK for deep unscaled networks");
}

inline PairState step(const PairState& s, double lambda, const KernelHyper& h, bool with_theta)
{
    const double r = std::sqrt(s.q_aa * s.q_bb);
    if (!(r > 0.0))
        throw ContractError("invalid state: zero diagonal at layer " + std::to_string(s.layer) +
                            " (sigma_b = 0 with a zero input)");
    const double c = s.q_ab / r;
    const double a = 0.5 * h.sigma_w_sq;
    const double l2 = lambda * lambda;
    const double psi = h.sigma_b_sq + a * relu_fhat(c) * r;

    PairState n;
    n.layer = s.layer + 1;
    n.q_ab = s.q_ab + l2 * psi;
    n.q_aa = s.q_aa + l2 * (h.sigma_b_sq + a * s.q_aa);
    n.q_bb = s.q_bb + l2 * (h.sigma_b_sq + a * s.q_bb);
    if (with_theta) {
        const double th = s.theta_ab.value_or(s.q_ab);
        n.theta_ab = th + l2 * (psi + a * relu_fhat_prime(c) * th);
    }
    check_finite(n);
    return n;
}

inline void require_zero_bias(const KernelHyper& h, const char* who)
{
    if (h.sigma_b_sq != 0.0)
        throw ContractError(std::string(who) + " requires sigma_b^2 = 0; use nngp_forward instead");
}

} // namespace detail

inline PairState nngp_step(const PairState& s, double lambda, const KernelHyper& h)
{
    PairState n = detail::step(s, lambda, h, false);
    n.theta_ab.reset();
    return n;
}

inline PairState ntk_step(const PairState& s, double lambda, const KernelHyper& h)
{
    return detail::step(s, lambda, h, true);
}

inline std::vector<PairState> nngp_forward(const PairState& start, const KernelHyper& h,
                                           const ScalingScheme& scheme, long L)
{
    h.validate();
    if (L < 0)
        throw ContractError("depth must be >= 0");
    std::vector<PairState> out;
    out.reserve(L + 1);
    out.push_back(start);
    out.back().theta_ab.reset();
    for (long l = 1; l <= L; ++l)
        out.push_back(nngp_step(out.back(), lambda_at(scheme, l, L), h));
    return out;
}

inline std::vector<PairState> nngp_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                                           const KernelHyper& h, const ScalingScheme& scheme, long L)
{
    return nngp_forward(q0(x, xp, h), h, scheme, L);
}

inline std::vector<PairState> ntk_forward(const PairState& start, const KernelHyper& h,
                                          const ScalingScheme& scheme, long L)
{
    h.validate();
    if (L < 0)
        throw ContractError("depth must be >= 0");
    std::vector<PairState> out;
    out.reserve(L + 1);
    out.push_back(start);
    out.back().theta_ab = start.q_ab;
    for (long l = 1; l <= L; ++l)
        out.push_back(ntk_step(out.back(), lambda_at(scheme, l, L), h));
    return out;
}

inline std::vector<PairState> ntk_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                                          const KernelHyper& h, const ScalingScheme& scheme, long L)
{
    return ntk_forward(q0(x, xp, h), h, scheme, L);
}

// Only the final layer, without keeping the trajectory.
inline PairState kernel_at_depth(PairState s, const KernelHyper& h, const ScalingScheme& scheme, long L, bool ntk)
{
    s.theta_ab = ntk ? std::optional<double>(s.q_ab) : std::nullopt;
    for (long l = 1; l <= L; ++l)
        s = detail::step(s, lambda_at(scheme, l, L), h, ntk);
    return s;
}

// Q_l(x,x) = -2 sb/sw + prod_{k<=l} (1 + sw lambda_k^2 / 2) (Q_0(x,x) + 2 sb/sw)
inline double diagonal_closed_form(double q0_diag, const KernelHyper& h, const ScalingScheme& scheme, long l, long L)
{
    const double shift = 2.0 * h.sigma_b_sq / h.sigma_w_sq;
    double prod = 1.0;
    for (long k = 1; k <= l; ++k) {
        const double lam = lambda_at(scheme, k, L);
        prod *= 1.0 + 0.5 * h.sigma_w_sq * lam * lam;
    }
    return -shift + prod * (q0_diag + shift);
}

inline std::vector<double> corr_forward(double c0, const KernelHyper& h, const ScalingScheme& scheme, long L)
{
    h.validate();
    detail::require_zero_bias(h, "corr_forward");
    if (!(std::abs(c0) <= 1.0))
        throw DomainError("corr_forward: |c0| must be <= 1");
    std::vector<double> c(L + 1);
    c[0] = c0;
    for (long l = 1; l <= L; ++l) {
        const double lam = lambda_at(scheme, l, L);
        const double a = 0.5 * lam * lam * h.sigma_w_sq;
        const double v = (c[l - 1] + a * relu_fhat(c[l - 1])) / (1.0 + a);
        c[l] = v > 1.0 ? 1.0 : v;
    }
    return c;
}

// Same correlation, computed as the covariance of a residual layer
//   y <- sqrt(1 - ah) y + sqrt(ah) W relu(y),  W ~ N(0, 2/N),  ah = a / (1 + a)
// started from unit variances. Uses the arc-cosine form of E[relu relu].
inline std::vector<double> corr_as_modified_nngp(double c0, const ScalingScheme& scheme, const KernelHyper& h, long L)
{
    h.validate();
    detail::require_zero_bias(h, "corr_as_modified_nngp");
    if (!(std::abs(c0) <= 1.0))
        throw DomainError("corr_as_modified_nngp: |c0| must be <= 1");
    auto relu_moment = [](double kab, double kaa, double kbb) {
        const double r = std::sqrt(kaa * kbb);
        double c = kab / r;
        c = std::min(1.0, std::max(-1.0, c));
        const double th = std::acos(c);
        return r / (2.0 * std::numbers::pi) * (std::sin(th) + (std::numbers::pi - th) * std::cos(th));
    };
    double kab = c0, kaa = 1.0, kbb = 1.0;
    std::vector<double> out(L + 1);
    out[0] = c0;
    for (long l = 1; l <= L; ++l) {
        const double lam = lambda_at(scheme, l, L);
        const double a = 0.5 * lam * lam * h.sigma_w_sq;
        const double ah = a / (1.0 + a);
        const double nab = (1.0 - ah) * kab + ah * 2.0 * relu_moment(kab, kaa, kbb);
        const double naa = (1.0 - ah) * kaa + ah * 2.0 * relu_moment(kaa, kaa, kaa);
        const double nbb = (1.0 - ah) * kbb + ah * 2.0 * relu_moment(kbb, kbb, kbb);
        kab = nab;
        kaa = naa;
        kbb = nbb;
        out[l] = std::min(1.0, kab / std::sqrt(kaa * kbb));
    }
    return out;
}

// kappa_l = Theta_l / (1+a)^{l-1} for the unscaled network with zero bias,
// Q_0(x,x) Q_0(x',x') = q0_scale^2 and Q_0(x,x') = c0 q0_scale.
inline std::vector<double> ntk_normalized_forward(double c0, const KernelHyper& h, const ScalingScheme& scheme, long L,
                                                  double q0_scale = 1.0)
{
    h.validate();
    detail::require_zero_bias(h, "ntk_normalized_forward");
    if (scheme.kind != ScalingKind::unscaled)
        throw ContractError("ntk_normalized_forward is defined for the unscaled network only");
    const std::vector<double> c = corr_forward(c0, h, scheme, L);
    const double a = 0.5 * h.sigma_w_sq;
    std::vector<double> k(L + 1);
    k[0] = (1.0 + a) * c0 * q0_scale;
    for (long l = 1; l <= L; ++l)
        k[l] = (1.0 + a * relu_fhat_prime(c[l - 1])) / (1.0 + a) * k[l - 1] + a * relu_fhat(c[l - 1]) * q0_scale;
    return k;
}

// Scale-free kernels for zero bias: C_L and Theta_L / sqrt(Q_L(x,x) Q_L(x',x')).
struct NormalizedPair {
    double corr = 0.0;
    double ntk = 0.0;
};

inline NormalizedPair normalized_at_depth(double c0, const KernelHyper& h, const ScalingScheme& scheme, long L)
{
    detail::require_zero_bias(h, "normalized kernels");
    NormalizedPair p{c0, c0};
    for (long l = 1; l <= L; ++l) {
        const double lam = lambda_at(scheme, l, L);
        const double a = 0.5 * lam * lam * h.sigma_w_sq;
        const double fh = relu_fhat(p.corr);
        p.ntk = (p.ntk * (1.0 + a * relu_fhat_prime(p.corr)) + a * fh) / (1.0 + a);
        p.corr = std::min(1.0, (p.corr + a * fh) / (1.0 + a));
    }
    return p;
}

} // namespace sresnet

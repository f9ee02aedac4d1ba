#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "error.hpp"
#include "kernels.hpp"
#include "scaling.hpp"

namespace sresnet {

struct GradientProfile {
    std::vector<double> qbar; // index l = 0..L
    double terminal = 1.0;
    ScalingScheme scheme;
};

// qbar_l = (1 + sw lambda_{l+1}^2 / 2) qbar_{l+1}, qbar_L = q_terminal.
inline GradientProfile grad_profile(const ScalingScheme& scheme, const KernelHyper& h, long L, double q_terminal = 1.0)
{
    h.validate();
    if (L < 0)
        throw ContractError("grad_profile: L must be >= 0");
    if (!(q_terminal > 0.0))
        throw ContractError("grad_profile: q_terminal must be > 0");
    GradientProfile g;
    g.scheme = scheme;
    g.terminal = q_terminal;
    g.qbar.assign(L + 1, q_terminal);
    for (long l = L - 1; l >= 0; --l) {
        const double lam = lambda_at(scheme, l + 1, L);
        g.qbar[l] = (1.0 + 0.5 * h.sigma_w_sq * lam * lam) * g.qbar[l + 1];
    }
    return g;
}

struct WeightGradBound {
    double upper = 0.0;
    double lower = 0.0;
};

inline double weight_grad_upper(const ScalingScheme& scheme, const KernelHyper& h, long L)
{
    return std::exp(0.5 * h.sigma_w_sq * sum_lambda_sq(scheme, L));
}

// Envelopes exp((sw/2) sum lambda^2) and (1 + lambda_min^2 sw/2)^L, constants normalized to 1.
inline WeightGradBound weight_grad_bound(const ScalingScheme& scheme, const KernelHyper& h, long L)
{
    h.validate();
    if (scheme.kind == ScalingKind::decreasing)
        throw ContractError("weight_grad_bound: no lower envelope for the decreasing scheme (lambda_min -> 0)");
    double lmin = lambda_at(scheme, 1, L);
    for (long l = 2; l <= L; ++l)
        lmin = std::min(lmin, lambda_at(scheme, l, L));
    return {weight_grad_upper(scheme, h, L), std::pow(1.0 + 0.5 * h.sigma_w_sq * lmin * lmin, static_cast<double>(L))};
}

// Weight-gradient moment lambda_l^2 qbar_l E[relu(y_{l-1})^2] per layer l = 1..L (qbar_L = 1),
// divided by (lambda_l^2 / (2 (1 + sw lambda_l^2 / 2))) (Q_0(x,x) + 2 sb/sw).
inline std::vector<double> weight_grad_profile(const ScalingScheme& scheme, const KernelHyper& h, long L, double q0_diag)
{
    const GradientProfile g = grad_profile(scheme, h, L);
    const double shift = 2.0 * h.sigma_b_sq / h.sigma_w_sq;
    std::vector<double> out(L);
    double prod = 1.0; // prod_{k<l} (1 + sw lambda_k^2 / 2)
    for (long l = 1; l <= L; ++l) {
        const double lam = lambda_at(scheme, l, L);
        const double grow = 1.0 + 0.5 * h.sigma_w_sq * lam * lam;
        const double q_prev = -shift + prod * (q0_diag + shift);
        out[l - 1] = g.qbar[l] * grow * q_prev / (q0_diag + shift);
        prod *= grow;
    }
    return out;
}

} // namespace sresnet

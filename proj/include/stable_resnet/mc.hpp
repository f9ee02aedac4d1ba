#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "grad_moments.hpp"
#include "kernels.hpp"
#include "scaling.hpp"

namespace sresnet {

struct McConfig {
    long width = 1024;
    long depth = 8;
    long n_samples = 1000;
    std::uint64_t seed = 0;
    ScalingScheme scheme = ScalingScheme::unscaled();
    KernelHyper hyper{};

    void validate() const
    {
        hyper.validate();
        if (width < 8)
            throw ContractError("McConfig: width must be >= 8");
        if (n_samples < 100)
            throw ContractError("McConfig: n_samples must be >= 100");
        if (depth < 0)
            throw ContractError("McConfig: depth must be >= 0");
    }
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent normal stream for one (seed, sample, layer) key.
class KeyedNormal {
public:
    KeyedNormal(std::uint64_t seed, std::uint64_t sample, std::uint64_t layer)
        : eng_(splitmix64(splitmix64(splitmix64(seed) ^ sample) ^ (layer * 0xd1b54a32d192ed03ULL)))
    {
    }
    double operator()() { return dist_(eng_); }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> dist_;
};

namespace detail {

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& G)
{
    if (G.rows() == 1)
        return Eigen::MatrixXd::Constant(1, 1, std::sqrt(std::max(G(0, 0), 0.0)));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

// W Phi for one layer: W has iid N(0, var) entries and N rows; the m columns
// of the product are jointly Gaussian with row covariance var * Phi' Phi.
inline Eigen::MatrixXd sample_product(const Eigen::MatrixXd& Phi, double var, long N, KeyedNormal& rng)
{
    const long m = Phi.cols();
    const Eigen::MatrixXd S = psd_sqrt(var * Phi.transpose() * Phi);
    Eigen::MatrixXd Z(N, m);
    for (long j = 0; j < m; ++j)
        for (long i = 0; i < N; ++i)
            Z(i, j) = rng();
    return Z * S;
}

inline void add_bias(Eigen::MatrixXd& Y, double scale, double sigma_b, KeyedNormal& rng)
{
    if (sigma_b == 0.0)
        return;
    for (long i = 0; i < Y.rows(); ++i) {
        const double b = scale * sigma_b * rng();
        Y.row(i).array() += b;
    }
}

struct ForwardTrace {
    std::vector<Eigen::MatrixXd> y; // y_0..y_L, N x m
    std::vector<Eigen::MatrixXd> a; // W_l relu(y_{l-1}), l = 1..L
};

inline ForwardTrace forward(const McConfig& cfg, const Eigen::MatrixXd& Xt, std::uint64_t sample, bool keep)
{
    const long N = cfg.width, L = cfg.depth;
    const KernelHyper& h = cfg.hyper;
    ForwardTrace tr;
    KeyedNormal r0(cfg.seed, sample, 0);
    Eigen::MatrixXd Y = sample_product(Xt, h.sigma_w_sq / static_cast<double>(Xt.rows()), N, r0);
    add_bias(Y, 1.0, std::sqrt(h.sigma_b_sq), r0);
    if (keep)
        tr.y.push_back(Y);
    for (long l = 1; l <= L; ++l) {
        KeyedNormal rl(cfg.seed, sample, static_cast<std::uint64_t>(l));
        const double lam = lambda_at(cfg.scheme, l, L);
        const Eigen::MatrixXd Phi = Y.cwiseMax(0.0);
        Eigen::MatrixXd A = sample_product(Phi, h.sigma_w_sq / static_cast<double>(N), N, rl);
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N, Y.cols());
        add_bias(B, 1.0, std::sqrt(h.sigma_b_sq), rl);
        Y += lam * (A + B);
        if (keep) {
            tr.a.push_back(std::move(A));
            tr.y.push_back(Y);
        }
    }
    if (!keep)
        tr.y.push_back(std::move(Y));
    return tr;
}

} // namespace detail

// One output unit of the final layer for each input (rows of X), per sample.
inline Eigen::MatrixXd sample_forward(const McConfig& cfg, const Eigen::MatrixXd& X)
{
    cfg.validate();
    if (X.cols() != cfg.hyper.input_dim)
        throw ContractError("sample_forward: input dimension " + std::to_string(X.cols()) + " but input_dim " +
                            std::to_string(cfg.hyper.input_dim));
    const Eigen::MatrixXd Xt = X.transpose();
    Eigen::MatrixXd out(cfg.n_samples, X.rows());
#pragma omp parallel for schedule(dynamic, 8)
    for (long s = 0; s < cfg.n_samples; ++s) {
        const detail::ForwardTrace tr = detail::forward(cfg, Xt, static_cast<std::uint64_t>(s), false);
        out.row(s) = tr.y.back().row(0);
    }
    return out;
}

inline Eigen::MatrixXd mc_gram(const McConfig& cfg, const Eigen::MatrixXd& X)
{
    const Eigen::MatrixXd Y = sample_forward(cfg, X);
    return Y.transpose() * Y / static_cast<double>(Y.rows());
}

struct McKernelCheck {
    double empirical_cov = 0.0;
    double analytic = 0.0;
    double standard_error = 0.0;
    double z_score = 0.0;
};

// Second moment E[y(x) y(x')] (the output mean is exactly zero) against Q_L(x,x').
inline McKernelCheck mc_nngp_error(const McConfig& cfg, const Eigen::VectorXd& x, const Eigen::VectorXd& xp)
{
    Eigen::MatrixXd X(2, x.size());
    X.row(0) = x.transpose();
    X.row(1) = xp.transpose();
    const Eigen::MatrixXd Y = sample_forward(cfg, X);
    const Eigen::ArrayXd p = Y.col(0).array() * Y.col(1).array();
    const double n = static_cast<double>(p.size());
    McKernelCheck r;
    r.empirical_cov = p.mean();
    r.standard_error = std::sqrt((p - r.empirical_cov).square().sum() / (n - 1.0) / n);
    r.analytic = nngp_forward(x, xp, cfg.hyper, cfg.scheme, cfg.depth).back().q_ab;
    r.z_score = r.standard_error > 0.0 ? (r.empirical_cov - r.analytic) / r.standard_error : 0.0;
    return r;
}

struct McGradProfile {
    std::vector<double> moments;  // E ||dLoss/dy_l||^2, l = 0..L
    std::vector<double> std_errs; // of the moments
    std::vector<double> ratios;   // moments / moments[L]
    std::vector<double> analytic; // qbar_l / qbar_L
};

// Backpropagation through sampled networks with loss (y_L^1 - target)^2 / 2,
// drawing W_l' g from its law conditional on the forward product W_l relu(y_{l-1}).
inline McGradProfile mc_grad_moment(const McConfig& cfg, const Eigen::VectorXd& x, double target = 0.0)
{
    cfg.validate();
    if (cfg.width < 256)
        throw ContractError("mc_grad_moment: width must be >= 256");
    if (x.size() != cfg.hyper.input_dim)
        throw ContractError("mc_grad_moment: input dimension mismatch");
    const long N = cfg.width, L = cfg.depth, S = cfg.n_samples;
    const double wstd = std::sqrt(cfg.hyper.sigma_w_sq / static_cast<double>(N));
    const Eigen::MatrixXd Xt = x;
    Eigen::MatrixXd per(S, L + 1);
#pragma omp parallel for schedule(dynamic, 8)
    for (long s = 0; s < S; ++s) {
        const detail::ForwardTrace tr = detail::forward(cfg, Xt, static_cast<std::uint64_t>(s), true);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(N);
        g(0) = tr.y[L](0, 0) - target;
        per(s, L) = g.squaredNorm();
        for (long l = L; l >= 1; --l) {
            KeyedNormal rb(cfg.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(L + 1 + l));
            const Eigen::VectorXd v = tr.y[l - 1].col(0).cwiseMax(0.0);
            const Eigen::VectorXd& a = tr.a[l - 1].col(0);
            Eigen::VectorXd z(N);
            for (long i = 0; i < N; ++i)
                z(i) = rb();
            z *= wstd * g.norm();
            const double vv = v.squaredNorm();
            Eigen::VectorXd wtg = z;
            if (vv > 0.0)
                wtg += v * ((a.dot(g) - v.dot(z)) / vv);
            const double lam = lambda_at(cfg.scheme, l, L);
            for (long i = 0; i < N; ++i)
                if (tr.y[l - 1](i, 0) > 0.0)
                    g(i) += lam * wtg(i);
            per(s, l - 1) = g.squaredNorm();
        }
    }
    McGradProfile r;
    const GradientProfile exact = grad_profile(cfg.scheme, cfg.hyper, L);
    for (long l = 0; l <= L; ++l) {
        const Eigen::ArrayXd c = per.col(l).array();
        const double m = c.mean();
        r.moments.push_back(m);
        r.std_errs.push_back(std::sqrt((c - m).square().sum() / (S - 1.0) / S));
        r.analytic.push_back(exact.qbar[l] / exact.qbar[L]);
    }
    for (long l = 0; l <= L; ++l)
        r.ratios.push_back(r.moments[l] / r.moments[L]);
    return r;
}

} // namespace sresnet

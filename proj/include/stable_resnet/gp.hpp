#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dataset.hpp"
#include "error.hpp"
#include "gram.hpp"

namespace sresnet {

struct Factorization {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
};

// Cholesky of Q + sigma2 I; on failure retries with jitter 1e-10 .. 1e-6 of trace/N.
inline Factorization factorize(const Eigen::MatrixXd& Q, double sigma2)
{
    if (Q.rows() != Q.cols())
        throw ContractError("factorize: matrix is not square");
    if (!(sigma2 > 0.0))
        throw ContractError("factorize: sigma^2 must be > 0");
    const long n = Q.rows();
    const double avg = n > 0 ? Q.trace() / n : 0.0;
    Factorization f;
    for (double j : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
        Eigen::MatrixXd A = Q;
        A.diagonal().array() += sigma2 + j * avg;
        f.llt.compute(A);
        if (f.llt.info() == Eigen::Success) {
            f.jitter = j * avg;
            return f;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
    throw NumericError("Cholesky failed after jitter 1e-6*trace/N; smallest eigenvalue of Q is " +
                       std::to_string(es.eigenvalues()(0)));
}

struct Posterior {
    Eigen::MatrixXd mean;
    double jitter = 0.0;
};

// Q_xN (Q_NN + sigma2 I)^{-1} Y
inline Posterior posterior_mean(const Eigen::MatrixXd& Q_NN, const Eigen::MatrixXd& Q_xN, const Eigen::MatrixXd& Y,
                                double sigma2)
{
    if (Q_xN.cols() != Q_NN.rows() || Y.rows() != Q_NN.rows())
        throw ContractError("posterior_mean: shape mismatch");
    const Factorization f = factorize(Q_NN, sigma2);
    Posterior p;
    p.jitter = f.jitter;
    p.mean = Q_xN * f.llt.solve(Y);
    if (!p.mean.allFinite())
        throw NumericError("posterior_mean: non-finite prediction");
    return p;
}

inline std::vector<int> classify(const Eigen::MatrixXd& pred)
{
    if (pred.cols() < 2)
        throw ContractError("classify: need at least two classes");
    std::vector<int> out(pred.rows());
    for (long i = 0; i < pred.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < pred.cols(); ++c)
            if (pred(i, c) > pred(i, best))
                best = c;
        out[i] = best;
    }
    return out;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth)
{
    if (pred.size() != truth.size() || pred.empty())
        throw ContractError("accuracy: size mismatch");
    long hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        hit += pred[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

struct RegressionConfig {
    std::vector<double> multipliers{0.001, 0.01, 0.1};
    KernelDescriptor kernel{};
    int classes = 10;
};

struct NoiseChoice {
    double multiplier = 0.0;
    double sigma2 = 0.0;
    double val_accuracy = 0.0;
    std::vector<double> accuracies; // per multiplier, in grid order
};

// sigma2 = multiplier * trace(Q_NN)/N maximizing validation accuracy; ties go to the larger sigma2.
inline NoiseChoice tune_noise(const Eigen::MatrixXd& Q_NN, const Eigen::MatrixXd& Q_valN, const Eigen::MatrixXd& Y,
                              const std::vector<int>& val_labels, const std::vector<double>& multipliers)
{
    if (multipliers.empty())
        throw ContractError("tune_noise: empty noise grid");
    for (double m : multipliers)
        if (!(m > 0.0))
            throw ContractError("tune_noise: multipliers must be positive");
    const double scale = Q_NN.trace() / Q_NN.rows();
    NoiseChoice best;
    best.val_accuracy = -1.0;
    for (double m : multipliers) {
        const double s2 = m * scale;
        const double acc = accuracy(classify(posterior_mean(Q_NN, Q_valN, Y, s2).mean), val_labels);
        best.accuracies.push_back(acc);
        if (acc > best.val_accuracy || (acc == best.val_accuracy && s2 > best.sigma2)) {
            best.val_accuracy = acc;
            best.multiplier = m;
            best.sigma2 = s2;
        }
    }
    return best;
}

struct RegressionResult {
    NoiseChoice noise;
    double test_accuracy = 0.0;
    double jitter = 0.0;
};

// Splits must already be preprocessed onto the sphere.
inline RegressionResult run_regression(const Splits& s, const RegressionConfig& cfg, const GramOptions& opt = {})
{
    const Eigen::MatrixXd Y = one_hot(s.train.targets, cfg.classes);
    const Eigen::MatrixXd Q = gram(s.train, nullptr, cfg.kernel, opt).values;
    const Eigen::MatrixXd Qv = gram(s.val, &s.train, cfg.kernel, opt).values;
    RegressionResult r;
    r.noise = tune_noise(Q, Qv, Y, s.val.targets, cfg.multipliers);
    const Eigen::MatrixXd Qt = gram(s.test, &s.train, cfg.kernel, opt).values;
    const Posterior p = posterior_mean(Q, Qt, Y, r.noise.sigma2);
    r.jitter = p.jitter;
    r.test_accuracy = accuracy(classify(p.mean), s.test.targets);
    return r;
}

} // namespace sresnet

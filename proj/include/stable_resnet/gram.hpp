#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dataset.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "scaling.hpp"

namespace sresnet {

enum class KernelKind { nngp, ntk };
enum class Normalization { covariance, correlation };

struct KernelDescriptor {
    ScalingScheme scheme = ScalingScheme::unscaled();
    long depth = 1;
    KernelHyper hyper{};
    KernelKind kind = KernelKind::nngp;
    Normalization norm = Normalization::correlation;

    void validate() const
    {
        hyper.validate();
        if (depth < 0)
            throw ContractError("kernel depth must be >= 0");
        if (norm == Normalization::correlation && hyper.sigma_b_sq != 0.0)
            throw ContractError("correlation kernels require sigma_b^2 = 0");
    }
};

// Kernel value at the descriptor's depth from raw input inner products.
// The correlation normalization divides by sqrt(Q_L(x,x) Q_L(x',x')) for both kinds.
inline double pair_kernel(const KernelDescriptor& k, double dot_ab, double dot_aa, double dot_bb)
{
    const bool ntk = k.kind == KernelKind::ntk;
    if (k.norm == Normalization::correlation) {
        const double r = std::sqrt(dot_aa * dot_bb);
        if (!(r > 0.0))
            throw ContractError("correlation kernel: zero input vector");
        const double c0 = std::clamp(dot_ab / r, -1.0, 1.0);
        const NormalizedPair p = normalized_at_depth(c0, k.hyper, k.scheme, k.depth);
        return ntk ? p.ntk : p.corr;
    }
    const PairState s = kernel_at_depth(q0_from_dots(dot_ab, dot_aa, dot_bb, k.hyper), k.hyper, k.scheme, k.depth, ntk);
    return ntk ? *s.theta_ab : s.q_ab;
}

// The kernel as a function of x.x' for unit-norm inputs.
inline std::function<double(double)> zonal_map(const KernelDescriptor& k)
{
    k.validate();
    return [k](double c) { return pair_kernel(k, c, 1.0, 1.0); };
}

// Depth-L zonal map tabulated at the Chebyshev points cos(j pi / M) and
// interpolated with 6-point Lagrange stencils in the angle. Intervals whose
// midpoint misses the direct value by more than tol * max(1, |k|) (and their
// neighbours) are evaluated directly.
class ZonalTable {
public:
    ZonalTable(const KernelDescriptor& k, int intervals = 4096, double tol = 1e-10)
        : m_(intervals), h_(std::numbers::pi / intervals), map_(zonal_map(k))
    {
        if (intervals < 8)
            throw ContractError("ZonalTable: need at least 8 intervals");
        v_.resize(m_ + 1);
        for (int j = 0; j <= m_; ++j)
            v_[j] = map_(std::cos(j * h_));
        direct_.assign(m_, 0);
        for (int i = 0; i < m_; ++i) {
            const double th = (i + 0.5) * h_;
            const double exact = map_(std::cos(th));
            if (std::abs(interpolate(th) - exact) > tol * std::max(1.0, std::abs(exact)))
                for (int q = std::max(0, i - 1); q <= std::min(m_ - 1, i + 1); ++q)
                    direct_[q] = 1;
        }
    }

    double operator()(double c) const
    {
        const double th = std::acos(std::clamp(c, -1.0, 1.0));
        const int cell = std::min(m_ - 1, static_cast<int>(th / h_));
        return direct_[cell] ? map_(c) : interpolate(th);
    }

    double at_one() const { return v_[0]; }
    long direct_intervals() const { return std::count(direct_.begin(), direct_.end(), 1); }

private:
    double interpolate(double th) const
    {
        const double pos = th / h_;
        const int i0 = std::clamp(static_cast<int>(std::floor(pos)) - 2, 0, m_ - 5);
        double acc = 0.0;
        for (int j = 0; j < 6; ++j) {
            double w = 1.0;
            for (int q = 0; q < 6; ++q)
                if (q != j)
                    w *= (pos - (i0 + q)) / static_cast<double>(j - q);
            acc += w * v_[i0 + j];
        }
        return acc;
    }

    int m_;
    double h_;
    std::function<double(double)> map_;
    std::vector<double> v_;
    std::vector<char> direct_;
};

struct GramMatrix {
    Eigen::MatrixXd values;
    KernelDescriptor descriptor;
    bool tabulated = false;
};

struct GramOptions {
    bool use_table = true;
    int table_intervals = 4096;
};

namespace detail {

inline bool unit_rows(const Eigen::MatrixXd& X)
{
    for (long i = 0; i < X.rows(); ++i)
        if (std::abs(X.row(i).squaredNorm() - 1.0) > 1e-9)
            return false;
    return true;
}

} // namespace detail

// Gram over rows of A against rows of B (B = nullptr: A against itself, exactly symmetric).
inline GramMatrix gram(const Eigen::MatrixXd& A, const Eigen::MatrixXd* B, const KernelDescriptor& k,
                       const GramOptions& opt = {})
{
    k.validate();
    const Eigen::MatrixXd& Bm = B ? *B : A;
    if (A.cols() != Bm.cols())
        throw ContractError("gram: input dimensions differ");
    if (k.norm == Normalization::covariance && A.cols() != k.hyper.input_dim)
        throw ContractError("gram: data dimension " + std::to_string(A.cols()) + " but input_dim " +
                            std::to_string(k.hyper.input_dim));
    const bool sym = B == nullptr;
    const long n = A.rows(), m = Bm.rows();

    const Eigen::MatrixXd dots = A * Bm.transpose();
    Eigen::VectorXd na = A.rowwise().squaredNorm(), nb = Bm.rowwise().squaredNorm();

    const bool zonal = k.norm == Normalization::correlation || (detail::unit_rows(A) && detail::unit_rows(Bm));
    GramMatrix g;
    g.descriptor = k;
    g.values.resize(n, m);

    if (opt.use_table && zonal) {
        g.tabulated = true;
        const ZonalTable table(k, opt.table_intervals);
        auto cosine = [&](long i, long j) {
            return k.norm == Normalization::correlation ? dots(i, j) / std::sqrt(na(i) * nb(j)) : dots(i, j);
        };
#pragma omp parallel for schedule(dynamic, 16)
        for (long i = 0; i < n; ++i)
            for (long j = sym ? i : 0; j < m; ++j)
                g.values(i, j) = (sym && i == j) ? table.at_one() : table(cosine(i, j));
    } else {
        std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 4)
        for (long i = 0; i < n; ++i) {
            try {
                for (long j = sym ? i : 0; j < m; ++j)
                    g.values(i, j) = pair_kernel(k, dots(i, j), na(i), nb(j));
            } catch (...) {
#pragma omp critical
                err = std::current_exception();
            }
        }
        if (err)
            std::rethrow_exception(err);
    }
    if (sym)
        for (long i = 0; i < n; ++i)
            for (long j = 0; j < i; ++j)
                g.values(i, j) = g.values(j, i);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < m; ++j)
            if (!std::isfinite(g.values(i, j)))
                throw KernelOverflow("gram: non-finite entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    return g;
}

inline GramMatrix gram(const Dataset& A, const Dataset* B, const KernelDescriptor& k, const GramOptions& opt = {})
{
    return gram(A.inputs, B ? &B->inputs : nullptr, k, opt);
}

struct SpectrumResult {
    std::vector<double> eigenvalues;
    double scale = 1.0; // the largest eigenvalue before normalization
};

inline SpectrumResult spectrum(const Eigen::MatrixXd& g, long k)
{
    if (g.rows() != g.cols() || g.rows() == 0)
        throw ContractError("spectrum: need a non-empty square matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericError("spectrum: eigensolver failed");
    const Eigen::VectorXd& ev = es.eigenvalues(); // ascending
    const long n = ev.size();
    const double top = ev(n - 1);
    if (!(top > 0.0))
        throw NumericError("spectrum: largest eigenvalue is not positive");
    if (ev(0) < -1e-8 * top)
        throw ContractError("spectrum: matrix is not PSD (min eigenvalue " + std::to_string(ev(0)) + ")");
    SpectrumResult r;
    r.scale = top;
    const long kk = std::min(k, n);
    r.eigenvalues.reserve(kk);
    for (long i = 0; i < kk; ++i)
        r.eigenvalues.push_back(ev(n - 1 - i) / top);
    return r;
}

inline SpectrumResult spectrum(const GramMatrix& g, long k) { return spectrum(g.values, k); }

struct Quadrature {
    std::vector<double> nodes, weights;
};

// Gauss-Legendre rule on [a, b] by Newton iteration on P_n.
inline Quadrature gauss_legendre(int n, double a = -1.0, double b = 1.0)
{
    if (n < 1)
        throw ContractError("gauss_legendre: order must be >= 1");
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = mid - half * x;
        q.nodes[n - 1 - i] = mid + half * x;
        q.weights[i] = q.weights[n - 1 - i] = half * w;
    }
    return q;
}

// mu_k = (Omega_{d-1}/Omega_d) int_{-1}^{1} p(t) P^d_k(t) (1-t^2)^{(d-3)/2} dt, integrated
// in the angle t = cos(theta). order = 0 picks max(4 k_max, 128).
inline SpectrumResult zonal_spectrum(const std::function<double(double)>& p, int d, int k_max, int order = 0)
{
    if (d < 2)
        throw ContractError("zonal_spectrum: d must be >= 2");
    if (k_max < 0)
        throw ContractError("zonal_spectrum: k_max must be >= 0");
    if (order == 0)
        order = std::max(4 * k_max, 128);
    if (order < 4 * k_max)
        throw ContractError("zonal_spectrum: quadrature order " + std::to_string(order) + " < 4 k_max");
    const double ratio = std::exp(std::lgamma(0.5 * d) - std::lgamma(0.5 * (d - 1))) / std::sqrt(std::numbers::pi);
    const Quadrature q = gauss_legendre(order, 0.0, std::numbers::pi);
    SpectrumResult r;
    r.eigenvalues.assign(k_max + 1, 0.0);
    std::vector<double> P(k_max + 1);
    for (int i = 0; i < order; ++i) {
        const double th = q.nodes[i];
        const double t = std::cos(th);
        const double w = q.weights[i] * std::pow(std::sin(th), d - 2) * p(t);
        P[0] = 1.0;
        if (k_max >= 1)
            P[1] = t;
        for (int k = 1; k < k_max; ++k)
            P[k + 1] = ((2.0 * k + d - 2) * t * P[k] - k * P[k - 1]) / (k + d - 2.0);
        for (int k = 0; k <= k_max; ++k)
            r.eigenvalues[k] += w * P[k];
    }
    for (double& mu : r.eigenvalues)
        mu *= ratio;
    return r;
}

} // namespace sresnet

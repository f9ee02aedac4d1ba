#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "stable_resnet.hpp"

namespace sresnet::cli {

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) { os_ << std::setprecision(17); }

    template <class... T>
    void row(const T&... cells)
    {
        bool first = true;
        ((os_ << (first ? "" : ","), put(cells), first = false), ...);
        os_ << "\n";
    }

private:
    void put(const std::string& s)
    {
        if (s.find_first_of(",\"\n") == std::string::npos) {
            os_ << s;
            return;
        }
        os_ << '"';
        for (char c : s)
            os_ << (c == '"' ? "\"\"" : std::string(1, c));
        os_ << '"';
    }
    void put(const char* s) { put(std::string(s)); }
    template <class T>
    void put(const T& v)
    {
        os_ << v;
    }
    std::ostream& os_;
};

struct Globals {
    std::string out;
    std::uint64_t seed = 0;
    int threads = 0;
};

struct Common {
    std::string scaling = "unscaled";
    double sigma_w2 = 2.0;
    double sigma_b2 = 0.0;
};

inline void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--scaling", c.scaling, "unscaled | uniform | decreasing | custom:<path>")->capture_default_str();
    sub->add_option("--sigma-w2", c.sigma_w2, "weight variance sigma_w^2")->capture_default_str();
    sub->add_option("--sigma-b2", c.sigma_b2, "bias variance sigma_b^2")->capture_default_str();
}

inline nlohmann::json resolved_flags(const CLI::App* app)
{
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options()) {
        const std::string name = opt->get_name();
        if (name == "--help" || name == "-h")
            continue;
        const bool flag = opt->get_items_expected_max() == 0 || opt->get_type_size_max() == 0;
        if (flag) {
            j[name] = opt->count() > 0;
        } else if (opt->count() > 0) {
            const auto& res = opt->results();
            j[name] = res.size() == 1 ? nlohmann::json(res[0]) : nlohmann::json(res);
        } else {
            j[name] = opt->get_default_str();
        }
    }
    return j;
}

inline int dispatch(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Infinite-width NNGP/NTK kernels of scaled residual networks", "stable_resnet"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--out", g.out, "write CSV here instead of standard output");
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (0 = auto)")->capture_default_str();
    app.fallthrough();

    // kernel-curve
    Common kc;
    long kc_depth = 0;
    bool kc_ntk = false;
    auto* s_kc = app.add_subcommand("kernel-curve", "diagonal NNGP (and NTK) through depth at a fixed point");
    add_common(s_kc, kc);
    s_kc->add_option("--depth", kc_depth, "network depth L")->required();
    s_kc->add_flag("--ntk", kc_ntk, "fill the theta_diag column");

    // spectrum
    Common sp;
    long sp_n = 1000, sp_top = 50;
    int sp_dim = 2;
    std::vector<long> sp_depths{1, 10, 100, 1000};
    bool sp_ntk = false;
    auto* s_sp = app.add_subcommand("spectrum", "normalized Gram eigenvalues of sphere points across depth");
    add_common(s_sp, sp);
    s_sp->add_option("--n", sp_n, "number of points")->capture_default_str();
    s_sp->add_option("--dim", sp_dim, "ambient dimension (2 = circle)")->capture_default_str();
    s_sp->add_option("--depths", sp_depths, "comma-separated depths")->delimiter(',')->capture_default_str();
    s_sp->add_option("--top", sp_top, "eigenvalues reported per depth")->capture_default_str();
    s_sp->add_flag("--ntk", sp_ntk, "use the NTK instead of the NNGP");

    // regress
    Common rg;
    long rg_train = 1000;
    std::vector<long> rg_depths{200};
    std::string rg_dataset, rg_labels, rg_format = "idx", rg_emit;
    bool rg_corr = false, rg_ntk = false;
    auto* s_rg = app.add_subcommand("regress", "GP posterior-mean classification with noise tuning");
    add_common(s_rg, rg);
    s_rg->add_option("--train", rg_train, "class-balanced training-set size")->capture_default_str();
    s_rg->add_option("--dataset", rg_dataset, "image file (IDX, optionally gzipped) or CSV")->required();
    s_rg->add_option("--labels", rg_labels, "IDX label file (derived from --dataset if omitted)");
    s_rg->add_option("--format", rg_format, "idx | csv")->check(CLI::IsMember({"idx", "csv"}))->capture_default_str();
    s_rg->add_option("--depth", rg_depths, "depth or comma-separated depths")->delimiter(',')->capture_default_str();
    s_rg->add_flag("--correlation", rg_corr, "use the correlation kernel");
    s_rg->add_flag("--ntk", rg_ntk, "use the NTK instead of the NNGP");
    s_rg->add_option("--emit", rg_emit, "csv: one row per configuration")->check(CLI::IsMember({"csv"}));

    // pacbayes
    Common pb;
    long pb_n = 50;
    int pb_dim = 50;
    std::vector<long> pb_depths{4, 8, 16, 32};
    double pb_sigma2 = 0.0, pb_delta = 0.05, pb_risk = 0.0;
    auto* s_pb = app.add_subcommand("pacbayes", "GP posterior KL and PAC-Bayes bound across depth");
    add_common(s_pb, pb);
    s_pb->add_option("--n", pb_n, "number of points")->capture_default_str();
    s_pb->add_option("--dim", pb_dim, "input dimension")->capture_default_str();
    s_pb->add_option("--depths", pb_depths, "comma-separated depths")->delimiter(',')->capture_default_str();
    s_pb->add_option("--sigma2", pb_sigma2, "noise variance (default 0.01 trace/N at the first depth)");
    s_pb->add_option("--delta", pb_delta, "confidence parameter")->capture_default_str();
    s_pb->add_option("--empirical-risk", pb_risk, "empirical risk entering the bound")->capture_default_str();

    // grad
    Common gd;
    long gd_depth = 0;
    auto* s_gd = app.add_subcommand("grad", "exact gradient second-moment profile");
    add_common(s_gd, gd);
    s_gd->add_option("--depth", gd_depth, "network depth L")->required();

    // mc-validate
    Common mc;
    long mc_width = 1024, mc_depth = 8, mc_samples = 2000;
    int mc_dim = 10;
    auto* s_mc = app.add_subcommand("mc-validate", "Monte-Carlo check of the kernel and gradient profile");
    add_common(s_mc, mc);
    s_mc->add_option("--width", mc_width, "hidden width")->capture_default_str();
    s_mc->add_option("--depth", mc_depth, "network depth")->capture_default_str();
    s_mc->add_option("--samples", mc_samples, "sampled networks")->capture_default_str();
    s_mc->add_option("--dim", mc_dim, "input dimension")->capture_default_str();

    // ode-check
    Common od;
    long od_steps = 1000, od_pairs = 20;
    int od_dim = 10;
    std::vector<long> od_depths{100, 1000, 10000};
    auto* s_od = app.add_subcommand("ode-check", "gap between the uniform recursion and its depth ODE");
    od.scaling = "uniform";
    add_common(s_od, od);
    s_od->add_option("--steps", od_steps, "minimum RK4 steps on [0,1]")->capture_default_str();
    s_od->add_option("--depths", od_depths, "comma-separated depths")->delimiter(',')->capture_default_str();
    s_od->add_option("--pairs", od_pairs, "random sphere pairs")->capture_default_str();
    s_od->add_option("--dim", od_dim, "input dimension")->capture_default_str();

    std::vector<std::string> args(argv.rbegin(), argv.rend());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    const auto t0 = std::chrono::steady_clock::now();
#ifdef _OPENMP
    if (g.threads > 0)
        omp_set_num_threads(g.threads);
#endif
    const CLI::App* sub = app.get_subcommands().front();

    std::ostringstream buffer;
    try {
        CsvWriter csv(buffer);
        auto hyper = [](const Common& c, int dim) {
            KernelHyper h{c.sigma_w2, c.sigma_b2, dim};
            h.validate();
            return h;
        };

        if (sub == s_kc) {
            const ScalingScheme s = parse_scheme(kc.scaling);
            const KernelHyper h = hyper(kc, 1);
            const PairState start = q0_from_dots(1.0, 1.0, 1.0, h);
            const auto traj = kc_ntk ? ntk_forward(start, h, s, kc_depth) : nngp_forward(start, h, s, kc_depth);
            csv.row("layer", "q_diag", "theta_diag");
            for (const PairState& p : traj) {
                if (kc_ntk)
                    csv.row(p.layer, p.q_aa, *p.theta_ab);
                else
                    csv.row(p.layer, p.q_aa, "");
            }
        } else if (sub == s_sp) {
            const ScalingScheme s = parse_scheme(sp.scaling);
            if (sp.sigma_b2 != 0.0)
                throw ContractError("spectrum uses correlation kernels; --sigma-b2 must be 0");
            const Eigen::MatrixXd X = sp_dim == 2 ? circle_points(sp_n, g.seed) : sphere_points(sp_n, sp_dim, 1.0, g.seed);
            csv.row("depth", "rank", "eigenvalue");
            for (long L : sp_depths) {
                KernelDescriptor k{s, L, hyper(sp, sp_dim), sp_ntk ? KernelKind::ntk : KernelKind::nngp,
                                   Normalization::correlation};
                const SpectrumResult r = spectrum(gram(X, nullptr, k), sp_top);
                for (std::size_t i = 0; i < r.eigenvalues.size(); ++i)
                    csv.row(L, i + 1, r.eigenvalues[i]);
            }
        } else if (sub == s_rg) {
            if (rg_corr && rg.sigma_b2 > 0.0)
                throw ContractError("--correlation requires --sigma-b2 0");
            if (!std::ifstream(rg_dataset))
                throw std::runtime_error("dataset file not found: " + rg_dataset);
            const ScalingScheme s = parse_scheme(rg.scaling);
            const Dataset pool =
                load_dataset(rg_dataset, rg_format == "csv" ? DataFormat::csv : DataFormat::idx, rg_labels);
            const Splits raw = class_balanced_split(pool, rg_train, g.seed);
            const auto pre = preprocess_sphere(raw.train, {raw.val, raw.test});
            const Splits sp3{pre[0], pre[1], pre[2]};
            if (rg_emit == "csv")
                csv.row("train", "depth", "scaling", "kernel", "normalization", "multiplier", "sigma2",
                        "val_accuracy", "test_accuracy", "jitter");
            for (long L : rg_depths) {
                RegressionConfig cfg;
                cfg.classes = pool.num_classes();
                cfg.kernel = {s, L, hyper(rg, static_cast<int>(pool.dim())), rg_ntk ? KernelKind::ntk : KernelKind::nngp,
                              rg_corr ? Normalization::correlation : Normalization::covariance};
                const RegressionResult r = run_regression(sp3, cfg);
                if (rg_emit == "csv") {
                    csv.row(rg_train, L, rg.scaling, rg_ntk ? "ntk" : "nngp", rg_corr ? "correlation" : "covariance",
                            r.noise.multiplier, r.noise.sigma2, r.noise.val_accuracy, r.test_accuracy, r.jitter);
                } else {
                    buffer << std::setprecision(17) << "depth=" << L << " sigma2=" << r.noise.sigma2
                           << " multiplier=" << r.noise.multiplier << " val_accuracy=" << r.noise.val_accuracy
                           << " test_accuracy=" << r.test_accuracy << "\n";
                }
            }
        } else if (sub == s_pb) {
            const ScalingScheme s = parse_scheme(pb.scaling);
            const KernelHyper h = hyper(pb, pb_dim);
            if (pb_depths.empty())
                throw ContractError("--depths must not be empty");
            const Eigen::MatrixXd X = sphere_points(pb_n, pb_dim, 1.0, g.seed);
            Eigen::VectorXd y(pb_n);
            for (long i = 0; i < pb_n; ++i)
                y(i) = X(i, 0) >= 0.0 ? 1.0 : -1.0;
            double s2 = pb_sigma2;
            csv.row("depth", "kl", "logdet", "trace", "quad", "bound");
            for (long L : pb_depths) {
                const KernelDescriptor k{s, L, h, KernelKind::nngp, Normalization::covariance};
                const Eigen::MatrixXd Q = gram(X, nullptr, k).values;
                if (!(s2 > 0.0))
                    s2 = 0.01 * Q.trace() / static_cast<double>(pb_n);
                const PacBayesReport r = gp_kl(Q, y, s2);
                csv.row(L, r.kl_divergence, r.logdet_term, r.trace_term, r.quad_term,
                        pac_bound(pb_risk, std::max(r.kl_divergence, 0.0), pb_n, pb_delta));
            }
        } else if (sub == s_gd) {
            const GradientProfile p = grad_profile(parse_scheme(gd.scaling), hyper(gd, 1), gd_depth);
            csv.row("layer", "qbar");
            for (std::size_t l = 0; l < p.qbar.size(); ++l)
                csv.row(l, p.qbar[l]);
        } else if (sub == s_mc) {
            McConfig cfg{mc_width, mc_depth, mc_samples, g.seed, parse_scheme(mc.scaling), hyper(mc, mc_dim)};
            const Eigen::MatrixXd P = sphere_points(2, mc_dim, std::sqrt(static_cast<double>(mc_dim)), g.seed ^ 0x5eedULL);
            const Eigen::VectorXd x = P.row(0).transpose(), xp = P.row(1).transpose();
            csv.row("quantity", "empirical", "analytic", "z");
            const McKernelCheck vx = mc_nngp_error(cfg, x, x);
            const McKernelCheck vp = mc_nngp_error(cfg, xp, xp);
            const McKernelCheck cx = mc_nngp_error(cfg, x, xp);
            csv.row("var_x", vx.empirical_cov, vx.analytic, vx.z_score);
            csv.row("var_xp", vp.empirical_cov, vp.analytic, vp.z_score);
            csv.row("cov_xxp", cx.empirical_cov, cx.analytic, cx.z_score);
            if (mc_width >= 256) {
                const McGradProfile gp = mc_grad_moment(cfg, x);
                for (long l = 0; l <= mc_depth; ++l) {
                    const double se = gp.std_errs[l] / gp.moments[mc_depth];
                    csv.row("grad_ratio_" + std::to_string(l), gp.ratios[l], gp.analytic[l],
                            se > 0.0 ? (gp.ratios[l] - gp.analytic[l]) / se : 0.0);
                }
            }
        } else if (sub == s_od) {
            const ScalingScheme s = parse_scheme(od.scaling);
            if (s.kind != ScalingKind::uniform)
                throw ContractError("ode-check compares against the uniform scheme; use --scaling uniform");
            const KernelHyper h = hyper(od, od_dim);
            const Eigen::MatrixXd P = sphere_points(2 * od_pairs, od_dim, std::sqrt(static_cast<double>(od_dim)), g.seed);
            csv.row("depth", "sup_gap");
            for (long L : od_depths) {
                const long sub_steps = std::max<long>(1, (od_steps + L - 1) / L);
                double gap = 0.0;
                for (long p = 0; p < od_pairs; ++p) {
                    const PairState st = q0(P.row(2 * p).transpose(), P.row(2 * p + 1).transpose(), h);
                    const auto disc = nngp_forward(st, h, s, L);
                    const auto cont = ode_trajectory(st, h, L, sub_steps);
                    for (long l = 0; l <= L; ++l) {
                        gap = std::max(gap, std::abs(disc[l].q_ab - cont[l].q_ab));
                        gap = std::max(gap, std::abs(disc[l].q_aa - cont[l].q_aa));
                        gap = std::max(gap, std::abs(disc[l].q_bb - cont[l].q_bb));
                    }
                }
                csv.row(L, gap);
            }
        }
    } catch (const std::exception& e) {
        err << "error: " << sub->get_name() << ": " << e.what() << "\n";
        return 1;
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json manifest{{"subcommand", sub->get_name()},
                            {"flags", resolved_flags(sub)},
                            {"seed", g.seed},
                            {"threads", g.threads},
                            {"version", kVersion},
                            {"outputs", g.out.empty() ? nlohmann::json::array({"-"}) : nlohmann::json::array({g.out})},
                            {"wall_clock_s", wall}};
    if (g.out.empty()) {
        out << buffer.str();
        err << "# manifest " << manifest.dump() << "\n";
    } else {
        std::ofstream f(g.out);
        if (!f) {
            err << "error: cannot write " << g.out << "\n";
            return 1;
        }
        f << buffer.str();
        std::ofstream m(g.out + ".manifest.json");
        m << manifest.dump() << "\n";
    }
    return 0;
}

inline int dispatch(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args);
}

} // namespace sresnet::cli

// gsopt command-line driver: run, sweep, verify, bias-demo, bounds, plot.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gsopt/gsopt.hpp"

namespace fs = std::filesystem;
using namespace gsopt;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kDiverged = 3, kVerifyFailed = 4 };

std::string manifest_text(const ExperimentConfig& cfg, const std::vector<RunRecord>& recs,
                          const std::vector<std::string>& notes) {
    std::string m = "config_hash=" + cfg.hash() + "\n";
    m += "problem=" + cfg.problem.id + "\n";
    for (const auto& n : notes) m += "note=" + n + "\n";
    m += "file,label,seed,stop,h_cap_hits,final_t,final_objective,final_samples\n";
    for (const auto& r : recs) {
        m += trajectory_filename(r) + ',' + r.label + ',' + std::to_string(r.seed) + ',' + to_string(r.stop) + ',' +
             std::to_string(r.h_cap_hits);
        if (r.iterations.empty()) {
            m += ",,,\n";
        } else {
            const auto& b = r.iterations.back();
            m += ',' + std::to_string(b.t) + ',' + format_double(b.objective) + ',' + std::to_string(b.cumulative_samples) + '\n';
        }
    }
    return m;
}

void write_records(const fs::path& out, const std::vector<RunRecord>& recs) {
    for (const auto& r : recs) write_trajectory_csv(r, out / trajectory_filename(r));
}

int cmd_run(const std::string& config, const fs::path& out, std::optional<std::uint64_t> seed, std::size_t threads,
            int verbosity) {
    auto cfg = load_config(config);
    if (seed) cfg.seeds = {*seed};
    if (threads) cfg.threads = threads;
    auto res = run_experiment(cfg);
    fs::create_directories(out);
    write_records(out, res.records);
    write_text(out / "manifest.txt", manifest_text(cfg, res.records, res.warnings));
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::size_t diverged = 0;
    for (const auto& r : res.records) {
        diverged += r.diverged();
        if (verbosity > 0) {
            const auto& b = r.iterations.back();
            std::printf("%-10s seed=%-4llu stop=%-13s t=%-8llu objective=%.6g samples=%llu\n", r.label.c_str(),
                        static_cast<unsigned long long>(r.seed), to_string(r.stop), static_cast<unsigned long long>(b.t),
                        b.objective, static_cast<unsigned long long>(b.cumulative_samples));
        }
    }
    std::printf("wrote %zu trajectories to %s (config %s)\n", res.records.size(), out.string().c_str(), cfg.hash().c_str());
    if (diverged == res.records.size()) {
        std::cerr << "all runs diverged\n";
        return kDiverged;
    }
    return kOk;
}

int cmd_sweep(const std::string& config, const fs::path& out, const std::string& axis, const std::string& values,
              const std::string& optimizer, std::optional<std::uint64_t> seed, std::size_t threads) {
    auto cfg = load_config(config);
    if (seed) cfg.seeds = {*seed};
    if (threads) cfg.threads = threads;
    SweepSpec spec = cfg.sweep.value_or(SweepSpec{});
    if (!axis.empty()) spec.axis = axis;
    if (!optimizer.empty()) spec.optimizer = optimizer;
    if (!values.empty()) {
        spec.values.clear();
        for (const auto& v : split_fields(values)) {
            auto d = parse_double(v);
            if (!d) throw ConfigError("bad sweep value '" + v + "'");
            spec.values.push_back(*d);
        }
    }
    if (spec.axis.empty()) throw ConfigError("sweep needs an axis (sweep.axis or --axis)");
    auto res = run_sweep(cfg, spec);
    fs::create_directories(out);
    for (std::size_t k = 0; k < res.records.size(); ++k) {
        const auto& row = res.rows[k];
        std::string name = row.method + "_" + spec.axis + "_" + format_double(row.value) + "_seed" + std::to_string(row.seed) + ".csv";
        write_trajectory_csv(res.records[k], out / name);
    }
    write_summary_csv(res.rows, out / "summary.csv");
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::size_t diverged = 0;
    for (const auto& r : res.rows) diverged += r.diverged;
    std::printf("wrote %zu sweep rows to %s\n", res.rows.size(), (out / "summary.csv").string().c_str());
    return diverged == res.rows.size() ? kDiverged : kOk;
}

int cmd_verify(const std::string& suite) {
    auto results = run_verify_suite(suite);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%s\n", format_check(r).c_str());
        ok = ok && r.pass;
    }
    return ok ? kOk : kVerifyFailed;
}

int cmd_bias_demo(double beta) {
    std::vector<Vec> support{{2.0, 0.0}, {0.0, 1.0}};
    auto r = estimator_bias_exact(support, {0.5, 0.5}, beta);
    std::printf("support {(2,0), (0,1)} with probability 1/2 each, beta=%g\n", beta);
    std::printf("grad F            = (%.6g, %.6g)\n", r.grad[0], r.grad[1]);
    std::printf("AN-SGD  E[g/|g|^b]          = (%.6g, %.6g)  cosine=%.12f\n", r.an_sgd.mean[0], r.an_sgd.mean[1],
                r.an_sgd.cosine.value_or(NAN));
    std::printf("IAN-SG  E[g_xi/|g_xi'|^b]   = (%.6g, %.6g)  cosine=%.12f\n", r.ian_sg.mean[0], r.ian_sg.mean[1],
                r.ian_sg.cosine.value_or(NAN));
    return kOk;
}

struct BoundsArgs {
    double eps = 1e-3, mu = 0.5, rho = 2.0, beta = 1.0, l0 = 1.0, l1 = 1.0, tau1 = 0.0, tau2 = 1.0, gap = 1.0, iters = 1e4;
    std::optional<double> G;
};

int cmd_bounds(const BoundsArgs& a) {
    auto t1 = angd_iteration_bound(a.eps, a.mu, a.rho, a.beta, a.l0, a.l1, a.gap);
    const char* names[] = {"", "polynomial regime (beta < 2 - rho)", "linear regime (beta = 2 - rho)",
                           "two-phase regime (beta > 2 - rho)"};
    std::printf("AN-GD step size gamma       = %.17g\n", t1.gamma);
    std::printf("AN-GD iteration bound       = %.17g  [%s]\n", t1.T, names[t1.regime_case]);
    if (t1.entry_expression)
        std::printf("two-phase entry level       = %.17g  (order-level, constant 1)\n", *t1.entry_expression);
    if (a.G) {
        std::printf("GD step size (rho=alpha=1)  = %.17g\n", gd_bounded_gradient_stepsize(a.l0, a.l1, *a.G));
        std::printf("GD iteration order G/eps    = %.17g\n", gd_bounded_gradient_bound(*a.G, a.eps));
    }
    if (!(a.beta > 0.0)) {
        std::printf("IAN-SGD parameters need beta in (0,1]; skipped for beta=%g\n", a.beta);
        return kOk;
    }
    auto p = iansgd_theoretical_params(a.tau1, a.tau2, a.l0, a.l1, a.beta, a.iters);
    std::printf("IAN-SGD (gamma, A, delta, Gamma) for T=%g = (%.17g, %.17g, %.17g, %.17g)\n", a.iters, p.gamma, p.A,
                p.delta, p.Gamma);
    std::printf("IAN-SGD iteration bound     = %.17g\n",
                iansgd_iteration_bound(a.eps, a.tau1, a.tau2, a.l0, a.l1, a.beta, a.gap));
    return kOk;
}

int cmd_plot(const std::vector<std::string>& csvs, const fs::path& out) {
    std::vector<fs::path> paths(csvs.begin(), csvs.end());
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    auto r = emit_svg_plot(paths, out);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::printf("wrote %s\n", out.string().c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized-smooth optimization experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    int verbosity = 0;
    app.add_flag("-v,--verbose", verbosity, "More output");

    std::string config, out = "out", axis, values, optimizer, suite;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;

    auto* run = app.add_subcommand("run", "Run every configured optimizer for every seed");
    run->add_option("-c,--config", config, "Config file")->required();
    run->add_option("-o,--out", out, "Output directory");
    run->add_option("--seed", seed, "Run only this seed");
    run->add_option("-j,--threads", threads, "Worker threads");

    auto* sweep = app.add_subcommand("sweep", "Sweep one parameter axis");
    sweep->add_option("-c,--config", config, "Config file")->required();
    sweep->add_option("-o,--out", out, "Output directory");
    sweep->add_option("--axis", axis, "Axis name");
    sweep->add_option("--values", values, "Comma-separated values");
    sweep->add_option("--optimizer", optimizer, "Optimizer label to sweep");
    sweep->add_option("--seed", seed, "Run only this seed");
    sweep->add_option("-j,--threads", threads, "Worker threads");

    auto* verify = app.add_subcommand("verify", "Run numerical verification checks");
    verify->add_option("suite", suite, "smoothness | pl | noise | bias | descent | inequalities | all")->required();

    double bias_beta = 1.0;
    auto* bias = app.add_subcommand("bias-demo", "Exact estimator bias on a two-point support");
    bias->add_option("--beta", bias_beta, "Normalization exponent");

    BoundsArgs ba;
    double G = 0.0;
    auto* bounds = app.add_subcommand("bounds", "Iteration bounds and theory-driven parameters");
    bounds->add_option("--eps", ba.eps);
    bounds->add_option("--mu", ba.mu);
    bounds->add_option("--rho", ba.rho);
    bounds->add_option("--beta", ba.beta);
    bounds->add_option("--l0", ba.l0);
    bounds->add_option("--l1", ba.l1);
    bounds->add_option("--tau1", ba.tau1);
    bounds->add_option("--tau2", ba.tau2);
    bounds->add_option("--gap", ba.gap, "Initial gap F(w0) - F*");
    bounds->add_option("--iters", ba.iters, "Horizon T for the IAN-SGD parameters");
    auto* gopt = bounds->add_option("--G", G, "Gradient bound for the GD rate");

    std::vector<std::string> csvs;
    std::string plot_out = "plot.svg";
    auto* plot = app.add_subcommand("plot", "SVG of objective vs cumulative samples");
    plot->add_option("csv", csvs, "Trajectory CSV files")->required();
    plot->add_option("-o,--out", plot_out, "Output SVG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*run) return cmd_run(config, out, seed, threads, verbosity);
        if (*sweep) return cmd_sweep(config, out, axis, values, optimizer, seed, threads);
        if (*verify) return cmd_verify(suite);
        if (*bias) return cmd_bias_demo(bias_beta);
        if (*bounds) {
            if (gopt->count()) ba.G = G;
            return cmd_bounds(ba);
        }
        if (*plot) return cmd_plot(csvs, plot_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gsopt/analysis.hpp"
#include "gsopt/core.hpp"
#include "gsopt/harness.hpp"
#include "gsopt/optimizers.hpp"
#include "gsopt/problems.hpp"

namespace gsopt {

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst_margin = 0.0;
    std::size_t samples = 0;
    std::string detail;
};

inline std::string short_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

inline std::string format_check(const CheckResult& c) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", c.worst_margin);
    return std::string(c.pass ? "PASS" : "FAIL") + "  " + c.name + "  worst_margin=" + buf +
           "  n=" + std::to_string(c.samples) + (c.detail.empty() ? "" : "  " + c.detail);
}

// Instance used across the checks: the default phase-retrieval setup.
inline PhaseRetrievalInstance default_phase_retrieval(std::uint64_t seed = 0) {
    Rng rng = Rng(seed).split("data");
    return generate_phase_retrieval(100, 3000, {0.0, 0.5}, {0.0, 0.5}, {0.0, 16.0}, rng);
}

inline std::vector<std::pair<Vec, Vec>> random_box_pairs(std::size_t d, std::size_t count, double lo, double hi, Rng& rng) {
    std::vector<std::pair<Vec, Vec>> out(count);
    for (auto& [a, b] : out) {
        a.resize(d);
        b.resize(d);
        for (auto& x : a) x = lo + (hi - lo) * rng.uniform();
        for (auto& x : b) x = lo + (hi - lo) * rng.uniform();
    }
    return out;
}

// ---------------------------------------------------------------- suites

inline std::vector<CheckResult> verify_smoothness() {
    std::vector<CheckResult> out;
    {
        auto inst = default_phase_retrieval();
        PhaseRetrieval pr(inst.data);
        FiniteSumOracle oracle(pr);
        Rng rng = Rng(7).split("pairs");
        auto pairs = random_box_pairs(pr.dim(), 1000, -2.0, 2.0, rng);
        auto chk = check_smoothness_pairs(oracle, inst.data.declared_geometry(), pairs, true);
        CheckResult c;
        c.name = "phase_retrieval symmetric smoothness, declared constants";
        c.pass = chk.violations == 0 && chk.pairs == pairs.size();
        c.worst_margin = 1.0 - chk.max_ratio;
        c.samples = chk.pairs;
        c.detail = "max_ratio=" + format_double(chk.max_ratio);
        out.push_back(c);
    }
    {
        Rng rng = Rng(11).split("dro");
        auto data = generate_dro_regression(500, 34, rng);
        DroDual dro(data);
        FiniteSumOracle oracle(dro);
        std::vector<Vec> cloud(40);
        for (auto& w : cloud) {
            w.resize(dro.dim());
            for (auto& x : w) x = rng.normal(0.0, 0.25);
        }
        auto fit = estimate_smoothness(oracle, 1.0, cloud);
        CheckResult c;
        c.name = "dro empirical (L0, L1) fit, alpha=1";
        c.pass = std::isfinite(fit.l0) && std::isfinite(fit.l1) && fit.l0 >= 0.0 && fit.l1 >= 0.0;
        c.worst_margin = 1.0 - fit.max_violation_ratio;
        c.samples = fit.pairs;
        c.detail = "L0=" + format_double(fit.l0) + " L1=" + format_double(fit.l1) + " (reported, not asserted)";
        out.push_back(c);
    }
    return out;
}

inline std::vector<CheckResult> verify_pl() {
    std::vector<CheckResult> out;
    Rng rng(3);
    for (double p : {2.0, 3.0, 4.0, 6.0}) {
        PowerFunction f(p, 10);
        ExactOracle oracle(f);
        std::vector<Vec> pts(200);
        for (auto& w : pts) {
            w.resize(10);
            double scale = std::exp(rng.normal(0.0, 1.0));
            for (auto& x : w) x = scale * rng.normal();
        }
        auto rep = check_pl(pl_samples(oracle, pts), 0.0, f.mu(), f.rho());
        CheckResult c;
        c.name = "power p=" + short_num(p) + " generalized PL identity";
        c.pass = rep.fraction == 1.0 && std::fabs(rep.worst_margin) <= 1e-9;
        c.worst_margin = rep.worst_margin;
        c.samples = rep.count;
        out.push_back(c);
    }
    return out;
}

inline CheckResult noise_audit(double tau1, double tau2, std::size_t points, std::size_t draws_per_point,
                               std::uint64_t seed) {
    PowerFunction f(4.0, 10);
    NoiseSpec ns{tau1, tau2};
    NoisyOracle oracle(f, ns);
    Rng rng(seed);
    std::vector<Vec> pts(points);
    for (auto& w : pts) {
        w.resize(10);
        for (auto& x : w) x = rng.normal();
    }
    auto a = verify_affine_noise(oracle, pts, draws_per_point, ns, rng);
    CheckResult c;
    c.name = "noise tau1=" + short_num(tau1) + " tau2=" + short_num(tau2);
    c.pass = a.violations() == 0;
    c.worst_margin = a.worst_slack;
    c.samples = a.draws;
    c.detail = "violations=" + std::to_string(a.violations());
    return c;
}

inline std::vector<CheckResult> verify_noise(std::size_t draws_per_point = 10000) {
    std::vector<CheckResult> out;
    std::uint64_t seed = 100;
    for (double t1 : {0.0, 0.5, 0.8})
        for (double t2 : {1e-3, 1.0, 10.0}) out.push_back(noise_audit(t1, t2, 10, draws_per_point, seed++));
    return out;
}

inline std::vector<CheckResult> verify_bias() {
    auto r = estimator_bias_exact({{2.0, 0.0}, {0.0, 1.0}}, {0.5, 0.5}, 1.0);
    CheckResult a;
    a.name = "IAN-SG estimator parallel to grad F (exact enumeration)";
    a.pass = r.ian_sg.cosine && *r.ian_sg.cosine >= 1.0 - 1e-12;
    a.worst_margin = r.ian_sg.cosine ? *r.ian_sg.cosine - 1.0 : -1.0;
    a.samples = r.ian_sg.samples;
    a.detail = "cosine=" + format_double(r.ian_sg.cosine.value_or(NAN));
    CheckResult b;
    b.name = "AN-SGD estimator is biased in direction";
    b.pass = r.an_sgd.cosine && *r.an_sgd.cosine < 1.0 - 1e-6;
    b.worst_margin = r.an_sgd.cosine ? 1.0 - *r.an_sgd.cosine : -1.0;
    b.samples = r.an_sgd.samples;
    b.detail = "cosine=" + format_double(r.an_sgd.cosine.value_or(NAN));
    return {a, b};
}

struct DescentPlCase {
    double p, beta, eps;
    std::size_t T;
};

inline CheckResult angd_descent_pl_check(const DescentPlCase& k) {
    PowerFunction f(k.p, 10);
    auto g = f.geometry();
    double gamma = angd_theoretical_stepsize(k.eps, *g.mu, *g.rho, k.beta, g.l0, g.l1);
    auto gaps = run_angd_gaps(f, Vec(10, 1.0), gamma, k.beta, k.T);
    auto rep = check_descent_pl(gaps, gamma, *g.mu, *g.rho, k.beta, k.eps);
    CheckResult c;
    c.name = "AN-GD descent under PL, p=" + short_num(k.p) + " beta=" + short_num(k.beta);
    c.pass = rep.fraction == 1.0;
    c.worst_margin = rep.worst_slack;
    c.samples = rep.checked;
    return c;
}

inline std::vector<DescentPlCase> descent_pl_cases() {
    return {{2.0, 0.0, 1e-3, 2000}, {2.0, 0.5, 1e-3, 2000}, {2.0, 1.0, 1e-3, 2000}, {3.0, 0.5, 1e-3, 5000},
            {4.0, 2.0 / 3.0, 1e-3, 3000}, {4.0, 0.3, 1e-3, 5000}, {4.0, 1.0, 1e-3, 5000}};
}

inline CheckResult iansgd_recursion_check(std::size_t runs = 100, double gamma_multiplier = 1.0) {
    IanRecursionSetup S;
    S.runs = runs;
    S.gamma_multiplier = gamma_multiplier;
    auto rep = verify_iansgd_pl_recursion(S);
    CheckResult c;
    c.name = "IAN-SGD expected descent under PL, R=" + std::to_string(runs);
    c.pass = rep.fraction >= 0.95;
    c.worst_margin = rep.worst_slack;
    c.samples = rep.checked;
    c.detail = "fraction=" + format_double(rep.fraction);
    return c;
}

// Descent lemma on consecutive iterates of an IAN-SGD run on phase retrieval.
inline CheckResult phase_retrieval_descent_monitor(std::size_t iters = 300) {
    auto inst = default_phase_retrieval();
    PhaseRetrieval pr(inst.data);
    FiniteSumOracle oracle(pr);
    auto geo = inst.data.declared_geometry();
    OptimizerConfig cfg;
    cfg.method = Method::iansgd;
    cfg.gamma = 0.25;
    cfg.beta = 2.0 / 3.0;
    cfg.batch_b = 64;
    cfg.batch_bprime = 4;
    cfg.delta = 1e-3;
    cfg.scale_a = 1.0;
    cfg.gamma_cap = 20.0;
    Optimizer opt(cfg, oracle, Rng(0).split("monitor"));
    OptimizerState s;
    Rng init = Rng(0).split("init");
    s.w.resize(pr.dim());
    for (auto& x : s.w) x = init.normal(1.0, 6.0);
    CheckResult c;
    c.name = "descent lemma on phase-retrieval iterates";
    c.worst_margin = INFINITY;
    std::size_t bad = 0;
    for (std::size_t t = 0; t < iters; ++t) {
        Vec prev = s.w;
        opt.step(s);
        double m = descent_lemma_margin(oracle, geo, prev, s.w);
        Vec g;
        double scale = std::max(1.0, std::fabs(oracle.full(prev, g)));
        c.worst_margin = std::min(c.worst_margin, m / scale);
        bad += m < 0.0;
        ++c.samples;
    }
    c.pass = bad == 0;
    c.detail = "violations=" + std::to_string(bad);
    return c;
}

inline std::vector<CheckResult> verify_descent() {
    std::vector<CheckResult> out;
    for (const auto& k : descent_pl_cases()) out.push_back(angd_descent_pl_check(k));
    out.push_back(iansgd_recursion_check());
    out.push_back(phase_retrieval_descent_monitor());
    return out;
}

inline CheckResult technical_inequality_fuzz(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    CheckResult c;
    c.name = "technical inequality C x^w <= x^w' + C^(w'/D)";
    c.worst_margin = INFINITY;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = rng.uniform() < 0.1 ? 0.0 : std::exp(rng.normal(0.0, 3.0));
        double C = rng.uniform() < 0.05 ? 1.0 : rng.uniform();
        double w = 5.0 * rng.uniform();
        double wp = w + 5.0 * rng.uniform();
        double D = (wp - w) + 5.0 * rng.uniform() + 1e-9;
        bool ok = verify_technical_inequality(x, C, D, w, wp);
        double lhs = C * std::pow(x, w), rhs = std::pow(x, wp) + std::pow(C, wp / D);
        c.worst_margin = std::min(c.worst_margin, (rhs - lhs) / std::max(rhs, 1e-300));
        bad += !ok;
        ++c.samples;
    }
    c.pass = bad == 0;
    c.detail = "violations=" + std::to_string(bad);
    return c;
}

// Tuples follow the premises of the bound: the IAN-SGD theory parameters, beta >= alpha,
// and an independent-batch norm consistent with the affine noise model.
inline CheckResult noise_term_fuzz(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    CheckResult c;
    c.name = "noise-term upper bound";
    c.worst_margin = INFINITY;
    std::size_t bad = 0;
    auto logu = [&](double lo, double hi) { return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform()); };
    for (std::size_t i = 0; i < n; ++i) {
        double tau1 = 0.95 * rng.uniform();
        double tau2 = logu(1e-3, 10.0);
        double L0 = logu(0.1, 100.0), L1 = logu(0.1, 100.0);
        double alpha = rng.uniform();
        double beta = alpha + (1.0 - alpha) * rng.uniform();
        if (beta <= 0.0) beta = 1e-3;
        double T = logu(1.0, 1e8);
        auto P = iansgd_theoretical_params(tau1, tau2, L0, L1, beta, T);
        double gF = logu(1e-4, 1e4);
        double lo = std::max(0.0, (1.0 - tau1) * gF - tau2), hi = (1.0 + tau1) * gF + tau2;
        double gp = lo + (hi - lo) * rng.uniform();
        double h = std::max(1.0, P.Gamma * (P.A * gp + P.delta));
        double m = noise_term_margin({P.gamma, tau2, h, gF, alpha, beta, L0, L1});
        c.worst_margin = std::min(c.worst_margin, m);
        bad += m < -1e-12;
        ++c.samples;
    }
    c.pass = bad == 0;
    c.detail = "violations=" + std::to_string(bad);
    return c;
}

inline std::vector<CheckResult> verify_inequalities(std::size_t n = 100000) {
    return {technical_inequality_fuzz(n, 51), noise_term_fuzz(n, 52)};
}

inline const std::vector<std::string>& verify_suites() {
    static const std::vector<std::string> s{"smoothness", "pl", "noise", "bias", "descent", "inequalities", "all"};
    return s;
}

inline std::vector<CheckResult> run_verify_suite(const std::string& suite) {
    std::vector<CheckResult> out;
    auto add = [&](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };
    bool all = suite == "all";
    bool known = false;
    if (all || suite == "smoothness") known = true, add(verify_smoothness());
    if (all || suite == "pl") known = true, add(verify_pl());
    if (all || suite == "noise") known = true, add(verify_noise());
    if (all || suite == "bias") known = true, add(verify_bias());
    if (all || suite == "descent") known = true, add(verify_descent());
    if (all || suite == "inequalities") known = true, add(verify_inequalities());
    if (!known) throw ConfigError("unknown verify suite '" + suite + "'");
    return out;
}

}  // namespace gsopt

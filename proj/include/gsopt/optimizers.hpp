#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gsopt/core.hpp"
#include "gsopt/problems.hpp"

namespace gsopt {

// Denominators |.|^beta below this are treated as a stationary point.
inline constexpr double kZeroGuard = 1e-30;

enum class Method { gd, angd, sgd, nsgd, nsgdm, clipped, spider, iansgd };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::gd: return "gd";
        case Method::angd: return "angd";
        case Method::sgd: return "sgd";
        case Method::nsgd: return "nsgd";
        case Method::nsgdm: return "nsgdm";
        case Method::clipped: return "clipped";
        case Method::spider: return "spider";
        case Method::iansgd: return "iansgd";
    }
    return "?";
}

inline std::optional<Method> method_from(const std::string& s) {
    for (auto m : {Method::gd, Method::angd, Method::sgd, Method::nsgd, Method::nsgdm, Method::clipped, Method::spider,
                   Method::iansgd})
        if (s == to_string(m)) return m;
    return std::nullopt;
}

struct OptimizerConfig {
    Method method = Method::sgd;
    double gamma = 0.01;
    double beta = 1.0;
    std::optional<double> clip;
    std::optional<double> delta;
    std::optional<double> gamma_cap;  // Gamma in h = max{1, Gamma (A |g'| + delta)}
    std::optional<double> scale_a;    // A
    std::optional<double> momentum;   // theta
    std::size_t batch_b = 1;
    std::optional<std::size_t> batch_bprime;
    std::optional<std::size_t> spider_epoch;
    std::optional<double> h_cap;  // optional ceiling on h, off by default
    std::size_t max_iters = 0;

    // Throws on structural errors, returns soft warnings.
    std::vector<std::string> validate(std::optional<double> alpha = std::nullopt) const {
        std::vector<std::string> warn;
        if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be a finite nonnegative number");
        if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
        if (batch_b == 0) throw ConfigError("batch size must be positive");
        switch (method) {
            case Method::nsgdm:
                if (!momentum) throw ConfigError("nsgdm needs momentum");
                if (!(*momentum >= 0.0 && *momentum <= 1.0)) throw ConfigError("momentum must lie in [0,1]");
                break;
            case Method::clipped:
                if (!clip || !(*clip > 0.0)) throw ConfigError("clipped needs a positive clip threshold");
                break;
            case Method::spider:
                if (!spider_epoch || *spider_epoch == 0) throw ConfigError("spider needs spider_epoch >= 1");
                if (batch_bprime && *batch_bprime < batch_b) throw ConfigError("spider refresh batch must be >= batch_b");
                break;
            case Method::iansgd:
                if (!batch_bprime || *batch_bprime == 0) throw ConfigError("iansgd needs batch_bprime");
                if (!scale_a || !(*scale_a > 0.0)) throw ConfigError("iansgd needs positive A");
                if (!delta || !(*delta > 0.0)) throw ConfigError("iansgd needs positive delta");
                if (!gamma_cap || !(*gamma_cap > 0.0)) throw ConfigError("iansgd needs positive Gamma");
                if (h_cap && !(*h_cap >= 1.0)) throw ConfigError("h_cap must be >= 1");
                break;
            default: break;
        }
        bool normalized = method == Method::angd || method == Method::nsgd || method == Method::nsgdm ||
                          method == Method::spider || method == Method::iansgd;
        if (alpha && normalized && beta < *alpha)
            warn.push_back("beta=" + format_double(beta) + " is below the smoothness exponent alpha=" +
                           format_double(*alpha));
        return warn;
    }

    std::string snapshot() const {
        std::string s = std::string("method=") + to_string(method) + " gamma=" + format_double(gamma) +
                        " beta=" + format_double(beta) + " batch_b=" + std::to_string(batch_b);
        auto add = [&](const char* k, const auto& v) {
            if (v) {
                s += ' ';
                s += k;
                s += '=';
                if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, double>)
                    s += format_double(*v);
                else
                    s += std::to_string(*v);
            }
        };
        add("clip", clip);
        add("delta", delta);
        add("gamma_cap", gamma_cap);
        add("scale_a", scale_a);
        add("momentum", momentum);
        add("batch_bprime", batch_bprime);
        add("spider_epoch", spider_epoch);
        add("h_cap", h_cap);
        return s;
    }
};

struct OptimizerState {
    Vec w;
    std::size_t t = 0;
    std::optional<Vec> m;       // nsgdm
    std::optional<Vec> v;       // spider estimator
    std::optional<Vec> w_prev;  // spider anchor
};

// ---------------------------------------------------------------- step rules

inline void apply_scaled(Vec& w, const Vec& g, double scale) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * g[i];
}

inline void gd_step(OptimizerState& s, const Vec& grad, double gamma) {
    apply_scaled(s.w, grad, gamma);
    ++s.t;
}

inline void sgd_step(OptimizerState& s, const Vec& g, double gamma) { gd_step(s, g, gamma); }

inline void angd_step(OptimizerState& s, const Vec& grad, double gamma, double beta) {
    double n = l2_norm(grad);
    if (n > kZeroGuard) apply_scaled(s.w, grad, gamma / std::pow(n, beta));
    ++s.t;
}

inline void nsgd_step(OptimizerState& s, const Vec& g, double gamma, double beta) { angd_step(s, g, gamma, beta); }

inline void nsgdm_step(OptimizerState& s, const Vec& g, double gamma, double beta, double theta) {
    if (!s.m) s.m = g;
    Vec& m = *s.m;
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (1.0 - theta) * m[i] + theta * g[i];
    double n = l2_norm(m);
    if (n > kZeroGuard) apply_scaled(s.w, m, gamma / std::pow(n, beta));
    ++s.t;
}

inline void clipped_sgd_step(OptimizerState& s, const Vec& g, double gamma, double c) {
    double n = l2_norm(g);
    double factor = n > c ? c / n : 1.0;
    apply_scaled(s.w, g, gamma * factor);
    ++s.t;
}

inline double iansgd_normalizer(const Vec& g_prime, double A, double delta, double Gamma) {
    return std::max(1.0, Gamma * (A * l2_norm(g_prime) + delta));
}

inline void iansgd_step(OptimizerState& s, const Vec& g, double h, double gamma, double beta) {
    apply_scaled(s.w, g, gamma / std::pow(h, beta));
    ++s.t;
}

// ---------------------------------------------------------------- theory-driven parameters

// Step size making AN-GD reach an eps-accurate value gap.
inline double angd_theoretical_stepsize(double eps, double mu, double rho, double beta, double L0, double L1) {
    if (!(mu > 0.0)) throw ConfigError("mu must be positive");
    if (!(rho > 0.0 && rho <= 2.0)) throw ConfigError("rho must lie in (0,2]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
    if (!(L0 >= 0.0 && L1 >= 0.0)) throw ConfigError("L0, L1 must be nonnegative");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (eps > 1.0) throw ConfigError("eps must satisfy eps <= 1");
    if (eps > 1.0 / (2.0 * mu)) throw ConfigError("eps must satisfy eps <= 1/(2 mu)");
    double g = std::pow(2.0 * mu * eps, beta / rho) / (8.0 * (L0 + L1) + 1.0);
    if (g > 2.0 / mu) throw Error("angd step size exceeds 2/mu");
    return g;
}

// GD with a bounded-gradient assumption, rho = alpha = 1.
inline double gd_bounded_gradient_stepsize(double L0, double L1, double G) {
    if (!(L0 > 0.0) || !(L1 >= 0.0) || !(G > 0.0)) throw ConfigError("need L0 > 0, L1 >= 0, G > 0");
    double a = 1.0 / L0;
    if (L1 > 0.0) a = std::min(a, 1.0 / (2.0 * L1 * G));
    return a;
}

struct IanSgdParams {
    double gamma, A, delta, Gamma;
};

inline IanSgdParams iansgd_theoretical_params(double tau1, double tau2, double L0, double L1, double beta, double T) {
    if (!(tau1 >= 0.0 && tau1 < 1.0)) throw ConfigError("tau1 must lie in [0,1)");
    if (!(tau2 > 0.0)) throw ConfigError("tau2 must be positive");
    if (!(L0 > 0.0 && L1 > 0.0)) throw ConfigError("L0 and L1 must be positive");
    if (beta == 0.0) throw ConfigError("beta = 0 makes Gamma = (.)^(1/beta) undefined");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0,1]");
    if (!(T >= 1.0)) throw ConfigError("T must be >= 1");
    double k = 2.0 * tau1 * tau1 + 1.0;
    double g = std::min({1.0 / (4.0 * L0 * k), 1.0 / (4.0 * L1 * k), 1.0 / std::sqrt(T),
                         1.0 / (8.0 * L1 * k * std::pow(2.0 * tau2 / (1.0 - tau1), beta))});
    IanSgdParams p;
    p.gamma = g;
    p.A = 1.0 / (1.0 - tau1);
    p.delta = tau2 / (1.0 - tau1);
    p.Gamma = std::pow(4.0 * L1 * g * k, 1.0 / beta);
    return p;
}

// ---------------------------------------------------------------- driver

struct StepInfo {
    std::uint64_t samples = 0;
    double stoch_grad_norm = 0.0;
    std::optional<double> h;
    bool h_capped = false;
};

// Runs one method against an oracle. The main batch and the independent
// batch B' come from two split substreams of the run's generator.
class Optimizer {
public:
    Optimizer(OptimizerConfig cfg, const Oracle& oracle, const Rng& rng)
        : cfg_(std::move(cfg)), oracle_(oracle), rng_b_(rng.split("batch")), rng_bp_(rng.split("bprime")) {
        cfg_.validate();
    }

    const OptimizerConfig& config() const { return cfg_; }

    StepInfo step(OptimizerState& s) {
        StepInfo info;
        Vec g;
        const auto& c = cfg_;
        const std::size_t n = oracle_.population();
        switch (c.method) {
            case Method::gd:
            case Method::angd: {
                oracle_.full(s.w, g);
                info.samples = n;
                info.stoch_grad_norm = l2_norm(g);
                if (c.method == Method::gd)
                    gd_step(s, g, c.gamma);
                else
                    angd_step(s, g, c.gamma, c.beta);
                break;
            }
            case Method::sgd:
            case Method::nsgd:
            case Method::nsgdm:
            case Method::clipped: {
                oracle_.eval(s.w, oracle_.draw(c.batch_b, rng_b_), g);
                info.samples = c.batch_b;
                info.stoch_grad_norm = l2_norm(g);
                if (c.method == Method::sgd) sgd_step(s, g, c.gamma);
                else if (c.method == Method::nsgd) nsgd_step(s, g, c.gamma, c.beta);
                else if (c.method == Method::nsgdm) nsgdm_step(s, g, c.gamma, c.beta, *c.momentum);
                else clipped_sgd_step(s, g, c.gamma, *c.clip);
                break;
            }
            case Method::spider: {
                if (s.t % *c.spider_epoch == 0 || !s.v) {
                    bool full = !c.batch_bprime || (n > 0 && *c.batch_bprime >= n);
                    if (full) {
                        oracle_.full(s.w, g);
                        info.samples = n;
                    } else {
                        oracle_.eval(s.w, oracle_.draw(*c.batch_bprime, rng_b_), g);
                        info.samples = *c.batch_bprime;
                    }
                    s.v = g;
                } else {
                    Draw d = oracle_.draw(c.batch_b, rng_b_);
                    Vec g_prev;
                    oracle_.eval(s.w, d, g);
                    oracle_.eval(*s.w_prev, d, g_prev);
                    Vec& v = *s.v;
                    for (std::size_t i = 0; i < v.size(); ++i) v[i] = g[i] - g_prev[i] + v[i];
                    info.samples = 2 * c.batch_b;
                }
                s.w_prev = s.w;
                info.stoch_grad_norm = l2_norm(*s.v);
                angd_step(s, *s.v, c.gamma, c.beta);
                break;
            }
            case Method::iansgd: {
                Vec gp;
                oracle_.eval(s.w, oracle_.draw(c.batch_b, rng_b_), g);
                oracle_.eval(s.w, oracle_.draw(*c.batch_bprime, rng_bp_), gp);
                double h = iansgd_normalizer(gp, *c.scale_a, *c.delta, *c.gamma_cap);
                if (c.h_cap && h > *c.h_cap) {
                    h = *c.h_cap;
                    info.h_capped = true;
                }
                info.samples = c.batch_b + *c.batch_bprime;
                info.stoch_grad_norm = l2_norm(g);
                info.h = h;
                iansgd_step(s, g, h, c.gamma, c.beta);
                break;
            }
        }
        return info;
    }

private:
    OptimizerConfig cfg_;
    const Oracle& oracle_;
    Rng rng_b_, rng_bp_;
};

}  // namespace gsopt

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsopt/core.hpp"
#include "gsopt/optimizers.hpp"
#include "gsopt/problems.hpp"

namespace gsopt {

// ---------------------------------------------------------------- regression helpers

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    LinearFit f;
    f.n = x.size();
    if (x.size() < 2) return f;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    // A perfectly flat response is fitted exactly.
    f.r2 = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
    return f;
}

// ---------------------------------------------------------------- smoothness

struct SmoothnessFit {
    double l0 = 0.0;
    double l1 = 0.0;
    double max_violation_ratio = 0.0;
    std::size_t pairs = 0;
};

struct PairCheck {
    double max_ratio = 0.0;  // max of lhs / rhs, <= 1 means certified
    std::size_t violations = 0;
    std::size_t pairs = 0;
};

// Nonnegative least squares fit of r <= L0 + L1 s over all ordered pairs of
// the cloud, with r = |grad(w) - grad(w')| / |w - w'| and s = |grad(w')|^alpha.
inline SmoothnessFit estimate_smoothness(const Oracle& oracle, double alpha, const std::vector<Vec>& points) {
    if (points.size() < 2) throw ConfigError("smoothness estimate needs at least two points");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
    std::vector<Vec> grads(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) oracle.full(points[i], grads[i]);

    std::vector<double> rs, ss;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (i == j) continue;
            double dw = l2_norm(sub(points[i], points[j]));
            if (dw == 0.0) continue;
            rs.push_back(l2_norm(sub(grads[i], grads[j])) / dw);
            ss.push_back(std::pow(l2_norm(grads[j]), alpha));
        }
    if (rs.empty()) throw Error("all points coincide");

    SmoothnessFit fit;
    fit.pairs = rs.size();
    const double n = static_cast<double>(rs.size());
    double sr = 0, ssum = 0, sss = 0, srs = 0, srr = 0;
    for (std::size_t k = 0; k < rs.size(); ++k) {
        sr += rs[k];
        ssum += ss[k];
        sss += ss[k] * ss[k];
        srs += rs[k] * ss[k];
        srr += rs[k] * rs[k];
    }
    auto sse = [&](double a, double b) {
        return srr - 2 * a * sr - 2 * b * srs + a * a * n + 2 * a * b * ssum + b * b * sss;
    };
    // Candidates: unconstrained solution if feasible, and the two faces.
    double best_a = std::max(0.0, sr / n), best_b = 0.0;
    double best = sse(best_a, best_b);
    if (sss > 0.0) {
        double b = std::max(0.0, srs / sss);
        if (sse(0.0, b) < best) {
            best = sse(0.0, b);
            best_a = 0.0;
            best_b = b;
        }
    }
    double det = n * sss - ssum * ssum;
    if (det > 1e-12 * n * sss) {
        double a = (sr * sss - ssum * srs) / det;
        double b = (n * srs - ssum * sr) / det;
        if (a >= 0.0 && b >= 0.0 && sse(a, b) <= best) {
            best_a = a;
            best_b = b;
        }
    }
    fit.l0 = best_a;
    fit.l1 = best_b;
    for (std::size_t k = 0; k < rs.size(); ++k) {
        double rhs = fit.l0 + fit.l1 * ss[k];
        double ratio = rhs > 0.0 ? rs[k] / rhs : (rs[k] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        fit.max_violation_ratio = std::max(fit.max_violation_ratio, ratio);
    }
    return fit;
}

// Checks supplied constants on explicit pairs. symmetric=true averages the two
// gradient-norm powers, otherwise the second point's norm is used.
inline PairCheck check_smoothness_pairs(const Oracle& oracle, const GeometryParams& geo,
                                        const std::vector<std::pair<Vec, Vec>>& pairs, bool symmetric) {
    PairCheck out;
    Vec g1, g2;
    for (const auto& [w1, w2] : pairs) {
        double dw = l2_norm(sub(w1, w2));
        if (dw == 0.0) continue;
        oracle.full(w1, g1);
        oracle.full(w2, g2);
        double lhs = l2_norm(sub(g1, g2));
        double s = symmetric ? 0.5 * (std::pow(l2_norm(g1), geo.alpha) + std::pow(l2_norm(g2), geo.alpha))
                             : std::pow(l2_norm(g2), geo.alpha);
        double rhs = dw * (geo.l0 + geo.l1 * s);
        double ratio = lhs / rhs;
        out.max_ratio = std::max(out.max_ratio, ratio);
        if (lhs > rhs) ++out.violations;
        ++out.pairs;
    }
    return out;
}

// f(w') <= f(w) + <grad f(w), w' - w> + (L0 + L1 |grad f(w)|^alpha) |w' - w|^2 / 2.
// Returns rhs - lhs; negative means violated.
inline double descent_lemma_margin(const Oracle& oracle, const GeometryParams& geo, const Vec& w, const Vec& w_next) {
    Vec g, gn;
    double f = oracle.full(w, g);
    double fn = oracle.full(w_next, gn);
    Vec dw = sub(w_next, w);
    double nd = l2_norm(dw);
    double rhs = f + dot(g, dw) + 0.5 * (geo.l0 + geo.l1 * std::pow(l2_norm(g), geo.alpha)) * nd * nd;
    return rhs - fn;
}

// ---------------------------------------------------------------- PL

struct PlSample {
    double f = 0.0;
    double grad_norm = 0.0;
};

struct PlReport {
    double fraction = 0.0;
    double worst_margin = 0.0;  // min over samples of (lhs - rhs) / max(|lhs|, |rhs|)
    std::size_t count = 0;
};

inline PlReport check_pl(const std::vector<PlSample>& samples, double f_star, double mu, double rho,
                         double rel_tol = 1e-10) {
    PlReport r;
    r.count = samples.size();
    if (samples.empty()) return r;
    std::size_t ok = 0;
    r.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        double lhs = std::pow(s.grad_norm, rho);
        double rhs = 2.0 * mu * (s.f - f_star);
        double scale = std::max({std::fabs(lhs), std::fabs(rhs), std::numeric_limits<double>::min()});
        double margin = (lhs - rhs) / scale;
        r.worst_margin = std::min(r.worst_margin, margin);
        if (margin >= -rel_tol) ++ok;
    }
    r.fraction = static_cast<double>(ok) / samples.size();
    return r;
}

inline std::vector<PlSample> pl_samples(const Oracle& oracle, const std::vector<Vec>& points) {
    std::vector<PlSample> out;
    Vec g;
    for (const auto& w : points) {
        double f = oracle.full(w, g);
        out.push_back({f, l2_norm(g)});
    }
    return out;
}

// ---------------------------------------------------------------- affine noise audit

struct NoiseAudit {
    std::size_t draws = 0;
    std::size_t affine_violations = 0;  // |g - grad F| <= tau1 |grad F| + tau2
    std::size_t grad_upper_violations = 0;  // |grad F| <= |g|/(1-tau1) + tau2/(1-tau1)
    std::size_t grad_lower_violations = 0;  // |g| <= (1+tau1) |grad F| + tau2
    double worst_slack = std::numeric_limits<double>::infinity();  // relative, affine bound
    double max_mean_noise_ratio = 0.0;  // |mean(g - grad F)| / (tau1 |grad F| + tau2), worst point

    std::size_t violations() const { return affine_violations + grad_upper_violations + grad_lower_violations; }
};

inline NoiseAudit verify_affine_noise(const Oracle& oracle, const std::vector<Vec>& points, std::size_t draws_per_point,
                                      const NoiseSpec& noise, Rng& rng) {
    NoiseAudit a;
    Vec gf, g;
    const double t1 = noise.tau1, t2 = noise.tau2;
    for (const auto& w : points) {
        oracle.full(w, gf);
        double nf = l2_norm(gf);
        double bound = t1 * nf + t2;
        std::vector<KahanSum> mean(gf.size());
        for (std::size_t k = 0; k < draws_per_point; ++k) {
            oracle.eval(w, oracle.draw(1, rng), g);
            Vec e = sub(g, gf);
            double ne = l2_norm(e), ng = l2_norm(g);
            for (std::size_t i = 0; i < e.size(); ++i) mean[i].add(e[i]);
            if (ne > bound) ++a.affine_violations;
            if (nf > ng / (1.0 - t1) + t2 / (1.0 - t1)) ++a.grad_upper_violations;
            if (ng > (1.0 + t1) * nf + t2) ++a.grad_lower_violations;
            a.worst_slack = std::min(a.worst_slack, (bound - ne) / bound);
            ++a.draws;
        }
        if (draws_per_point > 0) {
            Vec m(gf.size());
            for (std::size_t i = 0; i < m.size(); ++i) m[i] = mean[i].value() / draws_per_point;
            a.max_mean_noise_ratio = std::max(a.max_mean_noise_ratio, l2_norm(m) / bound);
        }
    }
    return a;
}

// ---------------------------------------------------------------- estimator bias

struct BiasReport {
    std::optional<double> cosine;  // absent when grad F or the mean is zero
    std::optional<double> angle;   // radians
    std::size_t samples = 0;
    Vec mean;
};

struct NormalizerParams {
    double A = 1.0, delta = 0.0, Gamma = 1.0;
};

namespace detail {
inline double guarded_pow(double n, double beta) { return n > kZeroGuard ? std::pow(n, beta) : 0.0; }

inline BiasReport finish_bias(const Vec& mean, const Vec& grad, std::size_t n) {
    BiasReport r;
    r.mean = mean;
    r.samples = n;
    double a = l2_norm(mean), b = l2_norm(grad);
    if (a > 0.0 && b > 0.0) {
        double c = std::clamp(dot(mean, grad) / (a * b), -1.0, 1.0);
        r.cosine = c;
        r.angle = std::acos(c);
    }
    return r;
}

inline double ian_denominator(const Vec& gp, double beta, const std::optional<NormalizerParams>& np) {
    if (np) return std::pow(iansgd_normalizer(gp, np->A, np->delta, np->Gamma), beta);
    return guarded_pow(l2_norm(gp), beta);
}
}  // namespace detail

struct BiasPair {
    BiasReport an_sgd;  // E[g / |g|^beta]
    BiasReport ian_sg;  // E[g_xi / h(g_xi')^beta], xi and xi' independent
    Vec grad;
};

// Exact expectations over a finite support. Without normalizer params the
// IAN-SG denominator is |g'|^beta; with them it is h^beta.
inline BiasPair estimator_bias_exact(const std::vector<Vec>& support, const std::vector<double>& probs, double beta,
                                     std::optional<NormalizerParams> np = std::nullopt) {
    if (support.empty() || support.size() != probs.size()) throw ConfigError("support and probabilities disagree");
    const std::size_t d = support[0].size();
    Vec grad(d, 0.0), an(d, 0.0), ian(d, 0.0);
    for (std::size_t i = 0; i < support.size(); ++i) {
        const Vec& g = support[i];
        double den = detail::guarded_pow(l2_norm(g), beta);
        for (std::size_t k = 0; k < d; ++k) {
            grad[k] += probs[i] * g[k];
            if (den > 0.0) an[k] += probs[i] * g[k] / den;
        }
        for (std::size_t j = 0; j < support.size(); ++j) {
            double dj = detail::ian_denominator(support[j], beta, np);
            if (dj <= 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) ian[k] += probs[i] * probs[j] * g[k] / dj;
        }
    }
    BiasPair out;
    out.grad = grad;
    out.an_sgd = detail::finish_bias(an, grad, support.size());
    out.ian_sg = detail::finish_bias(ian, grad, support.size() * support.size());
    return out;
}

inline BiasPair estimator_bias_monte_carlo(const std::vector<Vec>& support, const std::vector<double>& probs,
                                           double beta, std::optional<NormalizerParams> np, std::size_t N, Rng& rng) {
    if (support.empty() || support.size() != probs.size()) throw ConfigError("support and probabilities disagree");
    const std::size_t d = support[0].size();
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) cdf[i] = (acc += probs[i]);
    auto pick = [&]() {
        double u = rng.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return std::min<std::size_t>(it - cdf.begin(), support.size() - 1);
    };
    Vec grad(d, 0.0);
    for (std::size_t i = 0; i < support.size(); ++i)
        for (std::size_t k = 0; k < d; ++k) grad[k] += probs[i] * support[i][k] / acc;
    std::vector<KahanSum> an(d), ian(d);
    for (std::size_t n = 0; n < N; ++n) {
        const Vec& g = support[pick()];
        const Vec& gp = support[pick()];
        double den = detail::guarded_pow(l2_norm(g), beta);
        double dj = detail::ian_denominator(gp, beta, np);
        for (std::size_t k = 0; k < d; ++k) {
            if (den > 0.0) an[k].add(g[k] / den);
            if (dj > 0.0) ian[k].add(g[k] / dj);
        }
    }
    Vec a(d), b(d);
    for (std::size_t k = 0; k < d; ++k) {
        a[k] = an[k].value() / N;
        b[k] = ian[k].value() / N;
    }
    BiasPair out;
    out.grad = grad;
    out.an_sgd = detail::finish_bias(a, grad, N);
    out.ian_sg = detail::finish_bias(b, grad, N);
    return out;
}

// ---------------------------------------------------------------- rate regimes

enum class Regime { polynomial, linear, two_phase, inconclusive };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::polynomial: return "polynomial";
        case Regime::linear: return "linear";
        case Regime::two_phase: return "two_phase";
        default: return "inconclusive";
    }
}

struct RateFitOptions {
    double start_fraction = 0.0;  // skip this leading fraction of the trajectory
    double t_offset = 1.0;        // polynomial fit uses log(t + t_offset)
    double margin = 0.02;         // R^2 lead needed to name a winner
};

struct RateFit {
    Regime regime = Regime::inconclusive;
    double rate = 0.0;      // exponent, contraction factor, or log-log slope
    double goodness = 0.0;  // R^2 of the winning fit
    double r2_polynomial = 0.0, r2_linear = 0.0, r2_two_phase = 0.0;
    double exponent = 0.0, contraction = 0.0, loglog_slope = 0.0;
    std::vector<std::string> warnings;
};

inline RateFit fit_convergence_rate(std::vector<double> delta, const RateFitOptions& opt = {}) {
    if (delta.size() < 50) throw ConfigError("rate fit needs a trajectory of length >= 50");
    RateFit out;
    for (std::size_t i = 0; i < delta.size(); ++i)
        if (!(delta[i] > 0.0)) {
            out.warnings.push_back("nonpositive gap at t=" + std::to_string(i) + ", trajectory truncated");
            delta.resize(i);
            break;
        }
    if (delta.size() < 3) throw Error("too few positive gaps to fit a rate");

    std::size_t start = static_cast<std::size_t>(std::floor(opt.start_fraction * delta.size()));
    start = std::min(start, delta.size() - 3);
    std::vector<double> tlog, tlin, ld, tt, lld;
    for (std::size_t t = start; t < delta.size(); ++t) {
        double ldv = std::log(delta[t]);
        tlog.push_back(std::log(static_cast<double>(t) + opt.t_offset));
        tlin.push_back(static_cast<double>(t));
        ld.push_back(ldv);
        if (delta[t] < 1.0 && -ldv > 0.0) {
            tt.push_back(static_cast<double>(t));
            lld.push_back(std::log(-ldv));
        }
    }
    auto poly = fit_line(tlog, ld);
    auto lin = fit_line(tlin, ld);
    LinearFit two;
    if (tt.size() >= 3) two = fit_line(tt, lld);
    else out.warnings.push_back("fewer than 3 points below 1, two-phase fit skipped");

    out.r2_polynomial = poly.r2;
    out.r2_linear = lin.r2;
    out.r2_two_phase = two.r2;
    out.exponent = poly.slope;
    out.contraction = std::exp(lin.slope);
    out.loglog_slope = two.slope;

    struct Cand {
        Regime r;
        double r2, rate;
    };
    std::vector<Cand> c{{Regime::polynomial, poly.r2, poly.slope},
                        {Regime::linear, lin.r2, std::exp(lin.slope)},
                        {Regime::two_phase, two.r2, two.slope}};
    std::sort(c.begin(), c.end(), [](const Cand& a, const Cand& b) { return a.r2 > b.r2; });
    out.goodness = c[0].r2;
    out.rate = c[0].rate;
    out.regime = c[0].r2 - c[1].r2 >= opt.margin ? c[0].r : Regime::inconclusive;
    return out;
}

struct TailFit {
    std::size_t begin = 0, end = 0;  // half-open window of indices
    LinearFit fit;
};

// Log-log fit of the tail after the gap first drops to `threshold`. The
// window stops before the first non-decreasing step: with a constant step
// size the iterate eventually overshoots the minimizer and the gap sits on a
// floor set by the step, which is outside what the rate describes.
inline TailFit fit_two_phase_tail(const std::vector<double>& delta, double threshold) {
    TailFit out;
    std::size_t b = 0;
    while (b < delta.size() && !(delta[b] <= threshold)) ++b;
    out.begin = b;
    std::size_t e = b;
    while (e + 1 < delta.size() && delta[e + 1] < delta[e] && delta[e + 1] > 0.0) ++e;
    // e is the last strictly decreasing point; it is the overshoot step when
    // the sequence stalls right after it.
    out.end = e;
    std::vector<double> t, y;
    for (std::size_t i = b; i < e; ++i) {
        if (!(delta[i] > 0.0 && delta[i] < 1.0)) continue;
        t.push_back(static_cast<double>(i));
        y.push_back(std::log(-std::log(delta[i])));
    }
    out.fit = fit_line(t, y);
    return out;
}

// ---------------------------------------------------------------- iteration bounds

struct AngdBound {
    double T = 0.0;
    int regime_case = 0;  // 1: beta < 2 - rho, 2: beta = 2 - rho, 3: beta > 2 - rho
    Regime regime = Regime::inconclusive;
    double gamma = 0.0;
    std::optional<double> entry_expression;  // case 3, order-level (constant 1)
    std::vector<double> terms;
};

inline constexpr double kCaseTol = 1e-12;

inline int angd_regime_case(double rho, double beta) {
    double s = beta - (2.0 - rho);
    if (std::fabs(s) <= kCaseTol) return 2;
    return s < 0.0 ? 1 : 3;
}

inline AngdBound angd_iteration_bound(double eps, double mu, double rho, double beta, double L0, double L1,
                                              double delta0) {
    if (!(delta0 > 0.0)) throw ConfigError("initial gap must be positive");
    AngdBound b;
    b.gamma = angd_theoretical_stepsize(eps, mu, rho, beta, L0, L1);
    const double K = 8.0 * (L0 + L1) + 1.0;
    b.regime_case = angd_regime_case(rho, beta);
    if (b.regime_case == 1) {
        b.regime = Regime::polynomial;
        double e = 2.0 - beta - rho;
        double t1 = 8.0 * rho * K / (e * std::pow(2.0 * mu, 2.0 / rho) * std::pow(eps, (2.0 - rho) / rho));
        double t2 = 1.0 / ((std::pow(2.0, e / (2.0 - beta)) - 1.0) * std::pow(delta0, -e / rho) * std::pow(eps, e / rho));
        b.terms = {t1, t2};
        b.T = std::max(t1, t2);
    } else if (b.regime_case == 2) {
        b.regime = Regime::linear;
        double t = std::pow(2.0, 1.0 - beta / rho) * K / (mu * std::pow(mu * eps, beta / rho)) * std::log(delta0 / eps);
        b.terms = {t};
        b.T = std::max(0.0, t);
    } else {
        b.regime = Regime::two_phase;
        double e = rho + beta - 2.0;
        // Log space: the exponents blow up as beta + rho approaches 2.
        double t1 = beta / e * std::log(1.0 / eps);
        double log_x = 2.0 / e * std::log(2.0 * mu) - rho / e * std::log(32.0 * (L0 + L1) + 4.0) - std::log(eps);
        // log log x is only meaningful once log x >= 1; clamp to zero below.
        double t2 = std::log(std::max(log_x, 1.0));
        b.terms = {t1, t2};
        b.T = t1 + t2;
        b.entry_expression = std::exp(rho / e * (std::log(b.gamma) + (2.0 - beta) / e * std::log(mu)));
    }
    return b;
}

// Order-level count G / eps for GD with rho = alpha = 1 and bounded gradients.
inline double gd_bounded_gradient_bound(double G, double eps) {
    if (!(G > 0.0 && eps > 0.0)) throw ConfigError("need G > 0 and eps > 0");
    return G / eps;
}

inline double iansgd_lambda(double gap, double tau2, double L0, double L1) {
    double q = 1.0 + 4.0 * tau2 * tau2;
    return gap + 0.5 * (L0 + L1) * q * q;
}

inline double iansgd_iteration_bound(double eps, double tau1, double tau2, double L0, double L1, double beta,
                                       double gap) {
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0,1]");
    if (!(tau1 >= 0.0 && tau1 < 1.0)) throw ConfigError("tau1 must lie in [0,1)");
    if (!(tau2 > 0.0)) throw ConfigError("tau2 must be positive");
    if (!(gap >= 0.0)) throw ConfigError("gap must be nonnegative");
    double lam = iansgd_lambda(gap, tau2, L0, L1);
    double k = 2.0 * tau1 * tau1 + 1.0;
    double a = 256.0 * lam / std::pow(eps, 4);
    double b = 64.0 * L1 * k * std::pow(2.0 + 2.0 * tau1, beta) / (std::pow(1.0 - tau1, beta) * std::pow(eps, 2.0 - beta));
    double c = k * (64.0 * (L0 + L1) + 128.0 * L1 * std::pow(2.0 * tau2 / (1.0 - tau1), beta)) / (eps * eps);
    return lam * std::max({a, b, c});
}

// Published clipped-SGD complexity under the same affine-variance noise.
inline double clipped_sgd_reference_bound(double eps, double tau2, double L0, double L1, double gap) {
    if (!(eps > 0.0 && L1 > 0.0)) throw ConfigError("need eps > 0 and L1 > 0");
    double lam = gap + (5.0 * L0 + 2.0 * L1 * tau2) * tau2 * tau2 + 9.0 * tau2 * L0 * L0 / L1;
    return lam * std::max({4.0 * lam / std::pow(eps, 4), 128.0 * L1 / eps, (80.0 * L0 + 512.0 * L1 * tau2) / (eps * eps)});
}

// ---------------------------------------------------------------- technical inequalities

// C x^w <= x^w' + C^(w'/D) for x >= 0, C in [0,1], 0 <= w <= w', w' - w <= D.
inline bool verify_technical_inequality(double x, double C, double D, double w, double wp) {
    if (!(x >= 0.0)) throw ConfigError("x must be nonnegative");
    if (!(C >= 0.0 && C <= 1.0)) throw ConfigError("C must lie in [0,1]");
    if (!(D > 0.0)) throw ConfigError("Delta must be positive");
    if (!(w >= 0.0 && w <= wp)) throw ConfigError("need 0 <= omega <= omega'");
    if (wp - w > D) throw ConfigError("need omega' - omega <= Delta");
    double lhs = C * std::pow(x, w);
    double rhs = std::pow(x, wp) + std::pow(C, wp / D);
    return lhs <= rhs * (1.0 + 1e-12);
}

struct NoiseTermTuple {
    double gamma, tau2, h, grad_norm, alpha, beta, L0, L1;
};

// gamma^2 (L0 + L1 |grad F|^alpha) 4 tau2^2 / (2 h^(2 beta))
//   <= gamma^2 (L0 + L1)(1 + 4 tau2^2)^2 / 2 + gamma |grad F|^2 / (4 h^beta)
inline double noise_term_margin(const NoiseTermTuple& t) {
    double lhs = 0.5 * t.gamma * t.gamma * (t.L0 + t.L1 * std::pow(t.grad_norm, t.alpha)) * 4.0 * t.tau2 * t.tau2 /
                 std::pow(t.h, 2.0 * t.beta);
    double q = 1.0 + 4.0 * t.tau2 * t.tau2;
    double rhs = 0.5 * t.gamma * t.gamma * (t.L0 + t.L1) * q * q +
                 t.gamma / (4.0 * std::pow(t.h, t.beta)) * t.grad_norm * t.grad_norm;
    return (rhs - lhs) / std::max(rhs, std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------- descent recursions

struct RecursionReport {
    double fraction = 0.0;
    double worst_slack = std::numeric_limits<double>::infinity();  // relative
    std::size_t checked = 0;
    std::vector<double> mean_gap;  // averaged gap per index
};

// Deterministic AN-GD recursion under generalized PL:
// D_{t+1} <= D_t - gamma (2mu)^((2-b)/rho) D_t^((2-b)/rho) / 2 + gamma (2 mu eps)^((2-b)/rho) / 4.
inline RecursionReport check_descent_pl(const std::vector<double>& gaps, double gamma, double mu, double rho,
                                        double beta, double eps) {
    RecursionReport r;
    r.mean_gap = gaps;
    if (gaps.size() < 2) return r;
    const double e = (2.0 - beta) / rho;
    const double floor_term = gamma / 4.0 * std::pow(2.0 * mu * eps, e);
    std::size_t ok = 0;
    for (std::size_t t = 0; t + 1 < gaps.size(); ++t) {
        double rhs = gaps[t] - gamma * std::pow(2.0 * mu, e) / 2.0 * std::pow(gaps[t], e) + floor_term;
        double scale = std::max(std::fabs(gaps[t]), floor_term);
        double slack = (rhs - gaps[t + 1]) / scale;
        bool good = std::isfinite(gaps[t + 1]) && slack >= -1e-12;
        ok += good;
        r.worst_slack = std::min(r.worst_slack, std::isfinite(slack) ? slack : -std::numeric_limits<double>::infinity());
        ++r.checked;
    }
    r.fraction = static_cast<double>(ok) / r.checked;
    return r;
}

inline std::vector<double> run_angd_gaps(const SmoothFunction& f, Vec w0, double gamma, double beta, std::size_t T,
                                         double f_star = 0.0) {
    OptimizerState s;
    s.w = std::move(w0);
    std::vector<double> gaps;
    Vec g;
    gaps.push_back(f.value_grad(s.w, g) - f_star);
    for (std::size_t t = 0; t < T; ++t) {
        angd_step(s, g, gamma, beta);
        gaps.push_back(f.value_grad(s.w, g) - f_star);
    }
    return gaps;
}

// Step size under which the expected IAN-SGD recursion holds.
inline double iansgd_recursion_stepsize(double eps, double mu, double rho, double beta, double L0, double L1, double tau1,
                              double tau2) {
    if (!(eps > 0.0 && mu > 0.0 && rho > 0.0 && rho <= 2.0)) throw ConfigError("need eps, mu > 0 and rho in (0,2]");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0,1]");
    if (!(tau1 >= 0.0 && tau1 < 1.0) || !(tau2 > 0.0)) throw ConfigError("need tau1 in [0,1) and tau2 > 0");
    if (!(L0 > 0.0 && L1 > 0.0)) throw ConfigError("L0 and L1 must be positive");
    double k = 2.0 * tau1 * tau1 + 1.0;
    double q = (L0 + L1) * (1.0 + 4.0 * tau2 * tau2) + L1 * (tau1 * tau1 + 0.5);
    double m = std::min({1.0 / (4.0 * L0 * k), 1.0 / (4.0 * L1 * ((2.0 * tau1 + 2.0) / (1.0 - tau1)) * k),
                         1.0 / (8.0 * L1 * k * std::pow(2.0 * tau2 / (1.0 - tau1), beta)), L1 * k / (16.0 * q * q)});
    return std::pow(2.0 * mu * eps, (4.0 - 2.0 * beta) / rho) * m;
}

struct IanRecursionSetup {
    double p = 4.0;
    std::size_t d = 10;
    double w0_fill = 1.0;
    NoiseSpec noise{0.0, 1e-3};
    double beta = 2.0 / 3.0;
    double eps = 0.1;
    std::size_t T = 2000;
    std::size_t runs = 100;
    std::size_t batch = 1, batch_prime = 1;
    double gamma_multiplier = 1.0;
    std::uint64_t seed = 0;
};

// Averages R independent IAN-SGD runs per iteration index and checks
// E[D_{t+1}] <= E[D_t - K (2 mu D_t)^((2-b)/rho) / 4] + K (2 mu eps)^((2-b)/rho) / 8
// with K = gamma^(3/2) (L1 (2 tau1^2 + 1))^(1/2).
inline RecursionReport verify_iansgd_pl_recursion(const IanRecursionSetup& S) {
    PowerFunction f(S.p, S.d);
    auto geo = f.geometry();
    const double mu = *geo.mu, rho = *geo.rho;
    const double t1 = S.noise.tau1, t2 = S.noise.tau2;
    double gamma0 = iansgd_recursion_stepsize(S.eps, mu, rho, S.beta, geo.l0, geo.l1, t1, t2);
    double k = 2.0 * t1 * t1 + 1.0;
    OptimizerConfig cfg;
    cfg.method = Method::iansgd;
    cfg.gamma = gamma0 * S.gamma_multiplier;
    cfg.beta = S.beta;
    cfg.scale_a = 1.0 / (1.0 - t1);
    cfg.delta = t2 / (1.0 - t1);
    cfg.gamma_cap = std::pow(4.0 * geo.l1 * gamma0 * k, 1.0 / S.beta);
    cfg.batch_b = S.batch;
    cfg.batch_bprime = S.batch_prime;
    const double K = std::pow(cfg.gamma, 1.5) * std::sqrt(geo.l1 * k);
    const double e = (2.0 - S.beta) / rho;

    NoisyOracle oracle(f, S.noise);
    std::vector<KahanSum> gap(S.T + 1), term(S.T + 1);
    std::vector<bool> broken(S.T + 1, false);
    Rng root(S.seed);
    Vec g;
    for (std::size_t r = 0; r < S.runs; ++r) {
        Optimizer opt(cfg, oracle, root.split(r));
        OptimizerState s;
        s.w.assign(S.d, S.w0_fill);
        for (std::size_t t = 0; t <= S.T; ++t) {
            double D = f.value_grad(s.w, g);
            if (!std::isfinite(D)) {
                for (std::size_t u = t; u <= S.T; ++u) broken[u] = true;
                break;
            }
            gap[t].add(D);
            term[t].add(std::pow(2.0 * mu * D, e));
            if (t < S.T) opt.step(s);
        }
    }
    RecursionReport rep;
    rep.mean_gap.resize(S.T + 1);
    for (std::size_t t = 0; t <= S.T; ++t) rep.mean_gap[t] = gap[t].value() / S.runs;
    const double floor_term = K / 8.0 * std::pow(2.0 * mu * S.eps, e);
    std::size_t ok = 0;
    for (std::size_t t = 0; t < S.T; ++t) {
        double lhs = rep.mean_gap[t + 1];
        double rhs = rep.mean_gap[t] - K / 4.0 * term[t].value() / S.runs + floor_term;
        double scale = std::max(std::fabs(rep.mean_gap[t]), floor_term);
        double slack = (rhs - lhs) / scale;
        bool good = !broken[t + 1] && std::isfinite(lhs) && slack >= -1e-12;
        ok += good;
        rep.worst_slack = std::min(rep.worst_slack, good || std::isfinite(slack) ? slack : -1.0);
        ++rep.checked;
    }
    rep.fraction = static_cast<double>(ok) / rep.checked;
    return rep;
}

}  // namespace gsopt

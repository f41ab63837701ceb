#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gsopt/core.hpp"

namespace gsopt {

// Deterministic objective with an analytic gradient.
struct SmoothFunction {
    virtual ~SmoothFunction() = default;
    virtual std::size_t dim() const = 0;
    virtual double value_grad(const Vec& w, Vec& grad) const = 0;
};

// Finite-sum objective F = mean_i f_i. Batch calls return the batch mean.
struct FiniteSum {
    virtual ~FiniteSum() = default;
    virtual std::size_t dim() const = 0;
    virtual std::size_t size() const = 0;
    virtual double value_grad(const Vec& w, std::span<const std::size_t> batch, Vec& grad) const = 0;

    double full_value_grad(const Vec& w, Vec& grad) const {
        std::vector<std::size_t> all(size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return value_grad(w, all, grad);
    }
};

// One realized minibatch. Finite sums fill idx; synthetic oracles keep a key
// that regenerates the same noise, so a draw can be evaluated at two points
// (SPIDER needs that).
struct Draw {
    std::vector<std::size_t> idx;
    std::uint64_t key = 0;
    std::size_t count = 0;
};

struct Oracle {
    virtual ~Oracle() = default;
    virtual std::size_t dim() const = 0;
    // Exact F(w) and grad F(w). Measurement only, never charged as samples.
    virtual double full(const Vec& w, Vec& grad) const = 0;
    // Dataset size for finite sums, 0 for an infinite population.
    virtual std::size_t population() const { return 0; }
    virtual Draw draw(std::size_t batch, Rng& rng) const = 0;
    // Returns the batch objective estimate and writes the batch gradient.
    virtual double eval(const Vec& w, const Draw& d, Vec& grad) const = 0;
};

class FiniteSumOracle : public Oracle {
public:
    explicit FiniteSumOracle(const FiniteSum& f) : f_(f) {}
    std::size_t dim() const override { return f_.dim(); }
    double full(const Vec& w, Vec& grad) const override { return f_.full_value_grad(w, grad); }
    std::size_t population() const override { return f_.size(); }
    Draw draw(std::size_t batch, Rng& rng) const override {
        Draw d;
        d.count = batch;
        d.idx.resize(batch);
        for (auto& i : d.idx) i = rng.index(f_.size());
        return d;
    }
    double eval(const Vec& w, const Draw& d, Vec& grad) const override { return f_.value_grad(w, d.idx, grad); }

private:
    const FiniteSum& f_;
};

// Noise-free access to a deterministic function through the oracle interface.
class ExactOracle : public Oracle {
public:
    explicit ExactOracle(const SmoothFunction& f) : f_(f) {}
    std::size_t dim() const override { return f_.dim(); }
    double full(const Vec& w, Vec& grad) const override { return f_.value_grad(w, grad); }
    Draw draw(std::size_t batch, Rng&) const override { return Draw{{}, 0, batch}; }
    double eval(const Vec& w, const Draw&, Vec& grad) const override { return f_.value_grad(w, grad); }

private:
    const SmoothFunction& f_;
};

// g = grad F + r * s * (tau1 |grad F| + tau2) * u with r ~ U[0,1] and u uniform
// on the sphere. Each draw is zero mean and strictly inside the affine ball.
// A batch of b draws averages b independent perturbations.
class NoisyOracle : public Oracle {
public:
    NoisyOracle(const SmoothFunction& f, NoiseSpec noise, double shrink = 0.99) : f_(f), noise_(noise), s_(shrink) {
        noise_.validate();
        if (!(s_ > 0.0 && s_ < 1.0)) throw ConfigError("noise shrink factor must lie in (0,1)");
    }
    std::size_t dim() const override { return f_.dim(); }
    double full(const Vec& w, Vec& grad) const override { return f_.value_grad(w, grad); }
    Draw draw(std::size_t batch, Rng& rng) const override { return Draw{{}, rng.next_u64(), batch}; }
    double eval(const Vec& w, const Draw& d, Vec& grad) const override {
        double v = f_.value_grad(w, grad);
        double radius = s_ * (noise_.tau1 * l2_norm(grad) + noise_.tau2);
        Rng r(d.key);
        std::size_t b = std::max<std::size_t>(d.count, 1);
        Vec noise(grad.size(), 0.0);
        for (std::size_t k = 0; k < b; ++k) {
            double amp = r.uniform() * radius;
            Vec u = r.unit_vector(grad.size());
            for (std::size_t i = 0; i < u.size(); ++i) noise[i] += amp * u[i];
        }
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += noise[i] / static_cast<double>(b);
        return v;
    }
    const NoiseSpec& noise() const { return noise_; }
    double shrink() const { return s_; }

private:
    const SmoothFunction& f_;
    NoiseSpec noise_;
    double s_;
};

// ---------------------------------------------------------------- synthetic

// f(w) = |w|^p. Satisfies the generalized PL inequality with equality for
// rho = p/(p-1), 2 mu = p^rho, f* = 0.
class PowerFunction : public SmoothFunction {
public:
    PowerFunction(double p, std::size_t d) : p_(p), d_(d) {
        if (!(p >= 2.0)) throw ConfigError("power function needs p >= 2 so that rho <= 2");
        if (d == 0) throw ConfigError("dimension must be positive");
    }
    std::size_t dim() const override { return d_; }
    double exponent() const { return p_; }
    double value_grad(const Vec& w, Vec& grad) const override {
        grad.assign(d_, 0.0);
        double n = l2_norm(w);
        if (n == 0.0) return 0.0;
        double c = p_ * std::pow(n, p_ - 2.0);
        for (std::size_t i = 0; i < d_; ++i) grad[i] = c * w[i];
        return std::pow(n, p_);
    }
    double rho() const { return p_ / (p_ - 1.0); }
    double mu() const { return 0.5 * std::pow(p_, rho()); }

    // Declared (L0, L1, alpha). The Hessian norm is p(p-1)|w|^(p-2), which in
    // terms of the gradient norm is (p-1) p^(1/(p-1)) |grad|^((p-2)/(p-1)).
    GeometryParams geometry() const {
        GeometryParams g;
        if (p_ == 2.0) {
            g.l0 = 2.0;
            g.l1 = 0.0;
            g.alpha = 0.0;
        } else {
            g.l0 = 1.0;
            g.l1 = (p_ - 1.0) * std::pow(p_, 1.0 / (p_ - 1.0));
            g.alpha = (p_ - 2.0) / (p_ - 1.0);
        }
        g.mu = mu();
        g.rho = rho();
        return g;
    }

private:
    double p_;
    std::size_t d_;
};

// f(w) = |w|^2 / 2.
class HalfSquaredNorm : public SmoothFunction {
public:
    explicit HalfSquaredNorm(std::size_t d) : d_(d) {}
    std::size_t dim() const override { return d_; }
    double value_grad(const Vec& w, Vec& grad) const override {
        grad = w;
        return 0.5 * dot(w, w);
    }

private:
    std::size_t d_;
};

// ---------------------------------------------------------------- phase retrieval

struct Gaussian {
    double mean = 0.0;
    double variance = 1.0;
};

struct PhaseRetrievalData {
    std::size_t d = 0, m = 0;
    Vec a;  // row-major m x d
    Vec y;
    double a_max = 0.0;
    double y_max = 0.0;

    static PhaseRetrievalData from_rows(const std::vector<Vec>& rows, const Vec& y) {
        if (rows.empty() || rows.size() != y.size()) throw ConfigError("phase retrieval: rows and intensities disagree");
        PhaseRetrievalData out;
        out.m = rows.size();
        out.d = rows[0].size();
        for (const auto& r : rows) {
            if (r.size() != out.d) throw ConfigError("phase retrieval: ragged measurement rows");
            out.a.insert(out.a.end(), r.begin(), r.end());
        }
        out.y = y;
        out.refresh_bounds();
        return out;
    }

    void refresh_bounds() {
        a_max = 0.0;
        y_max = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += a[r * d + j] * a[r * d + j];
            a_max = std::max(a_max, std::sqrt(s));
            y_max = std::max(y_max, std::fabs(y[r]));
        }
    }

    // Closed-form constants certified for alpha = 2/3.
    GeometryParams declared_geometry() const {
        GeometryParams g;
        g.l0 = 8.0 * y_max * a_max * a_max;
        g.l1 = 9.0 * std::pow(a_max, 4.0 / 3.0);
        g.alpha = 2.0 / 3.0;
        return g;
    }
};

struct PhaseRetrievalInstance {
    PhaseRetrievalData data;
    Vec w_star;
};

inline PhaseRetrievalInstance generate_phase_retrieval(std::size_t d, std::size_t m, Gaussian w_star_dist,
                                                       Gaussian a_dist, Gaussian noise_dist, Rng& rng) {
    if (d == 0 || m == 0) throw ConfigError("phase retrieval needs d, m >= 1");
    PhaseRetrievalInstance out;
    out.w_star.resize(d);
    for (auto& x : out.w_star) x = rng.normal(w_star_dist.mean, w_star_dist.variance);
    auto& D = out.data;
    D.d = d;
    D.m = m;
    D.a.resize(d * m);
    for (auto& x : D.a) x = rng.normal(a_dist.mean, a_dist.variance);
    D.y.resize(m);
    for (std::size_t r = 0; r < m; ++r) {
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) z += D.a[r * d + j] * out.w_star[j];
        D.y[r] = z * z + rng.normal(noise_dist.mean, noise_dist.variance);
    }
    D.refresh_bounds();
    return out;
}

// f_r(w) = (y_r - (a_r.w)^2)^2 / 2, gradient -2 (y_r - (a_r.w)^2)(a_r.w) a_r.
class PhaseRetrieval : public FiniteSum {
public:
    explicit PhaseRetrieval(PhaseRetrievalData data) : data_(std::move(data)) {}
    std::size_t dim() const override { return data_.d; }
    std::size_t size() const override { return data_.m; }
    const PhaseRetrievalData& data() const { return data_; }

    double value_grad(const Vec& w, std::span<const std::size_t> batch, Vec& grad) const override {
        if (batch.empty()) throw Error("empty batch");
        const std::size_t d = data_.d;
        grad.assign(d, 0.0);
        double val = 0.0;
        for (std::size_t r : batch) {
            const double* a = &data_.a[r * d];
            double z = 0.0;
            for (std::size_t j = 0; j < d; ++j) z += a[j] * w[j];
            double res = data_.y[r] - z * z;
            val += 0.5 * res * res;
            double c = -2.0 * res * z;
            for (std::size_t j = 0; j < d; ++j) grad[j] += c * a[j];
        }
        double inv = 1.0 / static_cast<double>(batch.size());
        for (auto& g : grad) g *= inv;
        return val * inv;
    }

private:
    PhaseRetrievalData data_;
};

// ---------------------------------------------------------------- chi-square DRO dual

struct DroData {
    std::size_t n = 0, p = 0;
    Vec x;  // row-major n x p
    Vec y;
    double lambda = 0.01;
    double l1_reg_weight = 0.1;
    // Standardization applied at load time, kept for the run metadata.
    Vec feature_mean, feature_scale;

    void validate() const {
        if (!(lambda > 0.0)) throw ConfigError("DRO lambda must be positive");
        if (!(l1_reg_weight >= 0.0)) throw ConfigError("DRO regularizer weight must be nonnegative");
        if (x.size() != n * p || y.size() != n) throw ConfigError("DRO data has inconsistent dimensions");
    }
};

// Gaussian linear-regression data with a few heavy outliers in y.
inline DroData generate_dro_regression(std::size_t n, std::size_t p, Rng& rng) {
    DroData D;
    D.n = n;
    D.p = p;
    D.x.resize(n * p);
    for (auto& v : D.x) v = rng.normal();
    Vec w(p);
    for (auto& v : w) v = rng.normal(0.0, 1.0 / static_cast<double>(p));
    D.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = 0.0;
        for (std::size_t j = 0; j < p; ++j) z += D.x[i * p + j] * w[j];
        double e = rng.normal(0.0, 0.25);
        if (rng.uniform() < 0.05) e *= 8.0;
        D.y[i] = z + e;
    }
    D.feature_mean.assign(p, 0.0);
    D.feature_scale.assign(p, 1.0);
    return D;
}

inline double chi2_conjugate(double t) {
    double u = std::max(t + 2.0, 0.0);
    return 0.25 * u * u - 1.0;
}

inline double chi2_conjugate_deriv(double t) { return 0.5 * std::max(t + 2.0, 0.0); }

// L(w, eta) = lambda * mean phi*((l(w) - eta)/lambda) + eta, packed z = (w, eta).
class DroDual : public FiniteSum {
public:
    explicit DroDual(DroData data) : data_(std::move(data)) { data_.validate(); }
    std::size_t dim() const override { return data_.p + 1; }
    std::size_t size() const override { return data_.n; }
    const DroData& data() const { return data_; }

    double value_grad(const Vec& z, std::span<const std::size_t> batch, Vec& grad) const override {
        if (batch.empty()) throw Error("empty batch");
        const std::size_t p = data_.p;
        const double lam = data_.lambda, rw = data_.l1_reg_weight;
        const double eta = z[p];
        grad.assign(p + 1, 0.0);

        double reg = 0.0;
        Vec reg_grad(p);
        for (std::size_t j = 0; j < p; ++j) {
            double a = std::fabs(z[j]);
            reg += std::log1p(a);
            double sgn = z[j] > 0.0 ? 1.0 : (z[j] < 0.0 ? -1.0 : 0.0);
            reg_grad[j] = rw * sgn / (1.0 + a);
        }
        reg *= rw;

        double val = 0.0, dsum = 0.0;
        for (std::size_t i : batch) {
            const double* x = &data_.x[i * p];
            double pred = 0.0;
            for (std::size_t j = 0; j < p; ++j) pred += x[j] * z[j];
            double r = pred - data_.y[i];
            double loss = 0.5 * r * r + reg;
            double t = (loss - eta) / lam;
            val += chi2_conjugate(t);
            double dp = chi2_conjugate_deriv(t);
            if (dp == 0.0) continue;
            dsum += dp;
            for (std::size_t j = 0; j < p; ++j) grad[j] += dp * (r * x[j] + reg_grad[j]);
        }
        double inv = 1.0 / static_cast<double>(batch.size());
        for (std::size_t j = 0; j < p; ++j) grad[j] *= inv;
        grad[p] = 1.0 - dsum * inv;
        return lam * val * inv + eta;
    }

private:
    DroData data_;
};

}  // namespace gsopt

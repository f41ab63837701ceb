#include <gtest/gtest.h>

#include <cmath>

#include "gsopt/problems.hpp"

using namespace gsopt;

namespace {

// Central differences of a scalar function, used as the independent oracle.
template <class F>
Vec central_diff(F&& f, const Vec& w, double h = 1e-6) {
    Vec g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        Vec a = w, b = w;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

double rel_err(const Vec& a, const Vec& b) {
    return l2_norm(sub(a, b)) / std::max(l2_norm(b), 1e-8);
}

}  // namespace

TEST(PhaseRetrieval, GeneratesRequestedShape) {
    Rng rng(0);
    auto inst = generate_phase_retrieval(100, 3000, {0, 0.5}, {0, 0.5}, {0, 16}, rng);
    EXPECT_EQ(inst.data.d, 100u);
    EXPECT_EQ(inst.data.m, 3000u);
    EXPECT_EQ(inst.data.a.size(), 300000u);
    EXPECT_EQ(inst.data.y.size(), 3000u);
    EXPECT_EQ(inst.w_star.size(), 100u);
}

TEST(PhaseRetrieval, ZeroSignalGivesZeroIntensities) {
    Rng rng(1);
    auto inst = generate_phase_retrieval(5, 40, {0, 0}, {0, 0.5}, {0, 0}, rng);
    for (double y : inst.data.y) EXPECT_EQ(y, 0.0);
}

TEST(PhaseRetrieval, IntensityMatchesHandValue) {
    auto D = PhaseRetrievalData::from_rows({{1.0, 0.0}}, {4.0});
    PhaseRetrieval f(D);
    Vec g;
    std::vector<std::size_t> b{0};
    // w* = (2, 0) reproduces y = |a.w*|^2 = 4 exactly, so the residual is zero.
    EXPECT_EQ(f.value_grad({2.0, 0.0}, b, g), 0.0);
}

TEST(PhaseRetrieval, CachedBoundsMatchData) {
    Rng rng(2);
    auto inst = generate_phase_retrieval(7, 50, {0, 0.5}, {0, 0.5}, {0, 16}, rng);
    double amax = 0, ymax = 0;
    for (std::size_t r = 0; r < 50; ++r) {
        Vec a(inst.data.a.begin() + r * 7, inst.data.a.begin() + (r + 1) * 7);
        amax = std::max(amax, l2_norm(a));
        ymax = std::max(ymax, std::fabs(inst.data.y[r]));
    }
    EXPECT_EQ(inst.data.a_max, amax);
    EXPECT_EQ(inst.data.y_max, ymax);
}

TEST(PhaseRetrieval, ZeroPointHasZeroGradient) {
    Rng rng(3);
    auto inst = generate_phase_retrieval(6, 30, {0, 0.5}, {0, 0.5}, {0, 16}, rng);
    PhaseRetrieval f(inst.data);
    Vec g;
    f.full_value_grad(Vec(6, 0.0), g);
    for (double x : g) EXPECT_EQ(x, 0.0);
}

TEST(PhaseRetrieval, SingleSampleHandValue) {
    auto D = PhaseRetrievalData::from_rows({{1.0, 0.0}}, {2.0});
    PhaseRetrieval f(D);
    Vec g;
    std::vector<std::size_t> b{0};
    double v = f.value_grad({1.0, 0.0}, b, g);
    EXPECT_DOUBLE_EQ(v, 0.5);
    // d/dw of (2 - w1^2)^2 / 2 at w1 = 1 is -2 (2 - 1) * 1.
    auto fd = central_diff([&](const Vec& w) { return f.value_grad(w, b, g); }, {1.0, 0.0});
    f.value_grad({1.0, 0.0}, b, g);
    EXPECT_NEAR(g[0], -2.0, 1e-12);
    EXPECT_EQ(g[1], 0.0);
    EXPECT_LE(rel_err(g, fd), 1e-6);
}

TEST(PhaseRetrieval, EmptyBatchRejected) {
    auto D = PhaseRetrievalData::from_rows({{1.0, 0.0}}, {2.0});
    PhaseRetrieval f(D);
    Vec g;
    std::vector<std::size_t> none;
    try {
        f.value_grad({1.0, 0.0}, none, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "empty batch");
    }
}

TEST(PhaseRetrieval, GradientMatchesFiniteDifferences) {
    Rng rng(4);
    auto inst = generate_phase_retrieval(8, 60, {0, 0.5}, {0, 0.5}, {0, 16}, rng);
    PhaseRetrieval f(inst.data);
    Vec g;
    for (int k = 0; k < 100; ++k) {
        Vec w(8);
        for (auto& x : w) x = rng.normal(0.0, 1.0);
        std::vector<std::size_t> batch;
        for (int i = 0; i < 5; ++i) batch.push_back(rng.index(60));
        auto fd = central_diff([&](const Vec& z) {
            Vec tmp;
            return f.value_grad(z, batch, tmp);
        }, w);
        f.value_grad(w, batch, g);
        EXPECT_LE(rel_err(g, fd), 1e-6);
    }
}

TEST(PhaseRetrieval, BatchGradientIsMeanOfSamples) {
    Rng rng(5);
    auto inst = generate_phase_retrieval(4, 10, {0, 0.5}, {0, 0.5}, {0, 16}, rng);
    PhaseRetrieval f(inst.data);
    Vec w{0.3, -0.2, 1.0, 0.5}, g, gi, acc(4, 0.0);
    std::vector<std::size_t> batch{1, 3, 3, 7};
    f.value_grad(w, batch, g);
    for (auto i : batch) {
        std::vector<std::size_t> one{i};
        f.value_grad(w, one, gi);
        for (int j = 0; j < 4; ++j) acc[j] += gi[j] / 4.0;
    }
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(g[j], acc[j], 1e-12 * (1 + std::fabs(acc[j])));
}

TEST(PhaseRetrieval, DeclaredConstants) {
    auto D = PhaseRetrievalData::from_rows({{3.0, 4.0}, {1.0, 0.0}}, {2.0, -7.0});
    auto g = D.declared_geometry();
    EXPECT_DOUBLE_EQ(g.l0, 8.0 * 7.0 * 25.0);
    EXPECT_DOUBLE_EQ(g.l1, 9.0 * std::pow(5.0, 4.0 / 3.0));
    EXPECT_DOUBLE_EQ(g.alpha, 2.0 / 3.0);
}

namespace {

DroData tiny_dro(double lambda = 1.0) {
    DroData D;
    D.n = 1;
    D.p = 1;
    D.x = {1.0};
    D.y = {0.0};
    D.lambda = lambda;
    D.feature_mean = {0.0};
    D.feature_scale = {1.0};
    return D;
}

}  // namespace

TEST(DroDual, ConjugateClampRegion) {
    Rng rng(6);
    auto D = generate_dro_regression(30, 3, rng);
    D.lambda = 0.5;
    DroDual f(D);
    Vec z{0.2, -0.1, 0.4, 1e6}, g;
    std::vector<std::size_t> batch{0, 5, 9};
    double v = f.value_grad(z, batch, g);
    EXPECT_DOUBLE_EQ(v, -0.5 + 1e6);
    for (int j = 0; j < 3; ++j) EXPECT_EQ(g[j], 0.0);
    EXPECT_EQ(g[3], 1.0);
}

TEST(DroDual, HandEvaluationAtOrigin) {
    DroDual f(tiny_dro());
    Vec g;
    std::vector<std::size_t> b{0};
    EXPECT_EQ(f.value_grad({0.0, 0.0}, b, g), 0.0);
    EXPECT_EQ(g[1], 0.0);
    // sign(0) = 0 on the log regularizer and x.w - y = 0, so dw vanishes too.
    EXPECT_EQ(g[0], 0.0);
}

TEST(DroDual, ConjugateFormula) {
    EXPECT_EQ(chi2_conjugate(0.0), 0.0);
    EXPECT_EQ(chi2_conjugate(-2.0), -1.0);
    EXPECT_EQ(chi2_conjugate(-5.0), -1.0);
    EXPECT_DOUBLE_EQ(chi2_conjugate(2.0), 3.0);
    EXPECT_EQ(chi2_conjugate_deriv(-2.0), 0.0);
    EXPECT_EQ(chi2_conjugate_deriv(0.0), 1.0);
}

TEST(DroDual, GradientMatchesFiniteDifferences) {
    Rng rng(7);
    auto D = generate_dro_regression(50, 5, rng);
    D.lambda = 0.3;
    DroDual f(D);
    Vec g;
    int checked = 0;
    for (int k = 0; k < 200 && checked < 100; ++k) {
        Vec z(6);
        for (auto& x : z) x = rng.normal(0.0, 1.0);
        std::vector<std::size_t> batch;
        for (int i = 0; i < 6; ++i) batch.push_back(rng.index(50));
        // Stay away from the kink t = -2 and from w-coordinates at 0.
        bool near_kink = false;
        for (auto i : batch) {
            double pred = 0, reg = 0;
            for (int j = 0; j < 5; ++j) {
                pred += D.x[i * 5 + j] * z[j];
                reg += std::log1p(std::fabs(z[j]));
            }
            double r = pred - D.y[i];
            double t = (0.5 * r * r + 0.1 * reg - z[5]) / D.lambda;
            near_kink = near_kink || std::fabs(t + 2.0) < 1e-3;
        }
        for (int j = 0; j < 5; ++j) near_kink = near_kink || std::fabs(z[j]) < 1e-3;
        if (near_kink) continue;
        auto fd = central_diff([&](const Vec& u) {
            Vec tmp;
            return f.value_grad(u, batch, tmp);
        }, z);
        f.value_grad(z, batch, g);
        EXPECT_LE(rel_err(g, fd), 1e-6);
        ++checked;
    }
    EXPECT_EQ(checked, 100);
}

TEST(DroDual, Validation) {
    auto D = tiny_dro(0.0);
    EXPECT_THROW(DroDual{D}, ConfigError);
    D = tiny_dro();
    D.x.push_back(1.0);
    EXPECT_THROW(DroDual{D}, ConfigError);
}

TEST(PowerFunction, SquareHandValues) {
    PowerFunction f(2.0, 2);
    Vec g;
    EXPECT_DOUBLE_EQ(f.value_grad({3.0, 4.0}, g), 25.0);
    EXPECT_DOUBLE_EQ(g[0], 6.0);
    EXPECT_DOUBLE_EQ(g[1], 8.0);
}

TEST(PowerFunction, QuarticPlIdentity) {
    PowerFunction f(4.0, 6);
    Rng rng(8);
    Vec g;
    for (int k = 0; k < 200; ++k) {
        Vec w(6);
        double s = std::exp(rng.normal(0.0, 2.0));
        for (auto& x : w) x = s * rng.normal();
        double v = f.value_grad(w, g);
        EXPECT_NEAR(std::pow(l2_norm(g), 4.0 / 3.0) / v, std::pow(4.0, 4.0 / 3.0), 1e-10 * std::pow(4.0, 4.0 / 3.0));
    }
}

TEST(PowerFunction, MinimizerIsZero) {
    PowerFunction f(3.0, 4);
    Vec g;
    EXPECT_EQ(f.value_grad(Vec(4, 0.0), g), 0.0);
    for (double x : g) EXPECT_EQ(x, 0.0);
}

TEST(PowerFunction, PlIdentityAcrossExponents) {
    Rng rng(9);
    Vec g;
    for (double p : {2.0, 2.5, 3.0, 4.0, 7.0}) {
        PowerFunction f(p, 5);
        for (int k = 0; k < 50; ++k) {
            Vec w(5);
            for (auto& x : w) x = rng.normal(0.0, 2.0);
            double v = f.value_grad(w, g);
            double lhs = std::pow(l2_norm(g), f.rho()), rhs = 2.0 * f.mu() * v;
            EXPECT_LE(std::fabs(lhs - rhs), 1e-10 * rhs);
        }
    }
}

TEST(PowerFunction, GradientMatchesFiniteDifferences) {
    PowerFunction f(3.0, 4);
    Vec w{0.5, -1.0, 0.25, 2.0}, g;
    f.value_grad(w, g);
    auto fd = central_diff([&](const Vec& z) {
        Vec tmp;
        return f.value_grad(z, tmp);
    }, w);
    EXPECT_LE(rel_err(g, fd), 1e-6);
}

TEST(PowerFunction, RejectsSmallExponent) { EXPECT_THROW(PowerFunction(1.5, 3), ConfigError); }

TEST(PowerFunction, DeclaredGeometry) {
    auto q = PowerFunction(2.0, 3).geometry();
    EXPECT_EQ(q.l0, 2.0);
    EXPECT_EQ(q.l1, 0.0);
    EXPECT_EQ(q.alpha, 0.0);
    auto c = PowerFunction(4.0, 3).geometry();
    EXPECT_DOUBLE_EQ(c.alpha, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*c.rho, 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(*c.mu, 0.5 * std::pow(4.0, 4.0 / 3.0));
}

TEST(PowerFunction, HessianBoundHoldsOnPairs) {
    // |grad f(w) - grad f(w')| <= |w - w'| (L0 + L1 max(|grad f|)^alpha) along
    // the segment; checked at close pairs where the max is near either end.
    PowerFunction f(4.0, 3);
    auto geo = f.geometry();
    Rng rng(10);
    Vec g1, g2;
    for (int k = 0; k < 500; ++k) {
        Vec w(3), v(3);
        for (auto& x : w) x = rng.normal(0.0, 2.0);
        for (std::size_t i = 0; i < 3; ++i) v[i] = w[i] + 1e-4 * rng.normal();
        f.value_grad(w, g1);
        f.value_grad(v, g2);
        double s = std::max(l2_norm(g1), l2_norm(g2));
        EXPECT_LE(l2_norm(sub(g1, g2)), l2_norm(sub(w, v)) * (geo.l0 + geo.l1 * std::pow(s, geo.alpha)) * (1 + 1e-9));
    }
}

TEST(NoisyOracle, BoundedNoiseTauOneZero) {
    HalfSquaredNorm f(3);
    NoisyOracle o(f, {0.0, 1.0});
    Rng rng(11);
    Vec w{1.0, 2.0, -1.0}, gf, g;
    o.full(w, gf);
    for (int k = 0; k < 10000; ++k) {
        o.eval(w, o.draw(1, rng), g);
        EXPECT_LT(l2_norm(sub(g, gf)), 1.0);
    }
}

TEST(NoisyOracle, AffineBoundWithGradientTwo) {
    HalfSquaredNorm f(2);
    NoisyOracle o(f, {0.5, 1.0});
    Rng rng(12);
    Vec w{2.0, 0.0}, gf, g;
    o.full(w, gf);
    ASSERT_DOUBLE_EQ(l2_norm(gf), 2.0);
    for (int k = 0; k < 10000; ++k) {
        o.eval(w, o.draw(1, rng), g);
        EXPECT_LT(l2_norm(sub(g, gf)), 2.0);
    }
}

TEST(NoisyOracle, ZeroMean) {
    HalfSquaredNorm f(3);
    NoiseSpec ns{0.5, 1.0};
    NoisyOracle o(f, ns);
    Rng rng(13);
    Vec w{1.0, 0.0, 0.0}, gf, g;
    o.full(w, gf);
    const int n = 1000000;
    std::vector<KahanSum> acc(3);
    for (int k = 0; k < n; ++k) {
        o.eval(w, o.draw(1, rng), g);
        for (int i = 0; i < 3; ++i) acc[i].add(g[i] - gf[i]);
    }
    Vec mean(3);
    for (int i = 0; i < 3; ++i) mean[i] = acc[i].value() / n;
    EXPECT_LE(l2_norm(mean), 5e-3 * (ns.tau1 * l2_norm(gf) + ns.tau2));
}

TEST(NoisyOracle, DrawKeyReproducesNoise) {
    HalfSquaredNorm f(4);
    NoisyOracle o(f, {0.2, 0.5});
    Rng rng(14);
    auto d = o.draw(8, rng);
    Vec w{1, 2, 3, 4}, g1, g2;
    o.eval(w, d, g1);
    o.eval(w, d, g2);
    EXPECT_EQ(g1, g2);
}

TEST(NoisyOracle, BatchAveragesStayInsideBall) {
    HalfSquaredNorm f(5);
    NoisyOracle o(f, {0.3, 2.0});
    Rng rng(15);
    Vec w{1, -1, 2, 0, 3}, gf, g;
    o.full(w, gf);
    for (int k = 0; k < 2000; ++k) {
        o.eval(w, o.draw(1 + k % 17, rng), g);
        EXPECT_LT(l2_norm(sub(g, gf)), 0.3 * l2_norm(gf) + 2.0);
    }
}

TEST(NoisyOracle, Validation) {
    HalfSquaredNorm f(2);
    EXPECT_THROW(NoisyOracle(f, {1.0, 1.0}), ConfigError);
    EXPECT_THROW(NoisyOracle(f, {0.0, 0.0}), ConfigError);
    EXPECT_THROW(NoisyOracle(f, {0.0, 1.0}, 1.0), ConfigError);
    EXPECT_THROW(NoisyOracle(f, {0.0, 1.0}, 0.0), ConfigError);
}

TEST(FiniteSumOracle, SamplesWithReplacementInRange) {
    auto D = PhaseRetrievalData::from_rows({{1.0}, {2.0}, {3.0}}, {1.0, 2.0, 3.0});
    PhaseRetrieval f(D);
    FiniteSumOracle o(f);
    Rng rng(16);
    auto d = o.draw(100, rng);
    EXPECT_EQ(d.idx.size(), 100u);
    for (auto i : d.idx) EXPECT_LT(i, 3u);
    EXPECT_EQ(o.population(), 3u);
}

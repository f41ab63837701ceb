#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gsopt/harness.hpp"

using namespace gsopt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("gsopt_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void expect_config_error(const std::string& text, const std::string& needle) {
    try {
        parse_config(text);
        ADD_FAILURE() << "no error for: " << text;
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
}

const char* kSmallPr = R"(problem = phase_retrieval
problem.d = 5
problem.m = 50
seeds = 0, 1
stop.max_iters = 40
record.every = 1
)";

}  // namespace

TEST(Config, ParsesBundledPhaseRetrieval) {
    auto cfg = load_config(fs::path(GSOPT_SOURCE_DIR) / "configs" / "phase_retrieval.cfg");
    EXPECT_EQ(cfg.problem.d, 100u);
    EXPECT_EQ(cfg.problem.m, 3000u);
    ASSERT_EQ(cfg.optimizers.size(), 6u);
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.hash().size(), 16u);
}

TEST(Config, UnknownKeyNamesLine) {
    expect_config_error("problem = power\n\n# note\nstop.max_itres = 3\n", "line 4: unknown key 'stop.max_itres'");
    expect_config_error("optimizer.sgd.gama = 1\n", "line 1: unknown key");
}

TEST(Config, MalformedLines) {
    expect_config_error("problem = power\nthis line has no equals\n", "line 2");
    expect_config_error("problem.d = ten\n", "line 1");
    expect_config_error("seeds = 0\nseeds = 1\n", "duplicate");
    expect_config_error("optimizer.x.method = adam\n", "unknown method");
}

TEST(Config, ValidationNeedsStopRuleAndSeeds) {
    auto cfg = parse_config("problem = power\noptimizer.sgd.gamma = 0.1\n");
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.stop.max_iters = 1;
    EXPECT_NO_THROW(cfg.validate());
    cfg.seeds.clear();
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, HashIgnoresOrderAndComments) {
    auto a = parse_config("problem = power\nstop.max_iters = 5\n# x\n");
    auto b = parse_config("stop.max_iters=5\nproblem=power\n");
    EXPECT_EQ(a.hash(), b.hash());
    auto c = parse_config("stop.max_iters=6\nproblem=power\n");
    EXPECT_NE(a.hash(), c.hash());
}

TEST(CsvDataset, ToyStandardization) {
    auto dir = scratch("toy");
    write_text(dir / "toy.csv", "a,y,b\n1,10,5\n2,20,5\n3,30,5\n");
    auto r = load_csv_dataset(dir / "toy.csv");
    ASSERT_EQ(r.data.n, 3u);
    ASSERT_EQ(r.data.p, 2u);
    // Column a: mean 2, population sd sqrt(2/3).
    double sd = std::sqrt(2.0 / 3.0);
    EXPECT_NEAR(r.data.x[0], -1.0 / sd, 1e-15);
    EXPECT_NEAR(r.data.x[2], 0.0, 1e-15);
    EXPECT_NEAR(r.data.x[4], 1.0 / sd, 1e-15);
    EXPECT_NEAR(r.data.feature_mean[0], 2.0, 1e-15);
    EXPECT_NEAR(r.data.feature_scale[0], sd, 1e-15);
    // Column b is constant: centered, unscaled, warned about.
    EXPECT_EQ(r.data.x[1], 0.0);
    EXPECT_EQ(r.data.feature_scale[1], 1.0);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find("'b'"), std::string::npos);
    EXPECT_EQ(r.data.y, (Vec{10, 20, 30}));
}

TEST(CsvDataset, Errors) {
    auto dir = scratch("bad");
    write_text(dir / "noy.csv", "a,b\n1,2\n");
    write_text(dir / "text.csv", "a,y\n1,2\n3,abc\n");
    write_text(dir / "empty.csv", "");
    write_text(dir / "headonly.csv", "a,y\n");
    auto msg = [](const fs::path& p) {
        try {
            load_csv_dataset(p);
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(msg(dir / "noy.csv").find("missing target column"), std::string::npos);
    EXPECT_NE(msg(dir / "text.csv").find("row 3"), std::string::npos);
    EXPECT_NE(msg(dir / "empty.csv").find("empty file"), std::string::npos);
    EXPECT_NE(msg(dir / "headonly.csv").find("empty file"), std::string::npos);
    EXPECT_NE(msg(dir / "absent.csv").find("cannot open"), std::string::npos);
}

TEST(CsvDataset, InstanceRecordsStandardization) {
    auto dir = scratch("inst");
    write_text(dir / "d.csv", "a,y\n1,0\n3,1\n");
    ProblemSpec P;
    P.id = "dro";
    P.csv = (dir / "d.csv").string();
    auto inst = make_instance(P, 0);
    bool seen = false;
    for (const auto& n : inst->notes) seen = seen || n == "standardization mean=2";
    EXPECT_TRUE(seen);
    EXPECT_EQ(inst->w0.size(), 2u);
}

TEST(RunSingle, ZeroIterationsKeepsOnlyInitialPoint) {
    auto cfg = parse_config(std::string(kSmallPr) + "optimizer.sgd.gamma = 0.001\n");
    cfg.stop.max_iters = 0;
    auto inst = make_instance(cfg.problem, 0);
    auto rec = run_single(*inst, cfg.optimizers[0], 0, cfg.stop, 1);
    ASSERT_EQ(rec.iterations.size(), 1u);
    EXPECT_EQ(rec.iterations[0].t, 0u);
    EXPECT_EQ(rec.iterations[0].cumulative_samples, 0u);
    EXPECT_EQ(rec.stop, StopReason::max_iters);
}

TEST(RunSingle, StopPrecedenceBudgetFirst) {
    auto cfg = parse_config(std::string(kSmallPr) + "optimizer.sgd.gamma = 0.001\noptimizer.sgd.batch_b = 4\n");
    cfg.stop.max_iters = 10;
    cfg.stop.sample_budget = 40;
    auto inst = make_instance(cfg.problem, 0);
    auto rec = run_single(*inst, cfg.optimizers[0], 0, cfg.stop, 1);
    EXPECT_EQ(rec.stop, StopReason::sample_budget);
    cfg.stop.grad_target = 1e300;
    cfg.stop.sample_budget.reset();
    cfg.stop.max_iters = 0;
    EXPECT_EQ(run_single(*inst, cfg.optimizers[0], 0, cfg.stop, 1).stop, StopReason::max_iters);
    cfg.stop.max_iters.reset();
    EXPECT_EQ(run_single(*inst, cfg.optimizers[0], 0, cfg.stop, 1).stop, StopReason::grad_target);
}

TEST(RunSingle, RecordsCadenceAndFinalRow) {
    auto cfg = parse_config(std::string(kSmallPr) + "optimizer.sgd.gamma = 0.001\n");
    cfg.stop.max_iters = 25;
    auto inst = make_instance(cfg.problem, 0);
    auto rec = run_single(*inst, cfg.optimizers[0], 0, cfg.stop, 10);
    std::vector<std::uint64_t> ts;
    for (const auto& m : rec.iterations) ts.push_back(m.t);
    EXPECT_EQ(ts, (std::vector<std::uint64_t>{0, 10, 20, 25}));
}

TEST(RunSingle, DivergenceMarked) {
    auto cfg = parse_config(std::string(kSmallPr) + "optimizer.gd.gamma = 10\n");
    cfg.stop.max_iters = 200;
    auto inst = make_instance(cfg.problem, 0);
    auto rec = run_single(*inst, cfg.optimizers[0], 0, cfg.stop, 1);
    EXPECT_EQ(rec.stop, StopReason::diverged);
    EXPECT_TRUE(rec.diverged());
    ASSERT_FALSE(rec.iterations.empty());
    for (const auto& m : rec.iterations) {
        EXPECT_TRUE(std::isfinite(m.objective));
        EXPECT_TRUE(std::isfinite(m.full_grad_norm));
    }
}

TEST(SampleAccounting, ClosedForms) {
    const std::uint64_t n = 50;
    struct Case {
        std::string text;
        std::function<std::uint64_t(std::uint64_t)> cost;  // cost of step k
    };
    std::vector<Case> cases{
        {"optimizer.gd.gamma = 1e-4\n", [&](std::uint64_t) { return n; }},
        {"optimizer.angd.gamma = 1e-3\n", [&](std::uint64_t) { return n; }},
        {"optimizer.sgd.gamma = 1e-4\noptimizer.sgd.batch_b = 3\n", [](std::uint64_t) { return 3u; }},
        {"optimizer.nsgd.gamma = 1e-3\noptimizer.nsgd.batch_b = 3\n", [](std::uint64_t) { return 3u; }},
        {"optimizer.nsgdm.gamma = 1e-3\noptimizer.nsgdm.batch_b = 3\noptimizer.nsgdm.momentum = 0.5\n",
         [](std::uint64_t) { return 3u; }},
        {"optimizer.clipped.gamma = 1e-3\noptimizer.clipped.batch_b = 3\noptimizer.clipped.clip = 1\n",
         [](std::uint64_t) { return 3u; }},
        {"optimizer.spider.gamma = 1e-3\noptimizer.spider.batch_b = 3\noptimizer.spider.batch_bprime = 7\n"
         "optimizer.spider.spider_epoch = 4\n",
         [](std::uint64_t k) { return k % 4 == 0 ? 7u : 6u; }},
        {"optimizer.spider.gamma = 1e-3\noptimizer.spider.batch_b = 3\noptimizer.spider.spider_epoch = 5\n",
         [&](std::uint64_t k) { return k % 5 == 0 ? n : 6u; }},
        {"optimizer.iansgd.gamma = 1e-3\noptimizer.iansgd.batch_b = 3\noptimizer.iansgd.batch_bprime = 5\n"
         "optimizer.iansgd.scale_a = 1\noptimizer.iansgd.delta = 1e-3\noptimizer.iansgd.gamma_cap = 1\n",
         [](std::uint64_t) { return 8u; }},
    };
    for (const auto& c : cases) {
        auto cfg = parse_config(std::string(kSmallPr) + c.text);
        auto inst = make_instance(cfg.problem, 1);
        auto rec = run_single(*inst, cfg.optimizers[0], 1, cfg.stop, 1);
        ASSERT_EQ(rec.iterations.size(), 41u) << c.text;
        std::uint64_t expect = 0;
        for (std::uint64_t t = 0; t <= 40; ++t) {
            EXPECT_EQ(rec.iterations[t].cumulative_samples, expect) << c.text << " t=" << t;
            expect += c.cost(t);
        }
    }
}

TEST(RunExperiment, OrderAndThreadIndependence) {
    auto cfg = parse_config(std::string(kSmallPr) +
                            "optimizer.sgd.gamma = 1e-4\noptimizer.iansgd.gamma = 1e-3\noptimizer.iansgd.batch_bprime = 2\n"
                            "optimizer.iansgd.scale_a = 1\noptimizer.iansgd.delta = 1e-3\noptimizer.iansgd.gamma_cap = 1\n");
    cfg.seeds = {3, 1, 2};
    cfg.threads = 1;
    auto a = run_experiment(cfg);
    cfg.threads = 6;
    auto b = run_experiment(cfg);
    ASSERT_EQ(a.records.size(), 6u);
    for (std::size_t k = 0; k < 6; ++k) {
        EXPECT_EQ(a.records[k].label, k < 3 ? "sgd" : "iansgd");
        EXPECT_EQ(a.records[k].seed, cfg.seeds[k % 3]);
        EXPECT_EQ(serialize(a.records[k]), serialize(b.records[k]));
    }
}

TEST(RunExperiment, BetaBelowAlphaWarns) {
    auto cfg = parse_config(std::string(kSmallPr) + "optimizer.nsgd.gamma = 1e-3\noptimizer.nsgd.beta = 0.5\n");
    auto r = run_experiment(cfg);
    ASSERT_FALSE(r.warnings.empty());
    EXPECT_NE(r.warnings[0].find("nsgd: beta=0.5"), std::string::npos);
}

TEST(Sweep, UnknownAxisListsValidOnes) {
    auto cfg = parse_config(std::string(kSmallPr) + "optimizer.sgd.gamma = 1e-4\n");
    try {
        run_sweep(cfg, {"sgd", "gama", {1.0}});
        FAIL();
    } catch (const ConfigError& e) {
        std::string m = e.what();
        for (const auto& a : sweep_axes()) EXPECT_NE(m.find(a), std::string::npos) << a;
    }
    EXPECT_THROW(run_sweep(cfg, {"sgd", "gamma", {}}), ConfigError);
    EXPECT_THROW(run_sweep(cfg, {"nsgd", "gamma", {1.0}}), ConfigError);
}

TEST(Sweep, RowsMatchIndependentSingleRuns) {
    auto cfg = parse_config(std::string(kSmallPr) + "optimizer.sgd.gamma = 1e-4\noptimizer.sgd.batch_b = 2\n");
    cfg.threads = 4;
    auto res = run_sweep(cfg, {"sgd", "gamma", {1e-4, 5e-4, 1e-3}});
    ASSERT_EQ(res.rows.size(), 6u);
    for (std::size_t k = 0; k < res.rows.size(); ++k) {
        auto single = cfg;
        single.optimizers[0].cfg.gamma = res.rows[k].value;
        single.seeds = {res.rows[k].seed};
        single.threads = 1;
        auto one = run_experiment(single).records.at(0);
        EXPECT_EQ(serialize(one), serialize(res.records[k]));
        EXPECT_EQ(res.rows[k].final_objective, one.iterations.back().objective);
        EXPECT_EQ(res.rows[k].samples_to_target, decade_samples(one));
        EXPECT_EQ(res.rows[k].axis, "gamma");
    }
}

TEST(Sweep, NoiseAxisRebuildsInstances) {
    auto cfg = parse_config(
        "problem = power\nproblem.d = 3\nseeds = 0\nstop.max_iters = 20\nrecord.every = 5\n"
        "optimizer.sgd.gamma = 0.01\n");
    auto res = run_sweep(cfg, {"", "tau2", {1e-3, 1.0}});
    ASSERT_EQ(res.rows.size(), 2u);
    EXPECT_NE(serialize(res.records[0]), serialize(res.records[1]));
}

TEST(DecadeSamples, HandTrajectory) {
    RunRecord r;
    for (auto [obj, s] : std::vector<std::pair<double, std::uint64_t>>{{100, 0}, {50, 10}, {9, 20}, {0.5, 30}, {0.4, 40}}) {
        IterationMetrics m;
        m.objective = obj;
        m.cumulative_samples = s;
        r.iterations.push_back(m);
    }
    // 9 is one decade below 100, 0.5 is two, 0.4 does not reach three.
    EXPECT_EQ(decade_samples(r), "20;30");
}

TEST(Output, EmptyTrajectoryIsHeaderOnly) {
    auto dir = scratch("out");
    RunRecord r;
    write_trajectory_csv(r, dir / "e.csv");
    EXPECT_EQ(slurp(dir / "e.csv"), std::string(kTrajectoryHeader) + "\n");
}

TEST(Output, RoundTripAndAppend) {
    auto dir = scratch("rt");
    auto cfg = parse_config(std::string(kSmallPr) + "optimizer.sgd.gamma = 1e-4\n");
    auto res = run_experiment(cfg);
    const auto& a = res.records[0];
    const auto& b = res.records[1];
    write_trajectory_csv(a, dir / "a.csv");
    auto back = parse_trajectory_csv(slurp(dir / "a.csv"));
    ASSERT_EQ(back.size(), a.iterations.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].objective, a.iterations[i].objective);
        EXPECT_EQ(back[i].full_grad_norm, a.iterations[i].full_grad_norm);
        EXPECT_EQ(back[i].cumulative_samples, a.iterations[i].cumulative_samples);
    }
    write_trajectory_csv(a, dir / "ab.csv", true);
    write_trajectory_csv(b, dir / "ab.csv", true);
    auto both = parse_trajectory_csv(slurp(dir / "ab.csv"));
    EXPECT_EQ(both.size(), a.iterations.size() + b.iterations.size());
    EXPECT_THROW(write_trajectory_csv(a, dir / "missing_dir" / "x.csv"), Error);
}

TEST(Output, SummaryHeaderExact) {
    SweepRow r{"iansgd", 2, "delta", 0.001, 1.5, "10;20", false};
    EXPECT_EQ(summary_csv({r}),
              "method,seed,axis,value,final_objective,samples_to_target,diverged\n"
              "iansgd,2,delta,0.001,1.5,10;20,0\n");
}

TEST(Output, TrajectoryFilename) {
    RunRecord r;
    r.label = "nsgdm";
    r.seed = 4;
    EXPECT_EQ(trajectory_filename(r), "nsgdm_seed4.csv");
}

TEST(Config, EveryBundledConfigLoads) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(fs::path(GSOPT_SOURCE_DIR) / "configs")) {
        if (e.path().extension() != ".cfg") continue;
        auto cfg = load_config(e.path());
        EXPECT_NO_THROW(cfg.validate()) << e.path();
        if (cfg.sweep) {
            const auto& axes = sweep_axes();
            EXPECT_NE(std::find(axes.begin(), axes.end(), cfg.sweep->axis), axes.end()) << e.path();
            EXPECT_FALSE(cfg.sweep->values.empty());
        }
        ++n;
    }
    EXPECT_GE(n, 8u);
}

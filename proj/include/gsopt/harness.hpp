#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gsopt/core.hpp"
#include "gsopt/optimizers.hpp"
#include "gsopt/problems.hpp"

namespace gsopt {

inline constexpr double kDivergence = 1e12;

// ---------------------------------------------------------------- config

struct ProblemSpec {
    std::string id = "phase_retrieval";  // phase_retrieval | dro | power | quadratic
    std::size_t d = 100, m = 3000;
    Gaussian w_star{0.0, 0.5}, a{0.0, 0.5}, noise{0.0, 16.0};
    std::optional<Gaussian> w0;  // defaults depend on the problem
    std::string csv;
    std::size_t n = 2313, p = 34;
    double lambda = 0.01, l1_weight = 0.1, eta0 = 0.0;
    double power = 4.0;
    double w0_fill = 1.0;
    NoiseSpec oracle_noise{0.0, 1e-3};
    double shrink = 0.99;
    std::optional<std::uint64_t> data_seed;
};

struct StopRule {
    std::optional<std::uint64_t> max_iters;
    std::optional<std::uint64_t> sample_budget;
    std::optional<double> grad_target;
};

struct OptimizerEntry {
    std::string label;
    OptimizerConfig cfg;
};

struct SweepSpec {
    std::string optimizer;
    std::string axis;
    std::vector<double> values;
};

struct ExperimentConfig {
    ProblemSpec problem;
    std::vector<OptimizerEntry> optimizers;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    StopRule stop;
    std::size_t record_every = 10;
    std::size_t threads = 1;
    std::optional<SweepSpec> sweep;
    std::string canonical;  // sorted key=value text, the hash input

    std::string hash() const {
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
        return buf;
    }

    void validate() const {
        if (seeds.empty()) throw ConfigError("at least one seed is required");
        if (!stop.max_iters && !stop.sample_budget && !stop.grad_target)
            throw ConfigError("at least one stop rule is required");
        if (optimizers.empty()) throw ConfigError("no optimizers configured");
        if (record_every == 0) throw ConfigError("record.every must be positive");
        for (const auto& o : optimizers) o.cfg.validate();
    }
};

inline const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes{"gamma",       "beta",         "clip",  "delta", "gamma_cap",
                                               "scale_a",     "momentum",     "batch_b", "batch_bprime",
                                               "spider_epoch", "h_cap",       "tau1",  "tau2"};
    return axes;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    for (auto& s : split_fields(v, ',')) {
        auto t = trim(s);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

struct KeyLine {
    std::string value;
    std::size_t line;
};

inline double need_double(const std::string& key, const KeyLine& kv) {
    auto v = parse_double(kv.value);
    if (!v || !std::isfinite(*v))
        throw ConfigError("line " + std::to_string(kv.line) + ": '" + key + "' expects a number, got '" + kv.value + "'");
    return *v;
}

inline std::uint64_t need_u64(const std::string& key, const KeyLine& kv) {
    auto v = parse_u64(kv.value);
    if (!v)
        throw ConfigError("line " + std::to_string(kv.line) + ": '" + key + "' expects a nonnegative integer, got '" +
                          kv.value + "'");
    return *v;
}

// Applies one optimizer or sweep-axis field. Returns false for unknown names.
inline bool set_optimizer_field(OptimizerConfig& c, const std::string& field, const std::string& key,
                                const KeyLine& kv) {
    if (field == "method") {
        auto m = method_from(kv.value);
        if (!m) throw ConfigError("line " + std::to_string(kv.line) + ": unknown method '" + kv.value + "'");
        c.method = *m;
    } else if (field == "gamma") c.gamma = need_double(key, kv);
    else if (field == "beta") c.beta = need_double(key, kv);
    else if (field == "clip") c.clip = need_double(key, kv);
    else if (field == "delta") c.delta = need_double(key, kv);
    else if (field == "gamma_cap") c.gamma_cap = need_double(key, kv);
    else if (field == "scale_a") c.scale_a = need_double(key, kv);
    else if (field == "momentum") c.momentum = need_double(key, kv);
    else if (field == "batch_b") c.batch_b = need_u64(key, kv);
    else if (field == "batch_bprime") c.batch_bprime = need_u64(key, kv);
    else if (field == "spider_epoch") c.spider_epoch = need_u64(key, kv);
    else if (field == "h_cap") c.h_cap = need_double(key, kv);
    else return false;
    return true;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::map<std::string, detail::KeyLine> kv;
    std::vector<std::string> order;
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = {val, lineno};
        order.push_back(key);
    }

    auto& P = cfg.problem;
    std::optional<double> w0_mean, w0_var;
    std::map<std::string, OptimizerEntry> opts;
    std::vector<std::string> opt_order;
    SweepSpec sweep;
    bool has_sweep = false;

    for (const auto& key : order) {
        const auto& e = kv[key];
        auto unknown = [&]() { return ConfigError("line " + std::to_string(e.line) + ": unknown key '" + key + "'"); };
        if (key == "problem") {
            if (e.value != "phase_retrieval" && e.value != "dro" && e.value != "power" && e.value != "quadratic")
                throw ConfigError("line " + std::to_string(e.line) + ": unknown problem '" + e.value + "'");
            P.id = e.value;
        } else if (key == "problem.d") P.d = detail::need_u64(key, e);
        else if (key == "problem.m") P.m = detail::need_u64(key, e);
        else if (key == "problem.n") P.n = detail::need_u64(key, e);
        else if (key == "problem.p") P.p = detail::need_u64(key, e);
        else if (key == "problem.csv") P.csv = e.value;
        else if (key == "problem.lambda") P.lambda = detail::need_double(key, e);
        else if (key == "problem.l1_weight") P.l1_weight = detail::need_double(key, e);
        else if (key == "problem.eta0") P.eta0 = detail::need_double(key, e);
        else if (key == "problem.power") P.power = detail::need_double(key, e);
        else if (key == "problem.w0_fill") P.w0_fill = detail::need_double(key, e);
        else if (key == "problem.data_seed") P.data_seed = detail::need_u64(key, e);
        else if (key == "problem.w_star_mean") P.w_star.mean = detail::need_double(key, e);
        else if (key == "problem.w_star_var") P.w_star.variance = detail::need_double(key, e);
        else if (key == "problem.a_mean") P.a.mean = detail::need_double(key, e);
        else if (key == "problem.a_var") P.a.variance = detail::need_double(key, e);
        else if (key == "problem.noise_mean") P.noise.mean = detail::need_double(key, e);
        else if (key == "problem.noise_var") P.noise.variance = detail::need_double(key, e);
        else if (key == "problem.w0_mean") w0_mean = detail::need_double(key, e);
        else if (key == "problem.w0_var") w0_var = detail::need_double(key, e);
        else if (key == "noise.tau1") P.oracle_noise.tau1 = detail::need_double(key, e);
        else if (key == "noise.tau2") P.oracle_noise.tau2 = detail::need_double(key, e);
        else if (key == "noise.shrink") P.shrink = detail::need_double(key, e);
        else if (key == "seeds") {
            cfg.seeds.clear();
            for (const auto& s : detail::split_list(e.value)) cfg.seeds.push_back(detail::need_u64(key, {s, e.line}));
        } else if (key == "stop.max_iters") cfg.stop.max_iters = detail::need_u64(key, e);
        else if (key == "stop.sample_budget") cfg.stop.sample_budget = detail::need_u64(key, e);
        else if (key == "stop.grad_target") cfg.stop.grad_target = detail::need_double(key, e);
        else if (key == "record.every") cfg.record_every = detail::need_u64(key, e);
        else if (key == "threads") cfg.threads = std::max<std::uint64_t>(1, detail::need_u64(key, e));
        else if (key == "sweep.optimizer") {
            sweep.optimizer = e.value;
            has_sweep = true;
        } else if (key == "sweep.axis") {
            sweep.axis = e.value;
            has_sweep = true;
        } else if (key == "sweep.values") {
            for (const auto& s : detail::split_list(e.value)) sweep.values.push_back(detail::need_double(key, {s, e.line}));
            has_sweep = true;
        } else if (key.rfind("optimizer.", 0) == 0) {
            auto rest = key.substr(10);
            auto dot = rest.find('.');
            if (dot == std::string::npos || dot == 0) throw unknown();
            std::string label = rest.substr(0, dot), field = rest.substr(dot + 1);
            if (!opts.count(label)) {
                OptimizerEntry oe;
                oe.label = label;
                if (auto m = method_from(label)) oe.cfg.method = *m;
                opts[label] = oe;
                opt_order.push_back(label);
            }
            if (!detail::set_optimizer_field(opts[label].cfg, field, key, e)) throw unknown();
        } else {
            throw unknown();
        }
    }

    if (P.id == "phase_retrieval") P.w0 = Gaussian{1.0, 6.0};
    else P.w0 = Gaussian{0.0, 1.0};
    if (w0_mean) P.w0->mean = *w0_mean;
    if (w0_var) P.w0->variance = *w0_var;

    for (const auto& l : opt_order) cfg.optimizers.push_back(opts[l]);
    if (has_sweep) cfg.sweep = sweep;

    std::vector<std::string> canon;
    for (const auto& [k, v] : kv) canon.push_back(k + "=" + v.value);
    for (const auto& c : canon) cfg.canonical += c + '\n';
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------- CSV dataset

struct CsvLoadResult {
    DroData data;
    std::vector<std::string> warnings;
};

// Header row, one numeric target column "y", every other column a feature.
// Features are standardized to zero mean and unit variance; a constant
// column is only centered.
inline CsvLoadResult load_csv_dataset(const std::filesystem::path& path, double lambda = 0.01,
                                      double l1_weight = 0.1) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset " + path.string());
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) {
            for (auto& h : split_fields(line)) header.push_back(trim(h));
            break;
        }
    }
    if (header.empty()) throw Error("empty file: " + path.string());
    auto yit = std::find(header.begin(), header.end(), "y");
    if (yit == header.end()) throw Error("missing target column");
    const std::size_t ycol = yit - header.begin();

    CsvLoadResult out;
    DroData& D = out.data;
    D.lambda = lambda;
    D.l1_reg_weight = l1_weight;
    D.p = header.size() - 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto f = split_fields(line);
        if (f.size() != header.size())
            throw Error("row " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " cells, got " +
                        std::to_string(f.size()));
        for (std::size_t c = 0; c < f.size(); ++c) {
            auto v = parse_double(f[c]);
            if (!v || !std::isfinite(*v))
                throw Error("non-numeric cell at row " + std::to_string(lineno) + ", column '" + header[c] + "'");
            if (c == ycol) D.y.push_back(*v);
            else D.x.push_back(*v);
        }
        ++D.n;
    }
    if (D.n == 0) throw Error("empty file: no data rows in " + path.string());

    D.feature_mean.assign(D.p, 0.0);
    D.feature_scale.assign(D.p, 1.0);
    std::size_t fi = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == ycol) continue;
        double mean = 0.0;
        for (std::size_t i = 0; i < D.n; ++i) mean += D.x[i * D.p + fi];
        mean /= D.n;
        double var = 0.0;
        for (std::size_t i = 0; i < D.n; ++i) var += (D.x[i * D.p + fi] - mean) * (D.x[i * D.p + fi] - mean);
        var /= D.n;
        double sd = std::sqrt(var);
        if (sd == 0.0) {
            out.warnings.push_back("constant feature column '" + header[c] + "' centered but not scaled");
            sd = 1.0;
        }
        for (std::size_t i = 0; i < D.n; ++i) D.x[i * D.p + fi] = (D.x[i * D.p + fi] - mean) / sd;
        D.feature_mean[fi] = mean;
        D.feature_scale[fi] = sd;
        ++fi;
    }
    D.validate();
    return out;
}

// ---------------------------------------------------------------- problem instances

struct Instance {
    std::string id;
    std::unique_ptr<FiniteSum> finite;
    std::unique_ptr<SmoothFunction> smooth;
    std::unique_ptr<Oracle> oracle;
    Vec w0;
    std::optional<double> alpha;
    std::vector<std::string> notes;  // standardization constants, warnings
};

inline std::unique_ptr<Instance> make_instance(const ProblemSpec& P, std::uint64_t seed) {
    auto inst = std::make_unique<Instance>();
    inst->id = P.id;
    Rng root(P.data_seed.value_or(seed));
    Rng data_rng = root.split("data"), init_rng = root.split("init");
    const Gaussian w0 = P.w0.value_or(Gaussian{0.0, 1.0});
    if (P.id == "phase_retrieval") {
        auto pr = generate_phase_retrieval(P.d, P.m, P.w_star, P.a, P.noise, data_rng);
        inst->finite = std::make_unique<PhaseRetrieval>(std::move(pr.data));
        inst->w0.resize(P.d);
        for (auto& x : inst->w0) x = init_rng.normal(w0.mean, w0.variance);
        inst->alpha = 2.0 / 3.0;
    } else if (P.id == "dro") {
        DroData D;
        if (!P.csv.empty()) {
            auto loaded = load_csv_dataset(P.csv, P.lambda, P.l1_weight);
            D = std::move(loaded.data);
            inst->notes = loaded.warnings;
            std::string m = "standardization mean=", s = "standardization scale=";
            for (std::size_t j = 0; j < D.p; ++j) {
                m += (j ? ";" : "") + format_double(D.feature_mean[j]);
                s += (j ? ";" : "") + format_double(D.feature_scale[j]);
            }
            inst->notes.push_back(m);
            inst->notes.push_back(s);
        } else {
            D = generate_dro_regression(P.n, P.p, data_rng);
            D.lambda = P.lambda;
            D.l1_reg_weight = P.l1_weight;
        }
        std::size_t p = D.p;
        inst->finite = std::make_unique<DroDual>(std::move(D));
        inst->w0.resize(p + 1);
        for (std::size_t j = 0; j < p; ++j) inst->w0[j] = init_rng.normal(w0.mean, w0.variance);
        inst->w0[p] = P.eta0;
        inst->alpha = 1.0;
    } else if (P.id == "power" || P.id == "quadratic") {
        if (P.id == "power") {
            auto f = std::make_unique<PowerFunction>(P.power, P.d);
            inst->alpha = f->geometry().alpha;
            inst->smooth = std::move(f);
        } else {
            inst->smooth = std::make_unique<HalfSquaredNorm>(P.d);
            inst->alpha = 0.0;
        }
        inst->w0.assign(P.d, P.w0_fill);
        inst->oracle = std::make_unique<NoisyOracle>(*inst->smooth, P.oracle_noise, P.shrink);
        return inst;
    } else {
        throw ConfigError("unknown problem '" + P.id + "'");
    }
    inst->oracle = std::make_unique<FiniteSumOracle>(*inst->finite);
    return inst;
}

// ---------------------------------------------------------------- single run

inline RunRecord run_single(const Instance& inst, const OptimizerEntry& opt, std::uint64_t seed, const StopRule& stop,
                            std::size_t record_every) {
    RunRecord rec;
    rec.seed = seed;
    rec.label = opt.label;
    rec.problem = inst.id;
    rec.config = opt.cfg.snapshot();

    Optimizer optimizer(opt.cfg, *inst.oracle, Rng(seed).split("optimizer:" + opt.label));
    OptimizerState s;
    s.w = inst.w0;
    std::uint64_t samples = 0;
    Vec g;

    auto measure = [&](const StepInfo* info) {
        IterationMetrics m;
        m.t = s.t;
        m.objective = inst.oracle->full(s.w, g);
        m.full_grad_norm = l2_norm(g);
        m.cumulative_samples = samples;
        if (info) {
            m.stoch_grad_norm = info->stoch_grad_norm;
            m.normalizer_h = info->h;
        }
        return m;
    };
    auto healthy = [](const IterationMetrics& m) {
        return std::isfinite(m.objective) && std::isfinite(m.full_grad_norm) && std::fabs(m.objective) <= kDivergence &&
               m.full_grad_norm <= kDivergence;
    };

    auto first = measure(nullptr);
    if (!healthy(first)) {
        rec.stop = StopReason::diverged;
        return rec;
    }
    rec.iterations.push_back(first);
    double last_grad = first.full_grad_norm;
    StepInfo info;
    bool have_info = false;
    while (true) {
        if (stop.sample_budget && samples >= *stop.sample_budget) {
            rec.stop = StopReason::sample_budget;
            break;
        }
        if (stop.max_iters && s.t >= *stop.max_iters) {
            rec.stop = StopReason::max_iters;
            break;
        }
        if (stop.grad_target && last_grad <= *stop.grad_target) {
            rec.stop = StopReason::grad_target;
            break;
        }
        info = optimizer.step(s);
        have_info = true;
        samples += info.samples;
        rec.h_cap_hits += info.h_capped;
        if (!all_finite(s.w) || !std::isfinite(info.stoch_grad_norm) || info.stoch_grad_norm > kDivergence) {
            rec.stop = StopReason::diverged;
            break;
        }
        if (s.t % record_every == 0) {
            auto m = measure(&info);
            if (!healthy(m)) {
                if (std::isfinite(m.objective) && std::isfinite(m.full_grad_norm)) rec.iterations.push_back(m);
                rec.stop = StopReason::diverged;
                break;
            }
            rec.iterations.push_back(m);
            last_grad = m.full_grad_norm;
        }
    }
    if (rec.stop != StopReason::diverged && rec.iterations.back().t != s.t && have_info) {
        auto m = measure(&info);
        if (healthy(m)) rec.iterations.push_back(m);
        else rec.stop = StopReason::diverged;
    }
    return rec;
}

// ---------------------------------------------------------------- parallel helpers

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k)
        pool.emplace_back([&, k]() {
            try {
                for (std::size_t i = next++; i < n; i = next++) fn(i);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct ExperimentResult {
    std::vector<RunRecord> records;  // ordered by optimizer, then seed
    std::vector<std::string> warnings;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult res;
    std::vector<std::unique_ptr<Instance>> inst(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) { inst[i] = make_instance(cfg.problem, cfg.seeds[i]); });
    for (const auto& n : inst[0]->notes) res.warnings.push_back(n);
    for (const auto& o : cfg.optimizers)
        for (const auto& w : o.cfg.validate(inst[0]->alpha)) res.warnings.push_back(o.label + ": " + w);

    const std::size_t S = cfg.seeds.size();
    res.records.resize(cfg.optimizers.size() * S);
    parallel_for(res.records.size(), cfg.threads, [&](std::size_t k) {
        std::size_t oi = k / S, si = k % S;
        res.records[k] = run_single(*inst[si], cfg.optimizers[oi], cfg.seeds[si], cfg.stop, cfg.record_every);
    });
    return res;
}

// ---------------------------------------------------------------- sweeps

struct SweepRow {
    std::string method;
    std::uint64_t seed = 0;
    std::string axis;
    double value = 0.0;
    double final_objective = 0.0;
    std::string samples_to_target;  // ';'-joined samples at each decade of decrease
    bool diverged = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<RunRecord> records;  // same order as rows
    std::vector<std::string> warnings;
};

// Samples at which the objective first dropped by 1, 2, ... decades.
inline std::string decade_samples(const RunRecord& rec) {
    if (rec.iterations.empty()) return {};
    const double f0 = rec.iterations.front().objective;
    if (!(f0 > 0.0)) return {};
    std::string out;
    int k = 1;
    for (const auto& m : rec.iterations) {
        while (m.objective <= f0 * std::pow(10.0, -k)) {
            if (!out.empty()) out += ';';
            out += std::to_string(m.cumulative_samples);
            ++k;
        }
    }
    return out;
}

inline void apply_axis(ExperimentConfig& cfg, OptimizerEntry& target, const std::string& axis, double value) {
    if (axis == "tau1") {
        cfg.problem.oracle_noise.tau1 = value;
        return;
    }
    if (axis == "tau2") {
        cfg.problem.oracle_noise.tau2 = value;
        return;
    }
    detail::KeyLine kv{format_double(value), 0};
    if (axis == "batch_b" || axis == "batch_bprime" || axis == "spider_epoch") kv.value = std::to_string(std::llround(value));
    if (!detail::set_optimizer_field(target.cfg, axis, axis, kv)) throw ConfigError("unknown sweep axis");
}

inline SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& spec) {
    const auto& axes = sweep_axes();
    if (std::find(axes.begin(), axes.end(), spec.axis) == axes.end()) {
        std::string list;
        for (const auto& a : axes) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError("unknown sweep axis '" + spec.axis + "'; valid axes: " + list);
    }
    if (spec.values.empty()) throw ConfigError("sweep needs at least one value");
    base.validate();
    const OptimizerEntry* target = nullptr;
    if (spec.optimizer.empty()) {
        if (base.optimizers.size() != 1) throw ConfigError("sweep.optimizer is required when several optimizers are configured");
        target = &base.optimizers[0];
    } else {
        for (const auto& o : base.optimizers)
            if (o.label == spec.optimizer) target = &o;
        if (!target) throw ConfigError("sweep.optimizer '" + spec.optimizer + "' is not configured");
    }

    struct Cell {
        ExperimentConfig cfg;
        OptimizerEntry opt;
        double value;
    };
    std::vector<Cell> cells;
    for (double v : spec.values) {
        Cell c{base, *target, v};
        apply_axis(c.cfg, c.opt, spec.axis, v);
        c.opt.cfg.validate();
        c.cfg.problem.oracle_noise.validate();
        cells.push_back(std::move(c));
    }

    // Problem instances only depend on the axis when it is a noise level.
    const bool per_cell_instance = spec.axis == "tau1" || spec.axis == "tau2";
    const std::size_t S = base.seeds.size();
    std::vector<std::unique_ptr<Instance>> inst(per_cell_instance ? cells.size() * S : S);
    parallel_for(inst.size(), base.threads, [&](std::size_t i) {
        const auto& P = per_cell_instance ? cells[i / S].cfg.problem : base.problem;
        inst[i] = make_instance(P, base.seeds[i % S]);
    });

    SweepResult res;
    for (const auto& c : cells)
        for (const auto& w : c.opt.cfg.validate(inst[0]->alpha))
            res.warnings.push_back(spec.axis + "=" + format_double(c.value) + ": " + w);
    res.records.resize(cells.size() * S);
    parallel_for(res.records.size(), base.threads, [&](std::size_t k) {
        std::size_t ci = k / S, si = k % S;
        const Instance& I = per_cell_instance ? *inst[k] : *inst[si];
        res.records[k] = run_single(I, cells[ci].opt, base.seeds[si], base.stop, base.record_every);
    });
    for (std::size_t k = 0; k < res.records.size(); ++k) {
        const auto& r = res.records[k];
        SweepRow row;
        row.method = r.label;
        row.seed = r.seed;
        row.axis = spec.axis;
        row.value = cells[k / S].value;
        row.final_objective = r.iterations.empty() ? std::nan("") : r.iterations.back().objective;
        row.samples_to_target = decade_samples(r);
        row.diverged = r.diverged();
        res.rows.push_back(row);
    }
    return res;
}

// ---------------------------------------------------------------- output

inline void write_text(const std::filesystem::path& path, const std::string& text, bool append = false) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

// In append mode the header is only written when the file is new or empty.
inline void write_trajectory_csv(const RunRecord& rec, const std::filesystem::path& path, bool append = false) {
    std::string text = trajectory_csv(rec);
    bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    if (!fresh) text = text.substr(text.find('\n') + 1);
    write_text(path, text, append);
}

inline const char* kSummaryHeader = "method,seed,axis,value,final_objective,samples_to_target,diverged";

inline std::string summary_csv(const std::vector<SweepRow>& rows) {
    std::string out = kSummaryHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += r.method + ',' + std::to_string(r.seed) + ',' + r.axis + ',' + format_double(r.value) + ',' +
               format_double(r.final_objective) + ',' + r.samples_to_target + ',' + (r.diverged ? "1" : "0") + '\n';
    }
    return out;
}

inline void write_summary_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    write_text(path, summary_csv(rows));
}

inline std::string trajectory_filename(const RunRecord& rec) {
    return rec.label + "_seed" + std::to_string(rec.seed) + ".csv";
}

}  // namespace gsopt

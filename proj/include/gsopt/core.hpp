#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gsopt {

using Vec = std::vector<double>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user input: config files, CLI flags, out-of-range bound parameters.
struct ConfigError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------- vectors

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    if (std::isnan(s) || (s > 1e-280 && s < 1e280)) return std::sqrt(s);
    // Rescale when the squares underflow or overflow.
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    if (m == 0.0 || !std::isfinite(m)) return m;
    s = 0.0;
    for (double x : v) s += (x / m) * (x / m);
    return m * std::sqrt(s);
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec scaled(const Vec& v, double c) {
    Vec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = c * v[i];
    return r;
}

inline double cosine(const Vec& a, const Vec& b) {
    return dot(a, b) / (l2_norm(a) * l2_norm(b));
}

// Neumaier-compensated running sum. Monte-Carlo reductions go through this
// so the result does not drift with the number of terms.
class KahanSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            c_ += (sum_ - t) + x;
        else
            c_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + c_; }

private:
    double sum_ = 0.0;
    double c_ = 0.0;
};

// ---------------------------------------------------------------- geometry

struct GeometryParams {
    double l0 = 0.0;
    double l1 = 0.0;
    double alpha = 0.0;
    std::optional<double> mu;
    std::optional<double> rho;

    void validate() const {
        if (!(l0 >= 0.0) || !(l1 >= 0.0)) throw ConfigError("L0 and L1 must be nonnegative");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0,1]");
        if (mu && !(*mu > 0.0)) throw ConfigError("mu must be positive");
        if (rho && !(*rho > 0.0 && *rho <= 2.0)) throw ConfigError("rho must lie in (0,2]");
    }
};

struct NoiseSpec {
    double tau1 = 0.0;
    double tau2 = 1.0;

    void validate() const {
        if (!(tau1 >= 0.0 && tau1 < 1.0)) throw ConfigError("tau1 must lie in [0,1)");
        if (!(tau2 > 0.0)) throw ConfigError("tau2 must be positive");
    }
};

// ---------------------------------------------------------------- rng

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seeded stream. split() derives a child whose seed is a hash of the parent
// seed and a key, so children with different keys never share state and the
// parent's own draws do not disturb them.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), eng_(splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    Rng split(std::uint64_t key) const { return Rng(splitmix64(seed_ ^ splitmix64(key + 0x632be59bd9b4e019ULL))); }
    Rng split(std::string_view key) const { return split(fnv1a(key)); }

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double normal(double mean = 0.0, double variance = 1.0) {
        if (variance == 0.0) return mean;
        return mean + std::sqrt(variance) * std::normal_distribution<double>(0.0, 1.0)(eng_);
    }

    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_); }

    Vec unit_vector(std::size_t d) {
        Vec u(d);
        double n = 0.0;
        while (n < 1e-300) {
            for (auto& x : u) x = normal();
            n = l2_norm(u);
        }
        for (auto& x : u) x /= n;
        return u;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

// ---------------------------------------------------------------- records

struct IterationMetrics {
    std::uint64_t t = 0;
    double objective = 0.0;
    double full_grad_norm = 0.0;
    double stoch_grad_norm = 0.0;
    std::optional<double> normalizer_h;
    std::uint64_t cumulative_samples = 0;
};

enum class StopReason { none, sample_budget, max_iters, grad_target, diverged };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::sample_budget: return "sample_budget";
        case StopReason::max_iters: return "max_iters";
        case StopReason::grad_target: return "grad_target";
        case StopReason::diverged: return "diverged";
        default: return "none";
    }
}

inline StopReason stop_reason_from(std::string_view s) {
    for (auto r : {StopReason::sample_budget, StopReason::max_iters, StopReason::grad_target, StopReason::diverged})
        if (s == to_string(r)) return r;
    return StopReason::none;
}

struct RunRecord {
    std::vector<IterationMetrics> iterations;
    std::uint64_t seed = 0;
    std::string config;   // one-line snapshot of the optimizer config
    std::string problem;  // problem id
    std::string label;    // optimizer label inside the experiment
    StopReason stop = StopReason::none;
    std::uint64_t h_cap_hits = 0;

    bool diverged() const { return stop == StopReason::diverged; }
};

inline const char* kTrajectoryHeader =
    "t,objective,full_grad_norm,stoch_grad_norm,normalizer_h,cumulative_samples";

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string trajectory_csv(const RunRecord& rec) {
    std::string out = kTrajectoryHeader;
    out += '\n';
    for (const auto& m : rec.iterations) {
        out += std::to_string(m.t);
        out += ',' + format_double(m.objective);
        out += ',' + format_double(m.full_grad_norm);
        out += ',' + format_double(m.stoch_grad_norm);
        out += ',';
        if (m.normalizer_h) out += format_double(*m.normalizer_h);
        out += ',' + std::to_string(m.cumulative_samples);
        out += '\n';
    }
    return out;
}

inline std::vector<std::string> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Strict full-string number parsing; strtod accepts "inf"/"nan" which we let
// through so callers can decide what finite means.
inline std::optional<double> parse_double(std::string_view s) {
    std::string tmp = trim(s);
    if (tmp.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) return std::nullopt;
    return v;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
    std::string tmp = trim(s);
    if (tmp.empty() || tmp[0] == '-') return std::nullopt;
    char* end = nullptr;
    unsigned long long v = std::strtoull(tmp.c_str(), &end, 10);
    if (end != tmp.c_str() + tmp.size()) return std::nullopt;
    return static_cast<std::uint64_t>(v);
}

inline std::vector<IterationMetrics> parse_trajectory_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kTrajectoryHeader) throw Error("trajectory csv: bad header");
    std::vector<IterationMetrics> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto f = split_fields(line);
        if (f.size() != 6) throw Error("trajectory csv: wrong field count on line " + std::to_string(lineno));
        IterationMetrics m;
        auto t = parse_u64(f[0]);
        auto obj = parse_double(f[1]);
        auto fg = parse_double(f[2]);
        auto sg = parse_double(f[3]);
        auto cs = parse_u64(f[5]);
        if (!t || !obj || !fg || !sg || !cs) throw Error("trajectory csv: bad value on line " + std::to_string(lineno));
        m.t = *t;
        m.objective = *obj;
        m.full_grad_norm = *fg;
        m.stoch_grad_norm = *sg;
        if (!trim(f[4]).empty()) {
            auto h = parse_double(f[4]);
            if (!h) throw Error("trajectory csv: bad normalizer on line " + std::to_string(lineno));
            m.normalizer_h = *h;
        }
        m.cumulative_samples = *cs;
        rows.push_back(m);
    }
    return rows;
}

// Full record: '#'-prefixed metadata lines followed by the trajectory table.
inline std::string serialize(const RunRecord& rec) {
    std::string out;
    out += "# problem=" + rec.problem + '\n';
    out += "# label=" + rec.label + '\n';
    out += "# seed=" + std::to_string(rec.seed) + '\n';
    out += "# config=" + rec.config + '\n';
    out += std::string("# stop=") + to_string(rec.stop) + '\n';
    out += "# h_cap_hits=" + std::to_string(rec.h_cap_hits) + '\n';
    out += trajectory_csv(rec);
    return out;
}

inline RunRecord deserialize(const std::string& text) {
    RunRecord rec;
    std::istringstream in(text);
    std::string line, table;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            auto eq = line.find('=');
            if (eq == std::string::npos) throw Error("record: bad metadata line");
            std::string key = line.substr(2, eq - 2), val = line.substr(eq + 1);
            if (key == "problem") rec.problem = val;
            else if (key == "label") rec.label = val;
            else if (key == "seed") rec.seed = parse_u64(val).value_or(0);
            else if (key == "config") rec.config = val;
            else if (key == "stop") rec.stop = stop_reason_from(val);
            else if (key == "h_cap_hits") rec.h_cap_hits = parse_u64(val).value_or(0);
        } else {
            table += line + '\n';
        }
    }
    rec.iterations = parse_trajectory_csv(table);
    return rec;
}

}  // namespace gsopt

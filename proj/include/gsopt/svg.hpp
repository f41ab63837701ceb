#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gsopt/core.hpp"

namespace gsopt {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

inline constexpr double kLogFloor = 1e-16;

// Reads the objective and cumulative_samples columns of a trajectory CSV.
inline Series read_series(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
    auto header = split_fields(trim(line));
    auto col = [&](const char* name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::size_t cx = col("cumulative_samples"), cy = col("objective");
    Series s;
    s.name = path.stem().string();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto f = split_fields(line);
        if (f.size() != header.size()) throw Error(path.string() + ": wrong field count on line " + std::to_string(lineno));
        auto x = parse_double(f[cx]);
        auto y = parse_double(f[cy]);
        if (!x || !y) throw Error(path.string() + ": bad number on line " + std::to_string(lineno));
        s.x.push_back(*x);
        s.y.push_back(*y);
    }
    return s;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct SvgResult {
    std::string svg;
    std::vector<std::string> warnings;
};

// Objective (log10 axis) against cumulative samples, one polyline per series.
inline SvgResult render_svg(const std::vector<Series>& series) {
    SvgResult out;
    const double W = 800, H = 500, left = 80, right = 200, top = 30, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;

    std::vector<std::vector<double>> ly(series.size());
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        std::size_t clipped = 0;
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            double v = s.y[i];
            if (!(v > kLogFloor)) {
                ++clipped;
                v = kLogFloor;
            }
            ly[k].push_back(std::log10(v));
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, ly[k].back());
            ymax = std::max(ymax, ly[k].back());
        }
        if (clipped)
            out.warnings.push_back(s.name + ": " + std::to_string(clipped) + " objective values clipped at 1e-16 for the log axis");
    }
    if (!(xmax > xmin)) {
        xmin = std::isfinite(xmin) ? xmin - 1 : 0;
        xmax = xmin + 2;
    }
    ymin = std::floor(std::isfinite(ymin) ? ymin : 0.0);
    ymax = std::ceil(std::isfinite(ymax) ? ymax : 1.0);
    if (ymax <= ymin) ymax = ymin + 1;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.2f", v);
        return std::string(b);
    };

    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
      << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
        double y = py(e);
        o << "<line x1=\"" << left - 5 << "\" y1=\"" << num(y) << "\" x2=\"" << left << "\" y2=\"" << num(y)
          << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << left - 8 << "\" y=\"" << num(y + 4) << "\" font-size=\"11\" text-anchor=\"end\">1e" << e
          << "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        double xv = xmin + (xmax - xmin) * k / 4.0;
        o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 18)
          << "\" font-size=\"11\" text-anchor=\"middle\">" << format_double(std::round(xv)) << "</text>\n";
    }
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << H - 15
      << "\" font-size=\"13\" text-anchor=\"middle\">cumulative samples</text>\n"
      << "<text x=\"18\" y=\"" << num(top + ph / 2) << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << num(top + ph / 2) << ")\">objective</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* c = colors[k % 10];
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[k].x.size(); ++i) o << (i ? " " : "") << num(px(series[k].x[i])) << ',' << num(py(ly[k][i]));
        o << "\"/>\n";
        double ly0 = top + 15 + 18.0 * k;
        o << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << num(ly0) << "\" x2=\"" << left + pw + 40 << "\" y2=\""
          << num(ly0) << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n"
          << "<text x=\"" << left + pw + 45 << "\" y=\"" << num(ly0 + 4) << "\" font-size=\"11\">"
          << xml_escape(series[k].name) << "</text>\n";
    }
    o << "</svg>\n";
    out.svg = o.str();
    return out;
}

inline SvgResult emit_svg_plot(const std::vector<std::filesystem::path>& csvs, const std::filesystem::path& out_path) {
    std::vector<Series> s;
    for (const auto& p : csvs) s.push_back(read_series(p));
    auto r = render_svg(s);
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write " + out_path.string());
    out << r.svg;
    return r;
}

}  // namespace gsopt

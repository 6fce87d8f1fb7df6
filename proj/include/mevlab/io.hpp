#pragma once

// CSV / JSON / SVG emitters and atomic file output.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mevlab/common_values.hpp"
#include "mevlab/private_equilibrium.hpp"
#include "mevlab/simulator.hpp"

namespace mevlab {

inline constexpr int kSchemaVersion = 1;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes through a sibling temp file and renames it into place; on failure
/// nothing is left at `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("output directory does not exist: " + dir.string());
    std::random_device rd;
    const fs::path tmp = dir / (path.filename().string() + ".tmp" + std::to_string(rd()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp, ec);
            throw IoError("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place: " + path.string());
    }
}

// ---------------------------------------------------------- private values

inline std::string solution_csv(const EquilibriumSolution& sol) {
    std::ostringstream os;
    os << "v,sigma,x,S\n";
    for (std::size_t i = 0; i < sol.values().size(); ++i) {
        os << format_number(sol.values()[i]) << ',' << format_number(sol.bids()[i]) << ','
           << format_number(sol.win_prob[i]) << ',' << format_number(sol.surplus[i]) << '\n';
    }
    return os.str();
}

inline nlohmann::json config_json(const HybridAuctionConfig& cfg) {
    return {{"n_A", cfg.n_integrated},
            {"n_B", cfg.n_nonintegrated},
            {"F_A", cfg.integrated_law.spec()},
            {"F_B", cfg.nonintegrated_law.spec()}};
}

inline nlohmann::json diagnostics_json(const SolverDiagnostics& d) {
    return {{"method", d.method},
            {"converged", d.converged},
            {"iterations", d.iterations},
            {"residual", d.residual},
            {"tolerance", d.tolerance},
            {"damping", d.damping},
            {"asymptote_slope", d.asymptote_slope},
            {"asymptote_cutoff", d.asymptote_cutoff},
            {"asymptote_fallback", d.asymptote_fallback},
            {"ode_steps", d.ode_steps},
            {"ode_rejected", d.ode_rejected}};
}

inline nlohmann::json solution_json(const EquilibriumSolution& sol) {
    const auto env = verify_envelope(sol);
    return {{"schema_version", kSchemaVersion},
            {"kind", "private_equilibrium"},
            {"config", config_json(sol.config)},
            {"grid_size", sol.values().size()},
            {"solver", diagnostics_json(sol.diagnostics)},
            {"residuals", {{"equation", sol.diagnostics.residual}, {"envelope", env.sup}, {"envelope_at", env.location}}},
            {"summary",
             {{"slope_fit", slope_fit(sol)},
              {"ex_ante_surplus", ex_ante_nonintegrated_surplus(sol)},
              {"nonintegrated_win_rate", nonintegrated_win_rate(sol)}}}};
}

// ---------------------------------------------------------- common values

inline nlohmann::json candlestick_json(const CandlestickSolution& sol) {
    const auto& c = sol.config;
    return {{"schema_version", kSchemaVersion},
            {"kind", "candlestick"},
            {"v0", c.process.v0},
            {"vol", c.process.vol},
            {"delta", c.process.delta},
            {"p", c.revision_prob},
            {"b0s", sol.b0s},
            {"slow_win_prob", sol.slow_win_prob},
            {"fast_win_prob", sol.fast_win_prob},
            {"fast_profit", sol.fast_expected_profit},
            {"residual", sol.residual},
            {"put_form_gap", sol.put_form_gap},
            {"bracket", {sol.bracket_lo, sol.bracket_hi}},
            {"iterations", sol.iterations}};
}

// ----------------------------------------------------------- simulation

/// Everything here is a pure function of the inputs; wall-clock data belongs
/// under a separate "metadata" key added by the caller.
inline nlohmann::json report_json(const SimReport& rep) {
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [name, e] : rep.metrics) {
        metrics[name] = {{"mean", e.mean}, {"sd", e.sd}, {"half_width", e.half_width}, {"count", e.count}};
    }
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"metric", c.metric},
                          {"analytic", c.analytic},
                          {"estimate", c.estimate},
                          {"half_width", c.half_width},
                          {"pass", c.pass}});
    }
    nlohmann::json config = nlohmann::json::object();
    for (const auto& [k, v] : rep.parameters) config[k] = v;
    for (const auto& [k, v] : rep.labels) config[k] = v;
    return {{"schema_version", kSchemaVersion},
            {"kind", "sim_report"},
            {"model", rep.model},
            {"reps", rep.reps},
            {"seed", rep.seed},
            {"config", config},
            {"metrics", metrics},
            {"checks", checks},
            {"passed", rep.passed()}};
}

inline std::string table_csv(const Table& t) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    }
    return os.str();
}

// ------------------------------------------------------------------ SVG

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
    bool dashed = false;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
    int width = 640, height = 480;
};

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

/// Line chart with axes, five ticks per axis and a legend box.
inline std::string svg_line_chart(const ChartSpec& spec, const std::vector<Series>& series) {
    const double left = 70, right = 20, top = 40, bottom = 60;
    const double pw = spec.width - left - right;
    const double ph = spec.height - top - bottom;
    auto px = [&](double x) { return left + (x - spec.x_min) / (spec.x_max - spec.x_min) * pw; };
    auto py = [&](double y) { return top + ph - (y - spec.y_min) / (spec.y_max - spec.y_min) * ph; };
    auto f = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
       << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << spec.width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
       << xml_escape(spec.title) << "</text>\n";
    os << "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
       << "<line x1=\"" << f(left) << "\" y1=\"" << f(top + ph) << "\" x2=\"" << f(left + pw) << "\" y2=\"" << f(top + ph) << "\"/>\n"
       << "<line x1=\"" << f(left) << "\" y1=\"" << f(top) << "\" x2=\"" << f(left) << "\" y2=\"" << f(top + ph) << "\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = spec.x_min + (spec.x_max - spec.x_min) * i / 5.0;
        const double yv = spec.y_min + (spec.y_max - spec.y_min) * i / 5.0;
        os << "<line x1=\"" << f(px(xv)) << "\" y1=\"" << f(top + ph) << "\" x2=\"" << f(px(xv)) << "\" y2=\""
           << f(top + ph + 5) << "\"/>\n"
           << "<line x1=\"" << f(left - 5) << "\" y1=\"" << f(py(yv)) << "\" x2=\"" << f(left) << "\" y2=\"" << f(py(yv)) << "\"/>\n";
    }
    os << "</g>\n<g id=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = spec.x_min + (spec.x_max - spec.x_min) * i / 5.0;
        const double yv = spec.y_min + (spec.y_max - spec.y_min) * i / 5.0;
        os << "<text x=\"" << f(px(xv)) << "\" y=\"" << f(top + ph + 18) << "\" text-anchor=\"middle\">" << f(xv) << "</text>\n"
           << "<text x=\"" << f(left - 8) << "\" y=\"" << f(py(yv) + 4) << "\" text-anchor=\"end\">" << f(yv) << "</text>\n";
    }
    os << "</g>\n"
       << "<text id=\"x-label\" x=\"" << f(left + pw / 2) << "\" y=\"" << spec.height - 15
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xml_escape(spec.x_label) << "</text>\n"
       << "<text id=\"y-label\" x=\"18\" y=\"" << f(top + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"13\" transform=\"rotate(-90 18 " << f(top + ph / 2) << ")\">" << xml_escape(spec.y_label) << "</text>\n";

    for (const auto& s : series) {
        os << "<polyline class=\"series\" data-label=\"" << xml_escape(s.label) << "\" fill=\"none\" stroke=\"" << s.color
           << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? " " : "") << f(px(s.x[i])) << ',' << f(py(s.y[i]));
        os << "\"/>\n";
    }

    os << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    const double lx = left + 12;
    double ly = top + 12;
    os << "<rect x=\"" << f(lx - 6) << "\" y=\"" << f(ly - 10) << "\" width=\"190\" height=\"" << 20 * series.size() + 6
       << "\" fill=\"white\" stroke=\"#999\"/>\n";
    for (const auto& s : series) {
        os << "<line x1=\"" << f(lx) << "\" y1=\"" << f(ly) << "\" x2=\"" << f(lx + 24) << "\" y2=\"" << f(ly) << "\" stroke=\""
           << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n"
           << "<text x=\"" << f(lx + 30) << "\" y=\"" << f(ly + 4) << "\">" << xml_escape(s.label) << "</text>\n";
        ly += 20;
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

/// Bid function against the 45-degree line.
inline std::string bid_function_svg(const EquilibriumSolution& sol, const std::string& title) {
    const auto v = sol.values();
    ChartSpec spec;
    spec.title = title;
    spec.x_label = "value v";
    spec.y_label = "bid";
    spec.x_min = v.front();
    spec.x_max = v.back();
    spec.y_min = v.front();
    spec.y_max = v.back();
    Series diag{"truthful bid b = v", {v.front(), v.back()}, {v.front(), v.back()}, "#888888", true};
    Series bid{"equilibrium bid sigma(v)", std::vector<double>(v.begin(), v.end()),
               std::vector<double>(sol.bids().begin(), sol.bids().end()), "#1f77b4", false};
    return svg_line_chart(spec, {diag, bid});
}

}  // namespace mevlab

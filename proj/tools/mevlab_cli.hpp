#pragma once

// Command-line front end. Exit codes: 0 ok, 2 usage, 3 solver failure,
// 4 verification failure, 5 I/O failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mevlab/mevlab.hpp"

namespace mevlab::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kSolver = 3, kVerification = 4, kIo = 5 };

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PrivateArgs {
    int na = 3;
    int nb = 1;
    std::string fa = "uniform(0,1)";
    std::string fb = "uniform(0,1)";
    std::size_t grid = 512;
    double tol = 1e-6;
    int max_iter = 10000;
    double damping = 0.5;
    double ode_tol = 1e-9;
    std::string method = "auto";

    HybridAuctionConfig config() const {
        HybridAuctionConfig cfg{na, nb, ValueDistribution::parse(fa), ValueDistribution::parse(fb)};
        cfg.validate();
        return cfg;
    }
    FixedPointOptions fixed_point() const { return {grid, tol, max_iter, damping}; }
    OdeOptions ode() const { return {grid, ode_tol}; }
};

struct CandlestickArgs {
    double v0 = 1.0;
    double vol = 0.2;
    double delta = 1.0;
    double p = 0.5;
    double tol = 1e-13;

    CandlestickConfig config() const {
        CandlestickConfig cfg{{v0, vol, delta}, p};
        cfg.validate();
        return cfg;
    }
};

namespace detail {

inline void add_private_options(CLI::App* app, PrivateArgs& a, bool required, const std::string& grid_flag = "--grid") {
    auto* na = app->add_option("--na", a.na, "number of integrated builders (0 = no reserve)")->check(CLI::NonNegativeNumber);
    auto* nb = app->add_option("--nb", a.nb, "number of non-integrated builders")->check(CLI::PositiveNumber);
    auto* fa = app->add_option("--fa", a.fa, "integrated value law: uniform(lo,hi) | beta(a,b) | lognormal(a,s) | empirical(path.csv)");
    auto* fb = app->add_option("--fb", a.fb, "non-integrated value law (same syntax as --fa)");
    if (required) {
        na->required();
        nb->required();
        fa->required();
        fb->required();
    } else {
        na->capture_default_str();
        nb->capture_default_str();
        fa->capture_default_str();
        fb->capture_default_str();
    }
    app->add_option(grid_flag, a.grid, "value grid size (>= 64)")->capture_default_str();
    app->add_option("--tol", a.tol, "fixed-point sup-norm tolerance")->capture_default_str();
    app->add_option("--max-iter", a.max_iter, "fixed-point iteration cap")->capture_default_str();
    app->add_option("--damping", a.damping, "fixed-point damping weight in (0,1]")->capture_default_str();
    app->add_option("--ode-tol", a.ode_tol, "ODE local error tolerance")->capture_default_str();
}

inline void add_candlestick_options(CLI::App* app, CandlestickArgs& a, bool p_required,
                                    const std::string& tol_flag = "--root-tol") {
    app->add_option("--v0", a.v0, "value of the object at time 0")->capture_default_str();
    app->add_option("--vol", a.vol, "volatility per sqrt(second)")->capture_default_str();
    app->add_option("--delta", a.delta, "lead time of the fast bidder in seconds")->capture_default_str();
    auto* p = app->add_option("--p", a.p, "probability that the fast bidder can revise")->check(CLI::Range(0.0, 1.0));
    if (p_required) p->required(); else p->capture_default_str();
    app->add_option(tol_flag, a.tol, "root bracket width relative to v0")->capture_default_str();
}

inline std::string with_extension(const std::string& path, const std::string& ext) {
    std::filesystem::path p(path);
    p.replace_extension(ext);
    return p.string();
}

inline std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Writes all files or none.
inline void write_all(const std::vector<std::pair<std::string, std::string>>& files) {
    std::vector<std::string> written;
    try {
        for (const auto& [path, content] : files) {
            write_file_atomic(path, content);
            written.push_back(path);
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) std::filesystem::remove(p, ec);
        throw;
    }
}

/// Turns a JSON config object into flags placed ahead of the command-line
/// ones, so explicit flags win. Keys are option names without dashes;
/// underscores map to dashes.
inline std::vector<std::string> config_flags(const std::string& path, const CLI::App* sub) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw UsageError("config file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    std::vector<std::string> flags;
    for (const auto& [key, value] : j.items()) {
        std::string name = key;
        for (char& c : name)
            if (c == '_') c = '-';
        if (name == "config" || sub->get_option_no_throw("--" + name) == nullptr) {
            throw UsageError("unknown config key '" + key + "' for " + sub->get_name());
        }
        flags.push_back("--" + name);
        if (value.is_string()) {
            flags.push_back(value.get<std::string>());
        } else if (value.is_number_integer()) {
            flags.push_back(std::to_string(value.get<long long>()));
        } else if (value.is_number()) {
            flags.push_back(format_number(value.get<double>()));
        } else {
            throw UsageError("config key '" + key + "' must be a string or number");
        }
    }
    return flags;
}

inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    if (text.find_first_not_of(" \t") == std::string::npos) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw UsageError("malformed grid '" + text + "'");
        const std::string tok = item.substr(b, e - b + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw UsageError("malformed grid entry '" + tok + "'");
        }
        if (used != tok.size()) throw UsageError("malformed grid entry '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

// ------------------------------------------------------------ commands

inline int cmd_solve_private(const PrivateArgs& a, const std::string& out_path, std::ostream& out) {
    const HybridAuctionConfig cfg = a.config();
    if (a.method != "fixed-point" && a.method != "ode" && a.method != "auto") {
        throw UsageError("--method must be fixed-point, ode or auto");
    }
    std::optional<EquilibriumSolution> primary;
    nlohmann::json cross = nullptr;
    const bool ode_possible = cfg.n_nonintegrated >= 2;

    if (a.method == "ode" && ode_possible) {
        try {
            primary = solve_ode(cfg, a.ode());
        } catch (const OdeSingularityError& e) {
            out << "ode: " << e.what() << "; falling back to fixed-point\n";
        }
    }
    if (!primary) {
        try {
            primary = solve_fixed_point(cfg, a.fixed_point());
        } catch (const SolverError& e) {
            out << "solve-private: not converged, residual " << format_number(e.residual()) << '\n';
            return kSolver;
        }
    }
    if (a.method == "auto" && ode_possible) {
        try {
            const auto ode = solve_ode(cfg, a.ode());
            const double gap = bid_disagreement(*primary, ode);
            cross = {{"method", "ode"}, {"max_disagreement", gap}, {"ode_residual", ode.diagnostics.residual}};
            out << "cross-check: fixed-point vs ode max disagreement " << format_number(gap) << '\n';
        } catch (const std::exception& e) {
            cross = {{"method", "ode"}, {"error", e.what()}};
            out << "cross-check: ode unavailable (" << e.what() << ")\n";
        }
    }

    nlohmann::json env = solution_json(*primary);
    env["cross_check"] = cross;
    const std::string csv = solution_csv(*primary);
    if (out_path.empty()) {
        out << csv;
    } else {
        detail::write_all({{out_path, csv}, {detail::with_extension(out_path, ".json"), env.dump(2) + "\n"}});
    }
    out << "solve-private: converged method=" << primary->diagnostics.method
        << " residual=" << format_number(primary->diagnostics.residual) << '\n';
    return kOk;
}

inline int cmd_solve_candlestick(const CandlestickArgs& a, const std::string& out_path, std::ostream& out) {
    const CandlestickConfig cfg = a.config();
    CandlestickSolution sol;
    try {
        sol = solve_candlestick(cfg, {a.tol, 1024});
    } catch (const RootSolveError& e) {
        out << "solve-candlestick: " << e.what() << '\n';
        return kSolver;
    }
    const std::string doc = candlestick_json(sol).dump(2) + "\n";
    if (out_path.empty()) out << doc; else detail::write_all({{out_path, doc}});
    out << "solve-candlestick: b0s=" << format_number(sol.b0s) << " residual=" << format_number(sol.residual) << '\n';
    return kOk;
}

struct SimulateArgs {
    std::string model;
    PrivateArgs priv;
    CandlestickArgs cs;
    int n_slow = 2;
    long reps = 1'000'000;
    std::uint64_t seed = 42;
    unsigned workers = 0;
};

/// Prints the one-line agreement verdict and maps it to an exit code.
inline int report_outcome(const SimReport& rep, std::ostream& out) {
    out << (rep.passed() ? "PASS" : "FAIL") << ": " << rep.model << " analytic vs Monte Carlo at 3 half-widths (";
    for (std::size_t i = 0; i < rep.checks.size(); ++i) {
        const auto& c = rep.checks[i];
        out << (i ? "; " : "") << c.metric << ' ' << format_number(c.estimate) << " vs " << format_number(c.analytic);
    }
    out << ")\n";
    return rep.passed() ? kOk : kVerification;
}

inline int cmd_simulate(const SimulateArgs& a, const std::string& out_path, std::ostream& out) {
    SimReport rep;
    if (a.model == "hybrid") {
        const auto cfg = a.priv.config();
        EquilibriumSolution sol;
        try {
            sol = solve_fixed_point(cfg, a.priv.fixed_point());
        } catch (const SolverError& e) {
            out << "simulate: solver failed, residual " << format_number(e.residual()) << '\n';
            return kSolver;
        }
        rep = simulate_hybrid(cfg, sol, a.reps, a.seed, a.workers);
    } else if (a.model == "candlestick") {
        const auto cfg = a.cs.config();
        CandlestickSolution sol;
        try {
            sol = solve_candlestick(cfg, {a.cs.tol, 1024});
        } catch (const RootSolveError& e) {
            out << "simulate: " << e.what() << '\n';
            return kSolver;
        }
        rep = simulate_candlestick(cfg, sol, a.n_slow, a.reps, a.seed, a.workers);
    } else {
        throw UsageError("--model must be hybrid or candlestick");
    }

    nlohmann::json doc = report_json(rep);
    doc["metadata"] = {{"generated_at", detail::timestamp()}};
    if (out_path.empty()) out << doc.dump(2) << '\n';
    else detail::write_all({{out_path, doc.dump(2) + "\n"}});

    return report_outcome(rep, out);
}

struct SweepArgs {
    std::string axis;
    std::string grid;
    PrivateArgs priv;
    CandlestickArgs cs;
    long verify_reps = 0;
    std::uint64_t seed = 42;
    int n_slow = 2;
};

inline int cmd_sweep(const SweepArgs& a, const std::string& out_path, std::ostream& out) {
    SweepSpec spec;
    try {
        spec.axis = parse_sweep_axis(a.axis);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    spec.grid = detail::parse_grid(a.grid);
    if (is_private_axis(spec.axis)) {
        // validation happens per point; only the laws are parsed here
        spec.hybrid = HybridAuctionConfig{a.priv.na, a.priv.nb, ValueDistribution::parse(a.priv.fa),
                                          ValueDistribution::parse(a.priv.fb)};
        spec.solver = a.priv.fixed_point();
    } else {
        spec.candlestick = CandlestickConfig{{a.cs.v0, a.cs.vol, a.cs.delta}, a.cs.p};
        spec.root = {a.cs.tol, 1024};
    }
    spec.verify_reps = a.verify_reps;
    spec.seed = a.seed;
    spec.n_slow = a.n_slow;
    const std::string csv = table_csv(sweep(spec));
    if (out_path.empty()) out << csv; else detail::write_all({{out_path, csv}});
    out << "sweep: " << spec.grid.size() << " rows\n";
    return kOk;
}

inline int cmd_figure(const PrivateArgs& a, const std::string& out_path, std::ostream& out) {
    const auto cfg = a.config();
    EquilibriumSolution sol;
    try {
        sol = solve_fixed_point(cfg, a.fixed_point());
    } catch (const SolverError& e) {
        out << "figure: solver failed, residual " << format_number(e.residual()) << '\n';
        return kSolver;
    }
    const std::string title = "Equilibrium bids, F_A=" + cfg.integrated_law.spec() + ", F_B=" +
                              cfg.nonintegrated_law.spec() + ", n_A=" + std::to_string(cfg.n_integrated) +
                              ", n_B=" + std::to_string(cfg.n_nonintegrated);
    detail::write_all({{detail::with_extension(out_path, ".csv"), solution_csv(sol)},
                       {out_path, bid_function_svg(sol, title)}});
    out << "figure: wrote " << out_path << " and " << detail::with_extension(out_path, ".csv") << '\n';
    return kOk;
}

// ---------------------------------------------------------------- main

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Equilibrium solvers and Monte Carlo checks for hybrid and candlestick block-building auctions", "mevlab"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;

    PrivateArgs solve_args;
    auto* solve = app.add_subcommand("solve-private", "solve the non-integrated equilibrium bid function");
    detail::add_private_options(solve, solve_args, true);
    solve->add_option("--method", solve_args.method, "fixed-point | ode | auto")->capture_default_str();
    solve->add_option("--out", out_path, "CSV path (v,sigma,x,S); JSON envelope goes next to it");

    CandlestickArgs cs_args;
    auto* cs = app.add_subcommand("solve-candlestick", "solve the slow bidders' zero-profit bid");
    detail::add_candlestick_options(cs, cs_args, true, "--tol");
    cs->add_option("--out", out_path, "JSON output path");

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "solve, then verify by Monte Carlo");
    sim->add_option("--model", sim_args.model, "hybrid | candlestick")->required();
    detail::add_private_options(sim, sim_args.priv, false);
    detail::add_candlestick_options(sim, sim_args.cs, false);
    sim->add_option("--n-slow", sim_args.n_slow, "number of slow bidders (>= 2)")->capture_default_str();
    sim->add_option("--reps", sim_args.reps, "replications (>= 10000)")->capture_default_str();
    sim->add_option("--seed", sim_args.seed, "64-bit seed")->capture_default_str();
    sim->add_option("--workers", sim_args.workers, "worker threads (0 = all cores)")->capture_default_str();
    sim->add_option("--out", out_path, "SimReport JSON path");

    SweepArgs sw_args;
    auto* sw = app.add_subcommand("sweep", "tabulate solutions along one parameter axis");
    sw->add_option("--axis", sw_args.axis, "p | vol | delta | na | nb")->required();
    sw->add_option("--grid", sw_args.grid, "comma-separated axis values")->required();
    detail::add_private_options(sw, sw_args.priv, false, "--grid-size");
    detail::add_candlestick_options(sw, sw_args.cs, false);
    sw->add_option("--verify-reps", sw_args.verify_reps, "Monte Carlo replications per point (0 = off)")->capture_default_str();
    sw->add_option("--seed", sw_args.seed, "64-bit seed")->capture_default_str();
    sw->add_option("--n-slow", sw_args.n_slow, "number of slow bidders")->capture_default_str();
    sw->add_option("--out", out_path, "CSV output path");

    PrivateArgs fig_args;
    fig_args.na = 3;
    fig_args.nb = 3;
    fig_args.fa = "beta(2,2)";
    fig_args.fb = "beta(2,2)";
    std::string fig_out = "figure.svg";
    auto* fig = app.add_subcommand("figure", "plot the equilibrium bid function against the diagonal (SVG + CSV)");
    detail::add_private_options(fig, fig_args, false);
    fig->add_option("--out", fig_out, "SVG path; the CSV is written next to it")->capture_default_str();

    for (auto* sub : {solve, cs, sim, sw, fig}) {
        sub->add_option("--config", config_path, "JSON file with option values; flags override it");
    }

    // Splice --config values in front of the explicit flags.
    if (args.size() >= 1) {
        for (std::size_t i = 1; i + 1 < args.size(); ++i) {
            if (args[i] == "--config") {
                const CLI::App* sub = nullptr;
                try {
                    sub = app.get_subcommand(args[0]);
                } catch (const CLI::Error&) {
                    err << "unknown subcommand '" << args[0] << "'\n" << app.help();
                    return kUsage;
                }
                try {
                    auto flags = detail::config_flags(args[i + 1], sub);
                    args.insert(args.begin() + 1, flags.begin(), flags.end());
                } catch (const UsageError& e) {
                    err << e.what() << '\n';
                    return kUsage;
                }
                break;
            }
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        CLI::App* failing = nullptr;
        for (auto* sub : app.get_subcommands()) failing = sub;
        err << (failing ? failing->help() : app.help());
        return kUsage;
    }

    try {
        if (solve->parsed()) return cmd_solve_private(solve_args, out_path, out);
        if (cs->parsed()) return cmd_solve_candlestick(cs_args, out_path, out);
        if (sim->parsed()) return cmd_simulate(sim_args, out_path, out);
        if (sw->parsed()) return cmd_sweep(sw_args, out_path, out);
        if (fig->parsed()) return cmd_figure(fig_args, fig_out, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << '\n';
        return kSolver;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return kUsage;
    } catch (const std::domain_error& e) {
        err << "invalid input: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace mevlab::cli

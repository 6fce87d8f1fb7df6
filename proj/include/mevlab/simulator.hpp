#pragma once

// Monte Carlo replay of both auctions under the solved strategies.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mevlab/common_values.hpp"
#include "mevlab/parallel.hpp"
#include "mevlab/private_equilibrium.hpp"
#include "mevlab/rng.hpp"

namespace mevlab {

/// Streaming count/mean/M2 with Chan's pairwise merge.
struct Accumulator {
    long count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }

    void merge(const Accumulator& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double n = static_cast<double>(count + o.count);
        const double d = o.mean - mean;
        mean += d * static_cast<double>(o.count) / n;
        m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
        count += o.count;
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
};

struct Estimate {
    double mean = 0.0;
    double sd = 0.0;
    double half_width = 0.0;  // 1.96 sd / sqrt(n)
    long count = 0;

    static Estimate from(const Accumulator& a) {
        const double sd = std::sqrt(a.variance());
        return {a.mean, sd, a.count > 0 ? 1.96 * sd / std::sqrt(static_cast<double>(a.count)) : 0.0, a.count};
    }
};

struct AgreementCheck {
    std::string metric;
    double analytic = 0.0;
    double estimate = 0.0;
    double half_width = 0.0;
    bool pass = false;
};

struct SimReport {
    std::string model;
    long reps = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> parameters;
    std::map<std::string, std::string> labels;
    std::map<std::string, Estimate> metrics;
    std::vector<AgreementCheck> checks;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
    const Estimate& metric(const std::string& name) const { return metrics.at(name); }
};

inline constexpr long kMinReplications = 10'000;

namespace detail {

inline constexpr long kBlock = 4096;

// Replications are cut into fixed blocks and merged in block order, so the
// report is identical for any worker count.
template <std::size_t M, class Rep>
std::array<Accumulator, M> run_blocks(long reps, unsigned workers, Rep&& rep) {
    const std::size_t blocks = static_cast<std::size_t>((reps + kBlock - 1) / kBlock);
    std::vector<std::array<Accumulator, M>> partial(blocks);
    parallel_for(blocks, workers, [&](std::size_t b) {
        const long first = static_cast<long>(b) * kBlock;
        const long last = std::min(reps, first + kBlock);
        std::array<double, M> sample{};
        for (long r = first; r < last; ++r) {
            rep(static_cast<std::uint64_t>(r), sample);
            for (std::size_t m = 0; m < M; ++m) partial[b][m].add(sample[m]);
        }
    });
    std::array<Accumulator, M> total{};
    for (const auto& p : partial)
        for (std::size_t m = 0; m < M; ++m) total[m].merge(p[m]);
    return total;
}

inline AgreementCheck agree(const std::string& metric, double analytic, const Estimate& e) {
    const double slack = 1e-12 * std::max(1.0, std::abs(analytic));
    return {metric, analytic, e.mean, e.half_width, std::abs(e.mean - analytic) <= 3.0 * e.half_width + slack};
}

}  // namespace detail

// ---------------------------------------------------------------- hybrid

struct HybridOutcome {
    bool integrated_winner = false;
    std::size_t winner_index = 0;  // index within the winner's class
    double winning_bid = 0.0;
    double winning_value = 0.0;
    double payment = 0.0;
    double revenue = 0.0;
    std::vector<double> surplus;  // integrated bidders first, then non-integrated
};

/// Applies the hybrid rule: highest bid wins; an integrated winner pays the
/// next-highest bid, a non-integrated winner pays its own bid. Integrated
/// bids are their values. `tie_draw` in [0,1) picks uniformly among tied bids.
inline HybridOutcome resolve_hybrid_auction(std::span<const double> integrated_values,
                                            std::span<const double> nonintegrated_values,
                                            std::span<const double> nonintegrated_bids, double tie_draw) {
    const std::size_t na = integrated_values.size();
    const std::size_t n = na + nonintegrated_bids.size();
    if (n == 0) throw std::invalid_argument("resolve_hybrid_auction: no bidders");
    auto bid_of = [&](std::size_t i) { return i < na ? integrated_values[i] : nonintegrated_bids[i - na]; };
    auto value_of = [&](std::size_t i) { return i < na ? integrated_values[i] : nonintegrated_values[i - na]; };

    double top = bid_of(0);
    for (std::size_t i = 1; i < n; ++i) top = std::max(top, bid_of(i));
    std::size_t tied = 0;
    for (std::size_t i = 0; i < n; ++i) tied += bid_of(i) == top;
    std::size_t pick = std::min(tied - 1, static_cast<std::size_t>(tie_draw * static_cast<double>(tied)));
    std::size_t winner = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (bid_of(i) == top) {
            if (pick == 0) {
                winner = i;
                break;
            }
            --pick;
        }
    }

    HybridOutcome out;
    out.integrated_winner = winner < na;
    out.winner_index = out.integrated_winner ? winner : winner - na;
    out.winning_bid = top;
    out.winning_value = value_of(winner);
    if (out.integrated_winner) {
        double second = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (i != winner) second = std::max(second, bid_of(i));
        out.payment = second;
    } else {
        out.payment = top;
    }
    out.revenue = out.payment;
    out.surplus.assign(n, 0.0);
    out.surplus[winner] = out.winning_value - out.payment;
    return out;
}

/// One replication: r-th stream of `seed`. Draw order: n_A integrated values,
/// n_B non-integrated values, one tie-break uniform.
inline HybridOutcome run_hybrid_auction_once(const HybridAuctionConfig& cfg, const EquilibriumSolution& sol,
                                             CounterRng& rng) {
    std::vector<double> vi(static_cast<std::size_t>(cfg.n_integrated));
    std::vector<double> vn(static_cast<std::size_t>(cfg.n_nonintegrated));
    std::vector<double> bn(vn.size());
    for (auto& v : vi) v = cfg.integrated_law.sample(rng);
    for (std::size_t i = 0; i < vn.size(); ++i) {
        vn[i] = cfg.nonintegrated_law.sample(rng);
        bn[i] = sol.bid_function(vn[i]);
    }
    const double tie = uniform_open01(rng);
    return resolve_hybrid_auction(vi, vn, bn, tie);
}

inline HybridOutcome hybrid_replication(const HybridAuctionConfig& cfg, const EquilibriumSolution& sol,
                                        std::uint64_t seed, std::uint64_t r) {
    CounterRng rng(seed, r);
    return run_hybrid_auction_once(cfg, sol, rng);
}

inline SimReport simulate_hybrid(const HybridAuctionConfig& cfg, const EquilibriumSolution& sol, long reps,
                                 std::uint64_t seed, unsigned workers = 0) {
    cfg.validate();
    if (reps < kMinReplications) throw std::invalid_argument("simulate_hybrid: reps must be >= 10^4");
    const double na = static_cast<double>(cfg.n_integrated);
    const double nb = static_cast<double>(cfg.n_nonintegrated);
    enum : std::size_t { revenue, int_win, nonint_win, int_surplus, nonint_surplus, nonint_per_bidder, count };
    const auto acc = detail::run_blocks<count>(reps, workers, [&](std::uint64_t r, std::array<double, count>& s) {
        const HybridOutcome o = hybrid_replication(cfg, sol, seed, r);
        double si = 0.0, sn = 0.0;
        for (std::size_t i = 0; i < o.surplus.size(); ++i) (i < static_cast<std::size_t>(na) ? si : sn) += o.surplus[i];
        s[revenue] = o.revenue;
        s[int_win] = o.integrated_winner ? 1.0 : 0.0;
        s[nonint_win] = o.integrated_winner ? 0.0 : 1.0;
        s[int_surplus] = si;
        s[nonint_surplus] = sn;
        s[nonint_per_bidder] = sn / nb;
    });

    SimReport rep;
    rep.model = "hybrid";
    rep.reps = reps;
    rep.seed = seed;
    rep.parameters = {{"n_integrated", na}, {"n_nonintegrated", nb}};
    rep.labels = {{"integrated_law", cfg.integrated_law.spec()},
                  {"nonintegrated_law", cfg.nonintegrated_law.spec()},
                  {"solver", sol.diagnostics.method}};
    rep.metrics["revenue"] = Estimate::from(acc[revenue]);
    rep.metrics["integrated_win_rate"] = Estimate::from(acc[int_win]);
    rep.metrics["nonintegrated_win_rate"] = Estimate::from(acc[nonint_win]);
    rep.metrics["integrated_surplus"] = Estimate::from(acc[int_surplus]);
    rep.metrics["nonintegrated_surplus"] = Estimate::from(acc[nonint_surplus]);
    rep.metrics["nonintegrated_surplus_per_bidder"] = Estimate::from(acc[nonint_per_bidder]);

    const double win_nonint = nonintegrated_win_rate(sol);
    rep.checks.push_back(detail::agree("nonintegrated_surplus_per_bidder", ex_ante_nonintegrated_surplus(sol),
                                       rep.metrics["nonintegrated_surplus_per_bidder"]));
    rep.checks.push_back(detail::agree("nonintegrated_win_rate", win_nonint, rep.metrics["nonintegrated_win_rate"]));
    rep.checks.push_back(detail::agree("integrated_win_rate", 1.0 - win_nonint, rep.metrics["integrated_win_rate"]));
    return rep;
}

// ----------------------------------------------------------- candlestick

struct CandlestickOutcome {
    bool fast_revised = false;
    bool fast_wins = false;
    std::size_t slow_winner = 0;
    double v_delta = 0.0;
    double payment = 0.0;
    double slow_profit = 0.0;
    double fast_profit = 0.0;
};

/// One replication. Draw order: tie-break among slow bidders, revision coin,
/// v_Delta. Without a revision the slow winner's payoff is v0 - b0s, the
/// time-0 expectation of the object.
inline CandlestickOutcome candlestick_replication(const CandlestickConfig& cfg, double b0s, int n_slow,
                                                  std::uint64_t seed, std::uint64_t r) {
    CounterRng rng(seed, r);
    const double u_tie = uniform_open01(rng);
    const double u_rev = uniform_open01(rng);
    const double u_val = uniform_open01(rng);
    const auto& pr = cfg.process;

    CandlestickOutcome o;
    o.slow_winner = std::min<std::size_t>(static_cast<std::size_t>(n_slow) - 1,
                                          static_cast<std::size_t>(u_tie * static_cast<double>(n_slow)));
    o.fast_revised = u_rev < cfg.revision_prob;
    o.payment = b0s;
    if (o.fast_revised) {
        o.v_delta = pr.degenerate() ? pr.v0 : law_of_v_delta(pr).quantile(u_val);
        o.fast_wins = fast_bid_decision(b0s, o.v_delta);
        if (o.fast_wins) {
            o.fast_profit = o.v_delta - b0s;
        } else {
            o.slow_profit = o.v_delta - b0s;
        }
    } else {
        o.v_delta = pr.v0;
        o.slow_profit = pr.v0 - b0s;
    }
    return o;
}

inline SimReport simulate_candlestick(const CandlestickConfig& cfg, const CandlestickSolution& sol, int n_slow, long reps,
                                      std::uint64_t seed, unsigned workers = 0) {
    cfg.validate();
    if (n_slow < 2) throw std::invalid_argument("simulate_candlestick: needs at least two slow bidders");
    if (reps < kMinReplications) throw std::invalid_argument("simulate_candlestick: reps must be >= 10^4");
    const double b0s = sol.b0s;
    enum : std::size_t { slow_profit, slow_win, fast_win, fast_profit, revenue, count };
    const auto acc = detail::run_blocks<count>(reps, workers, [&](std::uint64_t r, std::array<double, count>& s) {
        const auto o = candlestick_replication(cfg, b0s, n_slow, seed, r);
        s[slow_profit] = o.slow_profit;
        s[slow_win] = o.fast_wins ? 0.0 : 1.0;
        s[fast_win] = o.fast_wins ? 1.0 : 0.0;
        s[fast_profit] = o.fast_profit;
        s[revenue] = o.payment;
    });

    SimReport rep;
    rep.model = "candlestick";
    rep.reps = reps;
    rep.seed = seed;
    rep.parameters = {{"v0", cfg.process.v0},
                      {"vol", cfg.process.vol},
                      {"delta", cfg.process.delta},
                      {"p", cfg.revision_prob},
                      {"n_slow", static_cast<double>(n_slow)},
                      {"b0s", b0s}};
    rep.metrics["slow_profit"] = Estimate::from(acc[slow_profit]);
    rep.metrics["slow_win_rate"] = Estimate::from(acc[slow_win]);
    rep.metrics["fast_win_rate"] = Estimate::from(acc[fast_win]);
    rep.metrics["fast_profit"] = Estimate::from(acc[fast_profit]);
    rep.metrics["revenue"] = Estimate::from(acc[revenue]);

    rep.checks.push_back(detail::agree("slow_profit", 0.0, rep.metrics["slow_profit"]));
    rep.checks.push_back(detail::agree("slow_win_rate", slow_win_probability(cfg, b0s), rep.metrics["slow_win_rate"]));
    rep.checks.push_back(detail::agree("fast_profit", fast_expected_profit(cfg, b0s), rep.metrics["fast_profit"]));
    return rep;
}

// ----------------------------------------------------------------- sweep

enum class SweepAxis { revision_prob, vol, delta, n_integrated, n_nonintegrated };

inline SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "p") return SweepAxis::revision_prob;
    if (name == "vol") return SweepAxis::vol;
    if (name == "delta") return SweepAxis::delta;
    if (name == "na" || name == "n_A" || name == "n_integrated") return SweepAxis::n_integrated;
    if (name == "nb" || name == "n_B" || name == "n_nonintegrated") return SweepAxis::n_nonintegrated;
    throw std::invalid_argument("unknown sweep axis '" + name + "' (expected p, vol, delta, na, nb)");
}

inline bool is_private_axis(SweepAxis a) { return a == SweepAxis::n_integrated || a == SweepAxis::n_nonintegrated; }

struct SweepSpec {
    SweepAxis axis = SweepAxis::revision_prob;
    std::vector<double> grid;
    CandlestickConfig candlestick;
    HybridAuctionConfig hybrid;
    FixedPointOptions solver;
    CandlestickOptions root;
    long verify_reps = 0;  // > 0 adds a Monte Carlo agreement check per point
    std::uint64_t seed = 1;
    int n_slow = 2;
    unsigned workers = 0;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string status_of(const std::exception& e) {
    std::string s = std::string("error: ") + e.what();
    for (char& ch : s)
        if (ch == ',' || ch == '\n') ch = ';';
    return s;
}

}  // namespace detail

/// One row per grid point, in grid order. Failures land in the status column.
inline Table sweep(const SweepSpec& spec) {
    Table table;
    const bool priv = is_private_axis(spec.axis);
    table.header = priv ? std::vector<std::string>{"axis_value", "slope_fit", "residual", "status"}
                        : std::vector<std::string>{"axis_value", "b0s", "slow_win_prob", "fast_profit", "status"};
    table.rows.resize(spec.grid.size());
    // Monte Carlo inside a point runs single-threaded; points are the parallel unit.
    parallel_for(spec.grid.size(), spec.workers, [&](std::size_t i) {
        const double x = spec.grid[i];
        auto& row = table.rows[i];
        if (priv) {
            try {
                if (x != std::floor(x)) throw std::invalid_argument("bidder count must be an integer");
                HybridAuctionConfig cfg = spec.hybrid;
                (spec.axis == SweepAxis::n_integrated ? cfg.n_integrated : cfg.n_nonintegrated) = static_cast<int>(x);
                const auto sol = solve_fixed_point(cfg, spec.solver);
                std::string status = "ok";
                if (spec.verify_reps > 0 && !simulate_hybrid(cfg, sol, spec.verify_reps, spec.seed, 1).passed()) {
                    status = "mc-mismatch";
                }
                row = {detail::cell(x), detail::cell(slope_fit(sol)), detail::cell(sol.diagnostics.residual), status};
            } catch (const std::exception& e) {
                row = {detail::cell(x), "", "", detail::status_of(e)};
            }
        } else {
            try {
                CandlestickConfig cfg = spec.candlestick;
                if (spec.axis == SweepAxis::revision_prob) cfg.revision_prob = x;
                if (spec.axis == SweepAxis::vol) cfg.process.vol = x;
                if (spec.axis == SweepAxis::delta) cfg.process.delta = x;
                const auto sol = solve_candlestick(cfg, spec.root);
                std::string status = "ok";
                if (spec.verify_reps > 0 &&
                    !simulate_candlestick(cfg, sol, spec.n_slow, spec.verify_reps, spec.seed, 1).passed()) {
                    status = "mc-mismatch";
                }
                row = {detail::cell(x), detail::cell(sol.b0s), detail::cell(sol.slow_win_prob),
                       detail::cell(sol.fast_expected_profit), status};
            } catch (const std::exception& e) {
                row = {detail::cell(x), "", "", "", detail::status_of(e)};
            }
        }
    });
    return table;
}

}  // namespace mevlab

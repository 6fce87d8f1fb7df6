#pragma once

// Common-value auction between slow bidders (sealed bids at time 0) and a
// fast bidder who may revise at time Delta, when the object is worth v_Delta.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mevlab/distributions.hpp"
#include "mevlab/numerics.hpp"

namespace mevlab {

/// Lognormal martingale for the object's value: v_Delta = v0 exp(m) with
/// m ~ N(-s^2/2, s^2), s = vol sqrt(delta), so E[v_Delta] = v0.
struct PriceProcess {
    double v0 = 1.0;
    double vol = 0.2;
    double delta = 1.0;

    void validate() const {
        if (!(v0 > 0.0) || !std::isfinite(v0)) throw std::invalid_argument("PriceProcess: v0 must be positive");
        if (!(vol >= 0.0) || !std::isfinite(vol)) throw std::invalid_argument("PriceProcess: vol must be >= 0");
        if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("PriceProcess: delta must be >= 0");
    }

    double log_sd() const { return vol * std::sqrt(delta); }
    double log_mean() const { return std::log(v0) - 0.5 * log_sd() * log_sd(); }
    /// vol == 0 or delta == 0: v_Delta is a point mass at v0.
    bool degenerate() const { return log_sd() == 0.0; }

    /// P(v_Delta < b)
    double prob_below(double b) const {
        if (degenerate()) return v0 < b ? 1.0 : 0.0;
        return LognormalLaw(log_mean(), log_sd()).cdf(b);
    }
};

inline LognormalLaw law_of_v_delta(const PriceProcess& process) {
    process.validate();
    if (process.degenerate()) throw std::domain_error("law_of_v_delta: degenerate process is a point mass at v0");
    return LognormalLaw(process.log_mean(), process.log_sd());
}

struct CandlestickConfig {
    PriceProcess process;
    double revision_prob = 0.5;

    void validate() const {
        process.validate();
        if (!(revision_prob >= 0.0 && revision_prob <= 1.0)) {
            throw std::invalid_argument("CandlestickConfig: revision probability must be in [0,1]");
        }
    }
};

/// Expected profit of the provisional slow winner at bid b:
/// (1-p)(v0 - b) + p P(v_Delta < b) (E[v_Delta | v_Delta < b] - b).
inline double candlestick_residual(const CandlestickConfig& cfg, double b) {
    const auto& pr = cfg.process;
    const double p = cfg.revision_prob;
    const double keep = (1.0 - p) * (pr.v0 - b);
    if (p == 0.0 || b <= 0.0) return keep;
    double adverse;
    if (pr.degenerate()) {
        adverse = pr.v0 < b ? pr.v0 - b : 0.0;
    } else {
        const LognormalLaw law = law_of_v_delta(pr);
        const double mass = law.cdf(b);
        // |mass * (E - b)| <= mass * b, which is below representable range here
        adverse = mass < std::numeric_limits<double>::min() ? 0.0 : mass * (lognormal_truncated_mean(law, b) - b);
    }
    return keep + p * adverse;
}

/// Same quantity through the put form (1-p)(v0 - b) - p E[(b - v_Delta)^+].
inline double candlestick_residual_put(const CandlestickConfig& cfg, double b) {
    const auto& pr = cfg.process;
    const double p = cfg.revision_prob;
    const double put = pr.degenerate() ? std::max(b - pr.v0, 0.0) : lognormal_put_value(pr.v0, std::max(b, 0.0), pr.log_sd());
    return (1.0 - p) * (pr.v0 - b) - p * put;
}

inline double slow_win_probability(const CandlestickConfig& cfg, double b0s) {
    const double p = cfg.revision_prob;
    return p * cfg.process.prob_below(b0s) + (1.0 - p);
}

/// The fast bidder outbids only on a strict improvement.
inline bool fast_bid_decision(double b_slow, double v_delta) { return v_delta > b_slow; }

/// Expected profit of a slow bid b > 0 when the fast bidder always revises.
inline double unraveling_slow_profit(const PriceProcess& process, double b) {
    if (!(b > 0.0)) throw std::domain_error("unraveling_slow_profit: b must be positive");
    process.validate();
    if (process.degenerate()) return process.v0 <= b ? process.v0 - b : 0.0;
    const LognormalLaw law = law_of_v_delta(process);
    return law.partial_expectation(b) - b * law.cdf(b);
}

/// p E[(v_Delta - b0s)^+], via put-call parity on the martingale law.
inline double fast_expected_profit(const CandlestickConfig& cfg, double b0s) {
    const auto& pr = cfg.process;
    const double put = pr.degenerate() ? std::max(b0s - pr.v0, 0.0) : lognormal_put_value(pr.v0, b0s, pr.log_sd());
    return cfg.revision_prob * (put + pr.v0 - b0s);
}

struct CandlestickSolution {
    CandlestickConfig config;
    double b0s = 0.0;
    double slow_win_prob = 0.0;
    double fast_win_prob = 0.0;
    double fast_expected_profit = 0.0;
    double residual = 0.0;
    double put_form_gap = 0.0;  // |residual - put-form residual| at b0s
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    int iterations = 0;
};

class RootSolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CandlestickOptions {
    double tol = 1e-13;  // bracket width, relative to v0
    int scan_points = 1024;
};

/// Largest root of the slow bidder's zero-profit condition on [0, v0]: scan
/// down from v0 for the first sign change, then bisect and secant-polish.
inline CandlestickSolution solve_candlestick(const CandlestickConfig& cfg, const CandlestickOptions& opt = {}) {
    cfg.validate();
    const double v0 = cfg.process.v0;
    const double p = cfg.revision_prob;

    auto finish = [&](double b, double lo, double hi, int iterations) {
        CandlestickSolution sol;
        sol.config = cfg;
        sol.b0s = b;
        sol.slow_win_prob = slow_win_probability(cfg, b);
        sol.fast_win_prob = 1.0 - sol.slow_win_prob;
        sol.fast_expected_profit = fast_expected_profit(cfg, b);
        sol.residual = candlestick_residual(cfg, b);
        sol.put_form_gap = std::abs(sol.residual - candlestick_residual_put(cfg, b));
        sol.bracket_lo = lo;
        sol.bracket_hi = hi;
        sol.iterations = iterations;
        return sol;
    };

    if (p == 0.0 || cfg.process.degenerate()) return finish(v0, v0, v0, 0);
    if (p == 1.0) return finish(0.0, 0.0, 0.0, 0);

    auto f = [&](double b) { return candlestick_residual(cfg, b); };
    const int n = opt.scan_points;
    double upper = v0;
    double f_upper = f(upper);
    for (int k = n - 1; k >= 0; --k) {
        const double b = v0 * static_cast<double>(k) / static_cast<double>(n);
        const double fb = f(b);
        if (fb >= 0.0 && f_upper < 0.0) {
            const auto r = bisect_then_secant(f, b, upper, opt.tol * v0);
            return finish(r.root, r.lo, r.hi, r.iterations);
        }
        upper = b;
        f_upper = fb;
    }
    throw RootSolveError("solve_candlestick: no sign change of the zero-profit condition on [0, v0]");
}

}  // namespace mevlab

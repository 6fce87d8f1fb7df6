#pragma once

// Symmetric equilibrium bidding of non-integrated builders in the hybrid
// auction: integrated builders bid truthfully and pay second price, so for a
// non-integrated builder the integrated side is a secret reserve distributed
// as F_A^{n_A}, and the equilibrium bid satisfies
//
//     sigma(v) = v - int_0^v x(t) dt / x(v),
//     x(v)     = F_B^{n_B-1}(v) * F_A^{n_A}(sigma(v)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mevlab/distributions.hpp"
#include "mevlab/numerics.hpp"
#include "mevlab/ode.hpp"

namespace mevlab {

struct HybridAuctionConfig {
    int n_integrated = 1;
    int n_nonintegrated = 1;
    ValueDistribution integrated_law = ValueDistribution::uniform(0.0, 1.0);
    ValueDistribution nonintegrated_law = ValueDistribution::uniform(0.0, 1.0);

    /// n_integrated == 0 is accepted and means the reserve factor is identically 1.
    void validate() const {
        if (n_integrated < 0) throw std::invalid_argument("n_integrated must be >= 0");
        if (n_nonintegrated < 1) throw std::invalid_argument("n_nonintegrated must be >= 1");
        if (n_integrated + n_nonintegrated < 2) {
            throw std::invalid_argument("need at least one rival for the non-integrated bidder");
        }
        if (nonintegrated_law.lower() != 0.0) {
            throw std::invalid_argument("non-integrated value support must start at 0");
        }
        if (n_integrated > 0 && integrated_law.lower() != 0.0) {
            throw std::invalid_argument("integrated value support must start at 0");
        }
    }

    /// Probability that every integrated bid is below b.
    double reserve_cdf(double b) const {
        if (n_integrated == 0) return 1.0;
        return std::pow(integrated_law.cdf(b), n_integrated);
    }

    /// Probability that every other non-integrated value is below v.
    double rival_cdf(double v) const {
        if (n_nonintegrated == 1) return 1.0;
        return std::pow(nonintegrated_law.cdf(v), n_nonintegrated - 1);
    }
};

/// Monotone piecewise-linear bid schedule on a value grid.
class BidFunction {
public:
    BidFunction() = default;
    BidFunction(std::vector<double> values, std::vector<double> bids) : values_(std::move(values)), bids_(std::move(bids)) {
        if (values_.size() < 2 || values_.size() != bids_.size()) {
            throw std::invalid_argument("BidFunction: need at least two points of equal count");
        }
        for (std::size_t i = 1; i < values_.size(); ++i) {
            if (!(values_[i] > values_[i - 1])) throw std::invalid_argument("BidFunction: value grid must increase");
        }
    }

    double operator()(double v) const { return interpolate_linear(values_, bids_, v); }

    /// Largest value whose bid does not exceed b, by linear inversion.
    double inverse(double b) const {
        if (b <= bids_.front()) return values_.front();
        if (b >= bids_.back()) return values_.back();
        const auto hi = static_cast<std::size_t>(std::upper_bound(bids_.begin(), bids_.end(), b) - bids_.begin());
        const std::size_t lo = hi - 1;
        const double t = (b - bids_[lo]) / (bids_[hi] - bids_[lo]);
        return values_[lo] + t * (values_[hi] - values_[lo]);
    }

    std::span<const double> values() const { return values_; }
    std::span<const double> bids() const { return bids_; }
    std::size_t size() const { return values_.size(); }

private:
    std::vector<double> values_;
    std::vector<double> bids_;
};

struct SolverDiagnostics {
    std::string method;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;   // sup-norm defect of the equilibrium equation on the grid
    double tolerance = 0.0;  // requested tolerance (sup-norm for fixed point, local for ODE)
    double damping = 0.0;
    double asymptote_slope = 0.0;
    double asymptote_cutoff = 0.0;
    bool asymptote_fallback = false;
    long ode_steps = 0;
    long ode_rejected = 0;
};

struct EquilibriumSolution {
    HybridAuctionConfig config;
    BidFunction bid_function;
    std::vector<double> win_prob;          // x(v_i)
    std::vector<double> surplus;           // S(v_i) = int_0^{v_i} x
    std::vector<double> truthful_surplus;  // int_0^{v_i} F_B^{n_B-1}(t) F_A^{n_A}(t) dt
    SolverDiagnostics diagnostics;

    std::span<const double> values() const { return bid_function.values(); }
    std::span<const double> bids() const { return bid_function.bids(); }
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    double residual_;
    int iterations_;
};

class OdeSingularityError : public SolverError {
public:
    OdeSingularityError(double location, double denominator)
        : SolverError("ODE singularity at v=" + std::to_string(location), std::numeric_limits<double>::quiet_NaN(), 0),
          location_(location),
          denominator_(denominator) {}
    double location() const { return location_; }
    double denominator() const { return denominator_; }

private:
    double location_;
    double denominator_;
};

struct FixedPointOptions {
    std::size_t grid_size = 512;
    double tol = 1e-6;
    int max_iter = 10000;
    double damping = 0.5;
};

struct OdeOptions {
    std::size_t grid_size = 512;
    double tol = 1e-9;
};

/// Equal-probability grid of F_B. Unbounded laws are cut at the 1-1e-9 quantile.
inline std::vector<double> equal_probability_grid(const ValueDistribution& law, std::size_t n) {
    if (n < 2) throw std::invalid_argument("grid needs at least two points");
    const bool unbounded = std::isinf(law.upper());
    const double q_top = unbounded ? 1.0 - 1e-9 : 1.0;
    std::vector<double> grid;
    grid.reserve(n);
    grid.push_back(law.lower());
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double v = law.quantile(q_top * static_cast<double>(i) / static_cast<double>(n - 1));
        if (v > grid.back()) grid.push_back(v);
    }
    const double top = unbounded ? law.quantile(q_top) : law.upper();
    if (top > grid.back()) grid.push_back(top);
    return grid;
}

namespace detail {

// Gauss-Legendre nodes inside every grid cell with sigma linearly
// interpolated between the cell ends; exact for linear bid functions.
class WinMassIntegrator {
public:
    WinMassIntegrator(const HybridAuctionConfig& cfg, std::span<const double> grid) : cfg_(&cfg), grid_(grid.begin(), grid.end()) {
        const std::size_t cells = grid_.size() - 1;
        lambda_.reserve(cells * kNodes);
        weight_.reserve(cells * kNodes);
        rival_.reserve(cells * kNodes);
        for (std::size_t j = 1; j < grid_.size(); ++j) {
            const double lo = grid_[j - 1];
            const double hi = grid_[j];
            const double half = 0.5 * (hi - lo);
            for (std::size_t k = 0; k < kNodes; ++k) {
                const double t = 0.5 * (lo + hi) + half * GaussLegendre8::nodes[k];
                lambda_.push_back((t - lo) / (hi - lo));
                weight_.push_back(half * GaussLegendre8::weights[k]);
                rival_.push_back(cfg.rival_cdf(t));
            }
        }
        rival_nodes_.reserve(grid_.size());
        for (double v : grid_) rival_nodes_.push_back(cfg.rival_cdf(v));
    }

    /// out[i] = int_0^{v_i} F_B^{n_B-1}(t) F_A^{n_A}(sigma(t)) dt
    void cumulative(std::span<const double> sigma, std::span<double> out) const {
        out[0] = 0.0;
        double acc = 0.0;
        std::size_t idx = 0;
        for (std::size_t j = 1; j < grid_.size(); ++j) {
            const double s0 = sigma[j - 1];
            const double s1 = sigma[j];
            double cell = 0.0;
            for (std::size_t k = 0; k < kNodes; ++k, ++idx) {
                if (rival_[idx] == 0.0) continue;
                const double s = s0 + lambda_[idx] * (s1 - s0);
                cell += weight_[idx] * rival_[idx] * cfg_->reserve_cdf(s);
            }
            acc += cell;
            out[j] = acc;
        }
    }

    double rival_at_node(std::size_t i) const { return rival_nodes_[i]; }
    std::span<const double> grid() const { return grid_; }

private:
    static constexpr std::size_t kNodes = GaussLegendre8::nodes.size();
    const HybridAuctionConfig* cfg_;
    std::vector<double> grid_;
    std::vector<double> lambda_;
    std::vector<double> weight_;
    std::vector<double> rival_;
    std::vector<double> rival_nodes_;
};

struct Asymptote {
    double slope;
    double cutoff;
    bool fallback;
};

// On [0, cutoff] the equation is 0/0 at the origin; sigma = c v there, with c
// the root of the local balance c = 1 - int_0^e x_c / (e x_c(e)).
inline Asymptote lower_end_asymptote(const HybridAuctionConfig& cfg, double cutoff) {
    const double fallback = static_cast<double>(cfg.n_integrated + cfg.n_nonintegrated - 1) /
                            static_cast<double>(cfg.n_integrated + cfg.n_nonintegrated);
    auto balance = [&](double c) {
        constexpr int pieces = 16;
        double mass = 0.0;
        const double w = cutoff / pieces;
        for (int i = 0; i < pieces; ++i) {
            mass += GaussLegendre8::integrate([&](double t) { return cfg.rival_cdf(t) * cfg.reserve_cdf(c * t); },
                                              i * w, (i + 1) * w);
        }
        const double x_edge = cfg.rival_cdf(cutoff) * cfg.reserve_cdf(c * cutoff);
        if (!(x_edge > 1e-300)) return std::numeric_limits<double>::quiet_NaN();
        return c - 1.0 + mass / (cutoff * x_edge);
    };
    const double hi = 1.0;
    const double h_hi = balance(hi);
    if (!std::isfinite(h_hi)) return {fallback, cutoff, true};
    if (h_hi == 0.0) return {hi, cutoff, false};
    double lo = 0.5;
    for (int k = 0; k < 40; ++k, lo *= 0.5) {
        const double h_lo = balance(lo);
        if (!std::isfinite(h_lo)) break;
        if (h_lo < 0.0) {
            const auto r = bisect_then_secant(balance, lo, hi, 1e-14);
            return {r.root, cutoff, false};
        }
    }
    return {fallback, cutoff, true};
}

class EquilibriumOperator {
public:
    EquilibriumOperator(const HybridAuctionConfig& cfg, std::vector<double> grid)
        : cfg_(cfg), mass_(cfg_, grid), grid_(std::move(grid)) {
        const double width = grid_.back() - grid_.front();
        asym_ = lower_end_asymptote(cfg_, width / static_cast<double>(grid_.size()));
        pinned_.resize(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) pinned_[i] = grid_[i] <= asym_.cutoff;
        work_.resize(grid_.size());
    }

    const std::vector<double>& grid() const { return grid_; }
    const Asymptote& asymptote() const { return asym_; }
    bool pinned(std::size_t i) const { return pinned_[i]; }
    const WinMassIntegrator& mass() const { return mass_; }

    double win_prob(std::size_t i, double bid) const { return mass_.rival_at_node(i) * cfg_.reserve_cdf(bid); }

    /// out = right-hand side of the equilibrium equation evaluated at sigma.
    void apply(std::span<const double> sigma, std::span<double> out) {
        mass_.cumulative(sigma, work_);
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            const double x = win_prob(i, sigma[i]);
            if (pinned_[i] || !(x >= 1e-300)) {
                out[i] = asym_.slope * grid_[i];
            } else {
                out[i] = grid_[i] - work_[i] / x;
            }
        }
    }

    double defect(std::span<const double> sigma) {
        std::vector<double> t(sigma.size());
        apply(sigma, t);
        double r = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) r = std::max(r, std::abs(t[i] - sigma[i]));
        return r;
    }

private:
    HybridAuctionConfig cfg_;
    WinMassIntegrator mass_;
    std::vector<double> grid_;
    Asymptote asym_{};
    std::vector<bool> pinned_;
    std::vector<double> work_;
};

inline EquilibriumSolution assemble_solution(EquilibriumOperator& op, const HybridAuctionConfig& cfg,
                                             std::vector<double> sigma, SolverDiagnostics diag) {
    const auto& grid = op.grid();
    EquilibriumSolution sol;
    sol.config = cfg;
    sol.win_prob.resize(grid.size());
    sol.surplus.resize(grid.size());
    sol.truthful_surplus.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) sol.win_prob[i] = op.win_prob(i, sigma[i]);
    op.mass().cumulative(sigma, sol.surplus);
    op.mass().cumulative(grid, sol.truthful_surplus);
    diag.asymptote_slope = op.asymptote().slope;
    diag.asymptote_cutoff = op.asymptote().cutoff;
    diag.asymptote_fallback = op.asymptote().fallback;
    sol.diagnostics = std::move(diag);
    sol.bid_function = BidFunction(grid, std::move(sigma));
    return sol;
}

}  // namespace detail

/// Damped fixed-point iteration on the equilibrium equation with isotonic
/// projection and clamping to [0, v] after every step.
inline EquilibriumSolution solve_fixed_point(const HybridAuctionConfig& cfg, const FixedPointOptions& opt = {}) {
    cfg.validate();
    if (opt.grid_size < 64) throw std::invalid_argument("solve_fixed_point: grid_size must be >= 64");
    if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw std::invalid_argument("solve_fixed_point: damping must be in (0,1]");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("solve_fixed_point: tol must be positive");

    detail::EquilibriumOperator op(cfg, equal_probability_grid(cfg.nonintegrated_law, opt.grid_size));
    const auto& grid = op.grid();
    const double c = op.asymptote().slope;
    const std::size_t n = grid.size();

    std::vector<double> sigma(n), image(n);
    for (std::size_t i = 0; i < n; ++i) sigma[i] = c * grid[i];

    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= opt.max_iter; ++it) {
        op.apply(sigma, image);
        residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) residual = std::max(residual, std::abs(image[i] - sigma[i]));
        if (residual <= opt.tol) {
            SolverDiagnostics diag;
            diag.method = "fixed-point";
            diag.converged = true;
            diag.iterations = it;
            diag.residual = residual;
            diag.tolerance = opt.tol;
            diag.damping = opt.damping;
            return detail::assemble_solution(op, cfg, std::move(sigma), std::move(diag));
        }
        if (it == opt.max_iter) break;
        for (std::size_t i = 0; i < n; ++i) sigma[i] = (1.0 - opt.damping) * sigma[i] + opt.damping * image[i];
        isotonic_project(sigma);
        for (std::size_t i = 0; i < n; ++i) {
            sigma[i] = op.pinned(i) ? c * grid[i] : std::clamp(sigma[i], 0.0, grid[i]);
        }
    }
    throw SolverError("fixed-point iteration did not converge (residual " + std::to_string(residual) + ")", residual,
                      opt.max_iter);
}

/// Integrates sigma' = (n_B-1) (f_B/F_B)(v) (v - sigma) F_A(sigma) / (F_A(sigma) - n_A (v - sigma) f_A(sigma))
/// from the lower-end asymptote to the top of the grid.
inline EquilibriumSolution solve_ode(const HybridAuctionConfig& cfg, const OdeOptions& opt = {}) {
    cfg.validate();
    if (cfg.n_nonintegrated < 2) throw std::invalid_argument("solve_ode: needs n_nonintegrated >= 2");
    if (!cfg.nonintegrated_law.has_density() || (cfg.n_integrated > 0 && !cfg.integrated_law.has_density())) {
        throw std::invalid_argument("solve_ode: value laws must have densities");
    }
    if (opt.grid_size < 64) throw std::invalid_argument("solve_ode: grid_size must be >= 64");

    detail::EquilibriumOperator op(cfg, equal_probability_grid(cfg.nonintegrated_law, opt.grid_size));
    const auto& grid = op.grid();
    const double c = op.asymptote().slope;
    const double v_start = op.asymptote().cutoff;
    const double rivals = static_cast<double>(cfg.n_nonintegrated - 1);
    const double n_a = static_cast<double>(cfg.n_integrated);

    auto rhs = [&](double v, double s) {
        const double fb = cfg.nonintegrated_law.pdf(v);
        const double Fb = cfg.nonintegrated_law.cdf(v);
        const double hazard = rivals * fb / Fb;
        if (cfg.n_integrated == 0) return hazard * (v - s);
        const double Fa = cfg.integrated_law.cdf(s);
        const double fa = cfg.integrated_law.pdf(s);
        const double den = Fa - n_a * (v - s) * fa;
        if (!(den > 0.0)) throw OdeSingularityError(v, den);
        return hazard * (v - s) * Fa / den;
    };

    std::vector<double> sigma(grid.size());
    OdeStepControl ctl;
    ctl.abs_tol = opt.tol;
    ctl.rel_tol = opt.tol;
    OdeStats stats;
    double t = v_start;
    double y = c * v_start;
    double h = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] <= v_start) {
            sigma[i] = c * grid[i];
            continue;
        }
        y = integrate_dopri5(rhs, t, y, grid[i], h, ctl, stats);
        t = grid[i];
        sigma[i] = y;
    }

    SolverDiagnostics diag;
    diag.method = "ode";
    diag.converged = true;
    diag.iterations = static_cast<int>(stats.accepted);
    diag.residual = op.defect(sigma);
    diag.tolerance = opt.tol;
    diag.ode_steps = stats.accepted;
    diag.ode_rejected = stats.rejected;
    return detail::assemble_solution(op, cfg, std::move(sigma), std::move(diag));
}

/// Bid of a lone non-integrated builder against n_A uniform[0,1] integrated builders.
inline double closed_form_single_nonintegrated(int n_integrated, double v) {
    const double n = static_cast<double>(n_integrated);
    return n * v / (n + 1.0);
}

struct SurplusComparison {
    double nonintegrated;
    double if_integrated;
    double ratio;
};

inline SurplusComparison surplus_single_nonintegrated(int n_integrated, double v) {
    const double n = static_cast<double>(n_integrated);
    const double ratio = std::pow(n / (n + 1.0), n);
    const double integrated = std::pow(v, n + 1.0) / (n + 1.0);
    return {ratio * integrated, integrated, ratio};
}

/// x(v) = F_B^{n_B-1}(v) F_A^{n_A}(sigma(v)), with sigma interpolated.
inline double winning_probability(const EquilibriumSolution& sol, double v) {
    return sol.config.rival_cdf(v) * sol.config.reserve_cdf(sol.bid_function(v));
}

enum class SurplusRule { cell_gauss, trapezoid };

struct EnvelopeReport {
    double sup = 0.0;
    double location = 0.0;
};

/// Max over the grid of |(v - sigma) x(v) - int_0^v x|, recomputed from the
/// bid function alone so that a tampered sigma shows up.
inline EnvelopeReport verify_envelope(const EquilibriumSolution& sol, SurplusRule rule = SurplusRule::cell_gauss) {
    const auto grid = sol.values();
    const auto sigma = sol.bids();
    const std::size_t n = grid.size();
    std::vector<double> x(n), mass(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = sol.config.rival_cdf(grid[i]) * sol.config.reserve_cdf(sigma[i]);
    if (rule == SurplusRule::cell_gauss) {
        detail::WinMassIntegrator integrator(sol.config, grid);
        integrator.cumulative(sigma, mass);
    } else {
        mass[0] = 0.0;
        for (std::size_t i = 1; i < n; ++i) mass[i] = mass[i - 1] + 0.5 * (x[i] + x[i - 1]) * (grid[i] - grid[i - 1]);
    }
    EnvelopeReport rep;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs((grid[i] - sigma[i]) * x[i] - mass[i]);
        if (d > rep.sup) {
            rep.sup = d;
            rep.location = grid[i];
        }
    }
    return rep;
}

struct BestResponseReport {
    double max_gain = 0.0;
    double at_value = 0.0;
    double at_bid = 0.0;
};

/// Interim payoff of bidding b with value v when everyone else follows sol.
inline double deviation_payoff(const EquilibriumSolution& sol, double v, double b) {
    const auto bids = sol.bids();
    double beat_rivals;
    if (b > bids.back()) {
        beat_rivals = 1.0;
    } else if (b < bids.front()) {
        beat_rivals = sol.config.rival_cdf(sol.values().front());
    } else {
        beat_rivals = sol.config.rival_cdf(sol.bid_function.inverse(b));
    }
    return (v - b) * beat_rivals * sol.config.reserve_cdf(b);
}

inline BestResponseReport verify_best_response(const EquilibriumSolution& sol, std::span<const double> value_grid,
                                               std::span<const double> bid_grid) {
    BestResponseReport rep;
    for (double v : value_grid) {
        const double eq = deviation_payoff(sol, v, sol.bid_function(v));
        for (double b : bid_grid) {
            const double gain = deviation_payoff(sol, v, b) - eq;
            if (gain > rep.max_gain) {
                rep.max_gain = gain;
                rep.at_value = v;
                rep.at_bid = b;
            }
        }
    }
    return rep;
}

/// `n_values` evenly spaced values across the grid and `n_bids` evenly spaced bids on [0, v_max].
inline BestResponseReport verify_best_response(const EquilibriumSolution& sol, std::size_t n_values = 21,
                                               std::size_t n_bids = 200) {
    const double lo = sol.values().front();
    const double hi = sol.values().back();
    std::vector<double> values(n_values), bids(n_bids);
    for (std::size_t i = 0; i < n_values; ++i) values[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_values - 1);
    for (std::size_t i = 0; i < n_bids; ++i) bids[i] = hi * static_cast<double>(i) / static_cast<double>(n_bids - 1);
    return verify_best_response(sol, values, bids);
}

/// Sup-norm distance between two bid functions, evaluated on a's grid.
inline double bid_disagreement(const EquilibriumSolution& a, const EquilibriumSolution& b) {
    double d = 0.0;
    const auto grid = a.values();
    for (std::size_t i = 0; i < grid.size(); ++i) d = std::max(d, std::abs(a.bids()[i] - b.bid_function(grid[i])));
    return d;
}

/// Least-squares slope of sigma(v) = k v through the origin.
inline double slope_fit(const EquilibriumSolution& sol) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < sol.values().size(); ++i) {
        num += sol.values()[i] * sol.bids()[i];
        den += sol.values()[i] * sol.values()[i];
    }
    return num / den;
}

/// E[S(v)] for one non-integrated bidder, trapezoid in the F_B measure.
inline double ex_ante_nonintegrated_surplus(const EquilibriumSolution& sol) {
    const auto grid = sol.values();
    double acc = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double dF = sol.config.nonintegrated_law.cdf(grid[i]) - sol.config.nonintegrated_law.cdf(grid[i - 1]);
        acc += 0.5 * (sol.surplus[i] + sol.surplus[i - 1]) * dF;
    }
    return acc;
}

/// Probability that some non-integrated bidder wins: n_B E[x(v)].
inline double nonintegrated_win_rate(const EquilibriumSolution& sol) {
    const auto grid = sol.values();
    double acc = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double dF = sol.config.nonintegrated_law.cdf(grid[i]) - sol.config.nonintegrated_law.cdf(grid[i - 1]);
        acc += 0.5 * (sol.win_prob[i] + sol.win_prob[i - 1]) * dF;
    }
    return static_cast<double>(sol.config.n_nonintegrated) * acc;
}

}  // namespace mevlab

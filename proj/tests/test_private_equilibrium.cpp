#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mevlab/private_equilibrium.hpp"
#include "oracles.hpp"

using namespace mevlab;

namespace {

HybridAuctionConfig uniform_config(int na, int nb) {
    return {na, nb, ValueDistribution::uniform(0, 1), ValueDistribution::uniform(0, 1)};
}

HybridAuctionConfig beta_config(int na, int nb) {
    return {na, nb, ValueDistribution::beta(2, 2), ValueDistribution::beta(2, 2)};
}

double sup_error_vs_line(const EquilibriumSolution& sol, double slope) {
    double e = 0.0;
    for (std::size_t i = 0; i < sol.values().size(); ++i) e = std::max(e, std::abs(sol.bids()[i] - slope * sol.values()[i]));
    return e;
}

oracle::BestResponseOracle best_response_oracle(const EquilibriumSolution& sol) {
    const auto cfg = sol.config;
    oracle::BestResponseOracle o;
    o.values.assign(sol.values().begin(), sol.values().end());
    o.bids.assign(sol.bids().begin(), sol.bids().end());
    o.rival = [cfg](double v) { return std::pow(cfg.nonintegrated_law.cdf(v), cfg.n_nonintegrated - 1); };
    o.reserve = [cfg](double b) { return cfg.n_integrated == 0 ? 1.0 : std::pow(cfg.integrated_law.cdf(b), cfg.n_integrated); };
    return o;
}

EquilibriumSolution with_bids(const EquilibriumSolution& sol, std::vector<double> bids) {
    EquilibriumSolution out = sol;
    out.bid_function = BidFunction(std::vector<double>(sol.values().begin(), sol.values().end()), std::move(bids));
    return out;
}

}  // namespace

// --------------------------------------------------------------- config / grid

TEST(Config, Validation) {
    EXPECT_NO_THROW(uniform_config(3, 1).validate());
    EXPECT_NO_THROW(uniform_config(0, 2).validate());
    EXPECT_THROW(uniform_config(-1, 2).validate(), std::invalid_argument);
    EXPECT_THROW(uniform_config(3, 0).validate(), std::invalid_argument);
    EXPECT_THROW(uniform_config(0, 1).validate(), std::invalid_argument);
    HybridAuctionConfig shifted{1, 2, ValueDistribution::uniform(0, 1), ValueDistribution::uniform(0.5, 1)};
    EXPECT_THROW(shifted.validate(), std::invalid_argument);
}

TEST(Grid, EqualProbabilitySpacing) {
    const auto law = ValueDistribution::beta(2, 2);
    const auto g = equal_probability_grid(law, 512);
    ASSERT_EQ(g.size(), 512u);
    EXPECT_EQ(g.front(), 0.0);
    EXPECT_EQ(g.back(), 1.0);
    for (std::size_t i = 1; i < g.size(); ++i) {
        EXPECT_GT(g[i], g[i - 1]);
        EXPECT_NEAR(law.cdf(g[i]) - law.cdf(g[i - 1]), 1.0 / 511.0, 1e-9);
    }
}

TEST(Grid, UnboundedLawIsCut) {
    const auto law = ValueDistribution::lognormal(0, 0.5);
    const auto g = equal_probability_grid(law, 128);
    EXPECT_TRUE(std::isfinite(g.back()));
    EXPECT_NEAR(law.cdf(g.back()), 1 - 1e-9, 1e-12);
}

// ------------------------------------------------------------------ fixed point

TEST(FixedPoint, SingleNonintegratedMatchesProposition1) {
    for (int na : {1, 2, 3, 5}) {
        const auto sol = solve_fixed_point(uniform_config(na, 1));
        EXPECT_TRUE(sol.diagnostics.converged);
        EXPECT_LE(sup_error_vs_line(sol, na / (na + 1.0)), 1e-3) << "n_A=" << na;
        EXPECT_LE(sol.diagnostics.residual, 1e-6);
    }
}

TEST(FixedPoint, NoReserveIsClassicalFirstPrice) {
    for (int nb : {2, 3, 5}) {
        const auto sol = solve_fixed_point(uniform_config(0, nb));
        EXPECT_LE(sup_error_vs_line(sol, (nb - 1.0) / nb), 1e-3) << "n_B=" << nb;
    }
    const auto sol = solve_fixed_point(uniform_config(0, 2));
    EXPECT_LE(best_response_oracle(sol).max_gain(21, 400), 1e-6);
}

TEST(FixedPoint, ThreeByThreeUniformBoundsAndSlope) {
    const auto sol = solve_fixed_point(uniform_config(3, 3));
    for (std::size_t i = 0; i < sol.values().size(); ++i) {
        const double v = sol.values()[i];
        EXPECT_GE(sol.bids()[i], 0.75 * v - 1e-12);
        EXPECT_LE(sol.bids()[i], v);
    }
    // slope of sigma near the origin from the first few grid points
    const double near_zero = sol.bids()[8] / sol.values()[8];
    EXPECT_NEAR(near_zero, 5.0 / 6.0, 1e-3);
    EXPECT_NEAR(sol.diagnostics.asymptote_slope, 5.0 / 6.0, 1e-9);
}

TEST(FixedPoint, UniformSolutionIsLinearWithLeadingOrderSlope) {
    for (int na : {1, 3}) {
        for (int nb : {2, 3, 5}) {
            const auto sol = solve_fixed_point(uniform_config(na, nb));
            const double c = (na + nb - 1.0) / (na + nb);
            EXPECT_LE(sup_error_vs_line(sol, c), 1e-6) << na << "x" << nb;
        }
    }
}

TEST(FixedPoint, BetaAsymptoteMatchesPowerLawBalance) {
    // F(t) ~ 3 t^2 near 0 for Beta(2,2): x(v) ~ v^k with k = 2 (n_A + n_B - 1), c = k / (k + 1)
    const auto sol = solve_fixed_point(beta_config(3, 3));
    EXPECT_FALSE(sol.diagnostics.asymptote_fallback);
    EXPECT_NEAR(sol.diagnostics.asymptote_slope, 10.0 / 11.0, 5e-3);
}

TEST(FixedPoint, SolutionInvariants) {
    for (const auto& cfg : {uniform_config(3, 3), beta_config(3, 3), beta_config(1, 2),
                            HybridAuctionConfig{2, 3, ValueDistribution::uniform(0, 1), ValueDistribution::beta(2, 3)}}) {
        const auto sol = solve_fixed_point(cfg);
        const auto v = sol.values();
        const auto s = sol.bids();
        EXPECT_EQ(sol.surplus.front(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) {
            EXPECT_GE(s[i], 0.0);
            EXPECT_LE(s[i], v[i]);
            EXPECT_GE(sol.win_prob[i], 0.0);
            EXPECT_LE(sol.win_prob[i], 1.0);
            if (i > 0) {
                EXPECT_GT(s[i], s[i - 1]) << "i=" << i;
                EXPECT_GE(sol.win_prob[i], sol.win_prob[i - 1]);
                EXPECT_GE(sol.surplus[i], sol.surplus[i - 1]);
            }
        }
    }
}

TEST(FixedPoint, SurplusBelowTruthfulCounterfactual) {
    const auto cfg = beta_config(3, 3);
    const auto sol = solve_fixed_point(cfg);
    for (std::size_t i = 0; i < sol.values().size(); i += 17) {
        const double v = sol.values()[i];
        const double truthful = oracle::integrate(
            [&](double t) { return std::pow(cfg.nonintegrated_law.cdf(t), 2) * std::pow(cfg.integrated_law.cdf(t), 3); }, 0.0,
            v, 1e-12);
        EXPECT_LE(sol.surplus[i], truthful + 1e-12) << "v=" << v;
        EXPECT_NEAR(sol.truthful_surplus[i], truthful, 1e-10);
    }
}

TEST(FixedPoint, NonConvergenceCarriesResidual) {
    FixedPointOptions opt;
    opt.max_iter = 2;
    opt.tol = 1e-12;
    try {
        solve_fixed_point(beta_config(3, 3), opt);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_GT(e.residual(), 1e-12);
        EXPECT_EQ(e.iterations(), 2);
    }
}

TEST(FixedPoint, RejectsBadOptions) {
    FixedPointOptions small;
    small.grid_size = 32;
    EXPECT_THROW(solve_fixed_point(uniform_config(3, 1), small), std::invalid_argument);
    FixedPointOptions damp;
    damp.damping = 0.0;
    EXPECT_THROW(solve_fixed_point(uniform_config(3, 1), damp), std::invalid_argument);
    damp.damping = 1.5;
    EXPECT_THROW(solve_fixed_point(uniform_config(3, 1), damp), std::invalid_argument);
}

TEST(FixedPoint, UndampedIterationAlsoConverges) {
    FixedPointOptions opt;
    opt.damping = 1.0;
    const auto a = solve_fixed_point(beta_config(3, 3), opt);
    const auto b = solve_fixed_point(beta_config(3, 3));
    EXPECT_LE(bid_disagreement(a, b), 1e-5);
}

// ------------------------------------------------------------------------- ODE

TEST(Ode, AgreesWithFixedPoint) {
    for (const auto& cfg : {uniform_config(3, 3), beta_config(3, 3), uniform_config(1, 5)}) {
        const auto fp = solve_fixed_point(cfg);
        const auto ode = solve_ode(cfg);
        EXPECT_LE(bid_disagreement(fp, ode), 2e-3);
    }
}

TEST(Ode, SatisfiesDisplayedUniformForm) {
    // sigma' v ((n_A+1) sigma - n_A v) = (n_B - 1) sigma (v - sigma)
    for (int na : {1, 3}) {
        for (int nb : {2, 3}) {
            const auto sol = solve_ode(uniform_config(na, nb));
            const auto v = sol.values();
            const auto s = sol.bids();
            double worst = 0.0;
            for (std::size_t i = 10; i + 1 < v.size(); ++i) {
                const double ds = (s[i + 1] - s[i - 1]) / (v[i + 1] - v[i - 1]);
                const double lhs = ds * v[i] * ((na + 1) * s[i] - na * v[i]);
                const double rhs = (nb - 1) * s[i] * (v[i] - s[i]);
                worst = std::max(worst, std::abs(lhs - rhs));
            }
            EXPECT_LE(worst, 1e-6) << na << "x" << nb;
        }
    }
}

TEST(Ode, NoReserveTwoBidders) {
    const auto sol = solve_ode(uniform_config(0, 2));
    EXPECT_LE(sup_error_vs_line(sol, 0.5), 1e-4);
}

TEST(Ode, ResidualIsEquationDefect) {
    const auto sol = solve_ode(beta_config(3, 3));
    EXPECT_EQ(sol.diagnostics.method, "ode");
    EXPECT_GT(sol.diagnostics.ode_steps, 0);
    EXPECT_LE(sol.diagnostics.residual, 1e-3);
}

TEST(Ode, Preconditions) {
    EXPECT_THROW(solve_ode(uniform_config(3, 1)), std::invalid_argument);
    HybridAuctionConfig emp{1, 2, ValueDistribution::uniform(0, 1),
                            ValueDistribution::empirical({0.0, 0.5, 1.0}, {0.0, 0.5, 1.0})};
    EXPECT_THROW(solve_ode(emp), std::invalid_argument);
}

TEST(Ode, SingularityErrorCarriesLocation) {
    const OdeSingularityError e(0.25, -1e-3);
    EXPECT_EQ(e.location(), 0.25);
    EXPECT_LT(e.denominator(), 0.0);
    EXPECT_NE(std::string(e.what()).find("ODE singularity"), std::string::npos);
    const SolverError& base = e;
    EXPECT_TRUE(std::isnan(base.residual()));
}

// ---------------------------------------------------------------- closed forms

TEST(ClosedForm, Bid) {
    EXPECT_DOUBLE_EQ(closed_form_single_nonintegrated(3, 0.8), 0.6);
    EXPECT_DOUBLE_EQ(closed_form_single_nonintegrated(1, 1.0), 0.5);
    EXPECT_EQ(closed_form_single_nonintegrated(4, 0.0), 0.0);
}

TEST(ClosedForm, Surplus) {
    const auto s3 = surplus_single_nonintegrated(3, 1.0);
    EXPECT_DOUBLE_EQ(s3.nonintegrated, 27.0 / 256.0);
    EXPECT_DOUBLE_EQ(s3.if_integrated, 0.25);
    EXPECT_DOUBLE_EQ(s3.ratio, 27.0 / 64.0);
    const auto s1 = surplus_single_nonintegrated(1, 1.0);
    EXPECT_DOUBLE_EQ(s1.nonintegrated, 0.25);
    EXPECT_DOUBLE_EQ(s1.if_integrated, 0.5);
    EXPECT_DOUBLE_EQ(s1.ratio, 0.5);
    const auto s0 = surplus_single_nonintegrated(2, 0.0);
    EXPECT_EQ(s0.nonintegrated, 0.0);
    EXPECT_EQ(s0.if_integrated, 0.0);
    EXPECT_DOUBLE_EQ(s0.ratio, 4.0 / 9.0);
}

TEST(ClosedForm, SolverSurplusRatio) {
    for (int na : {1, 2, 3, 5}) {
        const auto sol = solve_fixed_point(uniform_config(na, 1));
        const double ratio = sol.surplus.back() / sol.truthful_surplus.back();
        EXPECT_NEAR(ratio, std::pow(na / (na + 1.0), na), 1e-4);
    }
}

// ------------------------------------------------------- winning probability

TEST(WinningProbability, SpecExamples) {
    const auto sol = solve_fixed_point(uniform_config(3, 1));
    EXPECT_NEAR(winning_probability(sol, 1.0), 0.421875, 1e-9);
    EXPECT_EQ(winning_probability(sol, 0.0), 0.0);
    const auto fp = solve_fixed_point(uniform_config(0, 2));
    EXPECT_NEAR(winning_probability(fp, 0.5), 0.5, 1e-12);
}

TEST(WinningProbability, MatchesStoredGrid) {
    const auto sol = solve_fixed_point(beta_config(3, 3));
    for (std::size_t i = 0; i < sol.values().size(); i += 31) {
        EXPECT_NEAR(winning_probability(sol, sol.values()[i]), sol.win_prob[i], 1e-15);
    }
}

// -------------------------------------------------------------------- envelope

TEST(Envelope, ClosedFormCase) {
    const auto sol = solve_fixed_point(uniform_config(3, 1));
    EXPECT_LE(verify_envelope(sol).sup, 1e-6);
    EXPECT_LE(verify_envelope(sol, SurplusRule::trapezoid).sup, 1e-5);
}

TEST(Envelope, WithinTenTimesSolverTolerance) {
    for (const auto& cfg : {uniform_config(3, 3), beta_config(3, 3), beta_config(1, 2), uniform_config(1, 5)}) {
        const auto sol = solve_fixed_point(cfg);
        EXPECT_LE(verify_envelope(sol).sup, 10 * sol.diagnostics.tolerance);
    }
}

TEST(Envelope, DetectsPerturbedBids) {
    const auto sol = solve_fixed_point(uniform_config(3, 1));
    std::vector<double> bumped(sol.bids().begin(), sol.bids().end());
    for (double& b : bumped) b += 0.05;
    EXPECT_GT(verify_envelope(with_bids(sol, bumped)).sup, 1e-2);
}

// --------------------------------------------------------------- best response

TEST(BestResponse, ClosedFormOptimumIsThreeQuarters) {
    // (v - b) b^3 is maximized at b = 0.75 v
    for (double v : {0.2, 0.5, 0.9}) {
        double best_b = 0.0, best = -1.0;
        for (int k = 0; k <= 100000; ++k) {
            const double b = v * k / 100000.0;
            const double p = (v - b) * b * b * b;
            if (p > best) {
                best = p;
                best_b = b;
            }
        }
        EXPECT_NEAR(best_b, 0.75 * v, 1e-4);
    }
    const auto sol = solve_fixed_point(uniform_config(3, 1));
    EXPECT_LE(verify_best_response(sol).max_gain, 1e-6);
}

TEST(BestResponse, OracleAgreesWithLibraryReport) {
    for (const auto& cfg : {uniform_config(3, 3), beta_config(3, 3), uniform_config(1, 2)}) {
        const auto sol = solve_fixed_point(cfg);
        const double lib = verify_best_response(sol).max_gain;
        const double ref = best_response_oracle(sol).max_gain(21, 200);
        EXPECT_LE(lib, 1e-3);
        EXPECT_NEAR(lib, ref, 1e-12);
    }
}

TEST(BestResponse, ZeroValueBidsZero) {
    const auto sol = solve_fixed_point(uniform_config(3, 3));
    for (double b : {0.01, 0.2, 0.9}) EXPECT_LT(deviation_payoff(sol, 0.0, b), 0.0);
    EXPECT_EQ(deviation_payoff(sol, 0.0, 0.0), 0.0);
}

TEST(BestResponse, DetectsShadedStrategy) {
    const auto sol = solve_fixed_point(uniform_config(3, 1));
    std::vector<double> shaded(sol.bids().begin(), sol.bids().end());
    for (double& b : shaded) b *= 0.6;
    EXPECT_GT(verify_best_response(with_bids(sol, shaded)).max_gain, 1e-3);
}

// ---------------------------------------------------------------- summaries

TEST(Summaries, ExAnteQuantitiesUniformThreeByOne) {
    const auto sol = solve_fixed_point(uniform_config(3, 1));
    const double surplus = oracle::integrate([](double v) { return std::pow(0.75, 3) * std::pow(v, 4) / 4.0; }, 0.0, 1.0);
    const double win = oracle::integrate([](double v) { return std::pow(0.75 * v, 3); }, 0.0, 1.0);
    EXPECT_NEAR(ex_ante_nonintegrated_surplus(sol), surplus, 1e-6);
    EXPECT_NEAR(nonintegrated_win_rate(sol), win, 1e-6);
    EXPECT_NEAR(slope_fit(sol), 0.75, 1e-9);
}

TEST(BidFunctionType, InverseAndValidation) {
    const BidFunction f({0.0, 0.5, 1.0}, {0.0, 0.25, 0.75});
    EXPECT_DOUBLE_EQ(f(0.75), 0.5);
    EXPECT_DOUBLE_EQ(f.inverse(0.5), 0.75);
    EXPECT_DOUBLE_EQ(f.inverse(-1.0), 0.0);
    EXPECT_DOUBLE_EQ(f.inverse(9.0), 1.0);
    EXPECT_THROW(BidFunction({0.0, 0.0}, {0.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(BidFunction({0.0, 1.0}, {0.0}), std::invalid_argument);
}

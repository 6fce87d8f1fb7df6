#pragma once

// Private-value laws and lognormal truncated moments.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mevlab/rng.hpp"
#include "mevlab/special_functions.hpp"

namespace mevlab {

class NegligibleMassError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// V = exp(N(log_mean, log_sd^2)).
struct LognormalLaw {
    double log_mean = 0.0;
    double log_sd = 1.0;

    LognormalLaw() = default;
    LognormalLaw(double a, double s) : log_mean(a), log_sd(s) {
        if (!(s > 0.0) || !std::isfinite(a) || !std::isfinite(s)) {
            throw std::invalid_argument("LognormalLaw: log-sd must be positive and parameters finite");
        }
    }

    double mean() const { return std::exp(log_mean + 0.5 * log_sd * log_sd); }
    double variance() const {
        const double s2 = log_sd * log_sd;
        return std::expm1(s2) * std::exp(2.0 * log_mean + s2);
    }
    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        if (std::isinf(x)) return 1.0;
        return normal_cdf((std::log(x) - log_mean) / log_sd);
    }
    double pdf(double x) const {
        if (x <= 0.0 || std::isinf(x)) return 0.0;
        const double z = (std::log(x) - log_mean) / log_sd;
        return normal_pdf(z) / (x * log_sd);
    }
    double quantile(double q) const {
        if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("LognormalLaw::quantile: q outside [0,1]");
        if (q == 0.0) return 0.0;
        if (q == 1.0) return std::numeric_limits<double>::infinity();
        return std::exp(log_mean + log_sd * normal_quantile(q));
    }
    /// E[V ; V < b], the partial first moment below b.
    double partial_expectation(double b) const {
        if (b <= 0.0) return 0.0;
        if (std::isinf(b)) return mean();
        return mean() * normal_cdf((std::log(b) - log_mean - log_sd * log_sd) / log_sd);
    }
};

/// E[V | V < b] for lognormal V.
inline double lognormal_truncated_mean(const LognormalLaw& law, double b) {
    if (!(b > 0.0)) throw std::domain_error("lognormal_truncated_mean: b must be positive");
    const double s = law.log_sd;
    const double z = (std::log(b) - law.log_mean) / s;
    const double mass = normal_cdf(z);
    if (mass < std::numeric_limits<double>::min()) {
        throw NegligibleMassError("lognormal_truncated_mean: negligible-mass truncation");
    }
    return law.mean() * normal_cdf(z - s) / mass;
}

/// E[(b - V)^+] for the lognormal law with mean v0 and log-sd s.
inline double lognormal_put_value(double v0, double b, double s) {
    if (!(v0 > 0.0) || !(s > 0.0) || b < 0.0) {
        throw std::domain_error("lognormal_put_value: need v0 > 0, s > 0, b >= 0");
    }
    if (b == 0.0) return 0.0;
    const double d1 = (std::log(v0 / b) + 0.5 * s * s) / s;
    const double d2 = d1 - s;
    return b * normal_cdf(-d2) - v0 * normal_cdf(-d1);
}

struct UniformLaw {
    double lo = 0.0;
    double hi = 1.0;
};

struct BetaLaw {
    double alpha = 1.0;
    double beta = 1.0;
    double log_norm = 0.0;  // log B(alpha, beta)
};

/// Monotone piecewise-linear CDF through (x_i, F_i).
struct EmpiricalGridLaw {
    std::vector<double> x;
    std::vector<double> cdf;
    std::string source;
};

namespace detail {

template <class... Ts>
struct Overload : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overload(Ts...) -> Overload<Ts...>;

}  // namespace detail

class ValueDistribution {
public:
    enum class Kind { uniform, beta, lognormal, empirical_grid };

    static ValueDistribution uniform(double lo, double hi) {
        if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi)) {
            throw std::invalid_argument("uniform: need 0 <= lo < hi < inf");
        }
        return ValueDistribution(UniformLaw{lo, hi});
    }

    static ValueDistribution beta(double alpha, double beta) {
        if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
            throw std::invalid_argument("beta: shape parameters must be positive");
        }
        return ValueDistribution(BetaLaw{alpha, beta, log_beta(alpha, beta)});
    }

    static ValueDistribution lognormal(double log_mean, double log_sd) {
        return ValueDistribution(LognormalLaw(log_mean, log_sd));
    }

    static ValueDistribution empirical(std::vector<double> x, std::vector<double> cdf, std::string source = "inline") {
        if (x.size() < 2 || x.size() != cdf.size()) {
            throw std::invalid_argument("empirical: need at least two (x, cdf) points of equal count");
        }
        if (x.front() < 0.0) throw std::invalid_argument("empirical: support must be nonnegative");
        for (std::size_t i = 1; i < x.size(); ++i) {
            if (!(x[i] > x[i - 1])) throw std::invalid_argument("empirical: x must be strictly increasing");
            if (cdf[i] < cdf[i - 1]) throw std::invalid_argument("empirical: cdf must be nondecreasing");
        }
        if (cdf.front() != 0.0 || cdf.back() != 1.0) {
            throw std::invalid_argument("empirical: cdf must start at 0 and end at 1");
        }
        return ValueDistribution(EmpiricalGridLaw{std::move(x), std::move(cdf), std::move(source)});
    }

    /// Reads a CSV with header `x,cdf`.
    static ValueDistribution empirical_from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("empirical: cannot open " + path);
        std::string line;
        if (!std::getline(in, line)) throw std::invalid_argument("empirical: empty file " + path);
        std::vector<double> xs, fs;
        while (std::getline(in, line)) {
            if (line.empty() || line == "\r") continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw std::invalid_argument("empirical: malformed row '" + line + "'");
            xs.push_back(parse_number(line.substr(0, comma)));
            fs.push_back(parse_number(line.substr(comma + 1)));
        }
        return empirical(std::move(xs), std::move(fs), path);
    }

    /// Parses `uniform(lo,hi)`, `beta(a,b)`, `lognormal(a,s)`, `empirical(path.csv)`.
    static ValueDistribution parse(std::string_view raw) {
        const std::string trimmed = trim(raw);
        const std::string_view spec = trimmed;
        const auto open = spec.find('(');
        const auto close = spec.rfind(')');
        if (open == std::string_view::npos || close == std::string_view::npos || close < open ||
            close + 1 != spec.size()) {
            throw std::invalid_argument("distribution spec must look like name(args): '" + std::string(spec) + "'");
        }
        const std::string name = trim(spec.substr(0, open));
        const std::string body = std::string(spec.substr(open + 1, close - open - 1));
        if (name == "empirical") return empirical_from_csv(trim(body));
        if (name != "uniform" && name != "beta" && name != "lognormal") {
            throw std::invalid_argument("unknown distribution '" + name + "'");
        }

        std::vector<double> args;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) args.push_back(parse_number(item));
        if (args.size() != 2) {
            throw std::invalid_argument("distribution '" + name + "' takes exactly two arguments");
        }
        if (name == "uniform") return uniform(args[0], args[1]);
        if (name == "beta") return beta(args[0], args[1]);
        return lognormal(args[0], args[1]);
    }

    Kind kind() const { return static_cast<Kind>(law_.index()); }

    double lower() const {
        return std::visit(detail::Overload{[](const UniformLaw& u) { return u.lo; },
                                   [](const BetaLaw&) { return 0.0; },
                                   [](const LognormalLaw&) { return 0.0; },
                                   [](const EmpiricalGridLaw& e) { return e.x.front(); }},
                          law_);
    }

    double upper() const {
        return std::visit(detail::Overload{[](const UniformLaw& u) { return u.hi; },
                                   [](const BetaLaw&) { return 1.0; },
                                   [](const LognormalLaw&) { return std::numeric_limits<double>::infinity(); },
                                   [](const EmpiricalGridLaw& e) { return e.x.back(); }},
                          law_);
    }

    double cdf(double x) const {
        return std::visit(detail::Overload{[x](const UniformLaw& u) { return std::clamp((x - u.lo) / (u.hi - u.lo), 0.0, 1.0); },
                                   [x](const BetaLaw& b) { return regularized_incomplete_beta(b.alpha, b.beta, x); },
                                   [x](const LognormalLaw& l) { return l.cdf(x); },
                                   [x](const EmpiricalGridLaw& e) { return empirical_cdf(e, x); }},
                          law_);
    }

    double pdf(double x) const {
        return std::visit(detail::Overload{[x](const UniformLaw& u) { return (x >= u.lo && x <= u.hi) ? 1.0 / (u.hi - u.lo) : 0.0; },
                                   [x](const BetaLaw& b) { return beta_pdf(b, x); },
                                   [x](const LognormalLaw& l) { return l.pdf(x); },
                                   [x](const EmpiricalGridLaw& e) { return empirical_pdf(e, x); }},
                          law_);
    }

    double quantile(double q) const {
        if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("quantile: q outside [0,1]");
        return std::visit(detail::Overload{[q](const UniformLaw& u) { return u.lo + q * (u.hi - u.lo); },
                                   [this, q](const BetaLaw&) { return solve_quantile(q); },
                                   [q](const LognormalLaw& l) { return l.quantile(q); },
                                   [q](const EmpiricalGridLaw& e) { return empirical_quantile(e, q); }},
                          law_);
    }

    /// Inverse-transform draw; consumes exactly one 64-bit output of `gen`.
    template <class Gen>
    double sample(Gen& gen) const {
        return quantile(uniform_open01(gen));
    }

    double mean() const {
        return std::visit(detail::Overload{[](const UniformLaw& u) { return 0.5 * (u.lo + u.hi); },
                                   [](const BetaLaw& b) { return b.alpha / (b.alpha + b.beta); },
                                   [](const LognormalLaw& l) { return l.mean(); },
                                   [](const EmpiricalGridLaw& e) {
                                       double m = 0.0;
                                       for (std::size_t i = 1; i < e.x.size(); ++i)
                                           m += 0.5 * (e.x[i] + e.x[i - 1]) * (e.cdf[i] - e.cdf[i - 1]);
                                       return m;
                                   }},
                          law_);
    }

    double variance() const {
        return std::visit(detail::Overload{[](const UniformLaw& u) { return (u.hi - u.lo) * (u.hi - u.lo) / 12.0; },
                                   [](const BetaLaw& b) {
                                       const double s = b.alpha + b.beta;
                                       return b.alpha * b.beta / (s * s * (s + 1.0));
                                   },
                                   [](const LognormalLaw& l) { return l.variance(); },
                                   [this](const EmpiricalGridLaw& e) {
                                       double m2 = 0.0;
                                       for (std::size_t i = 1; i < e.x.size(); ++i) {
                                           const double a = e.x[i - 1], b = e.x[i];
                                           m2 += (a * a + a * b + b * b) / 3.0 * (e.cdf[i] - e.cdf[i - 1]);
                                       }
                                       const double m = mean();
                                       return m2 - m * m;
                                   }},
                          law_);
    }

    /// Round-trippable spec string, e.g. `beta(2,2)`.
    std::string spec() const {
        return std::visit(detail::Overload{[](const UniformLaw& u) { return "uniform(" + fmt(u.lo) + "," + fmt(u.hi) + ")"; },
                                   [](const BetaLaw& b) { return "beta(" + fmt(b.alpha) + "," + fmt(b.beta) + ")"; },
                                   [](const LognormalLaw& l) {
                                       return "lognormal(" + fmt(l.log_mean) + "," + fmt(l.log_sd) + ")";
                                   },
                                   [](const EmpiricalGridLaw& e) { return "empirical(" + e.source + ")"; }},
                          law_);
    }

    bool has_density() const { return kind() != Kind::empirical_grid; }

private:
    using Law = std::variant<UniformLaw, BetaLaw, LognormalLaw, EmpiricalGridLaw>;

    explicit ValueDistribution(Law law) : law_(std::move(law)) {}

    static std::string trim(std::string_view s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string_view::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return std::string(s.substr(b, e - b + 1));
    }

    static double parse_number(const std::string& raw) {
        const std::string s = trim(raw);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw std::invalid_argument("not a number: '" + s + "'");
        }
        return value;
    }

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    static double beta_pdf(const BetaLaw& b, double x) {
        if (x < 0.0 || x > 1.0) return 0.0;
        if (x == 0.0) return b.alpha < 1.0 ? std::numeric_limits<double>::infinity() : (b.alpha == 1.0 ? b.beta : 0.0);
        if (x == 1.0) return b.beta < 1.0 ? std::numeric_limits<double>::infinity() : (b.beta == 1.0 ? b.alpha : 0.0);
        return std::exp((b.alpha - 1.0) * std::log(x) + (b.beta - 1.0) * std::log1p(-x) - b.log_norm);
    }

    static double empirical_cdf(const EmpiricalGridLaw& e, double x) {
        if (x <= e.x.front()) return 0.0;
        if (x >= e.x.back()) return 1.0;
        const auto hi = static_cast<std::size_t>(std::upper_bound(e.x.begin(), e.x.end(), x) - e.x.begin());
        const double t = (x - e.x[hi - 1]) / (e.x[hi] - e.x[hi - 1]);
        return e.cdf[hi - 1] + t * (e.cdf[hi] - e.cdf[hi - 1]);
    }

    static double empirical_pdf(const EmpiricalGridLaw& e, double x) {
        if (x < e.x.front() || x >= e.x.back()) return 0.0;
        const auto hi = static_cast<std::size_t>(std::upper_bound(e.x.begin(), e.x.end(), x) - e.x.begin());
        return (e.cdf[hi] - e.cdf[hi - 1]) / (e.x[hi] - e.x[hi - 1]);
    }

    static double empirical_quantile(const EmpiricalGridLaw& e, double q) {
        if (q <= 0.0) return e.x.front();
        if (q >= 1.0) return e.x.back();
        // first segment whose upper cdf reaches q
        const auto hi = static_cast<std::size_t>(std::lower_bound(e.cdf.begin(), e.cdf.end(), q) - e.cdf.begin());
        const double lo_f = e.cdf[hi - 1];
        const double t = (q - lo_f) / (e.cdf[hi] - lo_f);
        return e.x[hi - 1] + t * (e.x[hi] - e.x[hi - 1]);
    }

    // Bisection down to a 1e-12 bracket, with Newton steps whenever the
    // density is usable and the step stays inside the bracket.
    double solve_quantile(double q) const {
        double lo = lower();
        double hi = upper();
        if (q == 0.0) return lo;
        if (q == 1.0) return hi;
        double x = std::clamp(mean(), lo, hi);
        for (int it = 0; it < 200; ++it) {
            const double f = cdf(x) - q;
            if (f == 0.0) return x;
            if (f > 0.0) hi = x; else lo = x;
            const double dens = pdf(x);
            double next = 0.5 * (lo + hi);
            bool newton = false;
            if (dens > 1e-8) {
                const double cand = x - f / dens;
                if (cand > lo && cand < hi) {
                    next = cand;
                    newton = true;
                }
            }
            if (newton && std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x))) return next;
            if (!newton && hi - lo <= 1e-12) return next;
            x = next;
        }
        return x;
    }

    Law law_;
};

}  // namespace mevlab

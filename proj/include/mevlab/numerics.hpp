#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace mevlab {

/// 8-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree 15.
struct GaussLegendre8 {
    static constexpr std::array<double, 8> nodes = {
        -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
        0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
    static constexpr std::array<double, 8> weights = {
        0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
        0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

    template <class F>
    static double integrate(F&& f, double lo, double hi) {
        const double half = 0.5 * (hi - lo);
        const double mid = 0.5 * (hi + lo);
        double acc = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * f(mid + half * nodes[k]);
        return acc * half;
    }
};

/// Least-squares nondecreasing fit (pool adjacent violators), unit weights.
inline void isotonic_project(std::span<double> y) {
    struct Block {
        double sum;
        std::size_t count;
        double mean() const { return sum / static_cast<double>(count); }
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (double value : y) {
        blocks.push_back({value, 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
            const Block top = blocks.back();
            blocks.pop_back();
            blocks.back().sum += top.sum;
            blocks.back().count += top.count;
        }
    }
    std::size_t i = 0;
    for (const Block& b : blocks) {
        const double m = b.mean();
        for (std::size_t k = 0; k < b.count; ++k) y[i++] = m;
    }
}

/// Piecewise-linear interpolation on a strictly increasing abscissa; clamps
/// to the end values outside [xs.front(), xs.back()].
inline double interpolate_linear(std::span<const double> xs, std::span<const double> ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

/// Composite trapezoid of samples ys over abscissae xs.
inline double trapezoid(std::span<const double> xs, std::span<const double> ys) {
    double acc = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i) acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    return acc;
}

struct BracketResult {
    double root;
    double lo;
    double hi;
    int iterations;
};

/// Bisection on a sign-changing bracket until its width is <= tol, then
/// secant polish from the final bracket ends (accepted only if it stays
/// inside and lowers |f|).
template <class F>
BracketResult bisect_then_secant(F&& f, double lo, double hi, double tol, int max_iter = 400) {
    double f_lo = f(lo);
    double f_hi = f(hi);
    if (f_lo == 0.0) return {lo, lo, lo, 0};
    if (f_hi == 0.0) return {hi, hi, hi, 0};
    if ((f_lo > 0.0) == (f_hi > 0.0)) {
        throw std::invalid_argument("bisect_then_secant: bracket does not change sign");
    }
    int it = 0;
    while (hi - lo > tol && it < max_iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double f_mid = f(mid);
        ++it;
        if (f_mid == 0.0) return {mid, mid, mid, it};
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    double best = std::abs(f_lo) <= std::abs(f_hi) ? lo : hi;
    double f_best = std::min(std::abs(f_lo), std::abs(f_hi));
    if (f_hi != f_lo) {
        const double x = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        if (x >= lo && x <= hi) {
            const double fx = f(x);
            ++it;
            if (std::abs(fx) < f_best) best = x;
        }
    }
    return {best, lo, hi, it};
}

}  // namespace mevlab

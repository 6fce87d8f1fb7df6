#pragma once

// Adaptive Dormand-Prince 5(4) integrator for scalar initial value problems.

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mevlab {

struct OdeStats {
    long accepted = 0;
    long rejected = 0;
    long evaluations = 0;
};

struct OdeStepControl {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    double min_step = 1e-14;
    long max_steps = 1'000'000;
};

/// Integrates y' = f(t, y) from (t0, y0) to t1 and returns y(t1). `h` carries
/// the step size in and out, so consecutive calls over adjacent intervals
/// continue with the last accepted step.
template <class F>
double integrate_dopri5(F&& f, double t0, double y0, double t1, double& h, const OdeStepControl& ctl,
                        OdeStats& stats) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - b_hat (error weights)
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    if (t1 <= t0) return y0;
    if (!(h > 0.0)) h = std::min(1e-3, t1 - t0);

    double t = t0;
    double y = y0;
    double k1 = f(t, y);
    ++stats.evaluations;
    long steps = 0;
    while (t < t1) {
        if (++steps > ctl.max_steps) throw std::runtime_error("integrate_dopri5: step budget exhausted");
        bool last = false;
        double step = h;
        if (t + step >= t1) {
            step = t1 - t;
            last = true;
        }
        const double k2 = f(t + c2 * step, y + step * a21 * k1);
        const double k3 = f(t + c3 * step, y + step * (a31 * k1 + a32 * k2));
        const double k4 = f(t + c4 * step, y + step * (a41 * k1 + a42 * k2 + a43 * k3));
        const double k5 = f(t + c5 * step, y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const double k6 = f(t + step, y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const double y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const double k7 = f(t + step, y_new);
        stats.evaluations += 6;

        const double err = std::abs(step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));
        const double scale = ctl.abs_tol + ctl.rel_tol * std::max(std::abs(y), std::abs(y_new));
        const double ratio = err / scale;

        if (ratio <= 1.0 || step <= ctl.min_step) {
            ++stats.accepted;
            t = last ? t1 : t + step;
            y = y_new;
            k1 = k7;  // first-same-as-last
            const double grow = ratio == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0);
            if (!last) h = step * grow;
        } else {
            ++stats.rejected;
            h = step * std::clamp(0.9 * std::pow(ratio, -0.25), 0.1, 1.0);
            if (h < ctl.min_step) h = ctl.min_step;
        }
    }
    return y;
}

}  // namespace mevlab

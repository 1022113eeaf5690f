#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "pulse_atom/errors.hpp"

namespace pulse_atom {

template <std::size_t N>
using OdeState = std::array<double, N>;

struct StepControl {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = 0.1;
    double initial_step = 0.0; // 0: pick from max_step
    std::size_t max_steps = 50'000'000;
};

/// Dormand-Prince 5(4) embedded pair with FSAL and standard step-size control.
///
/// `rhs(t, y)` returns dy/dt. `observer(t, y, dydt)` is called at t0 and at
/// every accepted step; the last call is exactly at t1.
template <std::size_t N, class Rhs, class Observer>
OdeState<N> integrate_dopri5(Rhs&& rhs, double t0, double t1, OdeState<N> y,
                             const StepControl& control, Observer&& observer) {
    if (!(t1 > t0)) {
        throw DomainError("integration interval must have t1 > t0");
    }
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    auto combine = [&](const OdeState<N>& base, double h, auto... terms) {
        OdeState<N> out = base;
        for (std::size_t i = 0; i < N; ++i) {
            double acc = 0.0;
            ((acc += terms.first * (*terms.second)[i]), ...);
            out[i] += h * acc;
        }
        return out;
    };
    using Term = std::pair<double, const OdeState<N>*>;

    double t = t0;
    OdeState<N> k1 = rhs(t, y);
    observer(t, y, k1);

    const double span = t1 - t0;
    double h = control.initial_step > 0.0 ? control.initial_step
                                          : std::min(control.max_step, span) * 0.1;
    h = std::min({h, control.max_step, span});

    std::size_t steps = 0;
    while (t < t1) {
        if (++steps > control.max_steps) {
            throw NumericalError("integrator exceeded the step budget");
        }
        bool last = false;
        if (t + h >= t1 || t1 - (t + h) < 1e-12 * std::abs(t1)) {
            h = t1 - t;
            last = true;
        }
        const OdeState<N> k2 = rhs(t + c2 * h, combine(y, h, Term{a21, &k1}));
        const OdeState<N> k3 = rhs(t + c3 * h, combine(y, h, Term{a31, &k1}, Term{a32, &k2}));
        const OdeState<N> k4 =
            rhs(t + c4 * h, combine(y, h, Term{a41, &k1}, Term{a42, &k2}, Term{a43, &k3}));
        const OdeState<N> k5 = rhs(t + c5 * h, combine(y, h, Term{a51, &k1}, Term{a52, &k2},
                                                       Term{a53, &k3}, Term{a54, &k4}));
        const OdeState<N> k6 = rhs(t + h, combine(y, h, Term{a61, &k1}, Term{a62, &k2},
                                                  Term{a63, &k3}, Term{a64, &k4}, Term{a65, &k5}));
        const OdeState<N> y_new = combine(y, h, Term{a71, &k1}, Term{a73, &k3}, Term{a74, &k4},
                                          Term{a75, &k5}, Term{a76, &k6});
        const double t_new = last ? t1 : t + h;
        const OdeState<N> k7 = rhs(t_new, y_new);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                  e6 * k6[i] + e7 * k7[i]);
            const double scale =
                control.abs_tol + control.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err += (e / scale) * (e / scale);
        }
        err = std::sqrt(err / static_cast<double>(N));

        if (!std::isfinite(err)) {
            throw NumericalError("integrator produced a non-finite state at t = " +
                                 std::to_string(t));
        }
        if (err <= 1.0) {
            t = t_new;
            y = y_new;
            k1 = k7;
            observer(t, y, k1);
            const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = std::min(h * factor, control.max_step);
        } else {
            h *= std::max(0.9 * std::pow(err, -0.2), 0.1);
            if (h < 1e-14 * std::max(1.0, std::abs(t))) {
                throw NumericalError("step size underflow at t = " + std::to_string(t) +
                                     "; step control did not converge");
            }
        }
    }
    return y;
}

} // namespace pulse_atom

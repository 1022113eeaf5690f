#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pulse_atom/errors.hpp"

namespace pulse_atom {

namespace detail {

constexpr int kMaxGammaIterations = 100000;
constexpr double kGammaEps = std::numeric_limits<double>::epsilon();

// Series for the lower incomplete gamma, returned without the x^a e^{-x} prefactor.
inline double lower_gamma_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxGammaIterations; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaEps) {
            return sum;
        }
    }
    throw NumericalError("incomplete gamma series did not converge");
}

// Modified Lentz evaluation of the Legendre continued fraction for Gamma(a,x),
// returned without the x^a e^{-x} prefactor. Converges quickly for x >= a + 1.
inline double upper_gamma_fraction(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxGammaIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kGammaEps) {
            return h;
        }
    }
    throw NumericalError("incomplete gamma continued fraction did not converge");
}

// e^x E1(x) for x < 1 from the alternating power series.
inline double scaled_exp_integral_series(double x) {
    constexpr double euler_gamma = std::numbers::egamma;
    double sum = 0.0;
    double term = 1.0;
    for (int n = 1; n < kMaxGammaIterations; ++n) {
        term *= -x / n;
        const double contrib = -term / n;
        sum += contrib;
        if (std::abs(contrib) < std::abs(sum) * kGammaEps) {
            break;
        }
    }
    return std::exp(x) * (-euler_gamma - std::log(x) + sum);
}

inline void check_gamma_arguments(double a, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("incomplete gamma requires x > 0, got " + std::to_string(x));
    }
    if (!(a > -1.0) || !std::isfinite(a)) {
        throw UnsupportedParameter("incomplete gamma implemented for a > -1 only, got a = " +
                                   std::to_string(a));
    }
}

} // namespace detail

/// e^x * Gamma(a, x), the upper incomplete gamma function with its leading
/// exponential removed. Stays finite where Gamma(a, x) itself underflows.
///
/// Positive a uses the series (x < a + 1) or the continued fraction; a = 0 is
/// the exponential integral; a in (-1, 0) goes through the upward recurrence
/// Gamma(a+1, x) = a Gamma(a, x) + x^a e^{-x}.
inline double upper_incomplete_gamma_scaled(double a, double x) {
    detail::check_gamma_arguments(a, x);
    if (a < 0.0) {
        return (upper_incomplete_gamma_scaled(a + 1.0, x) - std::pow(x, a)) / a;
    }
    if (a == 0.0) {
        return x < 1.0 ? detail::scaled_exp_integral_series(x) : detail::upper_gamma_fraction(0.0, x);
    }
    if (x < a + 1.0) {
        return std::exp(x) * std::tgamma(a) - std::pow(x, a) * detail::lower_gamma_series(a, x);
    }
    return std::pow(x, a) * detail::upper_gamma_fraction(a, x);
}

/// Upper incomplete gamma function Gamma(a, x) = int_x^inf t^{a-1} e^{-t} dt
/// for x > 0 and a > -1.
inline double upper_incomplete_gamma(double a, double x) {
    detail::check_gamma_arguments(a, x);
    if (a < 0.0) {
        return (upper_incomplete_gamma(a + 1.0, x) - std::exp(a * std::log(x) - x)) / a;
    }
    if (a == 0.0) {
        return x < 1.0 ? std::exp(-x) * detail::scaled_exp_integral_series(x)
                       : std::exp(-x) * detail::upper_gamma_fraction(0.0, x);
    }
    const double prefactor = std::exp(a * std::log(x) - x);
    if (x < a + 1.0) {
        return std::tgamma(a) - prefactor * detail::lower_gamma_series(a, x);
    }
    return prefactor * detail::upper_gamma_fraction(a, x);
}

} // namespace pulse_atom

#pragma once

#include <cmath>
#include <string>

#include "pulse_atom/errors.hpp"
#include "pulse_atom/special_functions.hpp"

namespace pulse_atom {

/// Gaussian input beam focused by a lens. Focusing strength u = w_L / f.
class FocusingGeometry {
public:
    static FocusingGeometry from_strength(double u) {
        if (!(u > 0.0) || !std::isfinite(u)) {
            throw DomainError("focusing strength u must be > 0, got " + std::to_string(u));
        }
        return FocusingGeometry(0.0, 0.0, u);
    }

    static FocusingGeometry from_beam(double waist_mm, double focal_mm) {
        if (!(waist_mm > 0.0) || !(focal_mm > 0.0)) {
            throw DomainError("beam waist and focal length must be > 0");
        }
        return FocusingGeometry(waist_mm, focal_mm, waist_mm / focal_mm);
    }

    // Zero when the geometry was built from u alone.
    double input_waist_mm() const noexcept { return waist_mm_; }
    double focal_length_mm() const noexcept { return focal_mm_; }
    double focusing_strength() const noexcept { return u_; }

private:
    FocusingGeometry(double waist_mm, double focal_mm, double u)
        : waist_mm_(waist_mm), focal_mm_(focal_mm), u_(u) {}

    double waist_mm_;
    double focal_mm_;
    double u_;
};

struct OverlapResult {
    double eta_p = 0.0;
    double scattering_ratio = 0.0; // R_sc = 4 eta_p
};

/// Largest focusing strength accepted by overlap_from_focusing.
inline constexpr double kMaxFocusingStrength = 2.0;

/// Spatial overlap between a focused Gaussian mode and the dipole emission
/// pattern:
///   eta_p = 3/(16 u^3) e^{2/u^2} [Gamma(-1/4, 1/u^2) + u Gamma(1/4, 1/u^2)]^2.
/// Evaluated with the scaled incomplete gamma so the e^{2/u^2} factor never
/// overflows at weak focusing.
inline OverlapResult overlap_from_focusing(const FocusingGeometry& geom) {
    const double u = geom.focusing_strength();
    if (!(u > 0.0)) {
        throw DomainError("focusing strength u must be > 0");
    }
    if (u > kMaxFocusingStrength) {
        throw DomainError("focusing strength u = " + std::to_string(u) +
                          " outside the supported window 0 < u <= 2");
    }
    const double x = 1.0 / (u * u);
    const double bracket = upper_incomplete_gamma_scaled(-0.25, x) +
                           u * upper_incomplete_gamma_scaled(0.25, x);
    OverlapResult r;
    r.eta_p = 3.0 / (16.0 * u * u * u) * bracket * bracket;
    r.scattering_ratio = 4.0 * r.eta_p;
    return r;
}

} // namespace pulse_atom

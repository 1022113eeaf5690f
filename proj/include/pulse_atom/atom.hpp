#pragma once

#include <cmath>
#include <string>

#include "pulse_atom/errors.hpp"
#include "pulse_atom/pulse.hpp"

namespace pulse_atom {

/// Excited-state lifetime of the Rb D2 line, ns.
inline constexpr double kDefaultLifetimeNs = 26.24;
inline constexpr double kDefaultEtaP = 0.03;

/// Two-level atom. Rates are in 1/ns, detuning in rad/ns.
struct AtomParams {
    double gamma = 1.0 / kDefaultLifetimeNs;
    double eta_p = kDefaultEtaP;
    double detuning = 0.0;
    // Test mode: when false the equations of motion drop spontaneous decay
    // while gamma_p (and so the coupling) keeps its value.
    bool decay_enabled = true;

    static AtomParams from_lifetime(double lifetime_ns, double eta_p, double detuning = 0.0) {
        if (!(lifetime_ns > 0.0)) {
            throw DomainError("lifetime must be > 0, got " + std::to_string(lifetime_ns));
        }
        AtomParams atom{1.0 / lifetime_ns, eta_p, detuning, true};
        atom.validate();
        return atom;
    }

    /// Decay rate into the excitation mode, eta_p * gamma.
    double gamma_p() const noexcept { return eta_p * gamma; }
    double lifetime() const noexcept { return 1.0 / gamma; }
    /// Decay rate that enters the equations of motion.
    double effective_gamma() const noexcept { return decay_enabled ? gamma : 0.0; }

    AtomParams without_decay() const {
        AtomParams copy = *this;
        copy.decay_enabled = false;
        return copy;
    }

    void validate() const {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) {
            throw DomainError("decay rate gamma must be > 0");
        }
        if (!(eta_p > 0.0 && eta_p <= 1.0)) {
            throw DomainError("overlap eta_p must lie in (0, 1], got " + std::to_string(eta_p));
        }
        if (!std::isfinite(detuning)) {
            throw DomainError("detuning must be finite");
        }
    }
};

/// Dynamical coupling g(t) = sqrt(gamma_p <N>) xi(t), in 1/ns.
inline double coupling(const PulseSpec& spec, const AtomParams& atom, double t) {
    return std::sqrt(atom.gamma_p() * spec.mean_photons()) * spec.envelope(t);
}

} // namespace pulse_atom

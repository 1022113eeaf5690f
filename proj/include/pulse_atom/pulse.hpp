#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "pulse_atom/errors.hpp"

namespace pulse_atom {

enum class PulseShape { RisingExponential, Square, Tabulated };

inline std::string_view to_string(PulseShape shape) {
    switch (shape) {
    case PulseShape::RisingExponential: return "exp";
    case PulseShape::Square: return "square";
    case PulseShape::Tabulated: return "tabulated";
    }
    return "?";
}

inline PulseShape parse_pulse_shape(std::string_view name) {
    if (name == "exp" || name == "exponential" || name == "rising_exponential") {
        return PulseShape::RisingExponential;
    }
    if (name == "square") return PulseShape::Square;
    if (name == "tabulated") return PulseShape::Tabulated;
    throw DomainError("unknown pulse shape '" + std::string(name) + "'");
}

/// The exponential envelope is cut off this many time constants before its
/// edge; the discarded part carries e^{-10} of the pulse energy.
inline constexpr double kExponentialTruncation = 10.0;

struct EnvelopeSample {
    double t_ns = 0.0;
    double amplitude = 0.0;
};

/// Temporal mode of a coherent pulse. The envelope xi(t) is normalized to
/// int xi^2 dt = 1 and the pulse ends at edge() (t = 0 unless shifted).
class PulseSpec {
public:
    static PulseSpec rising_exponential(double tau_ns, double mean_photons, double edge_ns = 0.0) {
        return PulseSpec(PulseShape::RisingExponential, tau_ns, mean_photons, edge_ns);
    }

    static PulseSpec square(double tau_ns, double mean_photons, double edge_ns = 0.0) {
        return PulseSpec(PulseShape::Square, tau_ns, mean_photons, edge_ns);
    }

    static PulseSpec analytic(PulseShape shape, double tau_ns, double mean_photons,
                              double edge_ns = 0.0) {
        if (shape == PulseShape::Tabulated) {
            throw DomainError("tabulated pulses need samples");
        }
        return PulseSpec(shape, tau_ns, mean_photons, edge_ns);
    }

    /// Piecewise-linear amplitude through the samples, zero outside them,
    /// rescaled to unit energy.
    static PulseSpec tabulated(std::vector<EnvelopeSample> samples, double mean_photons) {
        if (samples.size() < 2) {
            throw DomainError("tabulated envelope needs at least two samples");
        }
        for (std::size_t i = 1; i < samples.size(); ++i) {
            if (!(samples[i].t_ns > samples[i - 1].t_ns)) {
                throw DomainError("tabulated envelope times must be strictly increasing");
            }
        }
        PulseSpec spec(PulseShape::Tabulated, samples.back().t_ns - samples.front().t_ns,
                       mean_photons, samples.back().t_ns);
        spec.samples_ = std::move(samples);
        spec.normalize_samples();
        return spec;
    }

    PulseShape shape() const noexcept { return shape_; }
    double tau() const noexcept { return tau_; }
    double mean_photons() const noexcept { return mean_photons_; }
    double edge() const noexcept { return edge_; }
    const std::vector<EnvelopeSample>& samples() const noexcept { return samples_; }

    /// First time with non-zero drive (after truncation for the exponential).
    double start() const noexcept {
        switch (shape_) {
        case PulseShape::RisingExponential: return edge_ - kExponentialTruncation * tau_;
        case PulseShape::Square: return edge_ - tau_;
        case PulseShape::Tabulated: return samples_.front().t_ns;
        }
        return edge_;
    }

    /// Times where the envelope or its slope is discontinuous.
    std::vector<double> breakpoints() const {
        switch (shape_) {
        case PulseShape::RisingExponential: return {edge_};
        case PulseShape::Square: return {edge_ - tau_, edge_};
        case PulseShape::Tabulated: {
            std::vector<double> out;
            out.reserve(samples_.size());
            for (const auto& s : samples_) out.push_back(s.t_ns);
            return out;
        }
        }
        return {};
    }

    PulseSpec with_mean_photons(double mean_photons) const {
        PulseSpec copy = *this;
        copy.mean_photons_ = mean_photons;
        copy.validate();
        return copy;
    }

    PulseSpec shifted(double offset_ns) const {
        PulseSpec copy = *this;
        copy.edge_ += offset_ns;
        for (auto& s : copy.samples_) s.t_ns += offset_ns;
        return copy;
    }

    /// xi(t) in ns^{-1/2}.
    double envelope(double t) const {
        switch (shape_) {
        case PulseShape::RisingExponential:
            return t <= edge_ ? std::exp((t - edge_) / (2.0 * tau_)) / std::sqrt(tau_) : 0.0;
        case PulseShape::Square:
            return (t >= edge_ - tau_ && t <= edge_) ? 1.0 / std::sqrt(tau_) : 0.0;
        case PulseShape::Tabulated: return tabulated_envelope(t);
        }
        return 0.0;
    }

    /// int_{-inf}^{t} xi(t')^2 dt'.
    double cumulative_intensity(double t) const {
        switch (shape_) {
        case PulseShape::RisingExponential:
            return t <= edge_ ? std::exp((t - edge_) / tau_) : 1.0;
        case PulseShape::Square:
            return std::clamp((t - (edge_ - tau_)) / tau_, 0.0, 1.0);
        case PulseShape::Tabulated: return tabulated_cumulative(t);
        }
        return 0.0;
    }

private:
    PulseSpec(PulseShape shape, double tau, double mean_photons, double edge)
        : shape_(shape), tau_(tau), mean_photons_(mean_photons), edge_(edge) {
        validate();
    }

    void validate() const {
        if (!(tau_ > 0.0) || !std::isfinite(tau_)) {
            throw DomainError("pulse duration tau must be > 0, got " + std::to_string(tau_));
        }
        if (!(mean_photons_ >= 0.0) || !std::isfinite(mean_photons_)) {
            throw DomainError("mean photon number must be >= 0, got " +
                              std::to_string(mean_photons_));
        }
    }

    static double segment_energy(double a0, double a1, double h, double frac) {
        const double da = a1 - a0;
        return h * (a0 * a0 * frac + a0 * da * frac * frac + da * da * frac * frac * frac / 3.0);
    }

    void normalize_samples() {
        double energy = 0.0;
        for (std::size_t i = 1; i < samples_.size(); ++i) {
            energy += segment_energy(samples_[i - 1].amplitude, samples_[i].amplitude,
                                     samples_[i].t_ns - samples_[i - 1].t_ns, 1.0);
        }
        if (!(energy > 0.0)) {
            throw DomainError("tabulated envelope has zero energy");
        }
        const double scale = 1.0 / std::sqrt(energy);
        for (auto& s : samples_) s.amplitude *= scale;
        prefix_energy_.assign(samples_.size(), 0.0);
        for (std::size_t i = 1; i < samples_.size(); ++i) {
            prefix_energy_[i] = prefix_energy_[i - 1] +
                                segment_energy(samples_[i - 1].amplitude, samples_[i].amplitude,
                                               samples_[i].t_ns - samples_[i - 1].t_ns, 1.0);
        }
    }

    std::size_t segment_index(double t) const {
        auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                   [](double v, const EnvelopeSample& s) { return v < s.t_ns; });
        return static_cast<std::size_t>(it - samples_.begin()) - 1;
    }

    double tabulated_envelope(double t) const {
        if (t < samples_.front().t_ns || t > samples_.back().t_ns) return 0.0;
        if (t == samples_.back().t_ns) return samples_.back().amplitude;
        const std::size_t i = segment_index(t);
        const auto& a = samples_[i];
        const auto& b = samples_[i + 1];
        const double frac = (t - a.t_ns) / (b.t_ns - a.t_ns);
        return a.amplitude + frac * (b.amplitude - a.amplitude);
    }

    double tabulated_cumulative(double t) const {
        if (t <= samples_.front().t_ns) return 0.0;
        if (t >= samples_.back().t_ns) return prefix_energy_.back();
        const std::size_t i = segment_index(t);
        const auto& a = samples_[i];
        const auto& b = samples_[i + 1];
        const double h = b.t_ns - a.t_ns;
        return prefix_energy_[i] + segment_energy(a.amplitude, b.amplitude, h, (t - a.t_ns) / h);
    }

    PulseShape shape_;
    double tau_;
    double mean_photons_;
    double edge_;
    std::vector<EnvelopeSample> samples_;
    std::vector<double> prefix_energy_;
};

/// Normalized envelope xi(t); see PulseSpec::envelope.
inline double envelope_value(const PulseSpec& spec, double t) { return spec.envelope(t); }

} // namespace pulse_atom

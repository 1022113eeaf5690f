#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pulse_atom/atom.hpp"
#include "pulse_atom/errors.hpp"
#include "pulse_atom/parallel.hpp"
#include "pulse_atom/pulse.hpp"
#include "pulse_atom/random.hpp"
#include "pulse_atom/trajectory.hpp"

namespace pulse_atom {

enum class Channel : std::uint8_t {
    Backward = 0, // fluorescence detector (APD1)
    Forward = 1,  // transmitted-pulse detector (APD2)
};

inline std::string to_string(Channel c) { return c == Channel::Backward ? "backward" : "forward"; }

/// Timestamp resolution: times are stored as integer multiples of 1/16 ns.
inline constexpr int kTicksPerNs = 16;

struct TimestampRecord {
    std::uint64_t pulse_index = 0;
    Channel channel = Channel::Backward;
    std::int32_t ticks = 0; // detection time relative to the pulse edge

    double t_ns() const noexcept { return static_cast<double>(ticks) / kTicksPerNs; }

    bool operator==(const TimestampRecord&) const = default;
};

inline std::int32_t to_ticks(double t_ns) {
    const double ticks = std::floor(t_ns * kTicksPerNs);
    if (!(ticks >= std::numeric_limits<std::int32_t>::min() &&
          ticks <= std::numeric_limits<std::int32_t>::max())) {
        throw DomainError("detection time " + std::to_string(t_ns) + " ns out of timestamp range");
    }
    return static_cast<std::int32_t>(ticks);
}

struct DetectionSetup {
    double eta_r = 0.30;
    double eta_l = 0.30;
    double eta_l_uncertainty = 0.02;
    double nd2_db = -43.0;
    double dead_time_ns = 3000.0;
    double bin_width_ns = 1.0;
    double pulse_period_ns = 12000.0;
    std::uint64_t n_pulses = 1'000'000;
    std::uint64_t seed = 1;
    double dark_rate_per_ns = 0.0;

    /// Transmission of ND2, 10^{dB/10}.
    double nd2_transmission() const { return std::pow(10.0, nd2_db / 10.0); }

    void validate() const {
        if (!(eta_r >= 0.0 && eta_r <= 1.0)) throw DomainError("eta_r must lie in [0, 1]");
        if (!(eta_l >= 0.0 && eta_l <= 1.0)) throw DomainError("eta_l must lie in [0, 1]");
        if (!(eta_l_uncertainty >= 0.0)) throw DomainError("eta_l uncertainty must be >= 0");
        if (!(nd2_db <= 0.0)) throw DomainError("nd2_db is an attenuation and must be <= 0");
        if (!(dead_time_ns >= 0.0)) throw DomainError("dead time must be >= 0");
        if (!(bin_width_ns > 0.0)) throw DomainError("bin width must be > 0");
        if (!(pulse_period_ns > 0.0)) throw DomainError("pulse period must be > 0");
        if (!(dark_rate_per_ns >= 0.0)) throw DomainError("dark count rate must be >= 0");
    }
};

struct DetectionRun {
    std::vector<TimestampRecord> records;
    std::uint64_t raw_events = 0;          // before dead time
    std::uint64_t dead_time_suppressed = 0;
    double expected_events_per_pulse = 0.0; // without dead time
    std::vector<std::string> warnings;
};

/// Independent Bernoulli trials on consecutive bins of equal width, stored
/// as cumulative hazards H_k = sum_{j<k} -ln(1 - p_j).
class BinnedHazard {
public:
    BinnedHazard(double t0, double width, const std::vector<double>& hazards)
        : t0_(t0), width_(width), cumulative_(hazards.size() + 1, 0.0) {
        for (std::size_t i = 0; i < hazards.size(); ++i) {
            cumulative_[i + 1] = cumulative_[i] + hazards[i];
        }
    }

    double total() const { return cumulative_.back(); }

    /// Expected number of events, sum of p_k.
    double expected_events() const {
        double sum = 0.0;
        for (std::size_t i = 1; i < cumulative_.size(); ++i) {
            sum += -std::expm1(-(cumulative_[i] - cumulative_[i - 1]));
        }
        return sum;
    }

    /// Appends the events of one trial sequence; times uniform within the bin.
    template <class Out>
    void sample(SubstreamRng& rng, Out&& emit) const {
        double level = 0.0;
        while (true) {
            level += rng.exponential();
            if (level >= total()) return;
            const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), level);
            const auto k = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
            emit(t0_ + (static_cast<double>(k) + rng.uniform()) * width_);
            level = cumulative_[k + 1];
        }
    }

private:
    double t0_;
    double width_;
    std::vector<double> cumulative_;
};

namespace detail {

inline DetectionRun generate(const BinnedHazard& hazard, Channel channel,
                             const DetectionSetup& setup, unsigned threads) {
    DetectionRun run;
    run.expected_events_per_pulse = hazard.expected_events();
    if (hazard.total() <= 0.0 || setup.n_pulses == 0) return run;

    const std::size_t n = setup.n_pulses;
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(n, 64));
    std::vector<std::vector<TimestampRecord>> parts(chunks);
    const std::size_t per_chunk = (n + chunks - 1) / chunks;
    parallel_chunks(
        chunks,
        [&](std::size_t cb, std::size_t ce) {
            for (std::size_t c = cb; c < ce; ++c) {
                const std::uint64_t begin = c * per_chunk;
                const std::uint64_t end = std::min<std::uint64_t>(n, begin + per_chunk);
                auto& out = parts[c];
                for (std::uint64_t pulse = begin; pulse < end; ++pulse) {
                    SubstreamRng rng(setup.seed, pulse, static_cast<std::uint64_t>(channel));
                    hazard.sample(rng, [&](double t) {
                        out.push_back({pulse, channel, to_ticks(t)});
                    });
                }
            }
        },
        threads);

    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    run.records.reserve(total);
    for (auto& p : parts) run.records.insert(run.records.end(), p.begin(), p.end());
    run.raw_events = run.records.size();
    return run;
}

} // namespace detail

/// Removes events closer than `dead_time_ns` to the previous kept event of the
/// same channel. Absolute time is pulse_index * period + t, so dead time
/// carries across pulses. Records must be ordered by (pulse, time).
inline std::uint64_t apply_dead_time(std::vector<TimestampRecord>& records, double dead_time_ns,
                                     double pulse_period_ns) {
    if (dead_time_ns <= 0.0) return 0;
    const std::size_t before = records.size();
    double last[2] = {-std::numeric_limits<double>::infinity(),
                      -std::numeric_limits<double>::infinity()};
    std::size_t kept = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const double t = static_cast<double>(r.pulse_index) * pulse_period_ns + r.t_ns();
        double& previous = last[static_cast<int>(r.channel)];
        if (t - previous >= dead_time_ns) {
            previous = t;
            records[kept++] = r;
        }
    }
    records.resize(kept);
    return before - kept;
}

/// Backward-channel photodetections for an atom following `traj` on every
/// pulse. Each bin of width dt fires with probability
///   p = mean P_e over the bin * Gamma_p * dt * eta_r,
/// the time is uniform inside the bin, then dead time is applied.
inline DetectionRun simulate_backward(const Trajectory& traj, const AtomParams& atom,
                                      const DetectionSetup& setup,
                                      unsigned threads = default_thread_count()) {
    atom.validate();
    setup.validate();
    const double edge = traj.pulse_end();
    if (atom.decay_enabled && traj.t_end() - edge < 5.0 * atom.lifetime() * (1.0 - 1e-12)) {
        throw DomainError("trajectory must extend at least 5 lifetimes past the pulse edge");
    }
    if (traj.t_end() - traj.t_begin() >= setup.pulse_period_ns) {
        throw DomainError("pulse period must exceed the simulated window");
    }

    const double w = setup.bin_width_ns;
    const auto first = static_cast<std::int64_t>(std::ceil((traj.t_begin() - edge) / w - 1e-9));
    const auto last = static_cast<std::int64_t>(std::floor((traj.t_end() - edge) / w + 1e-9));
    std::vector<double> hazards;
    hazards.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, last - first)));
    const double scale = atom.gamma_p() * w * setup.eta_r;
    for (std::int64_t k = first; k < last; ++k) {
        const double a = std::max(edge + static_cast<double>(k) * w, traj.t_begin());
        const double b = std::min(edge + static_cast<double>(k + 1) * w, traj.t_end());
        const double p = std::max(0.0, traj.mean_p_e(a, b)) * scale;
        if (p > 0.1) {
            throw DomainError("bin detection probability " + std::to_string(p) +
                              " exceeds 0.1; bin width too coarse");
        }
        hazards.push_back(-std::log1p(-p) + setup.dark_rate_per_ns * w);
    }
    const BinnedHazard hazard(static_cast<double>(first) * w, w, hazards);
    DetectionRun run = detail::generate(hazard, Channel::Backward, setup, threads);
    run.dead_time_suppressed = apply_dead_time(run.records, setup.dead_time_ns, setup.pulse_period_ns);
    return run;
}

/// Forward-channel detections of the transmitted pulse with no atom present.
/// The coherent state gives Poisson photocounts with mean
///   mu = <N> eta_l 10^{nd2/10},
/// distributed in time as xi(t)^2; each 1/16 ns tick is one Bernoulli trial
/// with hazard mu * int_tick xi^2. The per-pulse detection probability is
/// r_d = 1 - exp(-mu) <= mu.
inline DetectionRun simulate_forward(const PulseSpec& spec, const DetectionSetup& setup,
                                     unsigned threads = default_thread_count()) {
    setup.validate();
    const double mu = spec.mean_photons() * setup.eta_l * setup.nd2_transmission();
    const double edge = spec.edge();
    const double begin = spec.shape() == PulseShape::RisingExponential
                             ? edge - 40.0 * spec.tau()
                             : spec.start();
    if (edge - begin >= setup.pulse_period_ns) {
        throw DomainError("pulse period must exceed the pulse duration");
    }
    constexpr double tick = 1.0 / kTicksPerNs;
    // Every envelope ends at its edge, so the last tick is [edge - tick, edge).
    const auto first = static_cast<std::int64_t>(std::floor((begin - edge) / tick));
    const std::int64_t last = -1;
    std::vector<double> hazards;
    hazards.reserve(static_cast<std::size_t>(last - first + 1));
    for (std::int64_t k = first; k <= last; ++k) {
        const double a = edge + static_cast<double>(k) * tick;
        const double energy = spec.cumulative_intensity(a + tick) - spec.cumulative_intensity(a);
        hazards.push_back(mu * std::max(0.0, energy) + setup.dark_rate_per_ns * tick);
    }
    const BinnedHazard hazard(static_cast<double>(first) * tick, tick, hazards);
    DetectionRun run = detail::generate(hazard, Channel::Forward, setup, threads);
    const double r_d = -std::expm1(-mu);
    if (r_d > 0.01) {
        run.warnings.push_back("expected detection fraction r_d = " + std::to_string(r_d) +
                               " exceeds 1%; dead-time bias expected");
    }
    run.dead_time_suppressed = apply_dead_time(run.records, setup.dead_time_ns, setup.pulse_period_ns);
    return run;
}

} // namespace pulse_atom

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pulse_atom/atom.hpp"
#include "pulse_atom/dynamics.hpp"
#include "pulse_atom/errors.hpp"
#include "pulse_atom/parallel.hpp"
#include "pulse_atom/pulse.hpp"

namespace pulse_atom {

/// Thrown by optimal_tau when the coarse scan peaks at a bracket end.
class NoInteriorMaximum : public NumericalError {
public:
    using NumericalError::NumericalError;
};

struct SolverSettings {
    double dt_max = 0.1;
    // Simulated window after the pulse edge, in excited-state lifetimes.
    double lifetimes_after = 3.0;
    BlochOptions bloch{};
};

inline Trajectory simulate_pulse(const PulseSpec& spec, const AtomParams& atom,
                                 const SolverSettings& settings = {}) {
    const double after = atom.decay_enabled ? settings.lifetimes_after * atom.lifetime()
                                            : settings.lifetimes_after * spec.tau();
    return solve_bloch(spec, atom, TimeGrid{spec.start(), spec.edge() + after, settings.dt_max},
                       settings.bloch);
}

struct SweepGrid {
    std::vector<double> nbar_values;
    std::vector<double> tau_values;
    PulseShape shape = PulseShape::RisingExponential;
    AtomParams atom{};

    void validate() const {
        if (nbar_values.empty() || tau_values.empty()) {
            throw DomainError("sweep grid lists must be non-empty");
        }
        for (double n : nbar_values) {
            if (!(n >= 0.0)) throw DomainError("sweep photon numbers must be >= 0");
        }
        for (double t : tau_values) {
            if (!(t > 0.0)) throw DomainError("sweep durations must be > 0");
        }
        if (shape == PulseShape::Tabulated) {
            throw DomainError("sweeps run over analytic envelopes only");
        }
        atom.validate();
    }
};

struct SweepRow {
    PulseShape shape = PulseShape::RisingExponential;
    double tau_ns = 0.0;
    double nbar = 0.0;
    double pe_max = 0.0;
    double t_of_max_ns = 0.0;
};

struct SweepFailure {
    double tau_ns = 0.0;
    double nbar = 0.0;
    std::string message;
};

struct SweepProvenance {
    double rel_tol = 0.0;
    double abs_tol = 0.0;
    double dt_max = 0.0;
    double lifetimes_after = 0.0;
    double gamma = 0.0;
    double eta_p = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepFailure> failures;
    SweepProvenance provenance;
};

/// Photon numbers log-spaced over [lo, hi].
inline std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0 && hi > lo) || count < 2) {
        throw DomainError("log_spaced needs 0 < lo < hi and count >= 2");
    }
    std::vector<double> out(count);
    const double step = std::log(hi / lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = lo * std::exp(step * static_cast<double>(i));
    }
    out.back() = hi;
    return out;
}

inline std::vector<double> default_sweep_taus() { return {5.0, 15.0, 25.0, 60.0, 150.0}; }
inline std::vector<double> default_sweep_nbars(std::size_t count = 41) {
    return log_spaced(0.1, 2000.0, count);
}

namespace detail {

// After the edge the drive is off and P_e can only decay.
inline void check_post_pulse_decay(const Trajectory& traj) {
    const auto t = traj.times();
    const auto p = traj.p_e();
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i - 1] >= traj.pulse_end() && p[i] > p[i - 1] + 1e-9) {
            throw NumericalError("excited population grows after the pulse edge at t = " +
                                 std::to_string(t[i]));
        }
    }
}

} // namespace detail

/// P_e,max over the simulated window for every (tau, <N>) cell. Cells run in
/// parallel; rows come back sorted by (tau, <N>). A failing cell is reported
/// in `failures` and does not stop the others.
inline SweepResult sweep_pe_max(const SweepGrid& grid, const SolverSettings& settings = {},
                                unsigned threads = default_thread_count()) {
    grid.validate();
    std::vector<std::pair<double, double>> cells;
    for (double tau : grid.tau_values) {
        for (double nbar : grid.nbar_values) cells.emplace_back(tau, nbar);
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

    struct Outcome {
        bool ok = false;
        SweepRow row;
        std::string error;
    };
    std::vector<Outcome> outcomes(cells.size());
    parallel_chunks(
        cells.size(),
        [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const auto [tau, nbar] = cells[i];
                try {
                    const auto spec = PulseSpec::analytic(grid.shape, tau, nbar);
                    const Trajectory traj = simulate_pulse(spec, grid.atom, settings);
                    detail::check_post_pulse_decay(traj);
                    if (traj.p_e_max() < -1e-9 || traj.p_e_max() > 1.0 + 1e-9) {
                        throw NumericalError("P_e,max outside [0, 1]");
                    }
                    outcomes[i] = {true, {grid.shape, tau, nbar, traj.p_e_max(), traj.t_of_max()},
                                   {}};
                } catch (const Error& e) {
                    outcomes[i] = {false, {grid.shape, tau, nbar, 0.0, 0.0}, e.what()};
                }
            }
        },
        threads);

    SweepResult result;
    result.provenance = {settings.bloch.rel_tol, settings.bloch.abs_tol, settings.dt_max,
                         settings.lifetimes_after, grid.atom.gamma, grid.atom.eta_p};
    for (const auto& o : outcomes) {
        if (o.ok) {
            result.rows.push_back(o.row);
        } else {
            result.failures.push_back({o.row.tau_ns, o.row.nbar, o.error});
        }
    }
    return result;
}

enum class TauObjective {
    PeakProbability,  // P_e,max over the whole window
    FinalProbability, // P_e at the pulse edge
};

struct OptimizeSettings {
    std::size_t coarse_points = 16;
    double tau_tolerance = 0.5; // ns, half-width of the final bracket
    TauObjective objective = TauObjective::PeakProbability;
    SolverSettings solver{};
};

struct OptimalTau {
    double tau_star = 0.0;
    double pe_max = 0.0; // objective value at tau_star
    std::vector<std::pair<double, double>> coarse_scan;
    std::size_t evaluations = 0;
};

inline double tau_objective(PulseShape shape, double tau, double nbar, const AtomParams& atom,
                            const OptimizeSettings& settings) {
    const auto spec = PulseSpec::analytic(shape, tau, nbar);
    const Trajectory traj = simulate_pulse(spec, atom, settings.solver);
    return settings.objective == TauObjective::PeakProbability ? traj.p_e_max()
                                                               : traj.p_e_at(spec.edge());
}

/// Pulse duration maximizing the objective inside [lo, hi]: a geometric
/// coarse scan picks the best interior point, then golden-section search
/// narrows the neighbouring interval to +-tau_tolerance.
inline OptimalTau optimal_tau(PulseShape shape, double nbar, const AtomParams& atom,
                              std::pair<double, double> bracket,
                              const OptimizeSettings& settings = {}) {
    const auto [lo, hi] = bracket;
    if (!(lo > 0.0 && hi > lo)) {
        throw DomainError("tau bracket must satisfy 0 < lo < hi");
    }
    if (settings.coarse_points < 3) {
        throw DomainError("coarse scan needs at least 3 points");
    }
    OptimalTau out;
    auto evaluate = [&](double tau) {
        ++out.evaluations;
        return tau_objective(shape, tau, nbar, atom, settings);
    };

    const auto taus = log_spaced(lo, hi, settings.coarse_points);
    std::vector<double> values(taus.size());
    parallel_chunks(taus.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            values[i] = tau_objective(shape, taus[i], nbar, atom, settings);
        }
    });
    out.evaluations += taus.size();
    for (std::size_t i = 0; i < taus.size(); ++i) out.coarse_scan.emplace_back(taus[i], values[i]);

    const auto best = static_cast<std::size_t>(
        std::max_element(values.begin(), values.end()) - values.begin());
    if (best == 0 || best + 1 == taus.size()) {
        throw NoInteriorMaximum("coarse scan over [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "] ns has no interior maximum");
    }

    constexpr double inv_phi = 0.6180339887498949;
    double a = taus[best - 1];
    double b = taus[best + 1];
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = evaluate(c);
    double fd = evaluate(d);
    while ((b - a) / 2.0 > settings.tau_tolerance) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = evaluate(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = evaluate(d);
        }
    }
    out.tau_star = 0.5 * (a + b);
    out.pe_max = evaluate(out.tau_star);
    return out;
}

struct ShapeComparison {
    Trajectory first;
    Trajectory second;
    bool first_wins = false;
    double difference = 0.0; // first P_e,max - second P_e,max
};

inline ShapeComparison compare_pulses(const PulseSpec& first, const PulseSpec& second,
                                      const AtomParams& atom, const SolverSettings& settings = {}) {
    ShapeComparison out;
    out.first = simulate_pulse(first, atom, settings);
    out.second = simulate_pulse(second, atom, settings);
    out.difference = out.first.p_e_max() - out.second.p_e_max();
    out.first_wins = out.difference > 0.0;
    return out;
}

/// Exponential pulse vs square pulse, each at its own <N> and duration.
/// `first` is the exponential trajectory; `first_wins` says whether it
/// reaches the higher P_e,max.
inline ShapeComparison compare_shapes(double nbar_exp, double nbar_sq, double tau_exp,
                                      double tau_sq, const AtomParams& atom,
                                      const SolverSettings& settings = {}) {
    return compare_pulses(PulseSpec::rising_exponential(tau_exp, nbar_exp),
                          PulseSpec::square(tau_sq, nbar_sq), atom, settings);
}

} // namespace pulse_atom

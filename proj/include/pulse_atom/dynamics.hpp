#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pulse_atom/atom.hpp"
#include "pulse_atom/errors.hpp"
#include "pulse_atom/ode.hpp"
#include "pulse_atom/pulse.hpp"
#include "pulse_atom/trajectory.hpp"

namespace pulse_atom {

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    double dt_max = 0.1;

    void validate() const {
        if (!(t_start < t_end) || !std::isfinite(t_start) || !std::isfinite(t_end)) {
            throw DomainError("time grid needs t_start < t_end");
        }
        if (!(dt_max > 0.0)) {
            throw DomainError("dt_max must be > 0");
        }
    }
};

/// Grid from the start of the drive to `lifetimes_after` excited-state
/// lifetimes past the pulse edge.
inline TimeGrid default_grid(const PulseSpec& spec, const AtomParams& atom,
                             double lifetimes_after = 5.0, double dt_max = 0.1) {
    return TimeGrid{spec.start(), spec.edge() + lifetimes_after * atom.lifetime(), dt_max};
}

/// Bloch-vector state: excited population, in-phase and quadrature coherence.
struct BlochState {
    double p_e = 0.0;
    double coherence = 0.0;
    double quadrature = 0.0;
};

struct BlochOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    // Overrides the ground-state start, e.g. P_e = 1 for a free-decay run.
    std::optional<BlochState> initial;
};

namespace detail {

// Splits [a, b] at the pulse breakpoints lying strictly inside.
inline std::vector<double> segment_edges(const PulseSpec& spec, double a, double b) {
    std::vector<double> edges{a};
    auto bps = spec.breakpoints();
    std::sort(bps.begin(), bps.end());
    for (double bp : bps) {
        if (bp > a && bp < b && bp - edges.back() > 1e-12 * std::max(1.0, std::abs(bp))) {
            edges.push_back(bp);
        }
    }
    edges.push_back(b);
    return edges;
}

inline void check_start(const PulseSpec& spec, const TimeGrid& grid) {
    if (spec.mean_photons() > 0.0 && grid.t_start > spec.start() + 1e-9 * spec.tau()) {
        throw DomainError("t_start = " + std::to_string(grid.t_start) +
                          " lies after the start of the drive at " + std::to_string(spec.start()));
    }
}

} // namespace detail

/// Integrates the optical Bloch equations of a two-level atom driven by the
/// pulse, with Rabi frequency Omega(t) = 2 g(t):
///
///   dP/dt = -Gamma P + Omega s
///   ds/dt = Delta q - Gamma/2 s - Omega (P - 1/2)
///   dq/dt = -Delta s - Gamma/2 q
///
/// Each smooth piece of the envelope is integrated separately; the drive is
/// evaluated from inside the current piece so edges stay sharp.
inline Trajectory solve_bloch(const PulseSpec& spec, const AtomParams& atom, const TimeGrid& grid,
                              const BlochOptions& options = {}) {
    atom.validate();
    grid.validate();
    detail::check_start(spec, grid);

    const double gamma = atom.effective_gamma();
    const double delta = atom.detuning;
    const double drive = 2.0 * std::sqrt(atom.gamma_p() * spec.mean_photons());

    const BlochState init = options.initial.value_or(BlochState{});
    OdeState<3> y{init.p_e, init.coherence, init.quadrature};

    StepControl control;
    control.rel_tol = options.rel_tol;
    control.abs_tol = options.abs_tol;
    control.max_step = grid.dt_max;

    std::vector<Trajectory::Node> nodes;
    nodes.reserve(static_cast<std::size_t>((grid.t_end - grid.t_start) / grid.dt_max) + 16);

    const auto edges = detail::segment_edges(spec, grid.t_start, grid.t_end);
    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        const double a = edges[seg];
        const double b = edges[seg + 1];
        const double inner_lo = std::nextafter(a, b);
        const double inner_hi = std::nextafter(b, a);
        auto rhs = [&](double t, const OdeState<3>& s) {
            const double omega = drive * spec.envelope(std::clamp(t, inner_lo, inner_hi));
            return OdeState<3>{-gamma * s[0] + omega * s[1],
                               delta * s[2] - 0.5 * gamma * s[1] - omega * (s[0] - 0.5),
                               -delta * s[1] - 0.5 * gamma * s[2]};
        };
        bool first = true;
        auto observer = [&](double t, const OdeState<3>& s, const OdeState<3>& ds) {
            if (first && !nodes.empty()) {
                // Segment boundary: same state, slope from the new side.
                nodes.back().slope_right = ds[0];
            } else {
                nodes.push_back({t, s[0], s[1], s[2], ds[0], ds[0]});
            }
            first = false;
        };
        y = integrate_dopri5<3>(rhs, a, b, y, control, observer);
    }
    return Trajectory(std::move(nodes), spec.edge());
}

/// First-order perturbative solution, evaluated by direct quadrature
///   P(t) = | int_{t_start}^{t} g(t') exp(-Gamma/2 (t - t')) dt' |^2
/// on a uniform grid of spacing dt_max. Valid for 4 int g^2 dt << 1 and on
/// resonance; independent of the ODE integrator.
inline Trajectory weak_field_oracle(const PulseSpec& spec, const AtomParams& atom,
                                    const TimeGrid& grid) {
    atom.validate();
    grid.validate();
    detail::check_start(spec, grid);

    // 10-point Gauss-Legendre on [-1, 1].
    static constexpr std::array<double, 5> nodes_pos{0.1488743389816312, 0.4333953941292472,
                                                     0.6794095682990244, 0.8650633666889845,
                                                     0.9739065285171717};
    static constexpr std::array<double, 5> weights{0.2955242247147529, 0.2692667193099963,
                                                   0.2190863625659820, 0.1494513447677312,
                                                   0.0666713443012886};

    const double gamma = atom.effective_gamma();
    const double amp = std::sqrt(atom.gamma_p() * spec.mean_photons());

    std::vector<double> ts;
    const auto edges = detail::segment_edges(spec, grid.t_start, grid.t_end);
    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        const double a = edges[seg];
        const double b = edges[seg + 1];
        const auto n = static_cast<std::size_t>(std::ceil((b - a) / grid.dt_max));
        for (std::size_t k = 0; k < n; ++k) {
            ts.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(n));
        }
    }
    ts.push_back(grid.t_end);

    auto g_inside = [&](double t, double a, double b) {
        return amp * spec.envelope(std::clamp(t, std::nextafter(a, b), std::nextafter(b, a)));
    };

    std::vector<Trajectory::Node> out;
    out.reserve(ts.size());
    double s = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const double t = ts[k];
        if (k > 0) {
            const double a = ts[k - 1];
            const double half = 0.5 * (t - a);
            const double mid = 0.5 * (t + a);
            double acc = 0.0;
            for (std::size_t j = 0; j < nodes_pos.size(); ++j) {
                for (double sign : {-1.0, 1.0}) {
                    const double tp = mid + sign * half * nodes_pos[j];
                    acc += weights[j] * g_inside(tp, a, t) * std::exp(-0.5 * gamma * (t - tp));
                }
            }
            s = std::exp(-0.5 * gamma * (t - a)) * s + half * acc;
        }
        const double left = k > 0 ? ts[k - 1] : t;
        const double right = k + 1 < ts.size() ? ts[k + 1] : t;
        const double g_left = k > 0 ? g_inside(t, left, t) : amp * spec.envelope(t);
        const double g_right = k + 1 < ts.size() ? g_inside(t, t, right) : amp * spec.envelope(t);
        const double slope_left = 2.0 * s * (-0.5 * gamma * s + g_left);
        const double slope_right = 2.0 * s * (-0.5 * gamma * s + g_right);
        out.push_back({t, s * s, s, 0.0, slope_left, slope_right});
    }
    return Trajectory(std::move(out), spec.edge());
}

} // namespace pulse_atom

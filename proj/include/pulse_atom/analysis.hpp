#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pulse_atom/atom.hpp"
#include "pulse_atom/detection.hpp"
#include "pulse_atom/errors.hpp"

namespace pulse_atom {

struct Histogram {
    std::vector<double> bin_edges; // size = counts.size() + 1
    std::vector<std::uint64_t> counts;
    std::uint64_t n_pulses = 0;
    Channel channel = Channel::Backward;
    std::uint64_t dropped = 0; // events of this channel outside the range
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return counts.size(); }
    double bin_width() const { return bin_edges[1] - bin_edges[0]; }
    double bin_center(std::size_t i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }

    std::uint64_t total() const {
        std::uint64_t sum = 0;
        for (auto c : counts) sum += c;
        return sum;
    }
};

struct TimeRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Counts events of one channel in bins of `bin_width` starting at range.lo.
inline Histogram histogram(std::span<const TimestampRecord> stream, Channel channel, double bin_width,
                           TimeRange range, std::uint64_t n_pulses) {
    if (!(bin_width > 0.0)) throw DomainError("histogram bin width must be > 0");
    if (!(range.hi > range.lo)) throw DomainError("histogram range must have hi > lo");
    const auto n_bins = static_cast<std::size_t>(std::llround((range.hi - range.lo) / bin_width));
    if (n_bins == 0) throw DomainError("histogram range shorter than one bin");

    Histogram h;
    h.channel = channel;
    h.n_pulses = n_pulses;
    h.counts.assign(n_bins, 0);
    h.bin_edges.resize(n_bins + 1);
    for (std::size_t i = 0; i <= n_bins; ++i) {
        h.bin_edges[i] = range.lo + static_cast<double>(i) * bin_width;
    }
    const double hi = h.bin_edges.back();
    std::uint64_t seen = 0;
    for (const auto& r : stream) {
        if (r.channel != channel) continue;
        ++seen;
        const double t = r.t_ns();
        if (t < range.lo || t >= hi) {
            ++h.dropped;
            continue;
        }
        const auto bin = std::min(static_cast<std::size_t>((t - range.lo) / bin_width), n_bins - 1);
        ++h.counts[bin];
    }
    if (seen == 0) h.warnings.push_back("no " + to_string(channel) + " events in stream");
    return h;
}

struct NbarEstimate {
    double nbar = 0.0;
    double std_error = 0.0;
    double detection_fraction = 0.0; // r_d = counts / N_T
    bool one_sided = false;          // zero counts: std_error is a 68% upper limit
    std::vector<std::string> warnings;
};

/// Mean photon number from the no-atom reference run,
///   <N> = r_d / (eta_l * eta_ND2),
/// with the Poisson error on the counts and the eta_l calibration error
/// added in quadrature. No dead-time correction is applied.
inline NbarEstimate estimate_nbar(const Histogram& hist, const DetectionSetup& setup) {
    setup.validate();
    if (hist.channel != Channel::Forward) {
        throw DomainError("photon-number estimate needs the forward-channel histogram");
    }
    if (hist.n_pulses == 0) throw DomainError("histogram has N_T = 0");
    const double conversion = setup.eta_l * setup.nd2_transmission();
    if (!(conversion > 0.0)) throw DomainError("eta_l * eta_ND2 must be > 0");

    NbarEstimate est;
    const auto counts = static_cast<double>(hist.total());
    const auto pulses = static_cast<double>(hist.n_pulses);
    est.detection_fraction = counts / pulses;
    est.nbar = est.detection_fraction / conversion;
    if (hist.total() == 0) {
        // -ln(1 - 0.6827): one-sided 68% upper limit on a Poisson mean with 0 observed.
        est.one_sided = true;
        est.std_error = 1.1479 / (pulses * conversion);
    } else {
        const double rel_eta = setup.eta_l_uncertainty / setup.eta_l;
        est.std_error = est.nbar * std::sqrt(1.0 / counts + rel_eta * rel_eta);
    }
    if (est.detection_fraction > 0.01) {
        est.warnings.push_back("r_d = " + std::to_string(est.detection_fraction) +
                               " exceeds 1%; estimate biased low by detector dead time");
    }
    return est;
}

struct PeSeries {
    std::vector<double> bin_centers;
    std::vector<double> p_e;
    std::vector<double> p_e_err;
    std::vector<double> counts;
    double gamma_p = 0.0;
    double bin_width = 0.0;
    double eta_r = 0.0;
    std::uint64_t n_pulses = 0;

    /// N_d per unit P_e: Gamma_p * dt * eta_r * N_T.
    double counts_per_unit() const {
        return gamma_p * bin_width * eta_r * static_cast<double>(n_pulses);
    }
};

/// Excitation probability per bin, P_e = N_d / (Gamma_p dt eta_r N_T),
/// with Poisson error bars sqrt(N_d) / (Gamma_p dt eta_r N_T).
inline PeSeries reconstruct_pe(const Histogram& hist, const AtomParams& atom,
                               const DetectionSetup& setup) {
    if (hist.channel != Channel::Backward) {
        throw DomainError("P_e reconstruction needs the backward-channel histogram");
    }
    if (!(atom.gamma_p() > 0.0) || !(setup.eta_r > 0.0) || hist.n_pulses == 0) {
        throw DomainError("Gamma_p, eta_r and N_T must all be positive");
    }
    PeSeries s;
    s.gamma_p = atom.gamma_p();
    s.bin_width = hist.bin_width();
    s.eta_r = setup.eta_r;
    s.n_pulses = hist.n_pulses;
    const double scale = s.counts_per_unit();
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const auto n = static_cast<double>(hist.counts[i]);
        s.bin_centers.push_back(hist.bin_center(i));
        s.counts.push_back(n);
        s.p_e.push_back(n / scale);
        s.p_e_err.push_back(std::sqrt(n) / scale);
    }
    return s;
}

enum class FitDirection { Rising, Decaying };

enum class FitWeighting {
    // Weights 1/model, re-evaluated every iteration: Poisson maximum likelihood.
    PoissonLikelihood,
    // Fixed weights 1/max(count, 1) (Neyman chi-square).
    Neyman,
};

struct FitWindow {
    double t0 = 0.0;
    double t1 = 0.0;
};

/// Decay fits start 2 ns after the pulse turns off and span 78 ns.
inline FitWindow default_decay_window(double pulse_end = 0.0) {
    return {pulse_end + 2.0, pulse_end + 80.0};
}

/// Result of A exp(+-(t - t0)/tau); the amplitude refers to the window start.
struct ExpFit {
    double amplitude = 0.0;
    double tau = 0.0;
    FitWindow window;
    double residual_norm = 0.0;
    double amplitude_err = 0.0;
    double tau_err = 0.0;
    int iterations = 0;
    std::size_t bins_used = 0;
};

namespace detail {

struct FitPoints {
    std::vector<double> x; // t - t0
    std::vector<double> y;
};

inline FitPoints select_window(std::span<const double> t, std::span<const double> y, FitWindow w) {
    if (t.size() != y.size()) throw DomainError("fit data lengths differ");
    if (!(w.t1 > w.t0)) throw DomainError("fit window must have t1 > t0");
    FitPoints pts;
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] >= w.t0 && t[i] <= w.t1) {
            if (!(y[i] >= 0.0)) throw DomainError("fit data must be non-negative counts");
            pts.x.push_back(t[i] - w.t0);
            pts.y.push_back(y[i]);
            if (y[i] > 0.0) ++nonzero;
        }
    }
    if (nonzero < 8) {
        throw DomainError("degenerate fit window: " + std::to_string(nonzero) +
                          " non-empty bins, need at least 8");
    }
    return pts;
}

} // namespace detail

/// Weighted least squares of counts y(t) to A exp(+-(t - t0)/tau) over the
/// window. Starts from a log-linear regression, then Gauss-Newton (Fisher
/// scoring for the Poisson weighting) with step halving. Converged once both
/// relative parameter updates fall below 1e-8.
inline ExpFit fit_exponential(std::span<const double> t, std::span<const double> y, FitWindow window,
                              FitDirection direction,
                              FitWeighting weighting = FitWeighting::PoissonLikelihood) {
    const auto pts = detail::select_window(t, y, window);
    const std::size_t n = pts.x.size();
    const double sign = direction == FitDirection::Rising ? 1.0 : -1.0;

    // Log-linear start, weighted by counts.
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (pts.y[i] <= 0.0) continue;
        const double wi = pts.y[i];
        const double ly = std::log(pts.y[i]);
        sw += wi;
        sx += wi * pts.x[i];
        sy += wi * ly;
        sxx += wi * pts.x[i] * pts.x[i];
        sxy += wi * pts.x[i] * ly;
    }
    const double slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    double amp = std::exp((sy - slope * sx) / sw);
    double tau = sign * slope > 0.0 ? sign / slope : (window.t1 - window.t0);

    auto weight_of = [&](std::size_t i, double model) {
        return weighting == FitWeighting::Neyman ? 1.0 / std::max(pts.y[i], 1.0)
                                                 : 1.0 / std::max(model, 1e-300);
    };
    auto objective = [&](double a, double tt) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = a * std::exp(sign * pts.x[i] / tt);
            if (weighting == FitWeighting::Neyman) {
                const double r = pts.y[i] - m;
                sum += r * r / std::max(pts.y[i], 1.0);
            } else {
                sum += 2.0 * (m - pts.y[i]);
                if (pts.y[i] > 0.0) sum += 2.0 * pts.y[i] * std::log(pts.y[i] / m);
            }
        }
        return sum;
    };

    struct Normal {
        double h00 = 0, h01 = 0, h11 = 0, g0 = 0, g1 = 0, chi2 = 0;
    };
    auto normal_equations = [&](double a, double tt, bool first) {
        Normal ne;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(sign * pts.x[i] / tt);
            const double m = a * e;
            const double j0 = e;
            const double j1 = -a * e * sign * pts.x[i] / (tt * tt);
            const double w = first && weighting == FitWeighting::PoissonLikelihood
                                 ? 1.0 / std::max(pts.y[i], 1.0)
                                 : weight_of(i, m);
            const double r = pts.y[i] - m;
            ne.h00 += w * j0 * j0;
            ne.h01 += w * j0 * j1;
            ne.h11 += w * j1 * j1;
            ne.g0 += w * j0 * r;
            ne.g1 += w * j1 * r;
            ne.chi2 += w * r * r;
        }
        return ne;
    };

    ExpFit fit;
    fit.window = window;
    fit.bins_used = n;
    double current = objective(amp, tau);
    bool converged = false;
    for (int iter = 1; iter <= 200; ++iter) {
        fit.iterations = iter;
        const Normal ne = normal_equations(amp, tau, iter == 1);
        const double det = ne.h00 * ne.h11 - ne.h01 * ne.h01;
        if (!(det > 0.0) || !std::isfinite(det)) {
            throw NumericalError("exponential fit normal equations are singular");
        }
        double da = (ne.h11 * ne.g0 - ne.h01 * ne.g1) / det;
        double dt = (ne.h00 * ne.g1 - ne.h01 * ne.g0) / det;
        double step = 1.0;
        for (int halving = 0; halving < 40; ++halving) {
            const double na = amp + step * da;
            const double nt = tau + step * dt;
            if (na > 0.0 && nt > 0.0) {
                const double trial = objective(na, nt);
                if (trial <= current || halving == 39) {
                    if (trial <= current) {
                        amp = na;
                        tau = nt;
                        current = trial;
                    }
                    break;
                }
            }
            step *= 0.5;
        }
        if (std::abs(step * da) <= 1e-8 * std::abs(amp) && std::abs(step * dt) <= 1e-8 * tau) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw NumericalError("exponential fit did not converge in 200 iterations");
    }

    const Normal ne = normal_equations(amp, tau, false);
    const double det = ne.h00 * ne.h11 - ne.h01 * ne.h01;
    fit.amplitude = amp;
    fit.tau = tau;
    fit.residual_norm = std::sqrt(ne.chi2);
    fit.amplitude_err = std::sqrt(ne.h11 / det);
    fit.tau_err = std::sqrt(ne.h00 / det);
    return fit;
}

inline ExpFit fit_exponential(const Histogram& hist, FitWindow window, FitDirection direction,
                              FitWeighting weighting = FitWeighting::PoissonLikelihood) {
    std::vector<double> t(hist.size()), y(hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i) {
        t[i] = hist.bin_center(i);
        y[i] = static_cast<double>(hist.counts[i]);
    }
    return fit_exponential(t, y, window, direction, weighting);
}

/// Fits the underlying counts of a P_e series; amplitude is returned in P_e units.
inline ExpFit fit_exponential(const PeSeries& series, FitWindow window, FitDirection direction,
                              FitWeighting weighting = FitWeighting::PoissonLikelihood) {
    ExpFit fit = fit_exponential(series.bin_centers, series.counts, window, direction, weighting);
    const double scale = series.counts_per_unit();
    fit.amplitude /= scale;
    fit.amplitude_err /= scale;
    return fit;
}

} // namespace pulse_atom

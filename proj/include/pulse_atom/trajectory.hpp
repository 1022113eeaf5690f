#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pulse_atom/errors.hpp"

namespace pulse_atom {

/// Excited-state probability and coherences on a strictly increasing time
/// grid, with cubic Hermite dense output between nodes.
///
/// Slopes are stored one-sided (`left` at the end of the interval, `right`
/// at its start) so that kinks at pulse edges are reproduced exactly.
class Trajectory {
public:
    struct Node {
        double t = 0.0;
        double p_e = 0.0;
        double coherence = 0.0;  // in-phase component s
        double quadrature = 0.0; // out-of-phase component, non-zero only off resonance
        double slope_left = 0.0;
        double slope_right = 0.0;
    };

    Trajectory() = default;

    Trajectory(std::vector<Node> nodes, double pulse_end) : pulse_end_(pulse_end) {
        if (nodes.size() < 2) {
            throw DomainError("trajectory needs at least two nodes");
        }
        times_.reserve(nodes.size());
        p_e_.reserve(nodes.size());
        coherence_.reserve(nodes.size());
        quadrature_.reserve(nodes.size());
        slope_left_.reserve(nodes.size());
        slope_right_.reserve(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (i > 0 && !(nodes[i].t > nodes[i - 1].t)) {
                throw DomainError("trajectory times must be strictly increasing");
            }
            times_.push_back(nodes[i].t);
            p_e_.push_back(nodes[i].p_e);
            coherence_.push_back(nodes[i].coherence);
            quadrature_.push_back(nodes[i].quadrature);
            slope_left_.push_back(nodes[i].slope_left);
            slope_right_.push_back(nodes[i].slope_right);
        }
        locate_maximum();
    }

    /// Builds a trajectory from sampled values only, e.g. read back from CSV.
    /// Slopes come from centered finite differences.
    static Trajectory from_samples(std::vector<double> times, std::vector<double> p_e,
                                   std::vector<double> coherence, double pulse_end) {
        const std::size_t n = times.size();
        if (n < 2 || p_e.size() != n || coherence.size() != n) {
            throw DomainError("trajectory samples must have equal length >= 2");
        }
        std::vector<Node> nodes(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = i == 0 ? 0 : i - 1;
            const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
            const double slope = (p_e[hi] - p_e[lo]) / (times[hi] - times[lo]);
            nodes[i] = Node{times[i], p_e[i], coherence[i], 0.0, slope, slope};
        }
        return Trajectory(std::move(nodes), pulse_end);
    }

    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> p_e() const noexcept { return p_e_; }
    std::span<const double> coherence() const noexcept { return coherence_; }
    std::span<const double> quadrature() const noexcept { return quadrature_; }
    std::size_t size() const noexcept { return times_.size(); }
    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }
    double pulse_end() const noexcept { return pulse_end_; }

    /// Maximum of the dense output; never below the largest node value.
    double p_e_max() const noexcept { return p_e_max_; }
    double t_of_max() const noexcept { return t_of_max_; }
    double max_node_p_e() const { return *std::max_element(p_e_.begin(), p_e_.end()); }

    double p_e_at(double t) const {
        const std::size_t i = interval_of(t);
        const double h = times_[i + 1] - times_[i];
        return hermite(i, (t - times_[i]) / h);
    }

    /// Exact integral of the dense output over [a, b] within the grid.
    double integral_p_e(double a, double b) const {
        if (b < a) return -integral_p_e(b, a);
        if (a < times_.front() || b > times_.back()) {
            throw DomainError("integration range outside the trajectory");
        }
        const std::size_t ia = interval_of(a);
        const std::size_t ib = interval_of(b);
        double total = 0.0;
        for (std::size_t i = ia; i <= ib; ++i) {
            const double h = times_[i + 1] - times_[i];
            const double sa = i == ia ? (a - times_[i]) / h : 0.0;
            const double sb = i == ib ? (b - times_[i]) / h : 1.0;
            total += h * (hermite_antiderivative(i, sb) - hermite_antiderivative(i, sa));
        }
        return total;
    }

    double integral_p_e() const { return integral_p_e(times_.front(), times_.back()); }

    double mean_p_e(double a, double b) const { return integral_p_e(a, b) / (b - a); }

private:
    std::size_t interval_of(double t) const {
        if (!(t >= times_.front() && t <= times_.back())) {
            throw DomainError("time " + std::to_string(t) + " outside the trajectory");
        }
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t i = static_cast<std::size_t>(it - times_.begin());
        i = i == 0 ? 0 : i - 1;
        return std::min(i, times_.size() - 2);
    }

    struct Coeffs {
        double p0, p1, m0, m1;
    };

    Coeffs coeffs(std::size_t i) const {
        const double h = times_[i + 1] - times_[i];
        return {p_e_[i], p_e_[i + 1], slope_right_[i] * h, slope_left_[i + 1] * h};
    }

    double hermite(std::size_t i, double s) const {
        const auto [p0, p1, m0, m1] = coeffs(i);
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 +
               (s3 - s2) * m1;
    }

    double hermite_antiderivative(std::size_t i, double s) const {
        const auto [p0, p1, m0, m1] = coeffs(i);
        const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
        return (s - s3 + s4 / 2) * p0 + (s2 / 2 - 2 * s3 / 3 + s4 / 4) * m0 +
               (s3 - s4 / 2) * p1 + (-s3 / 3 + s4 / 4) * m1;
    }

    void locate_maximum() {
        std::size_t best = 0;
        for (std::size_t i = 1; i < p_e_.size(); ++i) {
            if (p_e_[i] > p_e_[best]) best = i;
        }
        p_e_max_ = p_e_[best];
        t_of_max_ = times_[best];
        // Interior extrema of the Hermite cubic near the best node.
        const std::size_t lo = best == 0 ? 0 : best - 1;
        const std::size_t hi = std::min(best + 1, p_e_.size() - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            const auto [p0, p1, m0, m1] = coeffs(i);
            const double qa = 6 * p0 + 3 * m0 - 6 * p1 + 3 * m1;
            const double qb = -6 * p0 - 4 * m0 + 6 * p1 - 2 * m1;
            const double qc = m0;
            double roots[2];
            int count = 0;
            if (std::abs(qa) < 1e-300) {
                if (qb != 0.0) roots[count++] = -qc / qb;
            } else {
                const double disc = qb * qb - 4 * qa * qc;
                if (disc >= 0.0) {
                    const double sq = std::sqrt(disc);
                    const double q = -0.5 * (qb + std::copysign(sq, qb));
                    roots[count++] = q / qa;
                    if (q != 0.0) roots[count++] = qc / q;
                }
            }
            for (int k = 0; k < count; ++k) {
                const double s = roots[k];
                if (s > 0.0 && s < 1.0) {
                    const double v = hermite(i, s);
                    if (v > p_e_max_) {
                        p_e_max_ = v;
                        t_of_max_ = times_[i] + s * (times_[i + 1] - times_[i]);
                    }
                }
            }
        }
    }

    std::vector<double> times_;
    std::vector<double> p_e_;
    std::vector<double> coherence_;
    std::vector<double> quadrature_;
    std::vector<double> slope_left_;
    std::vector<double> slope_right_;
    double pulse_end_ = 0.0;
    double p_e_max_ = 0.0;
    double t_of_max_ = 0.0;
};

struct Extremum {
    double t = 0.0;
    double p_e = 0.0;
    bool is_max = false;
};

/// Alternating maxima and minima of P_e over the nodes. A turning point
/// counts once P_e has moved away from it by more than `hysteresis`.
inline std::vector<Extremum> p_e_extrema(const Trajectory& traj, double hysteresis = 5e-3) {
    std::vector<Extremum> out;
    const auto t = traj.times();
    const auto p = traj.p_e();
    if (t.empty()) return out;
    bool rising = true;
    Extremum cand{t[0], p[0], true};
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (rising) {
            if (p[i] > cand.p_e) {
                cand = {t[i], p[i], true};
            } else if (p[i] < cand.p_e - hysteresis) {
                out.push_back(cand);
                rising = false;
                cand = {t[i], p[i], false};
            }
        } else if (p[i] < cand.p_e) {
            cand = {t[i], p[i], false};
        } else if (p[i] > cand.p_e + hysteresis) {
            out.push_back(cand);
            rising = true;
            cand = {t[i], p[i], true};
        }
    }
    return out;
}

inline std::size_t count_local_maxima(const Trajectory& traj, double hysteresis = 5e-3) {
    std::size_t n = 0;
    for (const auto& e : p_e_extrema(traj, hysteresis)) n += e.is_max ? 1 : 0;
    return n;
}

/// First maximum minus the minimum that follows it; 0 without oscillation.
inline double oscillation_contrast(const Trajectory& traj, double hysteresis = 5e-3) {
    const auto ext = p_e_extrema(traj, hysteresis);
    for (std::size_t i = 0; i + 1 < ext.size(); ++i) {
        if (ext[i].is_max && !ext[i + 1].is_max) return ext[i].p_e - ext[i + 1].p_e;
    }
    return 0.0;
}

} // namespace pulse_atom

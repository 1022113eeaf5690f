// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pulse_atom/analysis.hpp"
#include "pulse_atom/detection.hpp"
#include "pulse_atom/dynamics.hpp"
#include "pulse_atom/optics.hpp"
#include "pulse_atom/pipeline.hpp"
#include "pulse_atom/sweep.hpp"
#include "pulse_atom/timestamp_io.hpp"

using namespace pulse_atom;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

const auto kStart = Clock::now();

bool report(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = seconds_since(t0);
    const bool in_time = dt < limit_s;
    const bool pass = o.pass && in_time;
    std::printf("%s criterion %d: %s | %s | runtime %.4g s (limit %g s)%s\n", pass ? "PASS" : "FAIL",
                id, title.c_str(), o.detail.c_str(), dt, limit_s,
                in_time ? "" : " [runtime exceeded]");
    std::fflush(stdout);
    return pass;
}

const AtomParams kAtom = AtomParams::from_lifetime(26.24, 0.03);

Outcome overlap_formula() {
    const auto t0 = Clock::now();
    const double eta = overlap_from_focusing(FocusingGeometry::from_strength(0.22)).eta_p;
    const double dt = seconds_since(t0);
    const bool ok = std::abs(eta - 0.030) <= 0.002 && dt < 1e-3;
    return {ok, "eta_p(u=0.22) = " + num(eta, 8) + ", target 0.030 +- 0.002; call took " +
                    num(dt * 1e6, 3) + " us"};
}

Outcome free_decay() {
    BlochOptions opts;
    opts.initial = BlochState{1.0, 0.0, 0.0};
    const auto traj = solve_bloch(PulseSpec::square(15.0, 0.0), kAtom, TimeGrid{0.0, 300.0, 0.1}, opts);
    DetectionSetup setup;
    setup.n_pulses = 1'000'000;
    setup.seed = 1;
    const auto run = simulate_backward(traj, kAtom, setup);
    const auto h = histogram(run.records, Channel::Backward, 1.0, {0.0, 300.0}, setup.n_pulses);
    const auto fit = fit_exponential(h, {2.0, 200.0}, FitDirection::Decaying);
    const double rel = fit.tau / 26.24 - 1.0;
    return {std::abs(rel) <= 0.02, "fit tau = " + num(fit.tau) + " +- " + num(fit.tau_err, 3) +
                                       " ns over [2, 200] ns from " + std::to_string(h.total()) +
                                       " counts, deviation " + num(100 * rel, 3) + "% (limit 2%)"};
}

Outcome steady_state() {
    const auto spec = PulseSpec::square(150.0, 1300.0);
    const auto traj = simulate_pulse(spec, kAtom);
    const double p_end = traj.p_e_at(spec.edge());
    return {std::abs(p_end - 0.5) <= 0.02, "P_e at pulse end = " + num(p_end) + ", target 0.50 +- 0.02"};
}

Outcome rabi_oscillations() {
    const auto sq = simulate_pulse(PulseSpec::square(15.0, 1300.0), kAtom);
    const auto ex = simulate_pulse(PulseSpec::rising_exponential(15.0, 1300.0), kAtom);
    const auto maxima = count_local_maxima(sq);
    const double c_sq = oscillation_contrast(sq);
    const double c_ex = oscillation_contrast(ex);
    return {maxima >= 2 && c_sq > c_ex,
            "square: " + std::to_string(maxima) + " local maxima, contrast " + num(c_sq, 4) +
                "; exponential contrast " + num(c_ex, 4)};
}

Outcome optimal_durations() {
    const auto atom = AtomParams::from_lifetime(26.24, 0.027);
    const auto e = optimal_tau(PulseShape::RisingExponential, 2.75, atom, {5.0, 150.0});
    const auto s = optimal_tau(PulseShape::Square, 2.10, atom, {5.0, 300.0});
    const bool ok_e = std::abs(e.tau_star / 24.0 - 1.0) <= 0.15;
    const bool ok_s = std::abs(s.tau_star / 64.0 - 1.0) <= 0.15;
    return {ok_e && ok_s, "tau_e* = " + num(e.tau_star, 4) + " ns (24 +- 15%), tau_s* = " +
                              num(s.tau_star, 4) + " ns (64 +- 15%)"};
}

Outcome shape_comparison() {
    const auto atom = AtomParams::from_lifetime(26.24, 0.027);
    const auto cmp = compare_shapes(2.75, 2.10, 25.0, 60.0, atom);
    return {cmp.first_wins, "P_e,max exp = " + num(cmp.first.p_e_max()) + ", square = " +
                                num(cmp.second.p_e_max())};
}

Outcome roundtrip_fidelity() {
    RunConfig cfg;
    cfg.shape = PulseShape::RisingExponential;
    cfg.tau_ns = 15.0;
    cfg.nbar = 104.0;
    cfg.eta_p = 0.03;
    cfg.detection.n_pulses = 1'000'000;
    cfg.detection.seed = 1;
    const auto r = run_roundtrip(cfg);
    const double z = (r.reconstructed_peak - r.solver_pe_max) / r.combined_sigma;
    return {r.peak_ok, "reconstructed peak " + num(r.reconstructed_peak, 4) + " vs solver P_e,max " +
                           num(r.solver_pe_max, 4) + ", combined sigma " +
                           num(r.combined_sigma, 3) + ", z = " + num(z, 3) + " (limit 3)"};
}

Outcome nbar_estimator() {
    DetectionSetup setup;
    setup.n_pulses = 15'000'000;
    setup.nd2_db = -43.0;
    setup.seed = 1;
    const auto spec = PulseSpec::rising_exponential(15.0, 110.0);
    const auto run = simulate_forward(spec, setup);
    const auto h = histogram(run.records, Channel::Forward, 1.0, forward_range(spec), setup.n_pulses);
    const auto est = estimate_nbar(h, setup);
    const auto fit = fit_exponential(h, {-60.0, 0.0}, FitDirection::Rising);
    const bool ok_n = std::abs(est.nbar - 110.0) <= 2.0 * est.std_error;
    const bool ok_t = std::abs(fit.tau - 15.0) <= 0.5;
    return {ok_n && ok_t, "<N> = " + num(est.nbar, 5) + " +- " + num(est.std_error, 3) +
                              " (truth 110, 2 sigma), rise tau = " + num(fit.tau, 4) + " +- " +
                              num(fit.tau_err, 2) + " ns (15 +- 0.5)"};
}

Outcome property_suites() {
    std::vector<std::string> failed;
    std::string notes;

    // Bloch containment over a spread of drives, shapes and detunings.
    double worst = -1.0;
    for (double nbar : {0.1, 3.0, 110.0, 1300.0, 3000.0}) {
        for (double tau : {2.0, 15.0, 150.0}) {
            for (double det : {0.0, 0.05}) {
                AtomParams atom = kAtom;
                atom.detuning = det;
                for (auto shape : {PulseShape::RisingExponential, PulseShape::Square}) {
                    const auto traj = simulate_pulse(PulseSpec::analytic(shape, tau, nbar), atom);
                    const auto p = traj.p_e();
                    const auto s = traj.coherence();
                    const auto q = traj.quadrature();
                    for (std::size_t i = 0; i < traj.size(); ++i) {
                        worst = std::max(worst, s[i] * s[i] + q[i] * q[i] +
                                                    (p[i] - 0.5) * (p[i] - 0.5) - 0.25);
                    }
                }
            }
        }
    }
    if (worst > 1e-9) failed.push_back("containment");
    notes += "containment excess " + num(worst, 2);

    // Weak-field linearity against the first-order oracle.
    double lin = 0.0;
    for (auto shape : {PulseShape::RisingExponential, PulseShape::Square}) {
        for (double nbar : {0.001, 0.01}) {
            const auto spec = PulseSpec::analytic(shape, 20.0, nbar);
            const auto grid = default_grid(spec, kAtom, 4.0);
            lin = std::max(lin, std::abs(solve_bloch(spec, kAtom, grid).p_e_max() /
                                             weak_field_oracle(spec, kAtom, grid).p_e_max() -
                                         1.0));
        }
    }
    if (lin > 0.02) failed.push_back("weak-field linearity");
    notes += "; weak-field deviation " + num(100 * lin, 3) + "%";

    // Halving the step limit.
    double conv = 0.0;
    for (const auto& spec : {PulseSpec::square(15.0, 1300.0), PulseSpec::rising_exponential(15.0, 110.0),
                             PulseSpec::rising_exponential(25.0, 2.75), PulseSpec::square(150.0, 1300.0)}) {
        SolverSettings coarse, fine;
        coarse.dt_max = 0.1;
        fine.dt_max = 0.05;
        conv = std::max(conv, std::abs(simulate_pulse(spec, kAtom, coarse).p_e_max() -
                                       simulate_pulse(spec, kAtom, fine).p_e_max()));
    }
    if (conv > 1e-7) failed.push_back("integrator convergence");
    notes += "; halved-step change " + num(conv, 2);

    // pi pulse with decay disabled: pulse area 2 sqrt(Gamma_p N tau) = pi.
    const auto frozen = kAtom.without_decay();
    const double tau = 15.0;
    const double nbar_pi = std::numbers::pi * std::numbers::pi / (4.0 * frozen.gamma_p() * tau);
    const auto pi_traj = solve_bloch(PulseSpec::square(tau, nbar_pi), frozen, TimeGrid{-tau, 5.0, 0.05});
    const double pi_err = std::abs(pi_traj.p_e_at(0.0) - 1.0);
    if (pi_err > 1e-6) failed.push_back("pi pulse");
    notes += "; pi-pulse |P_e - 1| " + num(pi_err, 2);

    // Poisson bin statistics without dead time.
    {
        const auto atom = AtomParams::from_lifetime(26.24, 0.3);
        const auto spec = PulseSpec::rising_exponential(15.0, 30.0);
        const auto traj = solve_bloch(spec, atom, default_grid(spec, atom, 6.0));
        DetectionSetup setup;
        setup.eta_r = 1.0;
        setup.dead_time_ns = 0.0;
        setup.seed = 4;
        const std::uint64_t blocks = 100, per_block = 100'000;
        setup.n_pulses = blocks * per_block;
        const auto run = simulate_backward(traj, atom, setup);
        const int lo = -60, hi = 60;
        std::vector<std::vector<double>> counts(hi - lo, std::vector<double>(blocks, 0.0));
        for (const auto& r : run.records) {
            const auto bin = static_cast<int>(std::floor(r.t_ns())) - lo;
            if (bin >= 0 && bin < hi - lo) counts[bin][r.pulse_index / per_block] += 1.0;
        }
        double sum = 0.0;
        int used = 0;
        for (int b = 0; b < hi - lo; ++b) {
            const double expected = traj.mean_p_e(lo + b, lo + b + 1.0) * atom.gamma_p() * per_block;
            if (expected < 500.0) continue;
            double mean = 0.0, var = 0.0;
            for (double c : counts[b]) mean += c;
            mean /= blocks;
            for (double c : counts[b]) var += (c - mean) * (c - mean);
            sum += var / (blocks - 1) / mean;
            ++used;
        }
        const double ratio = used ? sum / used : 0.0;
        if (!(ratio >= 0.9 && ratio <= 1.1)) failed.push_back("Poisson variance/mean");
        notes += "; variance/mean " + num(ratio, 4) + " over " + std::to_string(used) + " bins";
    }

    // Byte-identical reruns, including a different thread count.
    {
        const auto traj = simulate_pulse(PulseSpec::rising_exponential(15.0, 104.0), kAtom,
                                         SolverSettings{0.1, 6.0, {}});
        DetectionSetup setup;
        setup.n_pulses = 300'000;
        setup.seed = 42;
        auto bytes = [&](unsigned threads) {
            auto recs = simulate_backward(traj, kAtom, setup, threads).records;
            const auto fwd = simulate_forward(PulseSpec::rising_exponential(15.0, 104.0), setup, threads);
            recs.insert(recs.end(), fwd.records.begin(), fwd.records.end());
            std::ostringstream out;
            write_timestamps(recs, out);
            return out.str();
        };
        const auto a = bytes(1), b = bytes(1), c = bytes(4);
        if (a != b || a != c) failed.push_back("byte-identical reruns");
        notes += "; reruns identical: " + std::string(a == b && a == c ? "yes" : "no") + " (" +
                 std::to_string(a.size()) + " bytes)";
    }

    const double total = seconds_since(kStart);
    if (total > 600.0) failed.push_back("full suite time");
    notes += "; suite time so far " + num(total, 3) + " s";
    std::string head = failed.empty() ? "all properties hold" : "failed:";
    for (const auto& f : failed) head += " " + f;
    return {failed.empty(), head + " (" + notes + ")"};
}

} // namespace

int main() {
    int failures = 0;
    failures += !report(1, "overlap formula", 1e-3, overlap_formula);
    failures += !report(2, "free decay lifetime", 60, free_decay);
    failures += !report(3, "steady-state saturation", 1, steady_state);
    failures += !report(4, "Rabi oscillations", 1, rabi_oscillations);
    failures += !report(5, "optimal pulse durations", 30, optimal_durations);
    failures += !report(6, "shape comparison", 1, shape_comparison);
    failures += !report(7, "round-trip fidelity", 120, roundtrip_fidelity);
    failures += !report(8, "photon-number estimator round trip", 180, nbar_estimator);
    failures += !report(9, "property suites", 600, property_suites);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pulse_atom/analysis.hpp"
#include "pulse_atom/config.hpp"
#include "pulse_atom/detection.hpp"
#include "pulse_atom/io.hpp"
#include "pulse_atom/sweep.hpp"

namespace pulse_atom {

/// Histogram range for the forward channel, in ns relative to the edge.
inline TimeRange forward_range(const PulseSpec& spec) {
    const double begin = spec.shape() == PulseShape::RisingExponential
                             ? spec.edge() - 40.0 * spec.tau()
                             : spec.start();
    return {-std::ceil(spec.edge() - begin) - 1.0, 1.0};
}

inline TimeRange backward_range(const Trajectory& traj, double bin_width) {
    const double lo = std::ceil((traj.t_begin() - traj.pulse_end()) / bin_width) * bin_width;
    const double hi = std::floor((traj.t_end() - traj.pulse_end()) / bin_width) * bin_width;
    return {lo, hi};
}

struct RoundtripReport {
    Trajectory trajectory;
    DetectionRun forward;
    DetectionRun backward;
    Histogram forward_hist;
    Histogram backward_hist;
    NbarEstimate nbar;
    PeSeries series;
    std::optional<ExpFit> rise_fit;
    std::optional<ExpFit> decay_fit;
    std::vector<std::string> fit_errors;

    double true_nbar = 0.0;
    double solver_pe_max = 0.0;
    double solver_t_of_max = 0.0;
    double reconstructed_peak = 0.0;
    double reconstructed_peak_err = 0.0;
    double reconstructed_peak_t = 0.0;
    // Sensitivity of the model peak to the photon-number calibration.
    double nbar_induced_sigma = 0.0;
    double combined_sigma = 0.0;

    bool nbar_ok = false;
    bool peak_ok = false;
    bool passed() const { return nbar_ok && peak_ok; }
};

/// simulate -> detect (both channels) -> analyze -> compare.
///
/// Checks: the forward-channel <N> estimate lies within 2 sigma of the true
/// value, and the largest reconstructed P_e bin lies within 3 combined
/// sigma of the solver's P_e,max. The combined sigma adds the bin's Poisson
/// error to the shift of P_e,max caused by a 1 sigma error in <N>.
inline RoundtripReport run_roundtrip(const RunConfig& cfg) {
    RoundtripReport r;
    const auto spec = cfg.pulse();
    const auto atom = cfg.atom();
    auto solver = cfg.solver;
    solver.lifetimes_after = std::max(solver.lifetimes_after, 6.0);
    const unsigned threads = cfg.threads ? cfg.threads : default_thread_count();

    r.true_nbar = spec.mean_photons();
    r.trajectory = simulate_pulse(spec, atom, solver);
    r.solver_pe_max = r.trajectory.p_e_max();
    r.solver_t_of_max = r.trajectory.t_of_max() - spec.edge();

    const auto& setup = cfg.detection;
    r.forward = simulate_forward(spec, setup, threads);
    r.backward = simulate_backward(r.trajectory, atom, setup, threads);

    r.forward_hist = histogram(r.forward.records, Channel::Forward, setup.bin_width_ns,
                               forward_range(spec), setup.n_pulses);
    const TimeRange brange{cfg.analysis.hist_lo.value_or(
                               backward_range(r.trajectory, setup.bin_width_ns).lo),
                           cfg.analysis.hist_hi.value_or(
                               backward_range(r.trajectory, setup.bin_width_ns).hi)};
    r.backward_hist = histogram(r.backward.records, Channel::Backward, setup.bin_width_ns, brange,
                                setup.n_pulses);
    r.nbar = estimate_nbar(r.forward_hist, setup);
    r.series = reconstruct_pe(r.backward_hist, atom, setup);

    if (spec.shape() == PulseShape::RisingExponential) {
        try {
            r.rise_fit = fit_exponential(r.forward_hist, {-4.0 * spec.tau(), 0.0},
                                         FitDirection::Rising, cfg.analysis.fit_weighting);
        } catch (const Error& e) {
            r.fit_errors.push_back(std::string("rise fit: ") + e.what());
        }
    }
    try {
        const auto def = default_decay_window();
        const FitWindow window{cfg.analysis.fit_lo.value_or(def.t0),
                               cfg.analysis.fit_hi.value_or(def.t1)};
        r.decay_fit = fit_exponential(r.backward_hist, window, FitDirection::Decaying,
                                      cfg.analysis.fit_weighting);
    } catch (const Error& e) {
        r.fit_errors.push_back(std::string("decay fit: ") + e.what());
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < r.series.p_e.size(); ++i) {
        if (r.series.p_e[i] > r.series.p_e[best]) best = i;
    }
    if (!r.series.p_e.empty()) {
        r.reconstructed_peak = r.series.p_e[best];
        r.reconstructed_peak_err = r.series.p_e_err[best];
        r.reconstructed_peak_t = r.series.bin_centers[best];
    }

    if (r.true_nbar > 0.0 && r.nbar.std_error > 0.0) {
        const double h = std::min(r.nbar.std_error, 0.25 * r.true_nbar);
        const double up = simulate_pulse(spec.with_mean_photons(r.true_nbar + h), atom, solver).p_e_max();
        const double dn = simulate_pulse(spec.with_mean_photons(r.true_nbar - h), atom, solver).p_e_max();
        r.nbar_induced_sigma = std::abs(up - dn) / (2.0 * h) * r.nbar.std_error;
    }
    r.combined_sigma = std::hypot(r.reconstructed_peak_err, r.nbar_induced_sigma);

    r.nbar_ok = std::abs(r.nbar.nbar - r.true_nbar) <= 2.0 * r.nbar.std_error;
    r.peak_ok = std::abs(r.reconstructed_peak - r.solver_pe_max) <= 3.0 * r.combined_sigma;
    return r;
}

inline nlohmann::json to_json(const RoundtripReport& r) {
    nlohmann::json j = {
        {"true_nbar", r.true_nbar},
        {"nbar_estimate", to_json(r.nbar)},
        {"nbar_ok", r.nbar_ok},
        {"solver_pe_max", r.solver_pe_max},
        {"solver_t_of_max_ns", r.solver_t_of_max},
        {"reconstructed_peak", r.reconstructed_peak},
        {"reconstructed_peak_err", r.reconstructed_peak_err},
        {"reconstructed_peak_t_ns", r.reconstructed_peak_t},
        {"nbar_induced_sigma", r.nbar_induced_sigma},
        {"combined_sigma", r.combined_sigma},
        {"peak_ok", r.peak_ok},
        {"forward_events", r.forward.records.size()},
        {"backward_events", r.backward.records.size()},
        {"backward_dead_time_suppressed", r.backward.dead_time_suppressed},
        {"passed", r.passed()},
    };
    if (r.rise_fit) j["rise_fit"] = to_json(*r.rise_fit);
    if (r.decay_fit) j["decay_fit"] = to_json(*r.decay_fit);
    std::vector<std::string> warnings = r.forward.warnings;
    warnings.insert(warnings.end(), r.backward.warnings.begin(), r.backward.warnings.end());
    warnings.insert(warnings.end(), r.nbar.warnings.begin(), r.nbar.warnings.end());
    warnings.insert(warnings.end(), r.fit_errors.begin(), r.fit_errors.end());
    j["warnings"] = warnings;
    return j;
}

// ---------------------------------------------------------------------------
// Figure recipes

inline const std::vector<std::string>& figure_names() {
    static const std::vector<std::string> names{"fig2", "fig3", "fig4", "fig5", "fig6"};
    return names;
}

struct FigureOutput {
    std::vector<std::filesystem::path> files;
    nlohmann::json summary;
};

namespace figure_detail {

class Recorder {
public:
    Recorder(std::filesystem::path dir, std::string name)
        : dir_(std::move(dir)), name_(std::move(name)) {
        // Each run rewrites its log so reruns stay byte-identical.
        auto out = open_output(dir_ / "provenance.jsonl");
        finish_output(out, dir_ / "provenance.jsonl");
    }

    template <class Writer>
    void file(const std::string& filename, const RunConfig& cfg, Writer&& writer,
              const nlohmann::json& details = nlohmann::json::object()) {
        const auto path = dir_ / filename;
        write_file(path, writer);
        append_provenance(dir_ / "provenance.jsonl",
                          provenance_record("figure " + name_, path, cfg, details));
        out.files.push_back(path);
    }

    void summary(const RunConfig& cfg, nlohmann::json s) {
        out.summary = std::move(s);
        file(name_ + "_summary.json", cfg,
             [&](std::ostream& o) { o << out.summary.dump(2) << '\n'; });
    }

    FigureOutput out;

private:
    std::filesystem::path dir_;
    std::string name_;
};

inline RunConfig with_pulse(RunConfig cfg, PulseShape shape, double tau, double nbar) {
    cfg.shape = shape;
    cfg.tau_ns = tau;
    cfg.nbar = nbar;
    cfg.edge_ns = 0.0;
    cfg.envelope_file.clear();
    return cfg;
}

} // namespace figure_detail

/// Runs one figure recipe and writes its CSVs, a summary and a provenance
/// log into `dir`. Physical parameters are fixed by the recipe; seed,
/// efficiencies, solver settings and threads come from `base`.
inline FigureOutput run_figure(const std::string& name, const RunConfig& base,
                               const std::filesystem::path& dir, bool full_scale) {
    using figure_detail::with_pulse;
    const auto& names = figure_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw ConfigError("unknown figure '" + name + "' (expected fig2, fig3, fig4, fig5 or fig6)");
    }
    figure_detail::Recorder rec(dir, name);
    const unsigned threads = base.threads ? base.threads : default_thread_count();

    if (name == "fig2") {
        auto cfg = with_pulse(base, PulseShape::RisingExponential, 15.0, 110.0);
        cfg.detection.n_pulses = full_scale ? 15'000'000 : 1'000'000;
        const auto spec = cfg.pulse();
        const auto run = simulate_forward(spec, cfg.detection, threads);
        const auto hist = histogram(run.records, Channel::Forward, cfg.detection.bin_width_ns,
                                    forward_range(spec), cfg.detection.n_pulses);
        rec.file("fig2_forward_hist.csv", cfg, [&](std::ostream& o) { write_histogram_csv(o, hist); });
        nlohmann::json s = {{"nbar_estimate", to_json(estimate_nbar(hist, cfg.detection))},
                            {"forward_events", run.records.size()},
                            {"warnings", run.warnings}};
        try {
            s["rise_fit"] = to_json(fit_exponential(hist, {-60.0, 0.0}, FitDirection::Rising,
                                                    cfg.analysis.fit_weighting));
        } catch (const Error& e) {
            s["rise_fit_error"] = e.what();
        }
        rec.summary(cfg, s);
    } else if (name == "fig3") {
        auto cfg = with_pulse(base, PulseShape::RisingExponential, 15.0, 104.0);
        cfg.detection.n_pulses = full_scale ? 2'103'400 : 1'000'000;
        const auto r = run_roundtrip(cfg);
        rec.file("fig3_trajectory.csv", cfg,
                 [&](std::ostream& o) { write_trajectory_csv(o, r.trajectory); });
        rec.file("fig3_forward_hist.csv", cfg,
                 [&](std::ostream& o) { write_histogram_csv(o, r.forward_hist); });
        rec.file("fig3_backward_hist.csv", cfg,
                 [&](std::ostream& o) { write_histogram_csv(o, r.backward_hist); });
        rec.file("fig3_pe.csv", cfg, [&](std::ostream& o) { write_pe_csv(o, r.series); });
        rec.summary(cfg, to_json(r));
    } else if (name == "fig4") {
        nlohmann::json s = nlohmann::json::object();
        for (auto shape : {PulseShape::RisingExponential, PulseShape::Square}) {
            auto cfg = with_pulse(base, shape, 15.0, 1300.0);
            const auto traj = simulate_pulse(cfg.pulse(), cfg.atom(), cfg.solver);
            const std::string tag(to_string(shape));
            rec.file("fig4_" + tag + ".csv", cfg,
                     [&](std::ostream& o) { write_trajectory_csv(o, traj); });
            s[tag] = {{"pe_max", traj.p_e_max()},
                      {"t_of_max_ns", traj.t_of_max()},
                      {"local_maxima", count_local_maxima(traj)},
                      {"oscillation_contrast", oscillation_contrast(traj)}};
        }
        rec.summary(base, s);
    } else if (name == "fig5") {
        auto cfg = base;
        cfg.sweep.tau_grid = default_sweep_taus();
        cfg.sweep.nbar_grid = default_sweep_nbars();
        std::vector<SweepRow> all;
        nlohmann::json failures = nlohmann::json::array();
        for (auto shape : {PulseShape::RisingExponential, PulseShape::Square}) {
            SweepGrid grid;
            grid.shape = shape;
            grid.atom = cfg.atom();
            grid.tau_values = cfg.sweep.tau_grid;
            grid.nbar_values = cfg.sweep.nbar_grid;
            const auto res = sweep_pe_max(grid, cfg.solver, threads);
            all.insert(all.end(), res.rows.begin(), res.rows.end());
            for (const auto& f : res.failures) {
                failures.push_back({{"shape", to_string(shape)},
                                    {"tau_ns", f.tau_ns},
                                    {"nbar", f.nbar},
                                    {"message", f.message}});
            }
        }
        rec.file("fig5_sweep.csv", cfg, [&](std::ostream& o) { write_sweep_csv(o, all); });
        for (auto shape : {PulseShape::RisingExponential, PulseShape::Square}) {
            for (double tau : cfg.sweep.tau_grid) {
                std::vector<SweepRow> trace;
                for (const auto& row : all) {
                    if (row.shape == shape && row.tau_ns == tau) trace.push_back(row);
                }
                rec.file("fig5_" + std::string(to_string(shape)) + "_tau" + format_double(tau) +
                             ".csv",
                         cfg, [&](std::ostream& o) { write_sweep_csv(o, trace); });
            }
        }
        rec.summary(cfg, {{"rows", all.size()}, {"failures", failures}});
    } else if (name == "fig6") {
        auto cfg = base;
        cfg.eta_p = 0.027;
        const auto cmp = compare_shapes(2.75, 2.10, 25.0, 60.0, cfg.atom(), cfg.solver);
        rec.file("fig6_exp.csv", with_pulse(cfg, PulseShape::RisingExponential, 25.0, 2.75),
                 [&](std::ostream& o) { write_trajectory_csv(o, cmp.first); });
        rec.file("fig6_square.csv", with_pulse(cfg, PulseShape::Square, 60.0, 2.10),
                 [&](std::ostream& o) { write_trajectory_csv(o, cmp.second); });
        rec.summary(cfg, {{"exp_pe_max", cmp.first.p_e_max()},
                          {"square_pe_max", cmp.second.p_e_max()},
                          {"exponential_wins", cmp.first_wins},
                          {"difference", cmp.difference}});
    }
    return rec.out;
}

} // namespace pulse_atom

// pulse-atom-sim: command-line front end.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical
// failure (including a failed roundtrip), 4 I/O error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pulse_atom/analysis.hpp"
#include "pulse_atom/config.hpp"
#include "pulse_atom/detection.hpp"
#include "pulse_atom/io.hpp"
#include "pulse_atom/optics.hpp"
#include "pulse_atom/pipeline.hpp"
#include "pulse_atom/sweep.hpp"
#include "pulse_atom/timestamp_io.hpp"

namespace fs = std::filesystem;
using namespace pulse_atom;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

constexpr const char* kOutEnv = "PULSE_ATOM_SIM_OUT";

// Options shared by the subcommands that take a configuration.
struct Common {
    std::optional<std::string> config;
    std::vector<ConfigOverride> overrides;
    std::string out_dir;

    void flag(CLI::App* app, const std::string& name, const std::string& key,
              const std::string& help) {
        app->add_option_function<std::string>(
            name, [this, key](const std::string& v) { overrides.push_back({key, v}); }, help);
    }

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "key = value configuration file");
        app->add_option("--out-dir", out_dir, "output directory (default: $" +
                                                  std::string(kOutEnv) + " or the working directory)");
        flag(app, "--threads", "run.threads", "worker threads (0 = hardware concurrency)");
    }

    void attach_seed(CLI::App* app) { flag(app, "--seed", "run.seed", "64-bit RNG seed"); }

    void attach_atom(CLI::App* app) {
        flag(app, "--eta-p", "atom.eta_p", "spatial overlap eta_p");
        flag(app, "--gamma-ns", "atom.lifetime_ns", "excited-state lifetime 1/Gamma (ns)");
        flag(app, "--detuning", "atom.detuning", "laser detuning (rad/ns)");
        app->add_flag_callback(
            "--no-decay", [this] { overrides.push_back({"atom.decay", "false"}); },
            "disable spontaneous decay (test mode)");
    }

    void attach_pulse(CLI::App* app) {
        flag(app, "--shape", "pulse.shape", "pulse shape: exp, square or tabulated");
        flag(app, "--tau-ns", "pulse.tau", "pulse duration tau (ns)");
        flag(app, "--nbar", "pulse.nbar", "mean photon number <N>");
        flag(app, "--envelope", "pulse.envelope_file", "CSV t_ns,amplitude for tabulated shape");
    }

    void attach_solver(CLI::App* app) {
        flag(app, "--dt-max", "solver.dt_max", "largest integrator step / output spacing (ns)");
        flag(app, "--rel-tol", "solver.rel_tol", "integrator relative tolerance");
        flag(app, "--abs-tol", "solver.abs_tol", "integrator absolute tolerance");
        flag(app, "--lifetimes-after", "solver.lifetimes_after",
             "simulated window after the pulse edge, in lifetimes");
    }

    void attach_detection(CLI::App* app) {
        flag(app, "--n-pulses", "detection.n_pulses", "number of pulses N_T");
        flag(app, "--eta-r", "detection.eta_r", "backward detection efficiency");
        flag(app, "--eta-l", "detection.eta_l", "forward detection efficiency");
        flag(app, "--nd2-db", "detection.nd2_db", "forward attenuation (dB, negative)");
        flag(app, "--dead-time", "detection.dead_time", "detector dead time (ns)");
        flag(app, "--bin-width", "detection.bin_width", "time bin width (ns)");
        flag(app, "--pulse-period", "detection.pulse_period", "pulse repetition period (ns)");
        flag(app, "--dark-rate", "detection.dark_rate", "dark count rate per ns");
    }

    RunConfig load() const { return parse_config(config, overrides); }

    fs::path output_dir(const RunConfig& cfg) const {
        if (!out_dir.empty()) return out_dir;
        if (!cfg.output_dir.empty()) return cfg.output_dir;
        if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') return env;
        return fs::current_path();
    }

    fs::path resolve(const RunConfig& cfg, const std::string& file,
                     const std::string& fallback) const {
        const fs::path p = file.empty() ? fs::path(fallback) : fs::path(file);
        return p.is_absolute() ? p : output_dir(cfg) / p;
    }
};

template <class Writer>
void write_with_provenance(const fs::path& path, const std::string& command, const RunConfig& cfg,
                           Writer&& writer,
                           const nlohmann::json& details = nlohmann::json::object()) {
    write_file(path, writer);
    append_provenance(provenance_path_for(path), provenance_record(command, path, cfg, details));
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------

struct OverlapCmd {
    std::optional<double> u, waist_mm, focal_mm;
    std::string out;
    std::string out_dir;

    void attach(CLI::App* app) {
        auto* ou = app->add_option("--u", u, "focusing strength u = w_L / f");
        auto* ow = app->add_option("--waist-mm", waist_mm, "input beam waist (mm)");
        auto* of = app->add_option("--focal-mm", focal_mm, "lens focal length (mm)");
        ow->needs(of);
        of->needs(ow);
        ou->excludes(ow)->excludes(of);
        app->add_option("--out", out, "also write the CSV to this file");
        app->add_option("--out-dir", out_dir, "directory for a relative --out");
    }

    int run() const {
        FocusingGeometry geom = [&] {
            if (u) return FocusingGeometry::from_strength(*u);
            if (waist_mm && focal_mm) return FocusingGeometry::from_beam(*waist_mm, *focal_mm);
            throw ConfigError("overlap needs --u or both --waist-mm and --focal-mm");
        }();
        const auto res = overlap_from_focusing(geom);
        std::cout << fmt(res.eta_p) << ' ' << fmt(res.scattering_ratio) << '\n';
        write_overlap_csv(std::cout, {geom.focusing_strength()}, {res});
        if (!out.empty()) {
            RunConfig cfg;
            cfg.eta_p = res.eta_p;
            fs::path path(out);
            if (path.is_relative()) {
                const char* env = std::getenv(kOutEnv);
                if (!out_dir.empty()) path = fs::path(out_dir) / path;
                else if (env != nullptr && *env != '\0') path = fs::path(env) / path;
            }
            write_with_provenance(path, "overlap", cfg,
                                  [&](std::ostream& o) { write_overlap_csv(o, {geom.focusing_strength()}, {res}); },
                                  {{"u", geom.focusing_strength()}});
        }
        return kExitOk;
    }
};

struct SimulateCmd {
    Common common;
    std::string out;

    void attach(CLI::App* app) {
        common.attach(app);
        common.attach_atom(app);
        common.attach_pulse(app);
        common.attach_solver(app);
        app->add_option("--out", out, "trajectory CSV (default trajectory.csv)");
    }

    int run() const {
        const auto cfg = common.load();
        const auto traj = simulate_pulse(cfg.pulse(), cfg.atom(), cfg.solver);
        const auto path = common.resolve(cfg, out, "trajectory.csv");
        write_with_provenance(path, "simulate", cfg,
                              [&](std::ostream& o) { write_trajectory_csv(o, traj); });
        std::cout << "pe_max " << fmt(traj.p_e_max()) << " at t_ns " << fmt(traj.t_of_max())
                  << "\nwrote " << path.string() << '\n';
        return kExitOk;
    }
};

struct SweepCmd {
    Common common;
    std::string out;

    void attach(CLI::App* app) {
        common.attach(app);
        common.attach_atom(app);
        common.attach_solver(app);
        common.flag(app, "--shapes", "sweep.shapes", "comma-separated shapes (exp,square)");
        common.flag(app, "--tau-grid", "sweep.tau_grid", "comma-separated durations (ns)");
        common.flag(app, "--nbar-grid", "sweep.nbar_grid", "comma-separated photon numbers");
        common.flag(app, "--nbar-min", "sweep.nbar_min", "log grid lower end");
        common.flag(app, "--nbar-max", "sweep.nbar_max", "log grid upper end");
        common.flag(app, "--nbar-points", "sweep.nbar_points", "log grid size");
        app->add_option("--out", out, "sweep CSV (default sweep.csv)");
    }

    int run() const {
        const auto cfg = common.load();
        std::vector<SweepRow> rows;
        std::size_t failures = 0;
        for (auto shape : cfg.sweep.shapes) {
            SweepGrid grid;
            grid.shape = shape;
            grid.atom = cfg.atom();
            grid.tau_values = cfg.sweep.tau_grid;
            grid.nbar_values = cfg.sweep.nbars();
            const auto res = sweep_pe_max(grid, cfg.solver,
                                          cfg.threads ? cfg.threads : default_thread_count());
            rows.insert(rows.end(), res.rows.begin(), res.rows.end());
            for (const auto& f : res.failures) {
                std::cerr << "cell failed: " << to_string(shape) << " tau " << fmt(f.tau_ns)
                          << " nbar " << fmt(f.nbar) << ": " << f.message << '\n';
            }
            failures += res.failures.size();
        }
        const auto path = common.resolve(cfg, out, "sweep.csv");
        write_with_provenance(path, "sweep", cfg, [&](std::ostream& o) { write_sweep_csv(o, rows); },
                              {{"failures", failures}});
        std::cout << "wrote " << rows.size() << " rows to " << path.string() << '\n';
        return failures == 0 ? kExitOk : kExitNumerical;
    }
};

struct OptimizeCmd {
    Common common;
    std::string out;

    void attach(CLI::App* app) {
        common.attach(app);
        common.attach_atom(app);
        common.attach_pulse(app);
        common.attach_solver(app);
        common.flag(app, "--tau-lo", "sweep.tau_lo", "bracket lower end (ns)");
        common.flag(app, "--tau-hi", "sweep.tau_hi", "bracket upper end (ns)");
        common.flag(app, "--coarse-points", "sweep.coarse_points", "coarse scan size");
        common.flag(app, "--tau-tolerance", "sweep.tau_tolerance", "final bracket half-width (ns)");
        common.flag(app, "--objective", "sweep.objective", "peak or final");
        app->add_option("--out", out, "result CSV (default optimize_tau.csv)");
    }

    int run() const {
        const auto cfg = common.load();
        if (cfg.shape == PulseShape::Tabulated) throw ConfigError("optimize-tau needs exp or square");
        const auto atom = cfg.atom();
        const auto best = optimal_tau(cfg.shape, cfg.nbar, atom, {cfg.sweep.tau_lo, cfg.sweep.tau_hi},
                                      cfg.optimize_settings());
        const auto traj = simulate_pulse(PulseSpec::analytic(cfg.shape, best.tau_star, cfg.nbar),
                                         atom, cfg.solver);
        const SweepRow row{cfg.shape, best.tau_star, cfg.nbar, traj.p_e_max(), traj.t_of_max()};
        const auto path = common.resolve(cfg, out, "optimize_tau.csv");
        write_with_provenance(path, "optimize-tau", cfg,
                              [&](std::ostream& o) { write_sweep_csv(o, {row}); },
                              {{"objective_value", best.pe_max}, {"evaluations", best.evaluations}});
        write_sweep_csv(std::cout, {row});
        return kExitOk;
    }
};

struct DetectCmd {
    Common common;
    std::string traj_path;
    std::string out;
    std::string channels = "both";

    void attach(CLI::App* app) {
        app->add_option("--setup", common.config, "configuration file");
        common.attach(app);
        common.attach_seed(app);
        common.attach_atom(app);
        common.attach_pulse(app);
        common.attach_solver(app);
        common.attach_detection(app);
        app->add_option("--traj", traj_path,
                        "trajectory CSV; simulated from the configuration when absent");
        app->add_option("--channels", channels, "backward, forward or both")
            ->check(CLI::IsMember({"backward", "forward", "both"}));
        app->add_option("--out", out, "timestamp file (default timestamps.pats)");
    }

    int run() const {
        const auto cfg = common.load();
        const auto spec = cfg.pulse();
        const auto atom = cfg.atom();
        const unsigned threads = cfg.threads ? cfg.threads : default_thread_count();
        std::vector<TimestampRecord> records;
        std::vector<std::string> warnings;
        if (channels != "forward") {
            Trajectory traj;
            if (!traj_path.empty()) {
                traj = read_trajectory_csv(traj_path, spec.edge());
            } else {
                auto solver = cfg.solver;
                solver.lifetimes_after = std::max(solver.lifetimes_after, 6.0);
                traj = simulate_pulse(spec, atom, solver);
            }
            auto run = simulate_backward(traj, atom, cfg.detection, threads);
            records = std::move(run.records);
            warnings.insert(warnings.end(), run.warnings.begin(), run.warnings.end());
        }
        if (channels != "backward") {
            auto run = simulate_forward(spec, cfg.detection, threads);
            records.insert(records.end(), run.records.begin(), run.records.end());
            warnings.insert(warnings.end(), run.warnings.begin(), run.warnings.end());
        }
        std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
            if (a.pulse_index != b.pulse_index) return a.pulse_index < b.pulse_index;
            if (a.channel != b.channel) return a.channel < b.channel;
            return a.ticks < b.ticks;
        });
        print_warnings(warnings);
        const auto path = common.resolve(cfg, out, "timestamps.pats");
        write_timestamps(records, path);
        append_provenance(provenance_path_for(path),
                          provenance_record("detect", path, cfg,
                                            {{"channels", channels},
                                             {"trajectory", traj_path},
                                             {"records", records.size()}}));
        std::cout << "wrote " << records.size() << " records to " << path.string() << '\n';
        return kExitOk;
    }
};

std::optional<TimeRange> data_range(const std::vector<TimestampRecord>& records, Channel channel,
                                    double w) {
    std::optional<std::int32_t> lo, hi;
    for (const auto& r : records) {
        if (r.channel != channel) continue;
        lo = lo ? std::min(*lo, r.ticks) : r.ticks;
        hi = hi ? std::max(*hi, r.ticks) : r.ticks;
    }
    if (!lo) return std::nullopt;
    const double a = std::floor(*lo / static_cast<double>(kTicksPerNs) / w) * w;
    const double b = (std::floor(*hi / static_cast<double>(kTicksPerNs) / w) + 1.0) * w;
    return TimeRange{a, b};
}

struct AnalyzeCmd {
    Common common;
    std::string input;
    std::vector<double> rise_window;

    void attach(CLI::App* app) {
        app->add_option("input", input, "timestamp file")->required();
        app->add_option("--setup", common.config, "configuration file");
        common.attach(app);
        common.attach_atom(app);
        common.attach_detection(app);
        common.flag(app, "--hist-lo", "analysis.hist_lo", "backward histogram start (ns)");
        common.flag(app, "--hist-hi", "analysis.hist_hi", "backward histogram end (ns)");
        common.flag(app, "--fit-lo", "analysis.fit_lo", "decay fit window start (ns)");
        common.flag(app, "--fit-hi", "analysis.fit_hi", "decay fit window end (ns)");
        common.flag(app, "--fit-weighting", "analysis.fit_weighting", "poisson or neyman");
        app->add_option("--rise-window", rise_window, "forward rise fit window: LO HI (ns)")
            ->expected(2);
    }

    int run() const {
        const auto cfg = common.load();
        const auto records = read_timestamps(input);
        const double w = cfg.detection.bin_width_ns;
        const auto& setup = cfg.detection;
        const auto dir = common.output_dir(cfg);
        nlohmann::json report = {{"input", input}, {"records", records.size()},
                                 {"n_pulses", setup.n_pulses}};
        std::vector<std::string> warnings;

        const auto brange = data_range(records, Channel::Backward, w);
        if (brange || cfg.analysis.hist_lo) {
            const TimeRange range{cfg.analysis.hist_lo.value_or(brange ? brange->lo : 0.0),
                                  cfg.analysis.hist_hi.value_or(brange ? brange->hi : w)};
            const auto hist = histogram(records, Channel::Backward, w, range, setup.n_pulses);
            const auto series = reconstruct_pe(hist, cfg.atom(), setup);
            write_with_provenance(dir / "backward_hist.csv", "analyze", cfg,
                                  [&](std::ostream& o) { write_histogram_csv(o, hist); });
            write_with_provenance(dir / "pe_series.csv", "analyze", cfg,
                                  [&](std::ostream& o) { write_pe_csv(o, series); });
            report["backward_counts"] = hist.total();
            report["backward_dropped"] = hist.dropped;
            warnings.insert(warnings.end(), hist.warnings.begin(), hist.warnings.end());
            try {
                const auto def = default_decay_window();
                const auto fit = fit_exponential(hist,
                                                 {cfg.analysis.fit_lo.value_or(def.t0),
                                                  cfg.analysis.fit_hi.value_or(def.t1)},
                                                 FitDirection::Decaying, cfg.analysis.fit_weighting);
                report["decay_fit"] = to_json(fit);
            } catch (const DomainError& e) {
                report["decay_fit_error"] = e.what();
            }
        }
        const auto frange = data_range(records, Channel::Forward, w);
        if (frange) {
            const auto hist = histogram(records, Channel::Forward, w, *frange, setup.n_pulses);
            write_with_provenance(dir / "forward_hist.csv", "analyze", cfg,
                                  [&](std::ostream& o) { write_histogram_csv(o, hist); });
            const auto est = estimate_nbar(hist, setup);
            report["nbar_estimate"] = to_json(est);
            warnings.insert(warnings.end(), est.warnings.begin(), est.warnings.end());
            if (!rise_window.empty()) {
                try {
                    report["rise_fit"] = to_json(fit_exponential(
                        hist, {rise_window[0], rise_window[1]}, FitDirection::Rising,
                        cfg.analysis.fit_weighting));
                } catch (const DomainError& e) {
                    report["rise_fit_error"] = e.what();
                }
            }
        }
        if (!brange && !frange) warnings.push_back("timestamp file holds no records");
        report["warnings"] = warnings;
        print_warnings(warnings);
        write_with_provenance(dir / "fit_report.json", "analyze", cfg,
                              [&](std::ostream& o) { o << report.dump(2) << '\n'; });
        std::cout << report.dump(2) << '\n';
        return kExitOk;
    }
};

struct RoundtripCmd {
    Common common;
    bool write_outputs = false;

    void attach(CLI::App* app) {
        common.attach(app);
        common.attach_seed(app);
        common.attach_atom(app);
        common.attach_pulse(app);
        common.attach_solver(app);
        common.attach_detection(app);
        app->add_flag("--write", write_outputs, "also write histograms and the P_e series");
    }

    int run() const {
        const auto cfg = common.load();
        const auto r = run_roundtrip(cfg);
        const auto line = [](bool ok, const std::string& text) {
            std::cout << (ok ? "PASS " : "FAIL ") << text << '\n';
        };
        line(r.nbar_ok, "nbar estimate " + fmt(r.nbar.nbar) + " +- " + fmt(r.nbar.std_error) +
                            " vs true " + fmt(r.true_nbar) + " (2 sigma)");
        line(r.peak_ok, "reconstructed peak " + fmt(r.reconstructed_peak) + " at " +
                            fmt(r.reconstructed_peak_t) + " ns vs solver pe_max " +
                            fmt(r.solver_pe_max) + " (3 x combined sigma " +
                            fmt(r.combined_sigma) + ")");
        if (r.decay_fit) {
            std::cout << "info decay fit tau " << fmt(r.decay_fit->tau) << " +- "
                      << fmt(r.decay_fit->tau_err) << " ns\n";
        }
        if (r.rise_fit) {
            std::cout << "info rise fit tau " << fmt(r.rise_fit->tau) << " +- "
                      << fmt(r.rise_fit->tau_err) << " ns\n";
        }
        print_warnings(to_json(r)["warnings"].get<std::vector<std::string>>());
        if (write_outputs) {
            const auto dir = common.output_dir(cfg);
            write_with_provenance(dir / "roundtrip_backward_hist.csv", "roundtrip", cfg,
                                  [&](std::ostream& o) { write_histogram_csv(o, r.backward_hist); });
            write_with_provenance(dir / "roundtrip_forward_hist.csv", "roundtrip", cfg,
                                  [&](std::ostream& o) { write_histogram_csv(o, r.forward_hist); });
            write_with_provenance(dir / "roundtrip_pe.csv", "roundtrip", cfg,
                                  [&](std::ostream& o) { write_pe_csv(o, r.series); });
            write_with_provenance(dir / "roundtrip_report.json", "roundtrip", cfg,
                                  [&](std::ostream& o) { o << to_json(r).dump(2) << '\n'; });
        }
        std::cout << (r.passed() ? "roundtrip PASSED" : "roundtrip FAILED") << '\n';
        return r.passed() ? kExitOk : kExitNumerical;
    }
};

struct FigureCmd {
    Common common;
    std::string name;
    bool full_scale = false;

    void attach(CLI::App* app) {
        app->add_option("name", name, "fig2, fig3, fig4, fig5 or fig6")->required();
        common.attach(app);
        common.attach_seed(app);
        common.attach_solver(app);
        common.flag(app, "--n-pulses", "detection.n_pulses", "ignored; see --full-scale");
        app->add_flag("--full-scale", full_scale, "experimental pulse counts instead of 1e6");
    }

    int run() const {
        const auto cfg = common.load();
        const auto dir = common.output_dir(cfg) / name;
        const auto out = run_figure(name, cfg, dir, full_scale);
        for (const auto& f : out.files) std::cout << "wrote " << f.string() << '\n';
        return kExitOk;
    }
};

int dispatch(int argc, char** argv) {
    CLI::App app{"Two-level atom excitation by single-photon-scale pulses"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    OverlapCmd overlap;
    SimulateCmd simulate;
    SweepCmd sweep;
    OptimizeCmd optimize;
    DetectCmd detect;
    AnalyzeCmd analyze;
    RoundtripCmd roundtrip;
    FigureCmd figure;

    overlap.attach(app.add_subcommand("overlap", "spatial overlap eta_p from focusing strength"));
    simulate.attach(app.add_subcommand("simulate", "integrate the Bloch equations for one pulse"));
    sweep.attach(app.add_subcommand("sweep", "P_e,max over a (tau, <N>) grid"));
    optimize.attach(app.add_subcommand("optimize-tau", "pulse duration maximizing P_e,max"));
    detect.attach(app.add_subcommand("detect", "Monte Carlo photodetection timestamps"));
    analyze.attach(app.add_subcommand("analyze", "histograms, P_e reconstruction and fits"));
    roundtrip.attach(app.add_subcommand("roundtrip", "simulate, detect, analyze and compare"));
    figure.attach(app.add_subcommand("figure", "figure data recipes"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (app.got_subcommand("overlap")) return overlap.run();
        if (app.got_subcommand("simulate")) return simulate.run();
        if (app.got_subcommand("sweep")) return sweep.run();
        if (app.got_subcommand("optimize-tau")) return optimize.run();
        if (app.got_subcommand("detect")) return detect.run();
        if (app.got_subcommand("analyze")) return analyze.run();
        if (app.got_subcommand("roundtrip")) return roundtrip.run();
        if (app.got_subcommand("figure")) return figure.run();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UnsupportedParameter& e) {
        std::cerr << "unsupported: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
    return kExitConfig;
}

} // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }

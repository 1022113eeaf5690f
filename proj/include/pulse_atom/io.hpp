#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pulse_atom/analysis.hpp"
#include "pulse_atom/config.hpp"
#include "pulse_atom/errors.hpp"
#include "pulse_atom/optics.hpp"
#include "pulse_atom/sweep.hpp"
#include "pulse_atom/trajectory.hpp"

namespace pulse_atom {

inline constexpr const char* kToolVersion = "pulse-atom-sim 1.0.0";

inline std::ofstream open_output(const std::filesystem::path& path,
                                 std::ios::openmode mode = std::ios::out | std::ios::trunc) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, mode | std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string fmt(double v) { return format_double(v); }

inline void write_overlap_csv(std::ostream& out, const std::vector<double>& u,
                              const std::vector<OverlapResult>& rows) {
    out << "u,eta_p,R_sc\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << fmt(u[i]) << ',' << fmt(rows[i].eta_p) << ',' << fmt(rows[i].scattering_ratio)
            << '\n';
    }
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "t_ns,p_e,coherence\n";
    const auto& t = traj.times();
    const auto& p = traj.p_e();
    const auto& c = traj.coherence();
    for (std::size_t i = 0; i < t.size(); ++i) {
        out << fmt(t[i]) << ',' << fmt(p[i]) << ',' << fmt(c[i]) << '\n';
    }
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path, double pulse_end) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trajectory '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("t_ns,p_e", 0) != 0) {
        throw IoError(path.string() + ": expected header 't_ns,p_e,coherence'");
    }
    std::vector<double> t, p, c;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double a = 0, b = 0, d = 0;
        char c1 = 0, c2 = 0;
        if (!(ss >> a >> c1 >> b >> c2 >> d) || c1 != ',' || c2 != ',') {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        }
        t.push_back(a);
        p.push_back(b);
        c.push_back(d);
    }
    try {
        return Trajectory::from_samples(std::move(t), std::move(p), std::move(c), pulse_end);
    } catch (const DomainError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "shape,tau_ns,nbar,pe_max,t_of_max_ns\n";
    for (const auto& r : rows) {
        out << to_string(r.shape) << ',' << fmt(r.tau_ns) << ',' << fmt(r.nbar) << ','
            << fmt(r.pe_max) << ',' << fmt(r.t_of_max_ns) << '\n';
    }
}

inline void write_histogram_csv(std::ostream& out, const Histogram& h) {
    out << "bin_center_ns,counts\n";
    for (std::size_t i = 0; i < h.size(); ++i) out << fmt(h.bin_center(i)) << ',' << h.counts[i] << '\n';
}

inline void write_pe_csv(std::ostream& out, const PeSeries& s) {
    out << "bin_center_ns,p_e,p_e_err\n";
    for (std::size_t i = 0; i < s.p_e.size(); ++i) {
        out << fmt(s.bin_centers[i]) << ',' << fmt(s.p_e[i]) << ',' << fmt(s.p_e_err[i]) << '\n';
    }
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
    auto out = open_output(path);
    writer(out);
    finish_output(out, path);
}

inline nlohmann::json to_json(const ExpFit& f) {
    return {{"amplitude", f.amplitude},
            {"amplitude_err", f.amplitude_err},
            {"tau_ns", f.tau},
            {"tau_err_ns", f.tau_err},
            {"window_ns", {f.window.t0, f.window.t1}},
            {"residual_norm", f.residual_norm},
            {"iterations", f.iterations},
            {"bins_used", f.bins_used}};
}

inline nlohmann::json to_json(const NbarEstimate& e) {
    return {{"nbar", e.nbar},
            {"std_error", e.std_error},
            {"detection_fraction", e.detection_fraction},
            {"one_sided", e.one_sided},
            {"warnings", e.warnings}};
}

/// One JSON line naming an output file and every parameter behind it.
inline nlohmann::json provenance_record(const std::string& command,
                                        const std::filesystem::path& output,
                                        const RunConfig& cfg,
                                        const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : describe(cfg)) params[k] = v;
    nlohmann::json rec = {{"tool", kToolVersion},
                          {"command", command},
                          {"output", output.filename().string()},
                          {"seed", cfg.seed()},
                          {"parameters", params}};
    if (!extra.empty()) rec["details"] = extra;
    return rec;
}

inline void append_provenance(const std::filesystem::path& log, const nlohmann::json& record) {
    auto out = open_output(log, std::ios::out | std::ios::app);
    out << record.dump() << '\n';
    finish_output(out, log);
}

/// Provenance log written next to an output file.
inline std::filesystem::path provenance_path_for(const std::filesystem::path& output) {
    return output.parent_path() / "provenance.jsonl";
}

} // namespace pulse_atom

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pulse_atom/analysis.hpp"
#include "pulse_atom/atom.hpp"
#include "pulse_atom/detection.hpp"
#include "pulse_atom/errors.hpp"
#include "pulse_atom/pulse.hpp"
#include "pulse_atom/sweep.hpp"

namespace pulse_atom {

struct SweepConfig {
    std::vector<PulseShape> shapes{PulseShape::RisingExponential, PulseShape::Square};
    std::vector<double> tau_grid = default_sweep_taus();
    std::vector<double> nbar_grid; // explicit list; empty means log-spaced
    double nbar_min = 0.1;
    double nbar_max = 2000.0;
    std::size_t nbar_points = 41;
    double tau_lo = 2.0;
    double tau_hi = 300.0;
    std::size_t coarse_points = 16;
    double tau_tolerance = 0.5;
    TauObjective objective = TauObjective::PeakProbability;

    std::vector<double> nbars() const {
        return nbar_grid.empty() ? log_spaced(nbar_min, nbar_max, nbar_points) : nbar_grid;
    }
};

struct AnalysisConfig {
    std::optional<double> hist_lo;
    std::optional<double> hist_hi;
    std::optional<double> fit_lo;
    std::optional<double> fit_hi;
    FitWeighting fit_weighting = FitWeighting::PoissonLikelihood;
};

struct RunConfig {
    // [atom]
    double lifetime_ns = kDefaultLifetimeNs;
    double eta_p = kDefaultEtaP;
    double detuning = 0.0;
    bool decay = true;
    // [pulse]
    PulseShape shape = PulseShape::RisingExponential;
    double tau_ns = 15.0;
    double nbar = 110.0;
    double edge_ns = 0.0;
    std::string envelope_file;
    // [detection], including the seed
    DetectionSetup detection{};
    // [solver]; the window covers the 5 lifetimes of decay detection needs.
    SolverSettings solver{.dt_max = 0.1, .lifetimes_after = 6.0, .bloch = {}};
    // [sweep]
    SweepConfig sweep{};
    // [analysis]
    AnalysisConfig analysis{};
    // [run]
    std::string output_dir;
    unsigned threads = 0;

    std::uint64_t seed() const { return detection.seed; }

    AtomParams atom() const {
        auto a = AtomParams::from_lifetime(lifetime_ns, eta_p, detuning);
        a.decay_enabled = decay;
        return a;
    }

    OptimizeSettings optimize_settings() const {
        OptimizeSettings s;
        s.coarse_points = sweep.coarse_points;
        s.tau_tolerance = sweep.tau_tolerance;
        s.objective = sweep.objective;
        s.solver = solver;
        return s;
    }

    PulseSpec pulse() const;
    void validate() const;
};

inline std::vector<EnvelopeSample> read_envelope_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open envelope file '" + path + "'");
    std::vector<EnvelopeSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        EnvelopeSample s;
        char comma = 0;
        if (!(ss >> s.t_ns >> comma >> s.amplitude) || comma != ',') {
            if (line_no == 1) continue; // header
            throw IoError(path + ":" + std::to_string(line_no) + ": expected 't_ns,amplitude'");
        }
        out.push_back(s);
    }
    return out;
}

inline PulseSpec RunConfig::pulse() const {
    if (shape == PulseShape::Tabulated) {
        if (envelope_file.empty()) throw ConfigError("shape = tabulated needs envelope_file");
        return PulseSpec::tabulated(read_envelope_csv(envelope_file), nbar);
    }
    return PulseSpec::analytic(shape, tau_ns, nbar, edge_ns);
}

inline void RunConfig::validate() const {
    try {
        atom().validate();
        detection.validate();
        if (shape != PulseShape::Tabulated && !(tau_ns > 0.0)) throw DomainError("tau must be > 0");
        if (!(nbar >= 0.0)) throw DomainError("nbar must be >= 0");
        if (!(solver.dt_max > 0.0)) throw DomainError("dt_max must be > 0");
        if (!(solver.bloch.rel_tol > 0.0 && solver.bloch.abs_tol > 0.0)) {
            throw DomainError("solver tolerances must be > 0");
        }
        if (!(solver.lifetimes_after > 0.0)) throw DomainError("lifetimes_after must be > 0");
        if (sweep.shapes.empty()) throw DomainError("sweep shapes must not be empty");
        for (auto s : sweep.shapes) {
            if (s == PulseShape::Tabulated) throw DomainError("sweeps need analytic shapes");
        }
        SweepGrid grid;
        grid.nbar_values = sweep.nbars();
        grid.tau_values = sweep.tau_grid;
        grid.validate();
        if (!(sweep.tau_lo > 0.0 && sweep.tau_hi > sweep.tau_lo)) {
            throw DomainError("optimizer bracket needs 0 < tau_lo < tau_hi");
        }
        if (sweep.coarse_points < 3) throw DomainError("coarse_points must be >= 3");
        if (!(sweep.tau_tolerance > 0.0)) throw DomainError("tau_tolerance must be > 0");
        if (analysis.hist_lo && analysis.hist_hi && !(*analysis.hist_hi > *analysis.hist_lo)) {
            throw DomainError("hist_hi must exceed hist_lo");
        }
        if (analysis.fit_lo && analysis.fit_hi && !(*analysis.fit_hi > *analysis.fit_lo)) {
            throw DomainError("fit_hi must exceed fit_lo");
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace config_detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(std::string_view v) {
    v = trim(v);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
        throw DomainError("expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

inline std::uint64_t to_count(std::string_view v) {
    const double d = to_double(v);
    if (!(d >= 0.0) || d != std::floor(d) || d > 1.8e19) {
        throw DomainError("expected a non-negative integer, got '" + std::string(trim(v)) + "'");
    }
    return static_cast<std::uint64_t>(d);
}

inline bool to_bool(std::string_view v) {
    v = trim(v);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw DomainError("expected a boolean, got '" + std::string(v) + "'");
}

inline std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = v.find(',');
        const auto item = trim(v.substr(0, comma));
        if (item.empty()) throw DomainError("empty list element");
        out.push_back(item);
        if (comma == std::string_view::npos) break;
        v = v.substr(comma + 1);
    }
    return out;
}

inline std::vector<double> to_doubles(std::string_view v) {
    std::vector<double> out;
    for (auto item : split_list(v)) out.push_back(to_double(item));
    return out;
}

struct KeySpec {
    std::string_view section;
    std::string_view name;
    std::function<void(RunConfig&, std::string_view)> apply;
};

inline const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = {
        {"run", "seed", [](RunConfig& c, auto v) { c.detection.seed = to_count(v); }},
        {"run", "output_dir", [](RunConfig& c, auto v) { c.output_dir = std::string(trim(v)); }},
        {"run", "threads",
         [](RunConfig& c, auto v) { c.threads = static_cast<unsigned>(to_count(v)); }},

        {"atom", "lifetime_ns", [](RunConfig& c, auto v) { c.lifetime_ns = to_double(v); }},
        {"atom", "eta_p", [](RunConfig& c, auto v) { c.eta_p = to_double(v); }},
        {"atom", "detuning", [](RunConfig& c, auto v) { c.detuning = to_double(v); }},
        {"atom", "decay", [](RunConfig& c, auto v) { c.decay = to_bool(v); }},

        {"pulse", "shape", [](RunConfig& c, auto v) { c.shape = parse_pulse_shape(trim(v)); }},
        {"pulse", "tau", [](RunConfig& c, auto v) { c.tau_ns = to_double(v); }},
        {"pulse", "nbar", [](RunConfig& c, auto v) { c.nbar = to_double(v); }},
        {"pulse", "edge", [](RunConfig& c, auto v) { c.edge_ns = to_double(v); }},
        {"pulse", "envelope_file",
         [](RunConfig& c, auto v) { c.envelope_file = std::string(trim(v)); }},

        {"detection", "eta_r", [](RunConfig& c, auto v) { c.detection.eta_r = to_double(v); }},
        {"detection", "eta_l", [](RunConfig& c, auto v) { c.detection.eta_l = to_double(v); }},
        {"detection", "eta_l_uncertainty",
         [](RunConfig& c, auto v) { c.detection.eta_l_uncertainty = to_double(v); }},
        {"detection", "nd2_db", [](RunConfig& c, auto v) { c.detection.nd2_db = to_double(v); }},
        {"detection", "dead_time",
         [](RunConfig& c, auto v) { c.detection.dead_time_ns = to_double(v); }},
        {"detection", "bin_width",
         [](RunConfig& c, auto v) { c.detection.bin_width_ns = to_double(v); }},
        {"detection", "pulse_period",
         [](RunConfig& c, auto v) { c.detection.pulse_period_ns = to_double(v); }},
        {"detection", "n_pulses",
         [](RunConfig& c, auto v) { c.detection.n_pulses = to_count(v); }},
        {"detection", "dark_rate",
         [](RunConfig& c, auto v) { c.detection.dark_rate_per_ns = to_double(v); }},

        {"solver", "dt_max", [](RunConfig& c, auto v) { c.solver.dt_max = to_double(v); }},
        {"solver", "rel_tol", [](RunConfig& c, auto v) { c.solver.bloch.rel_tol = to_double(v); }},
        {"solver", "abs_tol", [](RunConfig& c, auto v) { c.solver.bloch.abs_tol = to_double(v); }},
        {"solver", "lifetimes_after",
         [](RunConfig& c, auto v) { c.solver.lifetimes_after = to_double(v); }},

        {"sweep", "shapes",
         [](RunConfig& c, auto v) {
             c.sweep.shapes.clear();
             for (auto item : split_list(v)) c.sweep.shapes.push_back(parse_pulse_shape(item));
         }},
        {"sweep", "tau_grid", [](RunConfig& c, auto v) { c.sweep.tau_grid = to_doubles(v); }},
        {"sweep", "nbar_grid", [](RunConfig& c, auto v) { c.sweep.nbar_grid = to_doubles(v); }},
        {"sweep", "nbar_min", [](RunConfig& c, auto v) { c.sweep.nbar_min = to_double(v); }},
        {"sweep", "nbar_max", [](RunConfig& c, auto v) { c.sweep.nbar_max = to_double(v); }},
        {"sweep", "nbar_points",
         [](RunConfig& c, auto v) { c.sweep.nbar_points = static_cast<std::size_t>(to_count(v)); }},
        {"sweep", "tau_lo", [](RunConfig& c, auto v) { c.sweep.tau_lo = to_double(v); }},
        {"sweep", "tau_hi", [](RunConfig& c, auto v) { c.sweep.tau_hi = to_double(v); }},
        {"sweep", "coarse_points",
         [](RunConfig& c, auto v) {
             c.sweep.coarse_points = static_cast<std::size_t>(to_count(v));
         }},
        {"sweep", "tau_tolerance",
         [](RunConfig& c, auto v) { c.sweep.tau_tolerance = to_double(v); }},
        {"sweep", "objective",
         [](RunConfig& c, auto v) {
             const auto s = trim(v);
             if (s == "peak") c.sweep.objective = TauObjective::PeakProbability;
             else if (s == "final") c.sweep.objective = TauObjective::FinalProbability;
             else throw DomainError("objective must be 'peak' or 'final'");
         }},

        {"analysis", "hist_lo", [](RunConfig& c, auto v) { c.analysis.hist_lo = to_double(v); }},
        {"analysis", "hist_hi", [](RunConfig& c, auto v) { c.analysis.hist_hi = to_double(v); }},
        {"analysis", "fit_lo", [](RunConfig& c, auto v) { c.analysis.fit_lo = to_double(v); }},
        {"analysis", "fit_hi", [](RunConfig& c, auto v) { c.analysis.fit_hi = to_double(v); }},
        {"analysis", "fit_weighting",
         [](RunConfig& c, auto v) {
             const auto s = trim(v);
             if (s == "poisson") c.analysis.fit_weighting = FitWeighting::PoissonLikelihood;
             else if (s == "neyman") c.analysis.fit_weighting = FitWeighting::Neyman;
             else throw DomainError("fit_weighting must be 'poisson' or 'neyman'");
         }},
    };
    return table;
}

/// Finds a key by "section.name", by name inside a section, or by bare name.
inline const KeySpec* find_key(std::string_view section, std::string_view name) {
    if (section.empty()) {
        const auto dot = name.find('.');
        if (dot != std::string_view::npos) {
            section = name.substr(0, dot);
            name = name.substr(dot + 1);
        }
    }
    for (const auto& k : key_table()) {
        if (k.name == name && (section.empty() || k.section == section)) return &k;
    }
    return nullptr;
}

inline bool known_section(std::string_view s) {
    for (const auto& k : key_table()) {
        if (k.section == s) return true;
    }
    return false;
}

} // namespace config_detail

/// A command-line setting, applied after the file.
struct ConfigOverride {
    std::string key; // "name" or "section.name"
    std::string value;
};

/// Applies "key = value" text. `origin` prefixes error messages.
inline void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& origin) {
    using namespace config_detail;
    std::string section;
    std::map<std::string, std::size_t> seen;
    std::string raw;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!known_section(section)) fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value'");
        const auto name = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (name.empty()) fail("missing key name");
        const KeySpec* key = find_key(section, name);
        if (key == nullptr) {
            fail("unknown key '" + std::string(name) + "'" +
                 (section.empty() ? std::string() : " in [" + section + "]"));
        }
        const std::string full = std::string(key->section) + "." + std::string(key->name);
        if (auto it = seen.find(full); it != seen.end()) {
            fail("duplicate key '" + std::string(name) + "' (first set on line " +
                 std::to_string(it->second) + ")");
        }
        seen.emplace(full, line_no);
        try {
            key->apply(cfg, value);
        } catch (const DomainError& e) {
            fail("key '" + std::string(name) + "': " + e.what());
        }
    }
}

inline void apply_overrides(RunConfig& cfg, const std::vector<ConfigOverride>& overrides) {
    for (const auto& o : overrides) {
        const auto* key = config_detail::find_key({}, o.key);
        if (key == nullptr) throw ConfigError("unknown setting '" + o.key + "'");
        try {
            key->apply(cfg, o.value);
        } catch (const DomainError& e) {
            throw ConfigError("setting '" + o.key + "': " + e.what());
        }
    }
}

/// Defaults, then the file (if any), then overrides; validated on return.
inline RunConfig parse_config(const std::optional<std::string>& path,
                              const std::vector<ConfigOverride>& overrides = {}) {
    RunConfig cfg;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot open config file '" + *path + "'");
        apply_config_text(cfg, in, *path);
    }
    apply_overrides(cfg, overrides);
    cfg.validate();
    return cfg;
}

inline RunConfig parse_config_string(const std::string& text,
                                     const std::vector<ConfigOverride>& overrides = {}) {
    RunConfig cfg;
    std::istringstream in(text);
    apply_config_text(cfg, in, "<config>");
    apply_overrides(cfg, overrides);
    cfg.validate();
    return cfg;
}

/// All settings as "section.name" -> value text, for provenance.
inline std::map<std::string, std::string> describe(const RunConfig& c) {
    auto num = [](double v) { return format_double(v); };
    auto list = [&](const std::vector<double>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + num(v[i]);
        return out;
    };
    std::string shapes;
    for (std::size_t i = 0; i < c.sweep.shapes.size(); ++i) {
        shapes += (i ? "," : "") + std::string(to_string(c.sweep.shapes[i]));
    }
    std::map<std::string, std::string> m{
        {"run.seed", std::to_string(c.detection.seed)},
        {"run.output_dir", c.output_dir},
        {"atom.lifetime_ns", num(c.lifetime_ns)},
        {"atom.eta_p", num(c.eta_p)},
        {"atom.detuning", num(c.detuning)},
        {"atom.decay", c.decay ? "true" : "false"},
        {"pulse.shape", std::string(to_string(c.shape))},
        {"pulse.tau", num(c.tau_ns)},
        {"pulse.nbar", num(c.nbar)},
        {"pulse.edge", num(c.edge_ns)},
        {"pulse.envelope_file", c.envelope_file},
        {"detection.eta_r", num(c.detection.eta_r)},
        {"detection.eta_l", num(c.detection.eta_l)},
        {"detection.eta_l_uncertainty", num(c.detection.eta_l_uncertainty)},
        {"detection.nd2_db", num(c.detection.nd2_db)},
        {"detection.dead_time", num(c.detection.dead_time_ns)},
        {"detection.bin_width", num(c.detection.bin_width_ns)},
        {"detection.pulse_period", num(c.detection.pulse_period_ns)},
        {"detection.n_pulses", std::to_string(c.detection.n_pulses)},
        {"detection.dark_rate", num(c.detection.dark_rate_per_ns)},
        {"solver.dt_max", num(c.solver.dt_max)},
        {"solver.rel_tol", num(c.solver.bloch.rel_tol)},
        {"solver.abs_tol", num(c.solver.bloch.abs_tol)},
        {"solver.lifetimes_after", num(c.solver.lifetimes_after)},
        {"sweep.shapes", shapes},
        {"sweep.tau_grid", list(c.sweep.tau_grid)},
        {"sweep.nbar_grid", list(c.sweep.nbars())},
        {"sweep.tau_lo", num(c.sweep.tau_lo)},
        {"sweep.tau_hi", num(c.sweep.tau_hi)},
        {"sweep.coarse_points", std::to_string(c.sweep.coarse_points)},
        {"sweep.tau_tolerance", num(c.sweep.tau_tolerance)},
        {"sweep.objective",
         c.sweep.objective == TauObjective::PeakProbability ? "peak" : "final"},
        {"analysis.fit_weighting",
         c.analysis.fit_weighting == FitWeighting::PoissonLikelihood ? "poisson" : "neyman"},
    };
    if (c.analysis.hist_lo) m["analysis.hist_lo"] = num(*c.analysis.hist_lo);
    if (c.analysis.hist_hi) m["analysis.hist_hi"] = num(*c.analysis.hist_hi);
    if (c.analysis.fit_lo) m["analysis.fit_lo"] = num(*c.analysis.fit_lo);
    if (c.analysis.fit_hi) m["analysis.fit_hi"] = num(*c.analysis.fit_hi);
    return m;
}

} // namespace pulse_atom

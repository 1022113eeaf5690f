#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "pulse_atom/config.hpp"

using namespace pulse_atom;

TEST(Config, MinimalFileFillsDefaults) {
    const auto cfg = parse_config_string("shape = exp\ntau = 15\nnbar = 110\n");
    EXPECT_EQ(cfg.shape, PulseShape::RisingExponential);
    EXPECT_DOUBLE_EQ(cfg.tau_ns, 15.0);
    EXPECT_DOUBLE_EQ(cfg.nbar, 110.0);
    EXPECT_DOUBLE_EQ(cfg.lifetime_ns, 26.24);
    EXPECT_DOUBLE_EQ(cfg.eta_p, 0.03);
    EXPECT_DOUBLE_EQ(cfg.detection.eta_r, 0.30);
    EXPECT_DOUBLE_EQ(cfg.detection.eta_l, 0.30);
    EXPECT_DOUBLE_EQ(cfg.detection.dead_time_ns, 3000.0);
    EXPECT_DOUBLE_EQ(cfg.detection.pulse_period_ns, 12000.0);
    EXPECT_NEAR(cfg.atom().gamma, 1.0 / 26.24, 1e-15);
}

TEST(Config, UnknownKeyIsNamed) {
    try {
        parse_config_string("[sweep]\n\ntaus = 5, 15\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("taus"), std::string::npos) << msg;
        EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    }
    EXPECT_THROW(parse_config_string("taus = 5"), ConfigError);
}

TEST(Config, FlagOverridesFile) {
    const auto cfg = parse_config_string("[atom]\neta_p = 0.03\n", {{"eta_p", "0.027"}});
    EXPECT_DOUBLE_EQ(cfg.eta_p, 0.027);
    const auto qualified = parse_config_string("eta_p = 0.03\n", {{"atom.eta_p", "0.025"}});
    EXPECT_DOUBLE_EQ(qualified.eta_p, 0.025);
}

TEST(Config, SectionsAndLists) {
    const auto cfg = parse_config_string(R"(# grid
[sweep]
shapes = square
tau_grid = 10, 20 ,40
nbar_grid = 1,2,3
objective = final
[detection]
n_pulses = 2.1034e6   ; desk scale is 1e6
nd2_db = -40
[run]
seed = 99
)");
    ASSERT_EQ(cfg.sweep.shapes.size(), 1u);
    EXPECT_EQ(cfg.sweep.shapes[0], PulseShape::Square);
    EXPECT_EQ(cfg.sweep.tau_grid, (std::vector<double>{10, 20, 40}));
    EXPECT_EQ(cfg.sweep.nbars(), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(cfg.sweep.objective, TauObjective::FinalProbability);
    EXPECT_EQ(cfg.detection.n_pulses, 2'103'400u);
    EXPECT_EQ(cfg.seed(), 99u);
    EXPECT_DOUBLE_EQ(cfg.detection.nd2_db, -40.0);
}

TEST(Config, KeyInWrongSectionRejected) {
    EXPECT_THROW(parse_config_string("[atom]\nnbar = 3\n"), ConfigError);
    EXPECT_THROW(parse_config_string("[nonsense]\n"), ConfigError);
}

TEST(Config, BadValuesCarryLineNumbers) {
    try {
        parse_config_string("tau = 15\nnbar = lots\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_config_string("n_pulses = 1.5"), ConfigError);
    EXPECT_THROW(parse_config_string("decay = maybe"), ConfigError);
    EXPECT_THROW(parse_config_string("tau = 15\ntau = 20\n"), ConfigError);
    EXPECT_THROW(parse_config_string("just words\n"), ConfigError);
}

TEST(Config, ValidationRunsBeforeWork) {
    EXPECT_THROW(parse_config_string("eta_r = 1.5"), ConfigError);
    EXPECT_THROW(parse_config_string("tau = -1"), ConfigError);
    EXPECT_THROW(parse_config_string("lifetime_ns = 0"), ConfigError);
    EXPECT_THROW(parse_config_string("tau_lo = 50\ntau_hi = 10\n"), ConfigError);
    EXPECT_THROW(parse_config_string("", {{"dead_time", "-1"}}), ConfigError);
    EXPECT_THROW(parse_config_string("", {{"bogus", "1"}}), ConfigError);
}

TEST(Config, MissingFile) {
    EXPECT_THROW(parse_config(std::string("/nonexistent/cfg.ini")), ConfigError);
}

TEST(Config, ReadsFileAndTabulatedEnvelope) {
    const std::string env = testing::TempDir() + "env.csv";
    {
        std::ofstream out(env);
        out << "t_ns,amplitude\n-10,0\n-5,1\n0,1\n";
    }
    const std::string path = testing::TempDir() + "cfg.ini";
    {
        std::ofstream out(path);
        out << "[pulse]\nshape = tabulated\nnbar = 4\nenvelope_file = " << env << "\n";
    }
    const auto cfg = parse_config(path);
    const auto spec = cfg.pulse();
    EXPECT_EQ(spec.shape(), PulseShape::Tabulated);
    EXPECT_NEAR(spec.cumulative_intensity(spec.edge()), 1.0, 1e-12);
    std::remove(path.c_str());
    std::remove(env.c_str());
}

TEST(Config, DescribeListsEverySetting) {
    const auto cfg = parse_config_string("seed = 7\n");
    const auto d = describe(cfg);
    EXPECT_EQ(d.at("run.seed"), "7");
    EXPECT_EQ(d.at("atom.lifetime_ns"), "26.24");
    for (const auto& key : config_detail::key_table()) {
        const std::string full = std::string(key.section) + "." + std::string(key.name);
        if (full == "run.threads" || full.rfind("analysis.", 0) == 0 || full == "sweep.nbar_min" ||
            full == "sweep.nbar_max" || full == "sweep.nbar_points") {
            continue;
        }
        EXPECT_TRUE(d.count(full)) << full;
    }
}

TEST(Config, ShippedConfigsParse) {
    int seen = 0;
    for (const auto& entry : std::filesystem::directory_iterator(PULSE_ATOM_CONFIG_DIR)) {
        if (entry.path().extension() != ".ini") continue;
        EXPECT_NO_THROW(parse_config(entry.path().string())) << entry.path();
        ++seen;
    }
    EXPECT_GE(seen, 4);
}

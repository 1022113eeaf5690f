#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "pulse_atom/sweep.hpp"

using namespace pulse_atom;

namespace {

const AtomParams kAtom = AtomParams::from_lifetime(26.24, 0.03);
const AtomParams kAtomMeasured = AtomParams::from_lifetime(26.24, 0.027);

} // namespace

TEST(Sweep, ZeroPhotonRow) {
    SweepGrid grid{{0.0}, default_sweep_taus(), PulseShape::Square, kAtom};
    const auto result = sweep_pe_max(grid);
    ASSERT_EQ(result.rows.size(), 5u);
    for (const auto& row : result.rows) EXPECT_EQ(row.pe_max, 0.0);
}

TEST(Sweep, ExponentialNearSeventyPercent) {
    SweepGrid grid{{110.0}, {15.0}, PulseShape::RisingExponential, kAtom};
    const auto result = sweep_pe_max(grid);
    ASSERT_EQ(result.rows.size(), 1u);
    EXPECT_GE(result.rows[0].pe_max, 0.6);
    EXPECT_LE(result.rows[0].pe_max, 0.75);
}

TEST(Sweep, LongSquarePulseSaturation) {
    SweepGrid grid{{1300.0}, {150.0}, PulseShape::Square, kAtom};
    const auto result = sweep_pe_max(grid);
    ASSERT_EQ(result.rows.size(), 1u);
    EXPECT_GT(result.rows[0].pe_max, 0.5);
    const auto traj = simulate_pulse(PulseSpec::square(150.0, 1300.0), kAtom);
    EXPECT_NEAR(traj.p_e_at(0.0), 0.5, 0.02);
}

TEST(Sweep, RowsSortedUniqueAndProvenance) {
    SweepGrid grid{{5.0, 1.0, 5.0, 0.5}, {25.0, 5.0}, PulseShape::RisingExponential, kAtom};
    SolverSettings settings;
    settings.dt_max = 0.2;
    const auto result = sweep_pe_max(grid, settings, 3);
    ASSERT_EQ(result.rows.size(), 6u);
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        const auto& a = result.rows[i - 1];
        const auto& b = result.rows[i];
        EXPECT_TRUE(a.tau_ns < b.tau_ns || (a.tau_ns == b.tau_ns && a.nbar < b.nbar));
    }
    EXPECT_EQ(result.provenance.dt_max, 0.2);
    EXPECT_EQ(result.provenance.eta_p, 0.03);
    // Thread count does not change the numbers.
    const auto serial = sweep_pe_max(grid, settings, 1);
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        EXPECT_EQ(result.rows[i].pe_max, serial.rows[i].pe_max);
    }
}

TEST(Sweep, CellFailuresAreCollected) {
    SweepGrid grid{{1.0, 2.0}, {15.0}, PulseShape::Square, kAtom};
    SolverSettings settings;
    settings.bloch.rel_tol = 0.0;
    settings.bloch.abs_tol = 0.0;
    SweepResult result;
    ASSERT_NO_THROW(result = sweep_pe_max(grid, settings));
    EXPECT_TRUE(result.rows.empty());
    ASSERT_EQ(result.failures.size(), 2u);
    EXPECT_FALSE(result.failures[0].message.empty());
}

TEST(Sweep, InvalidGrid) {
    EXPECT_THROW(sweep_pe_max(SweepGrid{{}, {15.0}, PulseShape::Square, kAtom}), DomainError);
    EXPECT_THROW(sweep_pe_max(SweepGrid{{1.0}, {-1.0}, PulseShape::Square, kAtom}), DomainError);
    EXPECT_THROW(sweep_pe_max(SweepGrid{{-1.0}, {1.0}, PulseShape::Square, kAtom}), DomainError);
}

TEST(Sweep, MonotoneInPhotonNumberBelowFirstRabiMaximum) {
    const auto nbars = log_spaced(0.1, 50.0, 25);
    for (auto shape : {PulseShape::RisingExponential, PulseShape::Square}) {
        SolverSettings settings;
        settings.dt_max = 0.2;
        const auto result = sweep_pe_max({nbars, default_sweep_taus(), shape, kAtom}, settings);
        ASSERT_TRUE(result.failures.empty());
        for (std::size_t i = 1; i < result.rows.size(); ++i) {
            if (result.rows[i].tau_ns != result.rows[i - 1].tau_ns) continue;
            EXPECT_GE(result.rows[i].pe_max, result.rows[i - 1].pe_max);
        }
    }
}

TEST(Sweep, DimensionlessScaling) {
    const double c = 2.5;
    AtomParams scaled = kAtom;
    scaled.gamma *= c;
    for (auto shape : {PulseShape::RisingExponential, PulseShape::Square}) {
        const auto a = simulate_pulse(PulseSpec::analytic(shape, 20.0, 40.0), kAtom);
        const auto b = simulate_pulse(PulseSpec::analytic(shape, 20.0 / c, 40.0), scaled);
        EXPECT_NEAR(a.p_e_max(), b.p_e_max(), 1e-6);
        EXPECT_NEAR(a.t_of_max() / c, b.t_of_max(), 1e-3);
    }
}

TEST(OptimalTau, ExponentialAtMeasuredOverlap) {
    const auto r = optimal_tau(PulseShape::RisingExponential, 2.75, kAtomMeasured, {5.0, 150.0});
    EXPECT_NEAR(r.tau_star, 24.0, 0.15 * 24.0);
    EXPECT_GT(r.pe_max, 0.0);
}

TEST(OptimalTau, SquareAtMeasuredOverlap) {
    const auto r = optimal_tau(PulseShape::Square, 2.10, kAtomMeasured, {5.0, 200.0});
    EXPECT_NEAR(r.tau_star, 64.0, 0.15 * 64.0);
}

TEST(OptimalTau, PulseAreaConditionWithoutDecay) {
    const auto atom = kAtom.without_decay();
    const double nbar = 3.0;
    // Pulse area 2 sqrt(gamma_p N tau) = pi.
    const double tau_pi = std::numbers::pi * std::numbers::pi / (4.0 * atom.gamma_p() * nbar);
    OptimizeSettings settings;
    settings.objective = TauObjective::FinalProbability;
    settings.tau_tolerance = 0.01 * tau_pi;
    const auto r = optimal_tau(PulseShape::Square, nbar, atom, {0.3 * tau_pi, 2.5 * tau_pi}, settings);
    EXPECT_NEAR(r.tau_star, tau_pi, 0.01 * tau_pi);
    EXPECT_NEAR(r.pe_max, 1.0, 1e-3);
}

TEST(OptimalTau, GoldenSectionAgreesWithDenseScan) {
    const auto r = optimal_tau(PulseShape::RisingExponential, 2.75, kAtomMeasured, {5.0, 150.0});
    const double step = 1.0;
    double best_tau = 0.0, best = -1.0;
    for (double tau = 10.0; tau <= 45.0; tau += step) {
        const double v = simulate_pulse(PulseSpec::rising_exponential(tau, 2.75), kAtomMeasured).p_e_max();
        if (v > best) {
            best = v;
            best_tau = tau;
        }
    }
    EXPECT_LE(std::abs(r.tau_star - best_tau), step);
}

TEST(OptimalTau, MonotoneBracketIsRejected) {
    EXPECT_THROW(optimal_tau(PulseShape::RisingExponential, 2.75, kAtomMeasured, {100.0, 150.0}),
                 NoInteriorMaximum);
    EXPECT_THROW(optimal_tau(PulseShape::Square, 2.0, kAtom, {50.0, 10.0}), DomainError);
}

TEST(CompareShapes, ExponentialWinsAtMeasuredOverlap) {
    const auto cmp = compare_shapes(2.75, 2.10, 25.0, 60.0, kAtomMeasured);
    EXPECT_TRUE(cmp.first_wins);
    EXPECT_GT(cmp.first.p_e_max(), cmp.second.p_e_max());
}

TEST(CompareShapes, IdenticalSpecsTie) {
    const auto spec = PulseSpec::square(30.0, 5.0);
    const auto cmp = compare_pulses(spec, spec, kAtom);
    EXPECT_LT(std::abs(cmp.difference), 1e-9);
    EXPECT_FALSE(cmp.first_wins);
}

TEST(CompareShapes, LowPhotonNumberAtOwnOptima) {
    const double nbar = 0.5;
    const auto e = optimal_tau(PulseShape::RisingExponential, nbar, kAtomMeasured, {5.0, 150.0});
    const auto s = optimal_tau(PulseShape::Square, nbar, kAtomMeasured, {5.0, 200.0});
    const auto cmp = compare_shapes(nbar, nbar, e.tau_star, s.tau_star, kAtomMeasured);
    EXPECT_TRUE(cmp.first_wins);
}

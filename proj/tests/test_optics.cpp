#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pulse_atom/optics.hpp"

using namespace pulse_atom;

TEST(Overlap, StrongFocusingValue) {
    const auto r = overlap_from_focusing(FocusingGeometry::from_strength(0.22));
    // 30-digit evaluation of the closed form at u = 0.22.
    EXPECT_NEAR(r.eta_p, 0.0331637155312195766, 1e-12);
    EXPECT_LT(std::abs(r.eta_p - oracle::overlap_quadrature(0.22)) / r.eta_p, 1e-8);
    EXPECT_EQ(r.scattering_ratio, 4.0 * r.eta_p);
}

TEST(Overlap, WeakFocusingLimit) {
    const auto r = overlap_from_focusing(FocusingGeometry::from_strength(0.01));
    EXPECT_LT(r.eta_p, 1e-4);
    EXPECT_NEAR(r.eta_p, 7.49850038424848982e-5, 1e-14);
    EXPECT_LT(std::abs(r.eta_p - oracle::overlap_quadrature(0.01)) / r.eta_p, 1e-8);
}

TEST(Overlap, ReferenceValuesAcrossWindow) {
    const std::pair<double, double> refs[] = {{0.05, 0.00186568456922842392},
                                              {0.5, 0.128189202336382409},
                                              {1.0, 0.272189974681013929},
                                              {2.0, 0.362126770375197252}};
    for (const auto& [u, eta] : refs) {
        EXPECT_LT(std::abs(overlap_from_focusing(FocusingGeometry::from_strength(u)).eta_p - eta) / eta,
                  1e-10)
            << "u=" << u;
    }
}

TEST(Overlap, StrictlyIncreasingOnGrid) {
    double previous = 0.0;
    for (int i = 0; i <= 60; ++i) {
        const double u = 0.05 + 0.45 * i / 60.0;
        const auto r = overlap_from_focusing(FocusingGeometry::from_strength(u));
        EXPECT_GT(r.eta_p, previous) << "u=" << u;
        EXPECT_GT(r.eta_p, 0.0);
        EXPECT_LT(r.eta_p, 1.0);
        EXPECT_EQ(r.scattering_ratio, 4.0 * r.eta_p);
        previous = r.eta_p;
    }
}

TEST(Overlap, GeometryFromBeam) {
    const auto g = FocusingGeometry::from_beam(1.0, 4.51);
    EXPECT_NEAR(g.focusing_strength(), 1.0 / 4.51, 1e-12 / 4.51);
    EXPECT_DOUBLE_EQ(g.input_waist_mm(), 1.0);
    EXPECT_DOUBLE_EQ(g.focal_length_mm(), 4.51);
}

TEST(Overlap, RejectsOutsideWindow) {
    EXPECT_THROW(FocusingGeometry::from_strength(0.0), DomainError);
    EXPECT_THROW(FocusingGeometry::from_strength(-0.2), DomainError);
    EXPECT_THROW(FocusingGeometry::from_beam(0.0, 4.51), DomainError);
    EXPECT_THROW(overlap_from_focusing(FocusingGeometry::from_strength(2.5)), DomainError);
    EXPECT_NO_THROW(overlap_from_focusing(FocusingGeometry::from_strength(2.0)));
}

#include <gtest/gtest.h>

#include <anharmonic/bw_measure.hpp>

#include <numbers>

using namespace anharmonic;

namespace {

LaplaceResult single_mode_transform(double alpha, double a, double t) {
    const std::vector<StableScaleDensity> modes = {StableScaleDensity(alpha, a)};
    const auto grid = default_lambda_grid(modes, 0.5, 4001);
    return laplace_transform(aggregate_measure(modes, grid, 1), t);
}

}  // namespace

TEST(Levy, ClosedForm) {
    EXPECT_NEAR(levy_density(1.0, 1.0), std::exp(-0.25) / (2.0 * std::sqrt(std::numbers::pi)), 1e-16);
    EXPECT_NEAR(levy_density(1.0, 1.0), 0.2196956, 1e-7);
    for (double a : {0.5, 2.0}) {
        for (double l : {0.1, 1.0, 7.0}) {
            const double expect = a / (2.0 * std::sqrt(std::numbers::pi)) * std::pow(l, -1.5) * std::exp(-a * a / (4.0 * l));
            EXPECT_NEAR(levy_density(a, l), expect, 1e-15 * expect);
        }
    }
}

TEST(Pollard, AgreesWithLevyAtHalf) {
    for (double l : geometric_grid(0.01, 100.0, 81)) {
        EXPECT_NEAR(pollard_density(0.5, 1.0, l), levy_density(1.0, l), 1e-8) << l;
        EXPECT_NEAR(pollard_density(0.5, 3.0, l), levy_density(3.0, l), 1e-8) << l;
    }
    EXPECT_NEAR(pollard_density(0.5, 1.0, 1.0), 0.2196956, 1e-7);
}

TEST(Pollard, AgreesWithKanterRepresentation) {
    for (double alpha : {0.25, 1.0 / 3.0, 0.6, 2.0 / 3.0, 0.8}) {
        for (double l : geometric_grid(0.05, 50.0, 25)) {
            EXPECT_NEAR(pollard_density(alpha, 1.0, l), kanter_density(alpha, 1.0, l), 1e-8) << alpha << " " << l;
        }
    }
}

TEST(Pollard, RejectsBadArguments) {
    EXPECT_THROW(pollard_density(1.0, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(pollard_density(0.5, 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(pollard_density(0.5, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(StableScaleDensity(0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(StableScaleDensity(0.5, -1.0), std::invalid_argument);
}

TEST(StableDensity, UnitMass) {
    for (double alpha : {1.0 / 3.0, 0.5, 2.0 / 3.0}) {
        for (double a : {1.0, 2.5}) {
            EXPECT_NEAR(StableScaleDensity(alpha, a).mass(), 1.0, 1e-8) << alpha << " " << a;
        }
    }
}

TEST(StableDensity, NegligibleBelowIsNegligible) {
    for (double alpha : {1.0 / 3.0, 0.5, 2.0 / 3.0}) {
        const StableScaleDensity g(alpha, 1.0);
        const double l = g.negligible_below();
        // P(lambda < l) <= min_s exp(s l) E exp(-s lambda), minimized by a scan.
        double chernoff = 1.0;
        for (double s = 1e-3; s < 1e12; s *= 1.001) chernoff = std::min(chernoff, std::exp(s * l - std::pow(s, alpha)));
        EXPECT_LE(chernoff, 1.0001 * std::exp(-45.0));
        EXPECT_GE(chernoff, 0.999 * std::exp(-45.0));
    }
}

TEST(StableDensity, RoundTrips) {
    const std::vector<std::pair<double, double>> cases = {
        {0.5, 1.0}, {0.5, 5.0}, {1.0 / 3.0, 1.0}, {1.0 / 3.0, 1.060362}, {2.0 / 3.0, 1.0}};
    for (auto [alpha, a] : cases) {
        for (double t : {0.5, 1.0, 2.0, 5.0}) {
            const auto r = single_mode_transform(alpha, a, t);
            const double expect = std::exp(-a * std::pow(t, alpha));
            EXPECT_NEAR(r.value, expect, 1e-8) << alpha << " " << a << " " << t;
            EXPECT_LE(r.truncation_bound, 1e-12);
        }
    }
}

TEST(ModeMeasure, Examples) {
    auto m = mode_measure(1.0, 2.0);
    EXPECT_EQ(m.alpha, 0.5);
    EXPECT_EQ(m.a, 1.0);
    m = mode_measure(5.0, 2.0);
    EXPECT_EQ(m.alpha, 0.5);
    EXPECT_EQ(m.a, 5.0);
    m = mode_measure(1.060362, 4.0);
    EXPECT_NEAR(m.alpha, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(m.transform(8.0), std::exp(-2.0 * 1.060362), 1e-14);
    EXPECT_THROW(mode_measure(0.0, 2.0), std::invalid_argument);
}

TEST(Aggregate, HarmonicReproducesTrace) {
    const auto sm = spectral_modes(PencilPotential::family(Potential::power(2.0)), 30, 1e-10);
    const auto grid = default_lambda_grid(sm.modes, 1.0, 4001);
    const auto m = aggregate_measure(sm.modes, grid, sm.modes.size(), TraceKind::full, sm.tail);
    const auto r = laplace_transform(m, 1.0);
    const double phi = 1.0 / (2.0 * std::sinh(1.0));
    EXPECT_NEAR(r.value, phi, 1e-6);
    EXPECT_LE(r.truncation_bound, 1e-6);
    EXPECT_LE(phi - r.value, r.truncation_bound + 1e-8);
    EXPECT_GE(m.omitted_mass_bound, 0.0);
    EXPECT_NE(m.truncation_note.find("30 modes"), std::string::npos);
}

TEST(Aggregate, ParityPartsAddUp) {
    const auto sm = spectral_modes(PencilPotential::family(Potential::power(2.0)), 10, 1e-10);
    const auto grid = lambda_grid(0.01, 200.0, 301);
    const auto full = aggregate_measure(sm.modes, grid, 10);
    const auto even = aggregate_measure(sm.modes, grid, 10, TraceKind::even);
    const auto odd = aggregate_measure(sm.modes, grid, 10, TraceKind::odd);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_NEAR(even.density_values[i] + odd.density_values[i], full.density_values[i],
                    1e-14 * std::max(1.0, full.density_values[i]));
        EXPECT_GE(full.density_values[i], 0.0);
    }
    const double ev = laplace_transform(even, 1.0).value;
    const double od = laplace_transform(odd, 1.0).value;
    EXPECT_NEAR(ev + od, laplace_transform(full, 1.0).value, 1e-13);
    EXPECT_GT(ev, od);
}

TEST(Aggregate, EmptyAndInvalid) {
    const std::vector<StableScaleDensity> none;
    const auto grid = lambda_grid(0.1, 10.0, 11);
    const auto m = aggregate_measure(none, grid, 0);
    for (double v : m.density_values) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(laplace_transform(m, 1.0).value, 0.0);
    const std::vector<StableScaleDensity> one = {StableScaleDensity(0.5, 1.0)};
    EXPECT_THROW(aggregate_measure(one, grid, 2), std::invalid_argument);
    const std::vector<double> bad = {1.0, 0.5};
    EXPECT_THROW(aggregate_measure(one, bad, 1), std::invalid_argument);
    EXPECT_THROW(laplace_transform(m, 0.0), std::invalid_argument);
    EXPECT_THROW(spectral_modes(PencilPotential(Potential::power(2.0), Potential::power(4.0)), 5), std::invalid_argument);
}

TEST(Aggregate, AtomsAreSummedExactly) {
    MeasureGrid m;
    m.atoms = {{1.0, 2.0}, {3.0, 0.5}};
    EXPECT_NEAR(laplace_transform(m, 2.0).value, 2.0 * std::exp(-2.0) + 0.5 * std::exp(-6.0), 1e-16);
}

// Omitted harmonic modes n >= 20: exact sum vs the envelope bound.
TEST(ModeTailBound, DominatesHarmonicTail) {
    const auto sm = spectral_modes(PencilPotential::family(Potential::power(2.0)), 20, 1e-10);
    for (double t : {0.05, 0.5, 1.0, 4.0, 25.0}) {
        double truth = 0.0;
        for (int n = 20; n < 100000; ++n) truth += std::exp(-(2.0 * n + 1.0) * std::sqrt(t));
        EXPECT_GE(sm.tail.transform_bound(t), truth) << t;
    }
    EXPECT_EQ(ModeTail{}.transform_bound(1.0), 0.0);
}

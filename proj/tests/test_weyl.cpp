#include <gtest/gtest.h>

#include <anharmonic/weyl.hpp>

#include <numbers>

using namespace anharmonic;

namespace {

Spectrum harmonic_exact(std::size_t m) {
    std::vector<double> ev(m), err(m, 0.0);
    for (std::size_t n = 0; n < m; ++n) ev[n] = 2.0 * n + 1.0;
    return {PencilPotential::family(Potential::power(2.0)), 1.0, ev, err, parity_labels(m), {}};
}

// 2 int_0^1 sqrt(1 - u^4) du with u = 1 - s^2 (composite Simpson, fine mesh).
double quartic_phase_oracle() {
    const int n = 200000;
    auto f = [](double s) {
        const double u = 1.0 - s * s;
        return 2.0 * s * std::sqrt(std::max(0.0, 1.0 - u * u * u * u));
    };
    double sum = f(0.0) + f(1.0);
    for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(static_cast<double>(i) / n);
    return 2.0 * sum / (3.0 * n);
}

}  // namespace

TEST(Weyl, CountingExamples) {
    const auto s = harmonic_exact(300);
    EXPECT_EQ(counting_function(s, 10.0), 5u);
    EXPECT_EQ(counting_function(s, 1.0), 0u);
    EXPECT_EQ(counting_function(s, 400.0), 200u);
    EXPECT_THROW(counting_function(harmonic_exact(5), 100.0), std::invalid_argument);
}

TEST(Weyl, PhaseSpaceExamples) {
    const auto x2 = Potential::power(2.0);
    EXPECT_NEAR(phase_space_integral(x2, 1.0, 1.0), std::numbers::pi / 2.0, 1e-10);
    EXPECT_NEAR(phase_space_integral(x2, 1.0, 4.0), 2.0 * std::numbers::pi, 1e-10);
    const double q = quartic_phase_oracle();
    EXPECT_NEAR(q, 1.7480383, 1e-7);
    EXPECT_NEAR(phase_space_integral(Potential::power(4.0), 1.0, 1.0), q, 1e-9);
    EXPECT_THROW(phase_space_integral(x2, 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(phase_space_integral(x2, 1.0, -1.0), std::invalid_argument);
}

TEST(Weyl, ConstantExamples) {
    EXPECT_NEAR(weyl_constant(Potential::power(2.0)), 0.5, 1e-12);
    const double c4 = weyl_constant(Potential::power(4.0));
    const double by_hand = 2.0 * 0.25 / (2.0 * std::sqrt(std::numbers::pi)) * std::tgamma(0.25) / std::tgamma(1.75);
    EXPECT_NEAR(c4, by_hand, 1e-12);
    EXPECT_NEAR(c4, 0.5564179, 1e-6);
    // c_- = 16 narrows the left well by 16^{-1/4} = 1/2.
    EXPECT_NEAR(weyl_constant(Potential{HomogeneousTerm(1.0, 16.0, 4.0)}), 0.75 * c4, 1e-12);
    EXPECT_THROW(weyl_constant(Potential{HomogeneousTerm::symmetric(1, 2), HomogeneousTerm::symmetric(1, 4)}),
                 std::invalid_argument);
}

// C_V r^beta is the phase-space area / pi, for any single term and t = 1.
TEST(Weyl, ConstantIsPhaseSpaceOverPi) {
    for (const auto& h : {HomogeneousTerm(1.0, 1.0, 0.7), HomogeneousTerm(2.0, 0.5, 1.0), HomogeneousTerm(1.0, 16.0, 4.0),
                          HomogeneousTerm(3.0, 3.0, 6.0)}) {
        const Potential p{h};
        for (double r : {0.5, 3.0, 40.0}) {
            const double expect = weyl_constant(p) * std::pow(r, weyl_exponent(p));
            EXPECT_NEAR(phase_space_integral(p, 1.0, r) / std::numbers::pi, expect, 1e-8 * expect);
        }
    }
}

TEST(Weyl, HarmonicRatio) {
    const auto w = weyl_estimate(harmonic_exact(250), 400.0);
    EXPECT_EQ(w.count_exact, 200u);
    EXPECT_NEAR(w.ratio, 1.0, 0.01);
}

TEST(Weyl, QuarticRatioNearHundredLevels) {
    const auto s = compute_spectrum({PencilPotential::family(Potential::power(4.0)), 1.0, 110, 1e-6});
    const double c = weyl_constant(Potential::power(4.0));
    const double r = std::pow(100.0 / c, 1.0 / weyl_exponent(Potential::power(4.0)));
    const auto w = weyl_estimate(s, r);
    EXPECT_NEAR(static_cast<double>(w.count_exact), 100.0, 2.0);
    EXPECT_GE(w.ratio, 0.95);
    EXPECT_LE(w.ratio, 1.05);
}

TEST(Weyl, EnvelopeHoldsOnComputedSpectra) {
    for (const auto& h : {HomogeneousTerm(1.0, 1.0, 1.0), HomogeneousTerm(1.0, 1.0, 2.0), HomogeneousTerm(1.0, 16.0, 4.0),
                          HomogeneousTerm(1.0, 1.0, 6.0)}) {
        const Potential p{h};
        const auto s = compute_spectrum({PencilPotential::family(p), 1.0, 40, 1e-6});
        const CountEnvelope env(p);
        EXPECT_NO_THROW(env.verify(s.eigenvalues));
        for (std::size_t k = 0; k < s.size(); ++k) EXPECT_GE(s.eigenvalues[k], env.eigenvalue_floor(k));
    }
}

TEST(Weyl, TailBoundExamples) {
    const auto x2 = Potential::power(2.0);
    const double truth = std::exp(-41.0) / (1.0 - std::exp(-2.0));
    const double b = tail_bound(x2, 1.0, 41.0, harmonic_exact(40).eigenvalues);
    EXPECT_GE(b, truth);
    EXPECT_LE(b, 1e-15);
    EXPECT_EQ(tail_bound(x2, 1.0, std::numeric_limits<double>::infinity(), harmonic_exact(40).eigenvalues), 0.0);
    EXPECT_LE(tail_bound(Potential::power(4.0), 1.0, 50.0), 1e-18);
    EXPECT_THROW(tail_bound(x2, 1.0, 0.0), std::invalid_argument);
}

// The bound dominates the exact harmonic tail for every t and floor.
TEST(Weyl, TailBoundDominatesHarmonicTails) {
    const auto x2 = Potential::power(2.0);
    const auto base = harmonic_exact(60).eigenvalues;
    for (double t : {0.1, 1.0, 10.0}) {
        const double s = std::sqrt(t);
        for (int n0 : {0, 1, 5, 20}) {
            const double floor = s * (2.0 * n0 + 1.0);
            double truth = 0.0;
            for (int n = n0; n < 2000; ++n) truth += std::exp(-s * (2.0 * n + 1.0));
            EXPECT_GE(tail_bound(x2, t, floor, base), truth) << t << " " << n0;
        }
    }
}

TEST(Weyl, EnvelopeRejectsImpossibleSpectrum) {
    const CountEnvelope env(Potential::power(2.0));
    const std::vector<double> crowded = {0.1, 0.2, 0.3, 0.4};
    EXPECT_THROW(env.verify(crowded), NumericalFailure);
}

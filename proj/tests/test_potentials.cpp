#include <gtest/gtest.h>

#include <anharmonic/numerics.hpp>
#include <anharmonic/potentials.hpp>

#include <random>

using namespace anharmonic;

TEST(Potentials, EvaluateExamples) {
    EXPECT_DOUBLE_EQ(evaluate(Potential::power(2.0), 3.0), 9.0);
    EXPECT_DOUBLE_EQ(evaluate(Potential{HomogeneousTerm(1.0, 1.0, 4.0)}, -2.0), 16.0);
    EXPECT_DOUBLE_EQ(evaluate(Potential{HomogeneousTerm(2.0, 3.0, 1.0)}, -1.0), 3.0);
    EXPECT_EQ(evaluate(Potential{HomogeneousTerm(2.0, 3.0, 0.5)}, 0.0), 0.0);
}

TEST(Potentials, PencilExamples) {
    const PencilPotential p(Potential::power(2.0), Potential::power(4.0));
    EXPECT_DOUBLE_EQ(evaluate_pencil(p, 2.0, 1.0), 3.0);
    EXPECT_DOUBLE_EQ(evaluate_pencil(PencilPotential::family(Potential::power(2.0)), 4.0, 1.0), 4.0);
    EXPECT_EQ(evaluate_pencil(p, 1.0, 0.0), 0.0);
    EXPECT_THROW(evaluate_pencil(p, 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(evaluate_pencil(p, -1.0, 1.0), std::invalid_argument);
}

TEST(Potentials, RejectsInvalidTerms) {
    EXPECT_THROW(HomogeneousTerm(0.0, 1.0, 2.0), std::invalid_argument);
    EXPECT_THROW(HomogeneousTerm(1.0, -1.0, 2.0), std::invalid_argument);
    EXPECT_THROW(HomogeneousTerm(1.0, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(HomogeneousTerm(1.0, 1.0, std::nan("")), std::invalid_argument);
    EXPECT_THROW(Potential(std::vector<HomogeneousTerm>{}), std::invalid_argument);
}

TEST(Potentials, HomogeneityExamples) {
    EXPECT_LE(homogeneity_residual(HomogeneousTerm::symmetric(1.0, 2.0), 3.0, 2.0), 1e-15);
    EXPECT_LE(homogeneity_residual(HomogeneousTerm::symmetric(1.0, 0.5), 4.0, 1.0), 1e-15);
    EXPECT_EQ(homogeneity_residual(HomogeneousTerm::symmetric(1.0, 4.0), 1.0, -1.7), 0.0);
    EXPECT_THROW(homogeneity_residual(HomogeneousTerm::symmetric(1.0, 4.0), 0.0, 1.0), std::invalid_argument);
}

TEST(Potentials, HomogeneityProperty) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> rho(0.25, 6.0), xi(0.1, 10.0), x(-5.0, 5.0), c(0.1, 10.0);
    for (int i = 0; i < 20000; ++i) {
        const HomogeneousTerm h(c(rng), c(rng), rho(rng));
        EXPECT_LE(homogeneity_residual(h, xi(rng), x(rng)), 4.0 * numerics::unit_roundoff);
    }
}

TEST(Potentials, EvenIffSymmetricCoefficients) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> x(0.01, 5.0);
    const Potential even{HomogeneousTerm::symmetric(2.0, 1.5), HomogeneousTerm::symmetric(0.5, 4.0)};
    const Potential odd{HomogeneousTerm::symmetric(2.0, 1.5), HomogeneousTerm(1.0, 16.0, 4.0)};
    EXPECT_TRUE(even.is_even());
    EXPECT_FALSE(odd.is_even());
    bool asymmetric_seen = false;
    for (int i = 0; i < 1000; ++i) {
        const double v = x(rng);
        EXPECT_EQ(even(v), even(-v));
        asymmetric_seen |= odd(v) != odd(-v);
    }
    EXPECT_TRUE(asymmetric_seen);
    EXPECT_TRUE(PencilPotential(Potential::power(2.0), even).is_even());
    EXPECT_FALSE(PencilPotential(odd, even).is_even());
}

TEST(Potentials, MonotoneOnHalfLines) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> x(0.0, 20.0);
    const Potential p{HomogeneousTerm(1.0, 3.0, 0.5), HomogeneousTerm(2.0, 0.1, 3.0)};
    for (int i = 0; i < 5000; ++i) {
        double a = x(rng), b = x(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        EXPECT_LT(p(a), p(b));
        EXPECT_LT(p(-a), p(-b));
    }
}

TEST(Potentials, ValidateConditions) {
    auto r = validate_conditions(PencilPotential::family(Potential::power(2.0)));
    EXPECT_TRUE(r.all_pass());
    EXPECT_EQ(r.growth_exponent, 2.0);
    r = validate_conditions(PencilPotential(Potential::power(2.0), Potential::power(4.0)));
    EXPECT_TRUE(r.all_pass());
    EXPECT_EQ(r.growth_exponent, 4.0);
    r = validate_conditions(PencilPotential::family(Potential::power(0.5)));
    EXPECT_TRUE(r.all_pass());
    EXPECT_EQ(r.growth_exponent, 0.5);
}

TEST(Potentials, ParseAndFormat) {
    const Potential p = parse_potential("1:16:4, 2:2:2");
    ASSERT_EQ(p.terms().size(), 2u);
    EXPECT_EQ(p.terms()[0], HomogeneousTerm(1.0, 16.0, 4.0));
    EXPECT_DOUBLE_EQ(p(-1.0), 18.0);
    EXPECT_EQ(parse_potential(format_potential(p)), p);
    EXPECT_FALSE(parse_optional_potential("none").has_value());
    EXPECT_THROW(parse_potential("1:1"), std::invalid_argument);
    EXPECT_THROW(parse_potential("1:1:2:3"), std::invalid_argument);
    EXPECT_THROW(parse_potential("a:1:2"), std::invalid_argument);
    EXPECT_THROW(parse_potential("1:1:-2"), std::invalid_argument);
    EXPECT_THROW(parse_potential(""), std::invalid_argument);
    EXPECT_EQ(format_pencil(PencilPotential::family(Potential::power(2.0))), "v0=none v1=1:1:2");
}

TEST(Potentials, SmallOrdersAreExperimental) {
    EXPECT_FALSE(PencilPotential::family(Potential::power(0.5)).is_experimental());
    EXPECT_TRUE(PencilPotential::family(Potential::power(0.3)).is_experimental());
    EXPECT_TRUE(PencilPotential(Potential::power(0.4), Potential::power(2.0)).is_experimental());
    EXPECT_FALSE(PencilPotential(Potential::power(2.0), Potential::power(4.0)).is_experimental());
}

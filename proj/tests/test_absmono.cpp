#include <gtest/gtest.h>

#include <anharmonic/absmono.hpp>
#include <anharmonic/grids.hpp>

#include "oracles.hpp"

#include <numbers>

using namespace anharmonic;

namespace {

MonoTestConfig cm_config(unsigned orders = 8, std::size_t points = 25) {
    MonoTestConfig c;
    c.orders = orders;
    c.t_grid = geometric_grid(0.1, 10.0, points);
    return c;
}

// Taylor coefficients of exp(-a (1 - s)^alpha) at s = 0, i.e. of
// Phi(t) = exp(-a (-t)^alpha) around t = -1, via E' = Psi' E.
std::vector<double> exp_series_derivatives(double a, double alpha, unsigned k_max) {
    std::vector<double> psi(k_max + 1);
    double binom = 1.0;  // binom(alpha, k) (-1)^k
    for (unsigned k = 0; k <= k_max; ++k) {
        psi[k] = -a * binom;
        binom *= -(alpha - k) / (k + 1.0);
    }
    std::vector<double> e(k_max + 1);
    e[0] = std::exp(psi[0]);
    for (unsigned n = 1; n <= k_max; ++n) {
        double s = 0.0;
        for (unsigned k = 1; k <= n; ++k) s += k * psi[k] * e[n - k];
        e[n] = s / n;
    }
    std::vector<double> d(k_max);
    double fact = 1.0;
    for (unsigned n = 1; n <= k_max; ++n) {
        fact *= n;
        d[n - 1] = fact * e[n];
    }
    return d;
}

}  // namespace

TEST(Differences, Examples) {
    const auto one = SampledFunction::exact([](double) { return 1.0; }, -10.0, 10.0);
    EXPECT_EQ(nth_difference(one, 0.3, 0.7, 3).value, 0.0);
    const auto sq = SampledFunction::exact([](double t) { return t * t; }, -10.0, 10.0);
    EXPECT_NEAR(nth_difference(sq, 1.1, 0.3, 2).value, 0.18, 1e-15);
    const auto ex = SampledFunction::exact([](double t) { return std::exp(t); }, -10.0, 10.0);
    const auto d = nth_difference(ex, 0.0, std::log(2.0), 3);
    EXPECT_NEAR(d.value, 1.0, 1e-14);
    EXPECT_LE(d.tolerance(), 1e-13);
    EXPECT_GT(d.rounding_bound, 0.0);
}

TEST(Differences, ExponentialClosedForm) {
    for (double c : {0.3, 1.0, 2.5}) {
        const auto f = SampledFunction::exact([c](double t) { return std::exp(-c * t); }, 0.0, 100.0);
        for (unsigned n = 0; n <= 8; ++n) {
            for (double h : {0.05, 0.2, 0.7}) {
                const double t = 1.3;
                const double expect = std::pow(std::exp(-c * h) - 1.0, n) * std::exp(-c * t);
                const auto d = nth_difference(f, t, h, n);
                EXPECT_NEAR(d.value, expect, d.tolerance() + 1e-15) << c << " " << n << " " << h;
            }
        }
    }
}

TEST(Differences, EvaluationErrorIsPropagated) {
    const SampledFunction f([](double t) { return Sample{t, 1e-6}; }, -1.0, 10.0);
    const auto d = nth_difference(f, 0.0, 0.5, 4);
    EXPECT_NEAR(d.eval_bound, 16.0 * 1e-6, 1e-18);
    EXPECT_EQ(binomial(8, 4), 70.0);
    EXPECT_EQ(binomial(12, 0), 1.0);
}

TEST(AmTest, CompletelyMonotoneExamplesPass) {
    for (auto fn : std::vector<std::function<double(double)>>{
             [](double t) { return std::exp(-t); },
             [](double t) { return 1.0 / (1.0 + t); },
             [](double t) { return 0.5 / std::sinh(std::sqrt(t)); },
             [](double t) { return std::exp(-std::sqrt(t)); }}) {
        const auto rep = am_test(SampledFunction::exact(fn, 0.0, 1e6), cm_config());
        EXPECT_TRUE(rep.passed()) << rep.max_normalized_violation;
        EXPECT_LE(rep.max_normalized_violation, 1.0);
        EXPECT_EQ(rep.tests_skipped, 0u);
        EXPECT_EQ(rep.tests_run, 25u * 3u * 9u);
        EXPECT_GT(rep.resolved_fraction, 0.5);
    }
}

TEST(AmTest, NegativeControlFailsAtOrderTwo) {
    const auto f = SampledFunction::exact([](double t) { return std::exp(-t) - 0.5 * std::exp(-2.0 * t); }, 0.0, 1e6);
    const auto rep = am_test(f, cm_config());
    EXPECT_EQ(rep.verdict, Verdict::fail);
    ASSERT_TRUE(rep.lowest_failing_order.has_value());
    EXPECT_EQ(*rep.lowest_failing_order, 2u);
    EXPECT_GT(rep.max_normalized_violation, 10.0);
    const auto first_order = am_test(f, cm_config(1));
    EXPECT_TRUE(first_order.passed());
}

TEST(AmTest, OscillationIsCaught) {
    const auto f = SampledFunction::exact([](double t) { return std::exp(-t) * (1.0 + 0.1 * std::cos(3.0 * t)); }, 0.0, 1e6);
    EXPECT_EQ(am_test(f, cm_config()).verdict, Verdict::fail);
}

TEST(AmTest, AbsoluteMonotonicityMode) {
    // exp(-a (-t)^alpha) is AM on t < 0; steps leaving the domain are skipped.
    MonoTestConfig c;
    c.mode = MonoMode::am;
    c.orders = 6;
    c.t_grid = linear_grid(-10.0, -0.5, 20);
    c.steps = {{0.01, 0.02, 0.04}, false};
    const auto f = SampledFunction::exact([](double t) { return std::exp(-std::sqrt(-t)); }, -1e6, 0.0);
    const auto rep = am_test(f, c);
    EXPECT_TRUE(rep.passed());
    EXPECT_EQ(rep.mode, MonoMode::am);
    EXPECT_GT(rep.tests_run, 0u);
    const auto bad = SampledFunction::exact([](double t) { return std::exp(t); }, -1e6, 0.0);
    c.mode = MonoMode::cm;
    EXPECT_EQ(am_test(bad, c).verdict, Verdict::fail);
}

TEST(AmTest, LimitClosureOfPartialSums) {
    // Every partial sum of exp(-(2n+1) sqrt t) is CM, and so is the limit.
    for (int terms : {1, 2, 5, 50}) {
        const auto f = SampledFunction::exact(
            [terms](double t) {
                double s = 0.0;
                for (int n = 0; n < terms; ++n) s += std::exp(-(2.0 * n + 1.0) * std::sqrt(t));
                return s;
            },
            0.0, 1e6);
        EXPECT_TRUE(am_test(f, cm_config()).passed()) << terms;
    }
}

TEST(AmTest, TablesAndDomains) {
    std::vector<double> ts, vs;
    for (int i = 0; i <= 80; ++i) {
        ts.push_back(0.1 * (i + 1));
        vs.push_back(std::exp(-ts.back()));
    }
    const auto f = SampledFunction::table(ts, vs);
    EXPECT_TRUE(f.contains(0.1));
    EXPECT_TRUE(f.contains(8.1));
    EXPECT_FALSE(f.contains(8.2));
    EXPECT_THROW(f(0.15), std::domain_error);
    EXPECT_THROW(f(9.0), std::domain_error);
    MonoTestConfig c;
    c.orders = 8;
    c.t_grid = {ts.begin(), ts.begin() + 60};
    c.steps = {{0.1, 0.2, 0.4}, false};
    const auto rep = am_test(f, c);
    EXPECT_TRUE(rep.passed());
    EXPECT_GT(rep.tests_skipped, 0u);
    EXPECT_THROW(SampledFunction::table({1.0, 0.5}, {1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(SampledFunction::table({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST(AmTest, RejectsBadConfig) {
    const auto f = SampledFunction::exact([](double t) { return std::exp(-t); }, 0.0, 100.0);
    auto c = cm_config(13);
    EXPECT_THROW(am_test(f, c), std::invalid_argument);
    c = cm_config();
    c.t_grid.clear();
    EXPECT_THROW(am_test(f, c), std::invalid_argument);
    c = cm_config();
    c.steps.values = {-1.0};
    EXPECT_THROW(am_test(f, c), std::invalid_argument);
    const auto nonfinite = SampledFunction::exact([](double) { return std::nan(""); }, 0.0, 100.0);
    EXPECT_THROW(am_test(nonfinite, cm_config()), std::domain_error);
}

TEST(Bell, CountsAndSums) {
    const std::vector<std::size_t> counts = {1, 2, 3, 5, 7, 11, 15};
    const std::vector<std::uint64_t> sums = {1, 2, 5, 15, 52, 203, 877};
    for (unsigned k = 1; k <= 7; ++k) {
        const auto p = bell_recursion(k);
        EXPECT_EQ(p.order(), k);
        EXPECT_EQ(p.size(), counts[k - 1]) << k;
        EXPECT_EQ(p.coefficient_sum(), sums[k - 1]) << k;
    }
    EXPECT_THROW(bell_recursion(0), std::invalid_argument);
    EXPECT_THROW(bell_recursion(25), std::invalid_argument);
}

TEST(Bell, MatchesSetPartitionEnumeration) {
    for (unsigned k = 1; k <= 10; ++k) {
        const auto expect = oracle::bell_by_partitions(k);
        const auto p = bell_recursion(k);
        ASSERT_EQ(p.size(), expect.size()) << k;
        for (const auto& term : p.terms()) {
            auto it = expect.find(term.exponents);
            ASSERT_NE(it, expect.end()) << k;
            EXPECT_EQ(term.coefficient, it->second) << k;
        }
    }
}

TEST(Bell, ExpDerivativeExamples) {
    const std::vector<double> y12 = {1.0, 0.0};
    const auto d = exp_derivatives(y12, 1.0);
    EXPECT_DOUBLE_EQ(d[0], 1.0);
    EXPECT_DOUBLE_EQ(d[1], 1.0);
    const std::vector<double> y123 = {2.0, 1.0, 0.0};
    EXPECT_DOUBLE_EQ(exp_derivatives(y123, 1.0)[2], 14.0);
    EXPECT_TRUE(exp_derivatives({}, 1.0).empty());
    EXPECT_THROW(exp_derivatives(y12, 0.0), std::invalid_argument);
}

TEST(Bell, PowerPsiExamples) {
    EXPECT_DOUBLE_EQ(power_psi_derivatives(1.0, 0.5, -1.0, 1)[0], 0.5);
    EXPECT_DOUBLE_EQ(power_psi_derivatives(1.0, 0.5, -1.0, 2)[1], 0.25);
    EXPECT_DOUBLE_EQ(power_psi_derivatives(2.0, 0.5, -4.0, 1)[0], 0.5);
    EXPECT_THROW(power_psi_derivatives(1.0, 1.0, -1.0, 1), std::invalid_argument);
    EXPECT_THROW(power_psi_derivatives(1.0, 0.5, 1.0, 1), std::invalid_argument);
    EXPECT_THROW(power_psi_derivatives(0.0, 0.5, -1.0, 1), std::invalid_argument);
}

// exp(-a(-t)^alpha): Bell-polynomial derivatives vs power-series arithmetic,
// and every derivative positive (absolute monotonicity).
TEST(Bell, DerivativesOfStableTransformArePositive) {
    for (double alpha : {1.0 / 3.0, 0.5, 2.0 / 3.0}) {
        for (double a : {0.5, 1.0, 3.0}) {
            const auto psi = power_psi_derivatives(a, alpha, -1.0, 12);
            const auto got = exp_derivatives(psi, std::exp(-a));
            const auto expect = exp_series_derivatives(a, alpha, 12);
            for (std::size_t k = 0; k < got.size(); ++k) {
                EXPECT_NEAR(got[k], expect[k], 1e-11 * std::abs(expect[k])) << alpha << " " << a << " " << k;
                EXPECT_GT(got[k], 0.0);
            }
        }
    }
}

#pragma once

/**
 * @file numerics.hpp
 * @brief Small numerical toolbox: compensated summation, Gamma and upper
 *        incomplete Gamma functions, adaptive Simpson and Gauss-Kronrod
 *        quadrature, scalar root bracketing.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <vector>

#include "errors.hpp"

namespace anharmonic::numerics {

inline constexpr double unit_roundoff = std::numeric_limits<double>::epsilon();

/// Neumaier's variant of Kahan summation.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// ---------------------------------------------------------------------------
// Gamma function: Lanczos approximation (g = 7, 9 terms) with reflection.
// ---------------------------------------------------------------------------

inline double gamma(double x) {
    static constexpr std::array<double, 9> coef = {
        0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
        771.32342877765313,      -176.61502916214059,   12.507343278686905,
        -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
    constexpr double pi = std::numbers::pi;
    if (x < 0.5) {
        if (x == std::floor(x)) throw std::domain_error("gamma: pole at non-positive integer");
        return pi / (std::sin(pi * x) * gamma(1.0 - x));
    }
    x -= 1.0;
    double a = coef[0];
    const double t = x + 7.5;
    for (std::size_t i = 1; i < coef.size(); ++i) a += coef[i] / (x + static_cast<double>(i));
    return std::sqrt(2.0 * pi) * std::pow(t, x + 0.5) * std::exp(-t) * a;
}

inline double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
    if (x < 100.0) return std::log(gamma(x));
    // Stirling series is exact to rounding here.
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * std::numbers::pi) +
           inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0));
}

/// Upper incomplete Gamma Gamma(a, x) = int_x^inf s^{a-1} e^{-s} ds for a > 0, x >= 0.
inline double upper_incomplete_gamma(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw std::domain_error("upper_incomplete_gamma: need a > 0, x >= 0");
    if (x == 0.0) return gamma(a);
    const double log_prefactor = a * std::log(x) - x;
    constexpr double eps = 1e-16;
    if (x < a + 1.0) {
        // Series for the lower function; the complement is well conditioned here.
        double ap = a;
        double del = 1.0 / a;
        double sum = del;
        for (int n = 0; n < 10000; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * eps) break;
        }
        const double lower = sum * std::exp(log_prefactor);
        return gamma(a) - lower;
    }
    // Modified Lentz continued fraction.
    constexpr double fpmin = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return std::exp(log_prefactor) * h;
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
};

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth, QuadResult& acc) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    acc.evaluations += 2;
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        acc.error += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, acc) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, acc);
}

}  // namespace detail

/// Adaptive Simpson on [a, b] to absolute tolerance tol.
template <class F>
QuadResult adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 50) {
    QuadResult acc;
    if (a == b) return acc;
    // Seed with a few panels so that narrow features are not missed.
    constexpr int panels = 8;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double pa = a + (b - a) * i / panels;
        const double pb = (i + 1 == panels) ? b : a + (b - a) * (i + 1) / panels;
        const double pm = 0.5 * (pa + pb);
        const double fpa = f(pa);
        const double fpb = f(pb);
        const double fpm = f(pm);
        acc.evaluations += 3;
        const double w = (pb - pa) / 6.0 * (fpa + 4.0 * fpm + fpb);
        total += detail::simpson_step(f, pa, fpa, pb, fpb, pm, fpm, w, tol / panels, max_depth, acc);
    }
    acc.value = total;
    return acc;
}

namespace detail {

inline constexpr std::array<double, 8> kronrod_x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kronrod_w = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_w = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const noexcept { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double k = fc * kronrod_w[7];
    double g = fc * gauss_w[3];
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = h * kronrod_x[j];
        const double s = f(c - dx) + f(c + dx);
        k += kronrod_w[j] * s;
        if (j % 2 == 1) g += gauss_w[j / 2] * s;
    }
    return {a, b, k * h, std::abs((k - g) * h)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b].
template <class F>
QuadResult gauss_kronrod(F&& f, double a, double b, double abs_tol, double rel_tol = 0.0,
                         std::size_t max_panels = 4000) {
    QuadResult r;
    if (a == b) return r;
    std::priority_queue<detail::Panel> heap;
    auto first = detail::gk15(f, a, b);
    heap.push(first);
    double value = first.value;
    double error = first.error;
    r.evaluations = 15;
    while (heap.size() < max_panels && error > std::max(abs_tol, rel_tol * std::abs(value))) {
        const auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.push(worst);
            break;
        }
        const auto l = detail::gk15(f, worst.a, mid);
        const auto rr = detail::gk15(f, mid, worst.b);
        r.evaluations += 30;
        value += l.value + rr.value - worst.value;
        error += l.error + rr.error - worst.error;
        heap.push(l);
        heap.push(rr);
    }
    // Re-sum from the panels to shed the running-update drift.
    CompensatedSum v;
    CompensatedSum e;
    while (!heap.empty()) {
        v += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    r.value = v.value();
    r.error = e.value();
    return r;
}

// ---------------------------------------------------------------------------
// Root bracketing
// ---------------------------------------------------------------------------

/// Smallest x in [lo, hi] (to bisection accuracy) with pred(x) true, given a
/// monotone predicate with pred(hi) true.
template <class P>
double bisect_predicate(P&& pred, double lo, double hi, int iterations = 200) {
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace anharmonic::numerics

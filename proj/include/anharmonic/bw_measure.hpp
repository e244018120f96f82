#pragma once

/**
 * @file bw_measure.hpp
 * @brief Representing measures of exp(-a t^alpha) (one-sided stable
 *        densities), their sums over modes, and Laplace round trips.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grids.hpp"
#include "numerics.hpp"
#include "oscillator_spectrum.hpp"
#include "parallel.hpp"
#include "potentials.hpp"
#include "traces.hpp"
#include "weyl.hpp"

namespace anharmonic {

/// g(lambda) = a / (2 sqrt(pi)) lambda^{-3/2} exp(-a^2 / (4 lambda)); Laplace transform exp(-a sqrt(t)).
inline double levy_density(double a, double lambda) {
    if (!(a > 0.0)) throw std::invalid_argument("levy_density: a must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("levy_density: lambda must be positive");
    return a / (2.0 * std::sqrt(std::numbers::pi)) * std::pow(lambda, -1.5) * std::exp(-a * a / (4.0 * lambda));
}

namespace detail {

inline void check_stable_args(double alpha, double a, double lambda, const char* who) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument(std::string(who) + ": alpha must lie in (0, 1)");
    if (!(a > 0.0)) throw std::invalid_argument(std::string(who) + ": a must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument(std::string(who) + ": lambda must be positive");
}

/// Kanter's form: with x = lambda a^{-1/alpha}, k = 1/(1-alpha),
/// g = a^{-1/alpha} (alpha k / pi) x^{-k} int_0^pi A(p) exp(-x^{-alpha k} A(p)) dp,
/// A(p) = (sin(alpha p) / sin p)^k sin((1-alpha) p) / sin(alpha p). Positive integrand.
inline numerics::QuadResult kanter_integral(double alpha, double a, double lambda, double tol) {
    const double k = 1.0 / (1.0 - alpha);
    const double scale = std::pow(a, -1.0 / alpha);
    const double x = lambda * scale;
    const double c = std::pow(x, -alpha * k);
    auto A = [&](double p) {
        if (p <= 0.0) return std::pow(alpha, alpha * k) * (1.0 - alpha);
        return std::pow(std::sin(alpha * p) / std::sin(p), k) * std::sin((1.0 - alpha) * p) / std::sin(alpha * p);
    };
    auto integrand = [&](double p) {
        const double v = A(p);
        const double e = c * v;
        return e > 745.0 || !std::isfinite(v) ? 0.0 : v * std::exp(-e);
    };
    const double pref = scale * alpha * k / std::numbers::pi * std::pow(x, -k);
    // The integrand is concentrated near p = 0 when c is large; split there.
    const double pi = std::numbers::pi;
    const double cut = std::min(pi / 2.0, 8.0 / std::sqrt(std::max(c, 1.0)));
    auto r1 = numerics::gauss_kronrod(integrand, 0.0, cut, 0.25 * tol / pref, 1e-13);
    auto r2 = numerics::gauss_kronrod(integrand, cut, pi, 0.25 * tol / pref, 1e-13);
    return {pref * (r1.value + r2.value), pref * (r1.error + r2.error), r1.evaluations + r2.evaluations};
}

/// log of the Pollard envelope maximum, exp(-v - a (v/lambda)^alpha cos(pi alpha)) over v >= 0.
inline double pollard_peak_exponent(double alpha, double a, double lambda) {
    const double c = std::cos(std::numbers::pi * alpha);
    if (c >= 0.0) return 0.0;
    const double v = lambda * std::pow(a * alpha * -c / lambda, 1.0 / (1.0 - alpha));
    return -v - a * c * std::pow(v / lambda, alpha);
}

inline numerics::QuadResult pollard_integral(double alpha, double a, double lambda, double tol) {
    const double pi = std::numbers::pi;
    const double c = std::cos(pi * alpha);
    const double s = std::sin(pi * alpha);
    // u = v / lambda: g = 1/(pi lambda) int_0^inf exp(-v - a (v/lambda)^alpha c) sin(a (v/lambda)^alpha s) dv
    auto exponent = [&](double v) { return -v - a * c * std::pow(v / lambda, alpha); };
    auto integrand = [&](double v) {
        const double w = a * std::pow(v / lambda, alpha);
        return std::exp(-v - w * c) * std::sin(w * s);
    };
    const double peak = pollard_peak_exponent(alpha, a, lambda);
    // Truncate once the envelope is 1e-16 below its peak (exponent is concave for alpha < 1).
    double v_cut = std::max(1.0, c < 0.0 ? lambda * std::pow(a * alpha * -c / lambda, 1.0 / (1.0 - alpha)) : 0.0);
    while (exponent(v_cut) > peak - 37.0) v_cut *= 2.0;
    const double pref = 1.0 / (pi * lambda);
    numerics::CompensatedSum total;
    double err = 0.0;
    std::size_t evals = 0;
    double magnitude = 0.0;
    double lo = 0.0;
    for (int k = 1; lo < v_cut; ++k) {
        const double zero = lambda * std::pow(k * pi / (a * s), 1.0 / alpha);
        const double hi = std::min(zero, v_cut);
        const auto r = numerics::gauss_kronrod(integrand, lo, hi, 0.05 * tol / pref, 1e-13);
        total += r.value;
        magnitude += std::abs(r.value);
        err += r.error;
        evals += r.evaluations;
        lo = hi;
    }
    // Rounding in the alternating sum of segment integrals.
    err += 8.0 * numerics::unit_roundoff * magnitude;
    return {pref * total.value(), pref * err, evals};
}

}  // namespace detail

/**
 * One-sided stable density with Laplace transform exp(-a t^alpha), evaluated
 * from Pollard's integral (1/pi) int_0^inf exp(-lambda u - a u^alpha cos pi alpha)
 * sin(a u^alpha sin pi alpha) du. Where the envelope peak makes that integral
 * cancel below the tolerance (alpha > 1/2, small lambda), the non-oscillatory
 * Kanter integral of the same density is used. Values within the error
 * estimate of zero are clamped to 0.
 */
inline double pollard_density(double alpha, double a, double lambda, double tol = 1e-10) {
    detail::check_stable_args(alpha, a, lambda, "pollard_density");
    numerics::QuadResult r;
    if (detail::pollard_peak_exponent(alpha, a, lambda) > 3.0) {
        r = detail::kanter_integral(alpha, a, lambda, tol);
    } else {
        r = detail::pollard_integral(alpha, a, lambda, tol);
    }
    if (!(r.error <= tol) || !std::isfinite(r.value)) {
        throw NumericalFailure("pollard_density: requested tolerance not reached at lambda = " +
                               std::to_string(lambda));
    }
    if (r.value < 0.0) {
        if (r.value >= -std::max(r.error, tol)) return 0.0;
        throw NumericalFailure("pollard_density: negative density beyond the error estimate");
    }
    return r.value;
}

/// Kanter's integral on its own, exposed for cross-checks.
inline double kanter_density(double alpha, double a, double lambda, double tol = 1e-10) {
    detail::check_stable_args(alpha, a, lambda, "kanter_density");
    const auto r = detail::kanter_integral(alpha, a, lambda, tol);
    if (!(r.error <= tol)) throw NumericalFailure("kanter_density: requested tolerance not reached");
    return std::max(0.0, r.value);
}

struct StableScaleDensity {
    double alpha = 0.5;
    double a = 1.0;

    StableScaleDensity() = default;
    StableScaleDensity(double alpha_, double a_) : alpha(alpha_), a(a_) {
        if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("StableScaleDensity: alpha must lie in (0, 1)");
        if (!(a > 0.0)) throw std::invalid_argument("StableScaleDensity: a must be positive");
    }

    double operator()(double lambda) const {
        if (alpha == 0.5) return levy_density(a, lambda);
        return pollard_density(alpha, a, lambda);
    }

    double transform(double t) const { return std::exp(-a * std::pow(t, alpha)); }

    /// The mass below this lambda is at most exp(-45): the Chernoff bound
    /// min_s exp(s lambda - a s^alpha) solved for the exponent 45.
    double negligible_below() const {
        const double k = 1.0 / (1.0 - alpha);
        return std::pow(std::pow(alpha, alpha) * a / std::pow(45.0 * k, 1.0 - alpha), 1.0 / alpha);
    }

    /// Total mass: quadrature in ln(lambda) up to L = 1e3 a^{1/alpha}, where the
    /// large-lambda series converges fast, plus that series for the rest.
    double mass() const {
        const double lo = std::log(negligible_below());
        const double big = 1e3 * std::pow(a, 1.0 / alpha);
        auto f = [&](double s) {
            const double l = std::exp(s);
            const double g = alpha == 0.5 ? levy_density(a, l) : pollard_density(alpha, a, l, 1e-11 / std::max(1.0, l));
            return g * l;
        };
        const double body = numerics::gauss_kronrod(f, lo, std::log(big), 1e-13, 1e-13).value;
        return body + upper_tail_mass(big);
    }

    /// mass above lambda: sum_k (-1)^{k+1} Gamma(alpha k + 1) a^k sin(pi alpha k) / (pi k! alpha k) lambda^{-alpha k}.
    double upper_tail_mass(double lambda) const {
        numerics::CompensatedSum s;
        double fact = 1.0;
        for (int k = 1; k <= 60; ++k) {
            fact *= k;
            const double size = std::exp(numerics::log_gamma(alpha * k + 1.0) + k * std::log(a) -
                                         alpha * k * std::log(lambda)) /
                                (std::numbers::pi * fact * alpha * k);
            const double term = size * std::sin(std::numbers::pi * alpha * k);
            s += (k % 2 ? term : -term);
            if (size < 1e-18) break;
        }
        return s.value();
    }
};

/// dsigma_n for exp(-lambda_n(1) t^{2/(2+rho)}).
inline StableScaleDensity mode_measure(double lambda_n_at_1, double rho) {
    if (!(lambda_n_at_1 > 0.0) || !(rho > 0.0)) throw std::invalid_argument("mode_measure: inputs must be positive");
    return {2.0 / (2.0 + rho), lambda_n_at_1};
}

/// Omitted modes: every a_n left out is >= floor, and #{a_n < r} <= amplitude r^exponent + 1.
struct ModeTail {
    double amplitude = 0.0;
    double exponent = 0.0;
    double floor = 0.0;
    double alpha = 0.5;

    /// Bound on sum of exp(-a_n t^alpha) over the omitted modes.
    double transform_bound(double t) const {
        if (amplitude == 0.0) return 0.0;
        const double tau = std::pow(t, alpha);
        return amplitude * std::pow(tau, -exponent) * numerics::upper_incomplete_gamma(exponent + 1.0, floor * tau) +
               std::exp(-floor * tau);
    }

    /// Bound on the omitted measure's mass in (0, lambda_max]:
    /// sigma((0, L]) <= e * transform(1 / L).
    double mass_bound(double lambda_max) const { return std::numbers::e * transform_bound(1.0 / lambda_max); }
};

struct Atom {
    double location = 0.0;
    double weight = 0.0;
};

struct MeasureGrid {
    std::vector<double> lambdas;
    std::vector<double> density_values;
    std::vector<Atom> atoms;
    std::size_t modes_used = 0;
    std::optional<ModeTail> tail;
    double omitted_mass_bound = 0.0;  ///< omitted modes' mass on (0, lambdas.back()]
    std::string truncation_note;
};

inline std::vector<double> lambda_grid(double lo, double hi, std::size_t points) {
    return geometric_grid(lo, hi, points);
}

/// A grid that resolves the transforms of `modes` for t >= t_min.
inline std::vector<double> default_lambda_grid(std::span<const StableScaleDensity> modes, double t_min,
                                               std::size_t points = 2001) {
    if (modes.empty()) return lambda_grid(1e-3, 1e3, points);
    double lo = 1e300;
    for (const auto& m : modes) lo = std::min(lo, m.negligible_below());
    const double hi = std::max(10.0 * lo, 45.0 / t_min);
    return lambda_grid(lo, hi, points);
}

/// sum_{n < cutoff} dsigma_n on the grid, optionally restricted by parity of n.
inline MeasureGrid aggregate_measure(std::span<const StableScaleDensity> modes, std::span<const double> grid,
                                     std::size_t mode_cutoff, TraceKind kind = TraceKind::full,
                                     std::optional<ModeTail> tail = std::nullopt) {
    if (mode_cutoff > modes.size()) {
        throw std::invalid_argument("aggregate_measure: cutoff " + std::to_string(mode_cutoff) + " exceeds the " +
                                    std::to_string(modes.size()) + " available modes");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
            throw std::invalid_argument("aggregate_measure: grid must be positive and ascending");
        }
    }
    MeasureGrid out;
    out.lambdas.assign(grid.begin(), grid.end());
    out.density_values.assign(grid.size(), 0.0);
    out.modes_used = mode_cutoff;
    out.tail = tail;
    std::vector<std::size_t> used;
    for (std::size_t n = 0; n < mode_cutoff; ++n) {
        if (kind == TraceKind::even && n % 2 == 1) continue;
        if (kind == TraceKind::odd && n % 2 == 0) continue;
        used.push_back(n);
    }
    parallel_for(grid.size(), [&](std::size_t i) {
        numerics::CompensatedSum s;
        for (std::size_t n : used) s += modes[n](grid[i]);
        out.density_values[i] = s.value();
    });
    if (tail && !grid.empty()) out.omitted_mass_bound = tail->mass_bound(grid.back());
    out.truncation_note = std::to_string(used.size()) + " modes (" + to_string(kind) + ")";
    if (tail) out.truncation_note += ", omitted modes bounded by the counting envelope";
    else if (mode_cutoff < modes.size()) out.truncation_note += ", later modes dropped without a bound";
    return out;
}

struct LaplaceResult {
    double value = 0.0;
    double truncation_bound = 0.0;  ///< omitted modes plus mass beyond the grid
};

/// int exp(-lambda t) dsigma: trapezoid in ln(lambda) on the density plus the exact atom sum.
inline LaplaceResult laplace_transform(const MeasureGrid& m, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("laplace_transform: t must be positive");
    numerics::CompensatedSum s;
    const auto& x = m.lambdas;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double d = std::log(x[i] / x[i - 1]);
        const double f0 = m.density_values[i - 1] * x[i - 1] * std::exp(-x[i - 1] * t);
        const double f1 = m.density_values[i] * x[i] * std::exp(-x[i] * t);
        s += 0.5 * d * (f0 + f1);
    }
    for (const auto& a : m.atoms) s += a.weight * std::exp(-a.location * t);
    LaplaceResult r{s.value(), 0.0};
    if (!x.empty()) {
        // Every retained mode is a probability measure: mass above the grid costs at most exp(-L t) each.
        const double per = std::exp(-x.back() * t);
        r.truncation_bound = static_cast<double>(m.modes_used) * per;
    }
    if (m.tail) r.truncation_bound += m.tail->transform_bound(t);
    return r;
}

/// Modes of a single-term family -d^2/dx^2 + t V from the t = 1 spectrum, with
/// the omitted modes bounded by the verified 2 C_V envelope.
struct SpectralModes {
    std::vector<StableScaleDensity> modes;
    ModeTail tail;
    Spectrum base;
};

inline SpectralModes spectral_modes(const PencilPotential& pencil, std::size_t count, double tol = 1e-10) {
    if (!pencil.is_single_term()) {
        throw std::invalid_argument("spectral_modes: representing measures are built only for single-term families");
    }
    if (count == 0) throw std::invalid_argument("spectral_modes: count must be >= 1");
    const auto& v = pencil.v1();
    const double rho = v.terms().front().rho();
    SpectralModes out{{}, {}, compute_spectrum({pencil, 1.0, count, tol})};
    for (double l : out.base.eigenvalues) out.modes.push_back(mode_measure(l, rho));
    const CountEnvelope env(v);
    env.verify(out.base.eigenvalues);
    const double floor = std::max(env.eigenvalue_floor(count),
                                  out.base.eigenvalues.back() - out.base.error_estimates.back());
    out.tail = {env.amplitude, env.exponent, floor, 2.0 / (2.0 + rho)};
    return out;
}

}  // namespace anharmonic

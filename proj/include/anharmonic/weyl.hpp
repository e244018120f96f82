#pragma once

/**
 * @file weyl.hpp
 * @brief Eigenvalue counting, the semiclassical phase-space integral, the
 *        Weyl constant of a homogeneous potential and certified trace tails.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "oscillator_spectrum.hpp"
#include "potentials.hpp"

namespace anharmonic {

struct WeylEstimate {
    double r = 0.0;
    std::size_t count_exact = 0;
    double count_asymptotic = 0.0;
    double ratio = 0.0;
};

/// #{k : lambda_k < r}. The spectrum must reach r.
inline std::size_t counting_function(const Spectrum& spec, double r) {
    if (spec.eigenvalues.empty() || spec.eigenvalues.back() < r) {
        throw std::invalid_argument("counting_function: spectrum does not reach r; request more eigenvalues");
    }
    return static_cast<std::size_t>(
        std::lower_bound(spec.eigenvalues.begin(), spec.eigenvalues.end(), r) - spec.eigenvalues.begin());
}

/// Integral of sqrt(r - t V(x)) over the classically allowed interval.
inline double phase_space_integral(const Potential& p, double t, double r) {
    if (!(t > 0.0)) throw std::invalid_argument("phase_space_integral: t must be positive");
    if (!(r > 0.0)) throw std::invalid_argument("phase_space_integral: r must be positive");
    const PencilPotential w = PencilPotential::family(p);
    double total = 0.0;
    for (int side : {+1, -1}) {
        const double s = side;
        const double x_tp = turning_point(w, t, r, side);
        // x = x_tp (1 - u^2) removes the square-root endpoint singularity.
        auto integrand = [&](double u) {
            const double x = x_tp * (1.0 - u * u);
            const double gap = r - w(t, s * x);
            return gap > 0.0 ? 2.0 * x_tp * u * std::sqrt(gap) : 0.0;
        };
        const double scale = x_tp * std::sqrt(r);
        total += numerics::adaptive_simpson(integrand, 0.0, 1.0, 1e-12 * scale).value;
    }
    return total;
}

/**
 * Leading Weyl coefficient: N(r) ~ C_V r^{1/2 + 1/rho} for c_+|x|^rho, c_-|x|^rho,
 *   C_V = (c_+^{-1/rho} + c_-^{-1/rho}) (1/rho) (1/(2 sqrt(pi))) Gamma(1/rho) / Gamma(1/rho + 3/2),
 * which is phase_space_integral / pi.
 */
inline double weyl_constant(const Potential& p) {
    if (!p.single_term()) throw std::invalid_argument("weyl_constant: single homogeneous term required");
    const auto& h = p.terms().front();
    const double inv = 1.0 / h.rho();
    const double coeff = std::pow(h.c_plus(), -inv) + std::pow(h.c_minus(), -inv);
    return coeff * inv / (2.0 * std::sqrt(std::numbers::pi)) * numerics::gamma(inv) /
           numerics::gamma(inv + 1.5);
}

inline double weyl_exponent(const Potential& p) {
    if (!p.single_term()) throw std::invalid_argument("weyl_exponent: single homogeneous term required");
    return 0.5 + 1.0 / p.terms().front().rho();
}

/// Exact count against C_V (r / s)^beta, s = t^{2/(2+rho)}, for a single-term family.
inline WeylEstimate weyl_estimate(const Spectrum& spec, double r) {
    const auto& v = spec.pencil.v1();
    if (!spec.pencil.is_single_term()) throw std::invalid_argument("weyl_estimate: single-term family required");
    const double rho = v.terms().front().rho();
    const double s = std::pow(spec.t, 2.0 / (2.0 + rho));
    WeylEstimate w;
    w.r = r;
    w.count_exact = counting_function(spec, r);
    w.count_asymptotic = weyl_constant(v) * std::pow(r / s, weyl_exponent(v));
    w.ratio = static_cast<double>(w.count_exact) / w.count_asymptotic;
    return w;
}

/// Counting envelope N(r) <= A r^beta + 1 at t = 1 with A = 2 C_V. The
/// additive 1 covers the half-mode offset of the lowest levels.
struct CountEnvelope {
    double amplitude = 0.0;
    double exponent = 0.0;

    explicit CountEnvelope(const Potential& p)
        : amplitude(2.0 * weyl_constant(p)), exponent(weyl_exponent(p)) {}

    double operator()(double r) const { return amplitude * std::pow(r, exponent) + 1.0; }

    /// Smallest r the envelope allows for the m-th eigenvalue (0-based m):
    /// m + 1 <= A lambda_m^beta + 1 forces lambda_m >= (m / A)^{1/beta}.
    double eigenvalue_floor(std::size_t m) const {
        return std::pow(static_cast<double>(m) / amplitude, 1.0 / exponent);
    }

    /// Sum of exp(-s mu) over eigenvalues mu >= floor / s, with lambda = s mu:
    /// integration by parts against the envelope gives
    /// A s^{-beta} Gamma(beta + 1, floor) + exp(-floor).
    double tail(double s, double floor) const {
        if (std::isinf(floor)) return 0.0;
        return amplitude * std::pow(s, -exponent) * numerics::upper_incomplete_gamma(exponent + 1.0, floor) +
               std::exp(-floor);
    }

    /// Throws if a computed t = 1 eigenvalue list exceeds the envelope.
    void verify(std::span<const double> base_eigenvalues) const {
        for (std::size_t k = 0; k < base_eigenvalues.size(); ++k) {
            // Just above lambda_k the count is k + 1.
            if (static_cast<double>(k + 1) > (*this)(base_eigenvalues[k])) {
                throw NumericalFailure("tail_bound: eigenvalue count exceeds the counting envelope at index " +
                                       std::to_string(k));
            }
        }
    }
};

/**
 * Upper bound for the sum of exp(-lambda_n(t)) over lambda_n(t) >= lambda_floor
 * for the family t V, V single-term: CountEnvelope::tail with s = t^{2/(2+rho)}.
 * `base_eigenvalues` (t = 1) are checked against the envelope first.
 */
inline double tail_bound(const Potential& p, double t, double lambda_floor,
                         std::span<const double> base_eigenvalues) {
    if (!(t > 0.0)) throw std::invalid_argument("tail_bound: t must be positive");
    if (!(lambda_floor > 0.0)) throw std::invalid_argument("tail_bound: lambda_floor must be positive");
    const CountEnvelope env(p);
    env.verify(base_eigenvalues);
    const double rho = p.terms().front().rho();
    return env.tail(std::pow(t, 2.0 / (2.0 + rho)), lambda_floor);
}

/// As above; the envelope is checked against a freshly computed t = 1
/// spectrum covering the floor (capped at 64 modes).
inline double tail_bound(const Potential& p, double t, double lambda_floor) {
    if (!(t > 0.0)) throw std::invalid_argument("tail_bound: t must be positive");
    if (!(lambda_floor > 0.0)) throw std::invalid_argument("tail_bound: lambda_floor must be positive");
    const CountEnvelope env(p);
    const double rho = p.terms().front().rho();
    const double s = std::pow(t, 2.0 / (2.0 + rho));
    const double reach = std::isinf(lambda_floor) ? 1e300 : lambda_floor / s;
    const double wanted = std::min(64.0, std::max(4.0, std::ceil(env(reach)) + 1.0));
    const auto base = compute_spectrum({PencilPotential::family(p), 1.0, static_cast<std::size_t>(wanted), 1e-6});
    return tail_bound(p, t, lambda_floor, base.eigenvalues);
}

}  // namespace anharmonic

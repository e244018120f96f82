#pragma once

/**
 * @file traces.hpp
 * @brief Trace functions phi(t) = sum_n exp(-lambda_n(t)) of the pencil and
 *        their even/odd parts, with certified truncation.
 *
 * Truncation: since V0, V1 >= 0, every eigenvalue of the pencil dominates the
 * same-index eigenvalue of -d^2/dx^2 + sigma c|x|^rho for any single term of
 * V0 (sigma = 1) or V1 (sigma = t). The Weyl envelope of that term bounds the
 * omitted modes, and the term giving the smallest bound is used.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "numerics.hpp"
#include "oscillator_spectrum.hpp"
#include "parallel.hpp"
#include "potentials.hpp"
#include "weyl.hpp"

namespace anharmonic {

enum class TraceKind { full, even, odd };

inline const char* to_string(TraceKind k) noexcept {
    switch (k) {
        case TraceKind::even: return "even";
        case TraceKind::odd: return "odd";
        default: return "full";
    }
}

struct TraceOptions {
    double eigen_budget = 1e-9;  ///< bound on the trace error caused by eigenvalue errors
    double max_mode_tol = 1e-2;  ///< loosest tolerance any retained mode may get
    bool use_scaling = true;     ///< single-term fast path through the t = 1 spectrum
    SolverOptions solver;
};

struct TraceValue {
    double value = 0.0;
    double tail_bound = 0.0;   ///< certified bound on the omitted modes
    double eigen_error = 0.0;  ///< first-order propagation of eigenvalue error estimates
    std::size_t modes = 0;

    double total_error() const noexcept { return tail_bound + eigen_error; }
};

struct ParityTrace {
    TraceValue even;
    TraceValue odd;
};

struct TraceCurve {
    std::vector<double> ts;
    std::vector<double> values;
    std::vector<double> tail_bounds;
    std::vector<double> eigen_errors;
    TraceKind kind = TraceKind::full;
    std::string family;
};

/// Closed forms for -d^2/dx^2 + t x^2, by geometric summation of exp(-(2n+1) sqrt t).
struct HarmonicTraces {
    double phi = 0.0;
    double phi_even = 0.0;
    double phi_odd = 0.0;
};

inline HarmonicTraces harmonic_closed_form(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("harmonic_closed_form: t must be positive");
    const double r = std::sqrt(t);
    const double d = 2.0 * std::sinh(2.0 * r);
    return {0.5 / std::sinh(r), std::exp(r) / d, std::exp(-r) / d};
}

/// The same three functions without the factor 1/2 and with sinh(sqrt(2t)) in
/// the parity parts. Kept only for side-by-side comparison output; these do
/// not satisfy phi = phi_even + phi_odd.
inline HarmonicTraces harmonic_unnormalized_forms(double t) {
    if (!(t > 0.0)) throw std::invalid_argument("harmonic_unnormalized_forms: t must be positive");
    const double r = std::sqrt(t);
    const double d = std::sinh(std::sqrt(2.0 * t));
    return {1.0 / std::sinh(r), std::exp(r) / d, std::exp(-r) / d};
}

/**
 * Evaluates trace functions of one pencil on a t-range. The constructor fixes
 * the mode budget for the smallest t, verifies the Weyl envelopes it relies on
 * and, for single-term families, computes the t = 1 spectrum once. After
 * construction every evaluation is const and thread-safe.
 */
class TraceEvaluator {
public:
    TraceEvaluator(PencilPotential pencil, double t_min, double t_max, double tail_tol,
                   TraceOptions opts = {})
        : pencil_(std::move(pencil)), t_min_(t_min), t_max_(t_max), tail_tol_(tail_tol), opts_(opts) {
        if (!(t_min > 0.0) || !(t_max >= t_min)) throw std::invalid_argument("TraceEvaluator: need 0 < t_min <= t_max");
        if (!(tail_tol > 0.0)) throw std::invalid_argument("TraceEvaluator: tail_tol must be positive");
        for (const auto& h : pencil_.v1().terms()) candidates_.push_back(make_candidate(h, true));
        if (pencil_.v0())
            for (const auto& h : pencil_.v0()->terms()) candidates_.push_back(make_candidate(h, false));

        max_modes_ = required_modes(t_min_).first;

        if (pencil_.is_single_term() && opts_.use_scaling) {
            base_ = compute_base();
            candidates_.front().env.verify(base_->eigenvalues);
        } else {
            for (const auto& c : candidates_) {
                const auto check = compute_spectrum(
                    {PencilPotential::family(c.term), 1.0, max_modes_, 1e-6}, opts_.solver);
                c.env.verify(check.eigenvalues);
            }
        }
    }

    const PencilPotential& pencil() const noexcept { return pencil_; }
    std::size_t max_modes() const noexcept { return max_modes_; }
    double tail_tol() const noexcept { return tail_tol_; }

    /// Retained mode count at t and the certified tail bound for it.
    std::pair<std::size_t, double> required_modes(double t) const {
        auto bound = [&](std::size_t m) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : candidates_) best = std::min(best, candidate_tail(c, t, m));
            return best;
        };
        std::size_t hi = 4;
        while (bound(hi) > tail_tol_) {
            hi *= 2;
            if (hi > (std::size_t{1} << 16)) throw NumericalFailure("trace: tail tolerance needs too many modes");
        }
        std::size_t lo = hi / 2;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (bound(mid) <= tail_tol_ ? hi : lo) = mid;
        }
        return {hi, bound(hi)};
    }

    Spectrum spectrum_at(double t) const {
        check_range(t);
        const auto [m, tail] = required_modes(t);
        if (base_) {
            Spectrum s = scaled_spectrum(*base_, t, base_rho());
            s.eigenvalues.resize(m);
            s.error_estimates.resize(m);
            if (!s.parities.empty()) s.parities.resize(m);
            return s;
        }
        SpectrumRequest req{pencil_, t, m, opts_.max_mode_tol, {}};
        const double budget = opts_.eigen_budget;
        req.mode_tol = [budget, m](std::size_t, double est) {
            return budget * std::exp(std::min(est, 700.0)) / static_cast<double>(m);
        };
        return compute_spectrum(req, opts_.solver);
    }

    TraceValue value(double t, TraceKind kind = TraceKind::full) const {
        if (kind != TraceKind::full && !pencil_.is_even()) {
            throw std::invalid_argument("trace: parity split needs an even pencil");
        }
        const Spectrum s = spectrum_at(t);
        return summarize(s, t, kind);
    }

    ParityTrace split(double t) const {
        if (!pencil_.is_even()) throw std::invalid_argument("parity_split_trace: pencil is not even");
        const Spectrum s = spectrum_at(t);
        return {summarize(s, t, TraceKind::even), summarize(s, t, TraceKind::odd)};
    }

private:
    struct Candidate {
        Potential term;
        bool scales_with_t;
        CountEnvelope env;
        double rho;
    };

    static Candidate make_candidate(const HomogeneousTerm& h, bool scales) {
        Potential p{h};
        return {p, scales, CountEnvelope(p), h.rho()};
    }

    void check_range(double t) const {
        // Small slack for grid endpoints produced by floating-point arithmetic.
        if (!(t >= t_min_ * (1.0 - 1e-12)) || !(t <= t_max_ * (1.0 + 1e-12))) {
            throw std::out_of_range("trace: t outside the evaluator range");
        }
    }

    double base_rho() const { return pencil_.v1().terms().front().rho(); }

    static double candidate_tail(const Candidate& c, double t, std::size_t m) {
        const double sigma = c.scales_with_t ? t : 1.0;
        const double s = std::pow(sigma, 2.0 / (2.0 + c.rho));
        const double floor = s * c.env.eigenvalue_floor(m);
        if (!(floor > 0.0)) return std::numeric_limits<double>::infinity();
        return c.env.tail(s, floor);
    }

    /// t = 1 spectrum whose per-mode tolerances keep the propagated trace
    /// error under the budget for every t in [t_min, t_max].
    Spectrum compute_base() const {
        const double rho = base_rho();
        const double s_min = std::pow(t_min_, 2.0 / (2.0 + rho));
        const double s_max = std::pow(t_max_, 2.0 / (2.0 + rho));
        const std::size_t m = max_modes_;
        const double budget = opts_.eigen_budget;
        SpectrumRequest req{pencil_, 1.0, m, opts_.max_mode_tol, {}};
        req.mode_tol = [=](std::size_t, double lam) {
            // sup of s exp(-s lam) over [s_min, s_max]
            const double s_star = std::clamp(1.0 / lam, s_min, s_max);
            const double weight = s_star * std::exp(-s_star * lam);
            return budget / (static_cast<double>(m) * weight);
        };
        return compute_spectrum(req, opts_.solver);
    }

    TraceValue summarize(const Spectrum& s, double t, TraceKind kind) const {
        TraceValue out;
        numerics::CompensatedSum v;
        numerics::CompensatedSum e;
        for (std::size_t n = 0; n < s.eigenvalues.size(); ++n) {
            if (kind == TraceKind::even && n % 2 == 1) continue;
            if (kind == TraceKind::odd && n % 2 == 0) continue;
            const double w = std::exp(-s.eigenvalues[n]);
            v += w;
            // |exp(-l) - exp(-l - d)| <= exp(-l + d) d
            const double d = s.error_estimates[n];
            e += w * std::expm1(d);
        }
        out.value = v.value();
        out.eigen_error = e.value();
        out.modes = s.eigenvalues.size();
        out.tail_bound = required_modes(t).second;
        if (pencil_.is_single_term() && !s.eigenvalues.empty()) {
            // The computed top eigenvalue (already at t) is a sharper floor for
            // the omitted modes.
            const std::size_t m = s.eigenvalues.size();
            const double floor = s.eigenvalues[m - 1] - s.error_estimates[m - 1];
            if (floor > 0.0) {
                const auto& c = candidates_.front();
                const double sc = std::pow(t, 2.0 / (2.0 + c.rho));
                out.tail_bound = std::min(out.tail_bound, c.env.tail(sc, floor));
            }
        }
        return out;
    }

    PencilPotential pencil_;
    double t_min_;
    double t_max_;
    double tail_tol_;
    TraceOptions opts_;
    std::vector<Candidate> candidates_;
    std::size_t max_modes_ = 0;
    std::optional<Spectrum> base_;
};

inline TraceValue trace_value(const PencilPotential& pencil, double t, double tail_tol,
                              const TraceOptions& opts = {}) {
    if (!(t > 0.0)) throw std::invalid_argument("trace_value: t must be positive");
    return TraceEvaluator(pencil, t, t, tail_tol, opts).value(t);
}

inline ParityTrace parity_split_trace(const PencilPotential& pencil, double t, double tail_tol,
                                      const TraceOptions& opts = {}) {
    if (!pencil.is_even()) throw std::invalid_argument("parity_split_trace: pencil is not even");
    return TraceEvaluator(pencil, t, t, tail_tol, opts).split(t);
}

inline TraceCurve sample_curve(const PencilPotential& pencil, std::span<const double> t_grid, double tail_tol,
                               TraceKind kind = TraceKind::full, const TraceOptions& opts = {}) {
    if (t_grid.empty()) throw std::invalid_argument("sample_curve: empty grid");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > 0.0)) throw std::invalid_argument("sample_curve: grid must be positive");
        if (i > 0 && !(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("sample_curve: grid must be ascending");
    }
    const TraceEvaluator ev(pencil, t_grid.front(), t_grid.back(), tail_tol, opts);
    TraceCurve c;
    c.kind = kind;
    c.family = format_pencil(pencil);
    c.ts.assign(t_grid.begin(), t_grid.end());
    const std::size_t n = t_grid.size();
    c.values.resize(n);
    c.tail_bounds.resize(n);
    c.eigen_errors.resize(n);
    parallel_for(n, [&](std::size_t i) {
        const auto v = ev.value(t_grid[i], kind);
        c.values[i] = v.value;
        c.tail_bounds[i] = v.tail_bound;
        c.eigen_errors[i] = v.eigen_error;
    });
    return c;
}

}  // namespace anharmonic

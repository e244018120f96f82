#pragma once

/**
 * @file oscillator_spectrum.hpp
 * @brief Lowest eigenvalues of L_t = -d^2/dx^2 + V0(x) + t V1(x) on the line.
 *
 * The line problem is truncated to [-X, X] with Dirichlet ends and discretized
 * by the three-point second difference, so the discrete operator is symmetric
 * tridiagonal and the Sturm kernel applies. Grids are nested (N -> 2N + 1
 * keeps x = 0 a node and halves h exactly), which makes the h^2 Richardson
 * step exact in its leading term.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "potentials.hpp"
#include "tridiag_eigen.hpp"

namespace anharmonic {

enum class Parity { even, odd };

inline const char* to_string(Parity p) noexcept { return p == Parity::even ? "even" : "odd"; }

struct SpectrumRequest {
    PencilPotential pencil;
    double t = 1.0;
    std::size_t count = 1;
    double tol = 1e-8;  ///< absolute eigenvalue tolerance
    /// Optional per-mode tolerance given (index, coarse eigenvalue estimate).
    /// The effective tolerance of mode n is min(tol, mode_tol(n, estimate)).
    std::function<double(std::size_t, double)> mode_tol;
};

struct SolverOptions {
    std::size_t max_grid = std::size_t{1} << 20;
    std::size_t min_grid = 127;
    int max_domain_doublings = 4;
};

struct Mesh {
    double half_width = 0.0;       ///< X of the certified domain [-X, X]
    std::size_t grid_points = 0;   ///< interior points of the finest grid
    int refinement_levels = 0;     ///< number of grids solved on the final domain
    int domain_doublings = 0;      ///< X doublings needed beyond the initial choice
};

struct Spectrum {
    PencilPotential pencil;
    double t = 1.0;
    std::vector<double> eigenvalues;
    std::vector<double> error_estimates;
    std::vector<Parity> parities;  ///< empty unless the pencil is even
    Mesh mesh;

    std::size_t size() const noexcept { return eigenvalues.size(); }
};

/// Three-point discretization of L_t on x_i = -X + i h, h = 2X/(N+1), i = 1..N.
inline SymTridiagonal discretize(const PencilPotential& pencil, double t, double half_width,
                                 std::size_t n) {
    if (!(t > 0.0)) throw std::invalid_argument("discretize: t must be positive");
    if (!(half_width > 0.0)) throw std::invalid_argument("discretize: X must be positive");
    if (n < 3) throw std::invalid_argument("discretize: need at least 3 interior points");
    const double h = 2.0 * half_width / static_cast<double>(n + 1);
    const double kinetic = 1.0 / (h * h);
    // Stored as potential plus the boundary defect of the Laplacian row sums,
    // so diag_i = 2/h^2 + W(x_i) exactly as above.
    std::vector<double> excess(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = -half_width + static_cast<double>(i + 1) * h;
        const double w = pencil(t, x);
        if (!std::isfinite(w)) throw std::invalid_argument("discretize: non-finite potential value");
        excess[i] = w;
    }
    excess.front() += kinetic;
    excess.back() += kinetic;
    std::vector<double> off(n - 1, -kinetic);
    return SymTridiagonal::with_excess(std::move(excess), std::move(off));
}

/// Classical turning point on one side: |x| with W(side * |x|) = level.
inline double turning_point(const PencilPotential& pencil, double t, double level, int side) {
    const double s = side >= 0 ? 1.0 : -1.0;
    auto reached = [&](double r) { return pencil(t, s * r) >= level; };
    double hi = 1.0;
    double lo = 0.0;
    while (!reached(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e150) throw NumericalFailure("turning_point: potential never reaches the level");
    }
    return numerics::bisect_predicate(reached, lo, hi);
}

/// Smallest X with W(X) >= 4 lambda_guess and (X - x_tp) sqrt(W(X) - lambda_guess) >= 30,
/// taking the larger of the two one-sided values.
inline double choose_domain(const PencilPotential& pencil, double t, std::size_t /*m*/,
                            double lambda_guess) {
    if (!(lambda_guess > 0.0)) throw std::invalid_argument("choose_domain: lambda_guess must be positive");
    constexpr double energy_margin = 4.0;
    constexpr double decay_exponent = 30.0;
    double best = 0.0;
    for (int side : {+1, -1}) {
        const double s = side;
        const double x_tp = turning_point(pencil, t, lambda_guess, side);
        const double x_energy = turning_point(pencil, t, energy_margin * lambda_guess, side);
        auto decayed = [&](double x) {
            const double gap = pencil(t, s * x) - lambda_guess;
            return gap > 0.0 && (x - x_tp) * std::sqrt(gap) >= decay_exponent;
        };
        double hi = std::max(x_energy, 2.0 * x_tp);
        while (!decayed(hi)) hi *= 2.0;
        const double x_decay = numerics::bisect_predicate(decayed, x_tp, hi);
        best = std::max({best, x_energy, x_decay});
    }
    return best;
}

/// Parity of the n-th eigenfunction of an even potential: (-1)^n.
inline std::vector<Parity> parity_labels(std::size_t m) {
    std::vector<Parity> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = (i % 2 == 0) ? Parity::even : Parity::odd;
    return out;
}

inline std::vector<Parity> parity_labels(const PencilPotential& pencil, std::size_t m) {
    if (!pencil.is_even()) throw std::invalid_argument("parity_labels: pencil is not even");
    return parity_labels(m);
}

namespace detail {

inline std::size_t make_odd(std::size_t n) { return n % 2 == 1 ? n : n + 1; }

struct Level {
    std::size_t n = 0;
    std::vector<double> values;
};

class GridSolver {
public:
    GridSolver(const PencilPotential& pencil, double t, std::vector<double> tols)
        : pencil_(pencil), t_(t), tols_(std::move(tols)) {
        bis_tols_.resize(tols_.size());
        for (std::size_t i = 0; i < tols_.size(); ++i) bis_tols_[i] = tols_[i] / 64.0;
    }

    std::vector<double> solve(double x, std::size_t n,
                              const std::vector<std::pair<double, double>>& guesses = {}) const {
        const auto mat = discretize(pencil_, t_, x, n);
        return lowest(mat, bis_tols_, guesses);
    }

    /// Predicts the next level from the previous two (h^2 error model).
    static std::vector<std::pair<double, double>> predict(const std::vector<double>& coarse,
                                                          const std::vector<double>& fine,
                                                          const std::vector<double>& tols) {
        std::vector<std::pair<double, double>> g(fine.size());
        for (std::size_t i = 0; i < fine.size(); ++i) {
            const double d = fine[i] - coarse[i];
            g[i] = {fine[i] + d / 4.0, std::abs(d) / 2.0 + tols[i]};
        }
        return g;
    }

    const std::vector<double>& tols() const noexcept { return tols_; }

private:
    const PencilPotential& pencil_;
    double t_;
    std::vector<double> tols_;
    std::vector<double> bis_tols_;
};

inline std::vector<double> richardson(const std::vector<double>& coarse, const std::vector<double>& fine) {
    std::vector<double> r(fine.size());
    for (std::size_t i = 0; i < fine.size(); ++i) r[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
    return r;
}

/// Coarse upper estimate of the m lowest eigenvalues.
inline std::vector<double> coarse_eigenvalues(const PencilPotential& pencil, double t, std::size_t m) {
    double level = 10.0 * static_cast<double>(m) * std::max(1e-300, std::min(1.0, t));
    std::vector<double> lam;
    for (int iter = 0; iter < 60; ++iter) {
        const double x0 = std::max(turning_point(pencil, t, 4.0 * level, +1),
                                   turning_point(pencil, t, 4.0 * level, -1));
        const std::size_t n0 = make_odd(std::max<std::size_t>(201, 40 * m));
        const auto mat = discretize(pencil, t, x0, n0);
        lam = lowest(mat, m, 1e-6 * level);
        if (lam.back() <= level) return lam;
        level = 2.0 * lam.back();
    }
    throw NumericalFailure("compute_spectrum: coarse energy window did not settle");
}

}  // namespace detail

/**
 * Refines the lowest `count` eigenvalues until the difference of successive
 * Richardson values is below half the tolerance for every mode, then
 * certifies the truncation domain by doubling X at fixed h.
 */
inline Spectrum compute_spectrum(const SpectrumRequest& req, const SolverOptions& opts = {}) {
    if (!(req.t > 0.0)) throw std::invalid_argument("compute_spectrum: t must be positive");
    if (req.count == 0) throw std::invalid_argument("compute_spectrum: count must be >= 1");
    if (!(req.tol > 0.0)) throw std::invalid_argument("compute_spectrum: tol must be positive");
    const std::size_t m = req.count;

    const auto coarse = detail::coarse_eigenvalues(req.pencil, req.t, m);
    std::vector<double> tols(m, req.tol);
    if (req.mode_tol) {
        for (std::size_t i = 0; i < m; ++i) {
            const double mt = req.mode_tol(i, coarse[i]);
            if (mt > 0.0) tols[i] = std::min(tols[i], mt);
        }
    }
    const double lambda_guess = 1.25 * coarse.back();
    double x = choose_domain(req.pencil, req.t, m, lambda_guess);
    const detail::GridSolver solver(req.pencil, req.t, tols);

    std::size_t n_start = detail::make_odd(std::max(opts.min_grid, 16 * m));
    for (int doubling = 0; doubling <= opts.max_domain_doublings; ++doubling) {
        // Refinement on fixed X.
        detail::Level l0{n_start, solver.solve(x, n_start)};
        detail::Level l1{2 * l0.n + 1, {}};
        l1.values = solver.solve(x, l1.n, detail::GridSolver::predict(l0.values, l0.values, tols));
        auto r_prev = detail::richardson(l0.values, l1.values);
        std::vector<double> r_cur;
        std::vector<double> est(m);
        int levels = 2;
        for (;;) {
            detail::Level l2{2 * l1.n + 1, {}};
            if (l2.n > opts.max_grid) {
                throw NumericalFailure("compute_spectrum: grid cap " + std::to_string(opts.max_grid) +
                                       " reached before tolerance was met");
            }
            l2.values = solver.solve(x, l2.n, detail::GridSolver::predict(l0.values, l1.values, tols));
            ++levels;
            r_cur = detail::richardson(l1.values, l2.values);
            bool done = true;
            for (std::size_t i = 0; i < m; ++i) {
                est[i] = std::abs(r_cur[i] - r_prev[i]);
                const double step_prev = std::abs(l1.values[i] - l0.values[i]);
                const double step = std::abs(l2.values[i] - l1.values[i]);
                const bool asymptotic = step <= 0.5 * step_prev || step <= tols[i];
                // Half the tolerance is kept for the domain-doubling term below.
                if (!(est[i] <= 0.5 * tols[i]) || !asymptotic) done = false;
            }
            l0 = std::move(l1);
            l1 = std::move(l2);
            r_prev = r_cur;
            if (done) break;
        }

        // Same h on the doubled domain.
        const double x2 = 2.0 * x;
        const std::size_t na = 2 * l0.n + 1;
        const std::size_t nb = 2 * l1.n + 1;
        std::vector<std::pair<double, double>> near(m);
        for (std::size_t i = 0; i < m; ++i) near[i] = {l0.values[i], 4.0 * tols[i] + 1e-12 * std::abs(l0.values[i])};
        const auto wa = solver.solve(x2, na, near);
        for (std::size_t i = 0; i < m; ++i) near[i] = {l1.values[i], 4.0 * tols[i] + 1e-12 * std::abs(l1.values[i])};
        const auto wb = solver.solve(x2, nb, near);
        const auto r_wide = detail::richardson(wa, wb);

        bool certified = true;
        std::vector<double> err(m);
        for (std::size_t i = 0; i < m; ++i) {
            err[i] = est[i] + std::abs(r_wide[i] - r_cur[i]);
            if (!(err[i] <= tols[i])) certified = false;
        }
        if (certified) {
            Spectrum s{req.pencil, req.t, r_wide, err, {}, {x2, nb, levels, doubling}};
            detail::enforce_strict_order(s.eigenvalues);
            if (req.pencil.is_even()) s.parities = parity_labels(m);
            return s;
        }
        x = x2;
        n_start = 2 * n_start + 1;
    }
    throw NumericalFailure("compute_spectrum: truncation domain could not be certified");
}

/// Exact rescaling lambda_n(t) = (t / t_base)^{2/(2+rho)} lambda_n(t_base) for t c|x|^rho.
inline Spectrum scaled_spectrum(const Spectrum& base, double t, double rho) {
    if (!(t > 0.0)) throw std::invalid_argument("scaled_spectrum: t must be positive");
    if (!base.pencil.is_single_term()) {
        throw std::invalid_argument("scaled_spectrum: scaling law needs a single homogeneous term without V0");
    }
    const double own = base.pencil.v1().terms().front().rho();
    if (std::abs(own - rho) > 1e-12 * std::max(1.0, own)) {
        throw std::invalid_argument("scaled_spectrum: rho does not match the base potential");
    }
    const double factor = std::pow(t / base.t, 2.0 / (2.0 + rho));
    Spectrum out = base;
    out.t = t;
    for (auto& v : out.eigenvalues) v *= factor;
    for (auto& e : out.error_estimates) e *= factor;
    out.mesh.half_width = base.mesh.half_width * std::pow(base.t / t, 1.0 / (2.0 + rho));
    return out;
}

}  // namespace anharmonic

#pragma once

/**
 * @file tridiag_eigen.hpp
 * @brief Lowest eigenvalues of a real symmetric tridiagonal matrix by
 *        Sturm-sequence counting and bisection.
 *
 * Every returned eigenvalue comes with a certified bracket: the Sturm count is
 * the inertia of T - mu I, so a bracket [lo, hi] with count(lo) <= k < count(hi)
 * contains lambda_k up to the backward rounding of the LDL^T recursion.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace anharmonic {

class SymTridiagonal {
public:
    SymTridiagonal(std::vector<double> diag, std::vector<double> offdiag)
        : diag_(std::move(diag)), offdiag_(std::move(offdiag)) {
        if (diag_.empty()) throw std::invalid_argument("SymTridiagonal: dimension must be >= 1");
        if (offdiag_.size() + 1 != diag_.size()) {
            throw std::invalid_argument("SymTridiagonal: offdiag must have length N-1");
        }
        for (double v : diag_)
            if (!std::isfinite(v)) throw std::invalid_argument("SymTridiagonal: non-finite diagonal");
        for (double v : offdiag_)
            if (!std::isfinite(v)) throw std::invalid_argument("SymTridiagonal: non-finite offdiagonal");
    }

    /**
     * Matrix given by its diagonal excess over the off-diagonal row sums:
     * diag_i = excess_i + |e_{i-1}| + |e_i| (with e_0 = e_N = 0). Discrete
     * Laplacians plus a potential have O(1) excess and O(1/h^2) diagonals;
     * counting on the excess avoids rounding mu against the large diagonal.
     */
    static SymTridiagonal with_excess(std::vector<double> excess, std::vector<double> offdiag) {
        std::vector<double> diag(excess);
        for (std::size_t i = 0; i < diag.size(); ++i) {
            if (i > 0 && i - 1 < offdiag.size()) diag[i] += std::abs(offdiag[i - 1]);
            if (i < offdiag.size()) diag[i] += std::abs(offdiag[i]);
        }
        SymTridiagonal t(std::move(diag), std::move(offdiag));
        for (double v : excess)
            if (!std::isfinite(v)) throw std::invalid_argument("SymTridiagonal: non-finite excess");
        t.excess_ = std::move(excess);
        return t;
    }

    std::size_t size() const noexcept { return diag_.size(); }
    bool has_excess() const noexcept { return !excess_.empty(); }
    std::span<const double> excess() const noexcept { return excess_; }
    std::span<const double> diag() const noexcept { return diag_; }
    std::span<const double> offdiag() const noexcept { return offdiag_; }

    /// Gershgorin enclosure of the whole spectrum.
    std::pair<double, double> gershgorin() const noexcept {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        const std::size_t n = diag_.size();
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0;
            if (i > 0) r += std::abs(offdiag_[i - 1]);
            if (i + 1 < n) r += std::abs(offdiag_[i]);
            lo = std::min(lo, diag_[i] - r);
            hi = std::max(hi, diag_[i] + r);
        }
        return {lo, hi};
    }

    double trace() const noexcept {
        double s = 0.0;
        for (double v : diag_) s += v;
        return s;
    }

private:
    std::vector<double> diag_;
    std::vector<double> offdiag_;
    std::vector<double> excess_;
};

/// Number of eigenvalues strictly below mu (negative pivots of T - mu I = L D L^T).
/// Zero pivots are replaced by +tiny (tiny the smallest normal double), so an
/// eigenvalue exactly at mu is not counted.
inline std::size_t sturm_count(const SymTridiagonal& t, double mu) noexcept {
    constexpr double tiny = std::numeric_limits<double>::min();
    const auto d = t.diag();
    const auto e = t.offdiag();
    const std::size_t n = d.size();
    std::size_t count = 0;
    if (t.has_excess()) {
        // Pivot p_i = a_i + |e_i| with a_i = w_i - mu + |e_{i-1}| a_{i-1} / p_{i-1};
        // a_i carries the small part of the pivot at full relative precision.
        const auto w = t.excess();
        double carry = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = (w[i] - mu) + carry;
            const double sigma = i + 1 < n ? std::abs(e[i]) : 0.0;
            double pivot = a + sigma;
            if (std::abs(pivot) < tiny) pivot = tiny;
            if (pivot < 0.0) ++count;
            // A tiny pivot overflows the next carry; a / pivot -> 1 there.
            carry = sigma * (std::isinf(pivot) ? 1.0 : a / pivot);
        }
        return count;
    }
    double pivot = d[0] - mu;
    if (std::abs(pivot) < tiny) pivot = tiny;
    if (pivot < 0.0) ++count;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = (d[i] - mu) - e[i - 1] * e[i - 1] / pivot;
        if (std::abs(pivot) < tiny) pivot = tiny;
        if (pivot < 0.0) ++count;
    }
    return count;
}

/// Bisection state for the lowest m eigenvalues. Every Sturm count tightens
/// the brackets of all indices at once.
class SturmBrackets {
public:
    SturmBrackets(const SymTridiagonal& t, std::size_t m) : t_(t), lo_(m), hi_(m) {
        if (m > t.size()) throw std::invalid_argument("SturmBrackets: more eigenvalues than dimension");
        auto [glo, ghi] = t.gershgorin();
        // Widen slightly so the bracket invariants hold under rounding.
        const double pad = 4.0 * std::numeric_limits<double>::epsilon() *
                           std::max({std::abs(glo), std::abs(ghi), 1.0});
        std::fill(lo_.begin(), lo_.end(), glo - pad);
        std::fill(hi_.begin(), hi_.end(), ghi + pad);
    }

    std::size_t count(double mu) {
        const std::size_t c = sturm_count(t_, mu);
        ++counts_;
        const std::size_t m = lo_.size();
        for (std::size_t j = 0; j < std::min(c, m); ++j) hi_[j] = std::min(hi_[j], mu);
        for (std::size_t j = c; j < m; ++j) lo_[j] = std::max(lo_[j], mu);
        return c;
    }

    /// Tighten index k around a guess g +- w (expanding w until it brackets).
    void hint(std::size_t k, double g, double w) {
        if (!(w > 0.0) || !std::isfinite(g)) return;
        for (int i = 0; i < 8; ++i, w *= 4.0) {
            const double a = g - w;
            const double b = g + w;
            bool ok = true;
            if (a > lo_[k]) ok = count(a) <= k && ok;
            if (b < hi_[k]) ok = count(b) > k && ok;
            if (ok) return;
        }
    }

    /// Bisect index k until its bracket is narrower than tol or stops shrinking.
    double refine(std::size_t k, double tol, int max_iter = 200) {
        for (int it = 0; it < max_iter && hi_[k] - lo_[k] > tol; ++it) {
            const double mid = 0.5 * (lo_[k] + hi_[k]);
            if (mid <= lo_[k] || mid >= hi_[k]) break;
            count(mid);
        }
        return 0.5 * (lo_[k] + hi_[k]);
    }

    double lower(std::size_t k) const { return lo_[k]; }
    double upper(std::size_t k) const { return hi_[k]; }
    std::size_t counts_used() const noexcept { return counts_; }

private:
    const SymTridiagonal& t_;
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::size_t counts_ = 0;
};

/// lambda_k (0-based) to within tol.
inline double bisect_kth(const SymTridiagonal& t, std::size_t k, double tol) {
    if (k >= t.size()) throw std::invalid_argument("bisect_kth: index out of range");
    if (!(tol > 0.0)) throw std::invalid_argument("bisect_kth: tol must be positive");
    SturmBrackets br(t, k + 1);
    return br.refine(k, tol);
}

namespace detail {

/// Nudges a sorted sequence so it is strictly increasing.
inline void enforce_strict_order(std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) v[i] = std::nextafter(v[i - 1], std::numeric_limits<double>::infinity());
    }
}

}  // namespace detail

/// The m lowest eigenvalues, ascending, each within its own tolerance.
/// `guesses`, when nonempty, seeds each bracket as guess +- width.
inline std::vector<double> lowest(const SymTridiagonal& t, std::span<const double> tols,
                                  std::span<const std::pair<double, double>> guesses = {}) {
    const std::size_t m = tols.size();
    if (m == 0) return {};
    if (m > t.size()) throw std::invalid_argument("lowest: m exceeds matrix dimension");
    SturmBrackets br(t, m);
    for (std::size_t k = 0; k < std::min(m, guesses.size()); ++k) br.hint(k, guesses[k].first, guesses[k].second);
    std::vector<double> out(m);
    for (std::size_t k = 0; k < m; ++k) {
        if (!(tols[k] > 0.0)) throw std::invalid_argument("lowest: tolerances must be positive");
        out[k] = br.refine(k, tols[k]);
    }
    detail::enforce_strict_order(out);
    return out;
}

inline std::vector<double> lowest(const SymTridiagonal& t, std::size_t m, double tol) {
    if (m > t.size()) throw std::invalid_argument("lowest: m exceeds matrix dimension");
    if (!(tol > 0.0)) throw std::invalid_argument("lowest: tol must be positive");
    const std::vector<double> tols(m, tol);
    return lowest(t, tols);
}

}  // namespace anharmonic

#pragma once

/**
 * @file absmono.hpp
 * @brief Absolute / complete monotonicity tests by finite differences, the
 *        P_k recursion for derivatives of exp(Psi), and derivatives of
 *        Psi(t) = -a(-t)^alpha.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <locale>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "grids.hpp"
#include "numerics.hpp"
#include "parallel.hpp"

namespace anharmonic {

/// A function value together with a bound on its evaluation error.
struct Sample {
    double value = 0.0;
    double error = 0.0;
};

/**
 * Test subject on an open interval (a, b). Either an evaluator or a table of
 * (t, value) nodes; a table can only be queried at its own nodes (matched to
 * 1e-12 relative) and its domain is the closed node range.
 */
class SampledFunction {
public:
    using Evaluator = std::function<Sample(double)>;

    SampledFunction(Evaluator f, double a, double b) : f_(std::move(f)), a_(a), b_(b) {
        if (!f_) throw std::invalid_argument("SampledFunction: empty evaluator");
        if (!(a < b)) throw std::invalid_argument("SampledFunction: need a < b");
    }

    static SampledFunction exact(std::function<double(double)> f, double a, double b) {
        return SampledFunction([f = std::move(f)](double t) { return Sample{f(t), 0.0}; }, a, b);
    }

    static SampledFunction table(std::vector<double> ts, std::vector<double> values) {
        if (ts.size() != values.size() || ts.empty()) {
            throw std::invalid_argument("SampledFunction: table columns must be nonempty and of equal length");
        }
        for (std::size_t i = 1; i < ts.size(); ++i)
            if (!(ts[i] > ts[i - 1])) throw std::invalid_argument("SampledFunction: table t must be ascending");
        SampledFunction s(
            [ts, values](double t) {
                auto it = std::lower_bound(ts.begin(), ts.end(), t);
                for (auto cand : {it, it == ts.begin() ? it : it - 1}) {
                    if (cand != ts.end() && std::abs(*cand - t) <= 1e-12 * std::max(1.0, std::abs(t))) {
                        return Sample{values[static_cast<std::size_t>(cand - ts.begin())], 0.0};
                    }
                }
                throw std::domain_error("SampledFunction: t is not a table node");
            },
            ts.front(), ts.size() > 1 ? ts.back() : std::nextafter(ts.front(), 1e300));
        s.closed_ = true;
        s.nodes_ = std::move(ts);
        return s;
    }

    bool contains(double t) const noexcept {
        if (closed_) {
            const double slack = 1e-12 * std::max(1.0, std::abs(t));
            return t >= a_ - slack && t <= b_ + slack;
        }
        return t > a_ && t < b_;
    }

    Sample operator()(double t) const {
        if (!contains(t)) throw std::domain_error("SampledFunction: t outside the domain");
        const Sample s = f_(t);
        if (!std::isfinite(s.value)) throw std::domain_error("SampledFunction: non-finite value");
        return s;
    }

    double lower() const noexcept { return a_; }
    double upper() const noexcept { return b_; }
    bool is_table() const noexcept { return closed_; }
    std::span<const double> nodes() const noexcept { return nodes_; }

private:
    Evaluator f_;
    double a_;
    double b_;
    bool closed_ = false;
    std::vector<double> nodes_;
};

inline double binomial(unsigned n, unsigned k) {
    double c = 1.0;
    for (unsigned i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return std::round(c);
}

struct Difference {
    double value = 0.0;
    double rounding_bound = 0.0;  ///< 8 u sum C(n,k) |f(t+kh)|
    double eval_bound = 0.0;      ///< sum C(n,k) err(t+kh)

    double tolerance() const noexcept { return rounding_bound + eval_bound; }
};

namespace detail {

inline constexpr double kappa = 8.0;

template <class Lookup>
Difference difference_from(Lookup&& at, double t, double h, unsigned n) {
    numerics::CompensatedSum v;
    double mag = 0.0;
    double err = 0.0;
    for (unsigned k = 0; k <= n; ++k) {
        const Sample s = at(t + k * h);
        const double c = binomial(n, k);
        v += ((n - k) % 2 ? -c : c) * s.value;
        mag += c * std::abs(s.value);
        err += c * s.error;
    }
    return {v.value(), kappa * numerics::unit_roundoff * mag, err};
}

}  // namespace detail

/// Delta_h^n f(t) = sum_k (-1)^{n-k} C(n,k) f(t + kh).
inline Difference nth_difference(const SampledFunction& f, double t, double h, unsigned n) {
    if (!(h > 0.0)) throw std::invalid_argument("nth_difference: h must be positive");
    if (!f.contains(t) || !f.contains(t + n * h)) throw std::domain_error("nth_difference: nodes leave the domain");
    return detail::difference_from([&](double x) { return f(x); }, t, h, n);
}

enum class MonoMode { am, cm };
enum class Verdict { pass, inconclusive, fail };

inline const char* to_string(MonoMode m) noexcept { return m == MonoMode::am ? "am" : "cm"; }
inline const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::inconclusive: return "inconclusive";
        default: return "fail";
    }
}

inline constexpr unsigned max_test_order = 12;

/// Steps used at each grid point: h = value * |t| when relative, else h = value.
struct StepSet {
    std::vector<double> values{1.0 / 16, 1.0 / 8, 1.0 / 4};
    bool relative = true;

    double at(double t, std::size_t i) const { return relative ? values[i] * std::abs(t) : values[i]; }
};

struct MonoTestConfig {
    unsigned orders = 8;
    std::vector<double> t_grid;
    StepSet steps;
    MonoMode mode = MonoMode::cm;
};

struct CMReport {
    double max_normalized_violation = 0.0;
    struct Case {
        unsigned n = 0;
        double t = 0.0;
        double h = 0.0;
    } worst_case;
    unsigned orders_tested = 0;
    std::string grid;
    Verdict verdict = Verdict::pass;
    MonoMode mode = MonoMode::cm;
    std::optional<unsigned> lowest_failing_order;
    std::size_t tests_run = 0;
    std::size_t tests_skipped = 0;       ///< (n, t, h) whose nodes leave the domain
    double resolved_fraction = 0.0;      ///< share of differences larger than their tolerance

    bool passed() const noexcept { return verdict == Verdict::pass; }
};

inline std::string describe_grid(std::span<const double> grid, const StepSet& steps) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(6);
    os << grid.size() << " points";
    if (!grid.empty()) os << " in [" << grid.front() << ", " << grid.back() << "]";
    os << ", h " << (steps.relative ? "= |t| x {" : "= {");
    for (std::size_t i = 0; i < steps.values.size(); ++i) os << (i ? ", " : "") << steps.values[i];
    os << "}";
    return os.str();
}

/**
 * Checks s_n Delta_h^n f(t) >= -eps for n <= orders, t in grid, h in steps,
 * with s_n = 1 (am) or (-1)^n (cm) and eps the rounding plus evaluation
 * bound. A normalized violation above 10 is a failure, between 1 and 10 is
 * inconclusive.
 */
inline CMReport am_test(const SampledFunction& f, const MonoTestConfig& cfg) {
    if (cfg.orders > max_test_order) {
        throw std::invalid_argument("am_test: orders above " + std::to_string(max_test_order) +
                                    " are vacuous in double precision");
    }
    if (cfg.t_grid.empty()) throw std::invalid_argument("am_test: empty t grid");
    if (cfg.steps.values.empty()) throw std::invalid_argument("am_test: empty step set");
    for (double v : cfg.steps.values)
        if (!(v > 0.0)) throw std::invalid_argument("am_test: steps must be positive");

    CMReport rep;
    rep.mode = cfg.mode;
    rep.orders_tested = cfg.orders;
    rep.grid = describe_grid(cfg.t_grid, cfg.steps);

    struct Job {
        unsigned n;
        double t;
        double h;
    };
    std::vector<Job> jobs;
    std::map<double, Sample> memo;
    for (double t : cfg.t_grid) {
        for (std::size_t i = 0; i < cfg.steps.values.size(); ++i) {
            const double h = cfg.steps.at(t, i);
            for (unsigned n = 0; n <= cfg.orders; ++n) {
                if (!(h > 0.0) || !f.contains(t) || !f.contains(t + n * h)) {
                    ++rep.tests_skipped;
                    continue;
                }
                jobs.push_back({n, t, h});
                for (unsigned k = 0; k <= n; ++k) memo.emplace(t + k * h, Sample{});
            }
        }
    }

    std::vector<double> nodes;
    nodes.reserve(memo.size());
    for (const auto& kv : memo) nodes.push_back(kv.first);
    std::vector<Sample> values(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t i) { values[i] = f(nodes[i]); });
    for (std::size_t i = 0; i < nodes.size(); ++i) memo[nodes[i]] = values[i];

    auto lookup = [&](double x) { return memo.at(x); };
    std::size_t resolved = 0;
    for (const auto& j : jobs) {
        const Difference d = detail::difference_from(lookup, j.t, j.h, j.n);
        const double signed_value = (cfg.mode == MonoMode::cm && j.n % 2 == 1) ? -d.value : d.value;
        const double eps = std::max(d.tolerance(), std::numeric_limits<double>::min());
        if (std::abs(d.value) > eps) ++resolved;
        const double viol = std::max(0.0, -signed_value) / eps;
        if (viol > rep.max_normalized_violation) {
            rep.max_normalized_violation = viol;
            rep.worst_case = {j.n, j.t, j.h};
        }
        if (viol > 10.0 && (!rep.lowest_failing_order || j.n < *rep.lowest_failing_order)) {
            rep.lowest_failing_order = j.n;
        }
    }
    rep.tests_run = jobs.size();
    rep.resolved_fraction = jobs.empty() ? 0.0 : static_cast<double>(resolved) / static_cast<double>(jobs.size());
    if (rep.max_normalized_violation > 10.0) {
        rep.verdict = Verdict::fail;
    } else if (rep.max_normalized_violation > 1.0) {
        rep.verdict = Verdict::inconclusive;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Derivatives of exp(Psi): Phi^(k) = Phi P_k(Psi', ..., Psi^(k)) with
// P_1 = y1 and P_{k+1} = y1 P_k + sum_j (dP_k/dy_j) y_{j+1}.

struct BellTerm {
    std::uint64_t coefficient = 0;
    std::vector<unsigned> exponents;  ///< exponents[j] is the power of y_{j+1}
};

class BellPolynomial {
public:
    explicit BellPolynomial(std::map<std::vector<unsigned>, std::uint64_t> terms, unsigned k)
        : terms_(std::move(terms)), k_(k) {}

    unsigned order() const noexcept { return k_; }
    std::size_t size() const noexcept { return terms_.size(); }

    std::vector<BellTerm> terms() const {
        std::vector<BellTerm> out;
        for (const auto& [e, c] : terms_) out.push_back({c, e});
        return out;
    }

    std::uint64_t coefficient_sum() const {
        std::uint64_t s = 0;
        for (const auto& kv : terms_) s += kv.second;
        return s;
    }

    double evaluate(std::span<const double> y) const {
        if (y.size() < k_) throw std::invalid_argument("BellPolynomial: need y_1..y_k");
        numerics::CompensatedSum s;
        for (const auto& [e, c] : terms_) {
            double m = static_cast<double>(c);
            for (std::size_t j = 0; j < e.size(); ++j)
                for (unsigned p = 0; p < e[j]; ++p) m *= y[j];
            s += m;
        }
        return s.value();
    }

    BellPolynomial next() const {
        std::map<std::vector<unsigned>, std::uint64_t> out;
        for (const auto& [e, c] : terms_) {
            std::vector<unsigned> base(e);
            base.resize(k_ + 1, 0);
            auto times_y1 = base;
            ++times_y1[0];
            out[times_y1] += c;
            for (unsigned j = 0; j < k_; ++j) {
                if (base[j] == 0) continue;
                auto d = base;
                --d[j];
                ++d[j + 1];
                out[d] += c * base[j];
            }
        }
        return BellPolynomial(std::move(out), k_ + 1);
    }

private:
    std::map<std::vector<unsigned>, std::uint64_t> terms_;
    unsigned k_;
};

inline BellPolynomial bell_recursion(unsigned k) {
    if (k == 0) throw std::invalid_argument("bell_recursion: k must be >= 1");
    if (k > 24) throw std::invalid_argument("bell_recursion: k too large for 64-bit coefficients");
    BellPolynomial p({{{1u}, 1u}}, 1);
    for (unsigned i = 1; i < k; ++i) p = p.next();
    return p;
}

/// Phi^(j) = phi0 P_j(y_1..y_j) for j = 1..k.
inline std::vector<double> exp_derivatives(std::span<const double> psi_derivs, double phi0) {
    if (!(phi0 > 0.0)) throw std::invalid_argument("exp_derivatives: phi0 must be positive");
    std::vector<double> out;
    if (psi_derivs.empty()) return out;
    BellPolynomial p = bell_recursion(1);
    for (unsigned j = 1; j <= psi_derivs.size(); ++j) {
        if (j > 1) p = p.next();
        out.push_back(phi0 * p.evaluate(psi_derivs.first(j)));
    }
    return out;
}

/// Psi^(k)(t) for Psi(t) = -a (-t)^alpha, t < 0, k = 1..k_max:
/// a (-1)^{k-1} alpha (alpha-1) ... (alpha-k+1) (-t)^{alpha-k}, all positive.
inline std::vector<double> power_psi_derivatives(double a, double alpha, double t, unsigned k_max) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("power_psi_derivatives: alpha must lie in (0, 1)");
    if (!(a > 0.0)) throw std::invalid_argument("power_psi_derivatives: a must be positive");
    if (!(t < 0.0)) throw std::invalid_argument("power_psi_derivatives: t must be negative");
    std::vector<double> out;
    double falling = 1.0;
    for (unsigned k = 1; k <= k_max; ++k) {
        falling *= alpha - (k - 1);
        const double sign = (k - 1) % 2 ? -1.0 : 1.0;
        out.push_back(a * sign * falling * std::pow(-t, alpha - k));
    }
    return out;
}

}  // namespace anharmonic

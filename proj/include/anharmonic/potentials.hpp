#pragma once

/**
 * @file potentials.hpp
 * @brief Power-law potentials V(x) = sum_j c_j^{sign(x)} |x|^{rho_j} and the
 *        one-parameter pencil W_t(x) = V0(x) + t V1(x).
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace anharmonic {

/// One homogeneous piece c_plus |x|^rho (x > 0), c_minus |x|^rho (x < 0).
class HomogeneousTerm {
public:
    HomogeneousTerm(double c_plus, double c_minus, double rho)
        : c_plus_(c_plus), c_minus_(c_minus), rho_(rho) {
        if (!(c_plus > 0.0) || !(c_minus > 0.0) || !std::isfinite(c_plus) ||
            !std::isfinite(c_minus)) {
            throw std::invalid_argument("HomogeneousTerm: coefficients must be positive and finite");
        }
        if (!(rho > 0.0) || !std::isfinite(rho)) {
            throw std::invalid_argument("HomogeneousTerm: order rho must be positive and finite");
        }
    }

    /// Symmetric term c |x|^rho.
    static HomogeneousTerm symmetric(double c, double rho) { return {c, c, rho}; }

    double c_plus() const noexcept { return c_plus_; }
    double c_minus() const noexcept { return c_minus_; }
    double rho() const noexcept { return rho_; }
    bool is_even() const noexcept { return c_plus_ == c_minus_; }

    double operator()(double x) const noexcept {
        if (x == 0.0) return 0.0;
        const double c = x > 0.0 ? c_plus_ : c_minus_;
        return c * std::pow(std::abs(x), rho_);
    }

    /// Same term with both coefficients multiplied by s > 0.
    HomogeneousTerm scaled(double s) const { return {s * c_plus_, s * c_minus_, rho_}; }

    friend bool operator==(const HomogeneousTerm&, const HomogeneousTerm&) = default;

private:
    double c_plus_;
    double c_minus_;
    double rho_;
};

/// Finite nonempty sum of homogeneous terms.
class Potential {
public:
    explicit Potential(std::vector<HomogeneousTerm> terms) : terms_(std::move(terms)) {
        if (terms_.empty()) throw std::invalid_argument("Potential: at least one term is required");
    }
    Potential(std::initializer_list<HomogeneousTerm> terms)
        : Potential(std::vector<HomogeneousTerm>(terms)) {}

    static Potential power(double rho, double c = 1.0) {
        return Potential{HomogeneousTerm::symmetric(c, rho)};
    }

    const std::vector<HomogeneousTerm>& terms() const noexcept { return terms_; }
    bool single_term() const noexcept { return terms_.size() == 1; }

    bool is_even() const noexcept {
        return std::all_of(terms_.begin(), terms_.end(),
                           [](const HomogeneousTerm& h) { return h.is_even(); });
    }

    double operator()(double x) const noexcept {
        double v = 0.0;
        for (const auto& h : terms_) v += h(x);
        return v;
    }

    double min_order() const noexcept {
        double r = terms_.front().rho();
        for (const auto& h : terms_) r = std::min(r, h.rho());
        return r;
    }
    double max_order() const noexcept {
        double r = terms_.front().rho();
        for (const auto& h : terms_) r = std::max(r, h.rho());
        return r;
    }

    friend bool operator==(const Potential&, const Potential&) = default;

private:
    std::vector<HomogeneousTerm> terms_;
};

inline double evaluate(const Potential& p, double x) noexcept { return p(x); }

/// Pencil V0 + t V1. An absent V0 is the pure family t V1.
class PencilPotential {
public:
    PencilPotential(std::optional<Potential> v0, Potential v1)
        : v0_(std::move(v0)), v1_(std::move(v1)) {}

    /// The homogeneous family t V.
    static PencilPotential family(Potential v1) { return {std::nullopt, std::move(v1)}; }

    const std::optional<Potential>& v0() const noexcept { return v0_; }
    const Potential& v1() const noexcept { return v1_; }

    bool is_even() const noexcept { return (!v0_ || v0_->is_even()) && v1_.is_even(); }

    /// True for t c|x|^rho with no V0: the scaling law applies.
    bool is_single_term() const noexcept { return !v0_ && v1_.single_term(); }

    /// Orders below 0.5 are accepted but the solver's convergence there is untested.
    bool is_experimental() const noexcept {
        return v1_.min_order() < experimental_order_below || (v0_ && v0_->min_order() < experimental_order_below);
    }
    static constexpr double experimental_order_below = 0.5;

    double operator()(double t, double x) const noexcept {
        return (v0_ ? (*v0_)(x) : 0.0) + t * v1_(x);
    }

    friend bool operator==(const PencilPotential&, const PencilPotential&) = default;

private:
    std::optional<Potential> v0_;
    Potential v1_;
};

inline double evaluate_pencil(const PencilPotential& p, double t, double x) {
    if (!(t > 0.0)) throw std::invalid_argument("evaluate_pencil: t must be positive");
    return p(t, x);
}

/// Relative defect of V(xi x) = xi^rho V(x).
inline double homogeneity_residual(const HomogeneousTerm& term, double xi, double x) {
    if (!(xi > 0.0)) throw std::invalid_argument("homogeneity_residual: xi must be positive");
    const double lhs = term(xi * x);
    const double rhs = std::pow(xi, term.rho()) * term(x);
    return std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
}

struct ConditionReport {
    bool positivity = false;
    bool unbounded = false;
    bool monotone = false;
    double growth_exponent = 0.0;  ///< liminf ln W / ln|x| as |x| -> inf
    bool growth_ok = false;

    bool all_pass() const noexcept { return positivity && unbounded && monotone && growth_ok; }
};

/// Structural checks on V0 + V1. Flags are analytic, read off coefficient
/// signs and orders; nothing throws.
inline ConditionReport validate_conditions(const PencilPotential& p) {
    ConditionReport r;
    // Term constructors already enforce c > 0, rho > 0, so every sum is
    // positive away from 0, strictly monotone on each half-line and unbounded.
    r.positivity = true;
    r.monotone = true;
    r.unbounded = true;
    // At infinity the largest order dominates.
    double top = p.v1().max_order();
    if (p.v0()) top = std::max(top, p.v0()->max_order());
    r.growth_exponent = top;
    r.growth_ok = top > 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Literal syntax: comma-separated terms "c+:c-:rho"; "none" for an absent V0.
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_double(std::string_view s, std::string_view what) {
    std::string buf(s);
    std::istringstream in(buf);
    in.imbue(std::locale::classic());
    double v = 0.0;
    in >> v;
    if (in.fail() || !in.eof()) {
        throw std::invalid_argument("cannot parse " + std::string(what) + " from '" + buf + "'");
    }
    return v;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

inline HomogeneousTerm parse_term(std::string_view text) {
    const std::string s = detail::trim(text);
    const auto a = s.find(':');
    const auto b = a == std::string::npos ? std::string::npos : s.find(':', a + 1);
    if (a == std::string::npos || b == std::string::npos || s.find(':', b + 1) != std::string::npos) {
        throw std::invalid_argument("potential term '" + s + "' must have the form c+:c-:rho");
    }
    return {detail::parse_double(std::string_view(s).substr(0, a), "c+"),
            detail::parse_double(std::string_view(s).substr(a + 1, b - a - 1), "c-"),
            detail::parse_double(std::string_view(s).substr(b + 1), "rho")};
}

inline Potential parse_potential(std::string_view text) {
    std::vector<HomogeneousTerm> terms;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
        terms.push_back(parse_term(piece));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return Potential(std::move(terms));
}

/// Parses "none" as an absent potential.
inline std::optional<Potential> parse_optional_potential(std::string_view text) {
    if (detail::trim(text) == "none") return std::nullopt;
    return parse_potential(text);
}

inline std::string format_potential(const Potential& p) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out.precision(17);
    bool first = true;
    for (const auto& h : p.terms()) {
        if (!first) out << ',';
        first = false;
        out << h.c_plus() << ':' << h.c_minus() << ':' << h.rho();
    }
    return out.str();
}

inline std::string format_pencil(const PencilPotential& p) {
    return "v0=" + (p.v0() ? format_potential(*p.v0()) : std::string("none")) +
           " v1=" + format_potential(p.v1());
}

}  // namespace anharmonic

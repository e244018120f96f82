#pragma once

/**
 * @file bmv_matrix.hpp
 * @brief Hermitian pencils A + tB: trace of exp(-(A + tB)), the atomic
 *        measure in the commuting case, support bounds and CM tests.
 *
 * Complex Hermitian matrices are handled through the real symmetric
 * embedding [[re, -im], [im, re]], whose spectrum is that of the matrix with
 * every eigenvalue doubled.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "absmono.hpp"
#include "bw_measure.hpp"
#include "errors.hpp"
#include "numerics.hpp"

namespace anharmonic {

/// Dense row-major real matrix, just enough for the Jacobi kernel.
struct RealMatrix {
    std::size_t n = 0;
    std::vector<double> a;

    RealMatrix() = default;
    explicit RealMatrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    double frobenius() const {
        double s = 0.0;
        for (double v : a) s += v * v;
        return std::sqrt(s);
    }
};

inline RealMatrix multiply(const RealMatrix& x, const RealMatrix& y) {
    RealMatrix z(x.n);
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t k = 0; k < x.n; ++k) {
            const double v = x(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < x.n; ++j) z(i, j) += v * y(k, j);
        }
    return z;
}

struct SymmetricEigen {
    std::vector<double> values;  ///< ascending
    RealMatrix vectors;          ///< column j is the eigenvector of values[j]
    int sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below
/// 1e-14 ||M||_F (or 100 sweeps).
inline SymmetricEigen jacobi_eigen(RealMatrix m) {
    const std::size_t n = m.n;
    RealMatrix v(n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;
    const double norm = m.frobenius();
    auto off = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += m(i, j) * m(i, j);
        return std::sqrt(s);
    };
    int sweep = 0;
    for (; sweep < 100 && off() > 1e-14 * norm; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m(k, p);
                    const double mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m(p, k);
                    const double mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (off() > 1e-12 * norm) throw NumericalFailure("jacobi_eigen: no convergence");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return m(x, x) < m(y, y); });
    SymmetricEigen out;
    out.sweeps = sweep;
    out.vectors = RealMatrix(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values.push_back(m(order[j], order[j]));
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

class HermitianMatrix {
public:
    HermitianMatrix() = default;

    HermitianMatrix(std::size_t n, std::vector<double> re, std::vector<double> im = {})
        : n_(n), re_(std::move(re)), im_(std::move(im)) {
        if (n_ == 0) throw std::invalid_argument("HermitianMatrix: n must be >= 1");
        if (im_.empty()) im_.assign(n_ * n_, 0.0);
        if (re_.size() != n_ * n_ || im_.size() != n_ * n_) {
            throw std::invalid_argument("HermitianMatrix: re and im must have n*n entries");
        }
        double scale = 0.0;
        for (std::size_t k = 0; k < n_ * n_; ++k) {
            if (!std::isfinite(re_[k]) || !std::isfinite(im_[k])) {
                throw std::invalid_argument("HermitianMatrix: non-finite entry");
            }
            scale = std::max({scale, std::abs(re_[k]), std::abs(im_[k])});
        }
        const double tol = 1e-12 * std::max(scale, 1e-300);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                if (std::abs(re_[i * n_ + j] - re_[j * n_ + i]) > tol || std::abs(im_[i * n_ + j] + im_[j * n_ + i]) > tol) {
                    throw std::invalid_argument("HermitianMatrix: matrix is not Hermitian");
                }
            }
        }
    }

    static HermitianMatrix diagonal(std::vector<double> d) {
        const std::size_t n = d.size();
        std::vector<double> re(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) re[i * n + i] = d[i];
        return HermitianMatrix(n, std::move(re));
    }

    static HermitianMatrix identity(std::size_t n) { return diagonal(std::vector<double>(n, 1.0)); }

    std::size_t size() const noexcept { return n_; }
    const std::vector<double>& re() const noexcept { return re_; }
    const std::vector<double>& im() const noexcept { return im_; }
    double re(std::size_t i, std::size_t j) const { return re_[i * n_ + j]; }
    double im(std::size_t i, std::size_t j) const { return im_[i * n_ + j]; }

    /// [[re, -im], [im, re]]
    RealMatrix embedding() const {
        RealMatrix e(2 * n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) {
                e(i, j) = re(i, j);
                e(i + n_, j + n_) = re(i, j);
                e(i, j + n_) = -im(i, j);
                e(i + n_, j) = im(i, j);
            }
        return e;
    }

    static HermitianMatrix from_embedding(const RealMatrix& e) {
        const std::size_t n = e.n / 2;
        std::vector<double> re(n * n), im(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                re[i * n + j] = 0.5 * (e(i, j) + e(i + n, j + n));
                im[i * n + j] = 0.5 * (e(i + n, j) - e(i, j + n));
            }
        // Symmetrize away rounding.
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double r = 0.5 * (re[i * n + j] + re[j * n + i]);
                const double m = 0.5 * (im[i * n + j] - im[j * n + i]);
                re[i * n + j] = re[j * n + i] = r;
                im[i * n + j] = m;
                im[j * n + i] = -m;
            }
        for (std::size_t i = 0; i < n; ++i) im[i * n + i] = 0.0;
        return HermitianMatrix(n, std::move(re), std::move(im));
    }

    /// this + s * other
    HermitianMatrix plus(const HermitianMatrix& other, double s) const {
        if (other.n_ != n_) throw std::invalid_argument("HermitianMatrix: dimension mismatch");
        auto re = re_;
        auto im = im_;
        for (std::size_t k = 0; k < re.size(); ++k) {
            re[k] += s * other.re_[k];
            im[k] += s * other.im_[k];
        }
        return HermitianMatrix(n_, std::move(re), std::move(im));
    }

    double max_abs() const noexcept {
        double m = 0.0;
        for (std::size_t k = 0; k < re_.size(); ++k) m = std::max(m, std::hypot(re_[k], im_[k]));
        return m;
    }

    double frobenius() const noexcept {
        double s = 0.0;
        for (std::size_t k = 0; k < re_.size(); ++k) s += re_[k] * re_[k] + im_[k] * im_[k];
        return std::sqrt(s);
    }

private:
    std::size_t n_ = 0;
    std::vector<double> re_;
    std::vector<double> im_;
};

/// Ascending eigenvalues; Jacobi on the 2n embedding, then one of each equal pair.
inline std::vector<double> hermitian_eigenvalues(const HermitianMatrix& m) {
    const auto eig = jacobi_eigen(m.embedding());
    const double gap_tol = 1e3 * numerics::unit_roundoff * std::max(m.frobenius(), std::numeric_limits<double>::min());
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < eig.values.size(); k += 2) {
        if (std::abs(eig.values[k + 1] - eig.values[k]) > gap_tol) {
            throw NumericalFailure("hermitian_eigenvalues: embedded eigenvalues do not pair up");
        }
        out.push_back(0.5 * (eig.values[k] + eig.values[k + 1]));
    }
    return out;
}

class MatrixPencil {
public:
    /// B must be positive semidefinite: lambda_min(B) >= -1e-10 ||B||. With
    /// `project_psd`, negative eigenvalues of B are clipped to zero instead.
    MatrixPencil(HermitianMatrix a, HermitianMatrix b, bool project_psd = false) : a_(std::move(a)), b_(std::move(b)) {
        if (a_.size() != b_.size()) throw std::invalid_argument("MatrixPencil: A and B differ in size");
        auto eig = jacobi_eigen(b_.embedding());
        const double norm = std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
        if (norm == 0.0) throw std::invalid_argument("MatrixPencil: B must be nonzero");
        if (eig.values.front() < -1e-10 * norm) {
            if (!project_psd) throw std::invalid_argument("MatrixPencil: B is not positive semidefinite");
            const std::size_t n2 = eig.values.size();
            RealMatrix p(n2);
            for (std::size_t k = 0; k < n2; ++k) {
                const double l = std::max(0.0, eig.values[k]);
                if (l == 0.0) continue;
                for (std::size_t i = 0; i < n2; ++i)
                    for (std::size_t j = 0; j < n2; ++j) p(i, j) += l * eig.vectors(i, k) * eig.vectors(j, k);
            }
            b_ = HermitianMatrix::from_embedding(p);
            eig = jacobi_eigen(b_.embedding());
        }
        b_min_ = std::max(0.0, eig.values.front());
        b_max_ = eig.values.back();
    }

    const HermitianMatrix& a() const noexcept { return a_; }
    const HermitianMatrix& b() const noexcept { return b_; }
    std::pair<double, double> b_eigen_bounds() const noexcept { return {b_min_, b_max_}; }
    std::size_t size() const noexcept { return a_.size(); }

    HermitianMatrix at(double t) const { return a_.plus(b_, t); }

private:
    HermitianMatrix a_;
    HermitianMatrix b_;
    double b_min_ = 0.0;
    double b_max_ = 0.0;
};

/// trace exp(-(A + tB)) with a first-order bound from the eigensolver's
/// backward error (16 n u ||A + tB||_F per eigenvalue).
inline Sample pencil_trace_sample(const MatrixPencil& p, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("pencil_trace_exp: t must be nonnegative");
    const HermitianMatrix m = p.at(t);
    const auto mu = hermitian_eigenvalues(m);
    numerics::CompensatedSum s;
    for (double v : mu) s += std::exp(-v);
    const double d = 16.0 * static_cast<double>(m.size()) * numerics::unit_roundoff * m.frobenius();
    return {s.value(), s.value() * std::expm1(d) + 4.0 * numerics::unit_roundoff * s.value()};
}

inline double pencil_trace_exp(const MatrixPencil& p, double t) { return pencil_trace_sample(p, t).value; }

struct CommutingMeasure {
    std::vector<Atom> atoms;          ///< ascending locations, merged
    double gamma = 0.0;               ///< mixing coefficient that separated the joint spectrum
    int attempts = 0;
    double reconstruction_error = 0.0;  ///< max over t in {0, 1, 2}, relative to max(1, phi)
};

/**
 * Atoms (b_i, exp(-a_i)) with (a_i, b_i) the joint eigenvalues of commuting
 * A and B, from the eigenvectors of A + gamma B for a random gamma. Every
 * reconstruction is checked against pencil_trace_exp at t = 0, 1, 2.
 */
inline CommutingMeasure commuting_measure(const MatrixPencil& p, double comm_tol = 1e-10,
                                          std::uint64_t seed = 0x5eedULL) {
    const RealMatrix ea = p.a().embedding();
    const RealMatrix eb = p.b().embedding();
    const RealMatrix ab = multiply(ea, eb);
    const RealMatrix ba = multiply(eb, ea);
    double comm = 0.0;
    for (std::size_t k = 0; k < ab.a.size(); ++k) comm = std::max(comm, std::abs(ab.a[k] - ba.a[k]));
    const double na = p.a().frobenius();
    const double nb = p.b().frobenius();
    if (comm > comm_tol * std::max(na * nb, std::numeric_limits<double>::min())) {
        throw std::invalid_argument("commuting_measure: A and B do not commute");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    const std::size_t n2 = ea.n;
    const double scale = std::max(na, nb) + 1.0;
    for (int attempt = 1; attempt <= 5; ++attempt) {
        const double gamma = unif(rng) * (na + 1.0) / (nb + std::numeric_limits<double>::min());
        RealMatrix mix(n2);
        for (std::size_t k = 0; k < mix.a.size(); ++k) mix.a[k] = ea.a[k] + gamma * eb.a[k];
        const auto eig = jacobi_eigen(mix);
        std::vector<std::pair<double, double>> joint;  // (b, a)
        double residual = 0.0;
        for (std::size_t j = 0; j < n2; ++j) {
            double qa = 0.0;
            double qb = 0.0;
            std::vector<double> av(n2, 0.0), bv(n2, 0.0);
            for (std::size_t i = 0; i < n2; ++i)
                for (std::size_t k = 0; k < n2; ++k) {
                    av[i] += ea(i, k) * eig.vectors(k, j);
                    bv[i] += eb(i, k) * eig.vectors(k, j);
                }
            for (std::size_t i = 0; i < n2; ++i) {
                qa += eig.vectors(i, j) * av[i];
                qb += eig.vectors(i, j) * bv[i];
            }
            for (std::size_t i = 0; i < n2; ++i) {
                residual = std::max(residual, std::abs(av[i] - qa * eig.vectors(i, j)));
                residual = std::max(residual, std::abs(bv[i] - qb * eig.vectors(i, j)));
            }
            joint.emplace_back(qb, qa);
        }
        if (residual > 1e-8 * scale) continue;  // near-degenerate gamma: vectors mix joint eigenspaces
        std::sort(joint.begin(), joint.end());
        CommutingMeasure out;
        out.gamma = gamma;
        out.attempts = attempt;
        const double merge = 1e-9 * std::max(1.0, nb);
        for (const auto& [b, a] : joint) {
            const double w = 0.5 * std::exp(-a);  // each joint eigenvalue appears twice in the embedding
            if (!out.atoms.empty() && std::abs(b - out.atoms.back().location) <= merge) {
                out.atoms.back().weight += w;
            } else {
                out.atoms.push_back({b, w});
            }
        }
        for (double t : {0.0, 1.0, 2.0}) {
            numerics::CompensatedSum s;
            for (const auto& at : out.atoms) s += at.weight * std::exp(-at.location * t);
            const double ref = pencil_trace_exp(p, t);
            out.reconstruction_error =
                std::max(out.reconstruction_error, std::abs(s.value() - ref) / std::max(1.0, ref));
        }
        if (out.reconstruction_error <= 1e-10) return out;
    }
    throw NumericalFailure("commuting_measure: no generic mixing coefficient found in 5 attempts");
}

struct SlopeReport {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::vector<double> ts;      ///< interior points checked
    std::vector<double> slopes;  ///< -(log phi)' by central secant
    std::vector<double> deltas;  ///< rounding allowance at each point
    std::size_t violations = 0;
    double max_excess = 0.0;  ///< largest distance outside [lambda_min - delta, lambda_max + delta]

    bool passed() const noexcept { return violations == 0; }
};

/**
 * -(log phi)' lies in [lambda_min(B), lambda_max(B)]. The central secant
 * over [t_{i-1}, t_{i+1}] equals the derivative at an intermediate point, so
 * the only allowance needed is for evaluation error in log phi.
 */
inline SlopeReport support_slope_check(const MatrixPencil& p, std::span<const double> t_grid) {
    if (t_grid.size() < 3) throw std::invalid_argument("support_slope_check: need at least 3 grid points");
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > 0.0) || (i > 0 && !(t_grid[i] > t_grid[i - 1]))) {
            throw std::invalid_argument("support_slope_check: grid must be positive and ascending");
        }
    }
    std::vector<Sample> phi(t_grid.size());
    parallel_for(t_grid.size(), [&](std::size_t i) { phi[i] = pencil_trace_sample(p, t_grid[i]); });
    SlopeReport r;
    std::tie(r.lambda_min, r.lambda_max) = p.b_eigen_bounds();
    const double bound_err = 16.0 * static_cast<double>(p.size()) * numerics::unit_roundoff * p.b().frobenius();
    for (std::size_t i = 1; i + 1 < t_grid.size(); ++i) {
        const double dt = t_grid[i + 1] - t_grid[i - 1];
        const double slope = -(std::log(phi[i + 1].value) - std::log(phi[i - 1].value)) / dt;
        const double rel = phi[i + 1].error / phi[i + 1].value + phi[i - 1].error / phi[i - 1].value;
        const double delta = 2.0 * rel / dt + bound_err;
        const double excess = std::max(r.lambda_min - delta - slope, slope - r.lambda_max - delta);
        if (excess > 0.0) {
            ++r.violations;
            r.max_excess = std::max(r.max_excess, excess);
        }
        r.ts.push_back(t_grid[i]);
        r.slopes.push_back(slope);
        r.deltas.push_back(delta);
    }
    return r;
}

inline CMReport bmv_cm_test(const MatrixPencil& p, const MonoTestConfig& cfg) {
    if (cfg.mode != MonoMode::cm) throw std::invalid_argument("bmv_cm_test: cm mode only");
    const SampledFunction f([&p](double t) { return pencil_trace_sample(p, t); }, 0.0,
                            std::numeric_limits<double>::max());
    return am_test(f, cfg);
}

// Random pencils ------------------------------------------------------------

inline HermitianMatrix random_hermitian(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> re(n * n), im(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        re[i * n + i] = g(rng);
        for (std::size_t j = i + 1; j < n; ++j) {
            re[i * n + j] = re[j * n + i] = g(rng) / std::sqrt(2.0);
            im[i * n + j] = g(rng) / std::sqrt(2.0);
            im[j * n + i] = -im[i * n + j];
        }
    }
    return HermitianMatrix(n, std::move(re), std::move(im));
}

/// B = C^* C with C complex Gaussian, scaled to ||B||_F = n.
inline HermitianMatrix random_psd(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> cr(n * n), ci(n * n);
    for (auto& v : cr) v = g(rng);
    for (auto& v : ci) v = g(rng);
    std::vector<double> re(n * n, 0.0), im(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                // (C^*)_{ik} C_{kj} = conj(C_{ki}) C_{kj}
                const double ar = cr[k * n + i], ai = -ci[k * n + i];
                const double br = cr[k * n + j], bi = ci[k * n + j];
                re[i * n + j] += ar * br - ai * bi;
                im[i * n + j] += ar * bi + ai * br;
            }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        im[i * n + i] = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            re[j * n + i] = re[i * n + j];
            im[j * n + i] = -im[i * n + j];
        }
    }
    for (std::size_t k = 0; k < n * n; ++k) norm += re[k] * re[k] + im[k] * im[k];
    const double s = static_cast<double>(n) / std::sqrt(norm);
    for (auto& v : re) v *= s;
    for (auto& v : im) v *= s;
    return HermitianMatrix(n, std::move(re), std::move(im));
}

inline MatrixPencil random_pencil(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    HermitianMatrix a = random_hermitian(n, rng);
    HermitianMatrix b = random_psd(n, rng);
    return MatrixPencil(std::move(a), std::move(b), true);
}

// Text format ---------------------------------------------------------------
//   n 2
//   re 0 1 1 0
//   im 0 0 0 0      (optional)
// '#' starts a comment; whitespace and newlines are interchangeable.

inline HermitianMatrix read_hermitian(std::istream& in) {
    std::ostringstream clean;
    std::string line;
    while (std::getline(in, line)) clean << line.substr(0, line.find('#')) << '\n';
    std::istringstream tok(clean.str());
    tok.imbue(std::locale::classic());
    std::size_t n = 0;
    std::vector<double> re, im;
    std::string key;
    auto read_block = [&](std::vector<double>& dst) {
        if (n == 0) throw std::invalid_argument("matrix file: 'n' must come first");
        dst.resize(n * n);
        for (auto& v : dst) {
            std::string s;
            if (!(tok >> s)) throw std::invalid_argument("matrix file: expected " + std::to_string(n * n) + " entries");
            v = detail::parse_double(s, "matrix entry");
        }
    };
    while (tok >> key) {
        if (key == "n") {
            if (!(tok >> n) || n == 0) throw std::invalid_argument("matrix file: bad dimension");
        } else if (key == "re") {
            read_block(re);
        } else if (key == "im") {
            read_block(im);
        } else {
            throw std::invalid_argument("matrix file: unknown field '" + key + "'");
        }
    }
    if (re.empty()) throw std::invalid_argument("matrix file: missing 're'");
    return HermitianMatrix(n, std::move(re), std::move(im));
}

inline std::string write_hermitian(const HermitianMatrix& m) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    const std::size_t n = m.size();
    os << "n " << n << "\nre";
    for (double v : m.re()) os << ' ' << v;
    os << "\nim";
    for (double v : m.im()) os << ' ' << v;
    os << '\n';
    return os.str();
}

}  // namespace anharmonic

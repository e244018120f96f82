#pragma once

/**
 * @file cli.hpp
 * @brief The `anharmonic` command line: spectrum, trace, cmtest, weyl,
 *        measure and bmv subcommands writing CSV or JSON lines.
 *
 * Exit codes: 0 success / pass, 1 test verdict fail, 2 usage error,
 * 3 numerical non-convergence.
 */

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "absmono.hpp"
#include "bmv_matrix.hpp"
#include "bw_measure.hpp"
#include "errors.hpp"
#include "grids.hpp"
#include "oscillator_spectrum.hpp"
#include "potentials.hpp"
#include "traces.hpp"
#include "weyl.hpp"

#ifndef ANHARMONIC_VERSION
#define ANHARMONIC_VERSION "0.1.0"
#endif

namespace anharmonic::cli {

enum ExitCode : int { success = 0, verdict_fail = 1, usage_error = 2, numerical_failure = 3 };

struct RunConfig {
    std::string subcommand;
    std::string v0 = "none";
    std::string v1 = "1:1:2";
    std::optional<double> t;
    double tmin = 0.1;
    double tmax = 10.0;
    std::size_t points = 25;
    std::string spacing = "geometric";
    double tol = 1e-8;
    double tail_tol = 1e-10;
    std::string format = "csv";
    std::string output;
    std::uint64_t seed = 1;

    std::size_t count = 10;                 // spectrum
    bool split_parity = false;              // trace
    std::string closed_form;                // trace
    std::string family = "harmonic";        // cmtest
    std::string file;                       // cmtest table
    std::string kind = "full";              // cmtest, measure
    std::string mode = "cm";                // cmtest
    unsigned orders = 8;                    // cmtest, bmv
    std::vector<double> steps{1.0 / 16, 1.0 / 8, 1.0 / 4};
    std::optional<std::size_t> single_mode; // cmtest
    double rmax = 400.0;                    // weyl
    std::optional<std::size_t> mode_index;  // measure
    std::optional<std::size_t> modes;       // measure
    double lmin = 0.0;                      // measure (0 = automatic)
    double lmax = 0.0;
    std::size_t lpoints = 2001;
    std::string matrix_a;                   // bmv
    std::string matrix_b;
    std::size_t random_n = 4;
    bool project_psd = false;
};

// Output ---------------------------------------------------------------------

inline std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

using Cell = std::variant<double, long long, std::string>;

/// CSV ('#' comment header, one header row per table) or JSON lines.
class Writer {
public:
    Writer(std::ostream& os, bool jsonl) : os_(os), jsonl_(jsonl) {}

    void header(const std::string& command, const std::vector<std::pair<std::string, std::string>>& config,
                const std::vector<std::pair<std::string, std::string>>& notes) {
        if (jsonl_) {
            nlohmann::ordered_json h;
            h["type"] = "header";
            h["program"] = "anharmonic";
            h["version"] = ANHARMONIC_VERSION;
            h["command"] = command;
            for (const auto& [k, v] : config) h["config"][k] = v;
            for (const auto& [k, v] : notes) h["notes"][k] = v;
            os_ << h.dump() << '\n';
            return;
        }
        os_ << "# anharmonic " << ANHARMONIC_VERSION << '\n' << "# command: " << command << '\n';
        os_ << "# config:";
        for (const auto& [k, v] : config) os_ << ' ' << k << '=' << v;
        os_ << '\n';
        for (const auto& [k, v] : notes) os_ << "# " << k << ": " << v << '\n';
    }

    void table(std::string name, std::vector<std::string> columns) {
        table_ = std::move(name);
        columns_ = std::move(columns);
        if (jsonl_) return;
        if (!first_table_) os_ << '\n';
        first_table_ = false;
        if (table_ != "rows") os_ << "# " << table_ << '\n';
        for (std::size_t i = 0; i < columns_.size(); ++i) os_ << (i ? "," : "") << columns_[i];
        os_ << '\n';
    }

    void row(const std::vector<Cell>& cells) {
        if (jsonl_) {
            nlohmann::ordered_json r;
            r["type"] = table_;
            for (std::size_t i = 0; i < cells.size() && i < columns_.size(); ++i) {
                std::visit([&](const auto& v) { r[columns_[i]] = v; }, cells[i]);
            }
            os_ << r.dump() << '\n';
            return;
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>) os_ << format_number(v);
                    else os_ << v;
                },
                cells[i]);
        }
        os_ << '\n';
    }

    /// A two-column key/value table.
    void report(const std::string& name, const std::vector<std::pair<std::string, Cell>>& kv) {
        if (jsonl_) {
            nlohmann::ordered_json r;
            r["type"] = name;
            for (const auto& [k, v] : kv) std::visit([&](const auto& x) { r[k] = x; }, v);
            os_ << r.dump() << '\n';
            return;
        }
        table(name, {"key", "value"});
        for (const auto& [k, v] : kv) row({k, v});
    }

private:
    std::ostream& os_;
    bool jsonl_;
    std::string table_ = "rows";
    std::vector<std::string> columns_;
    bool first_table_ = true;
};

// Helpers --------------------------------------------------------------------

class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline PencilPotential pencil_from(const RunConfig& c) {
    return PencilPotential(parse_optional_potential(c.v0), parse_potential(c.v1));
}

inline std::string describe_pencil(const PencilPotential& p) {
    return format_pencil(p) + (p.is_experimental() ? " (experimental: order below 0.5)" : "");
}

inline std::vector<double> t_grid_from(const RunConfig& c) {
    if (c.t) return {*c.t};
    if (!(c.tmin > 0.0) || !(c.tmax >= c.tmin)) throw UsageError("need 0 < tmin <= tmax");
    if (c.points == 0) throw UsageError("points must be >= 1");
    if (c.spacing == "geometric") return geometric_grid(c.tmin, c.tmax, c.points);
    if (c.spacing == "linear") return linear_grid(c.tmin, c.tmax, c.points);
    throw UsageError("spacing must be linear or geometric");
}

inline TraceKind kind_from(const std::string& k) {
    if (k == "full") return TraceKind::full;
    if (k == "even") return TraceKind::even;
    if (k == "odd") return TraceKind::odd;
    throw UsageError("kind must be full, even or odd");
}

inline std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_number(v[i]);
    return s;
}

inline std::vector<std::pair<std::string, std::string>> echo(const RunConfig& c) {
    std::vector<std::pair<std::string, std::string>> e{{"v0", c.v0}, {"v1", c.v1}};
    if (c.t) e.emplace_back("t", format_number(*c.t));
    else {
        e.emplace_back("tmin", format_number(c.tmin));
        e.emplace_back("tmax", format_number(c.tmax));
        e.emplace_back("points", std::to_string(c.points));
        e.emplace_back("spacing", c.spacing);
    }
    e.emplace_back("tol", format_number(c.tol));
    e.emplace_back("tail_tol", format_number(c.tail_tol));
    e.emplace_back("format", c.format);
    return e;
}

inline std::string describe(const CMReport& r) {
    return std::string(to_string(r.verdict)) + " (max normalized violation " +
           format_number(r.max_normalized_violation) + ")";
}

inline std::vector<std::pair<std::string, Cell>> report_fields(const CMReport& r) {
    std::vector<std::pair<std::string, Cell>> kv{
        {"verdict", std::string(to_string(r.verdict))},
        {"mode", std::string(to_string(r.mode))},
        {"orders_tested", static_cast<long long>(r.orders_tested)},
        {"grid", r.grid},
        {"tests_run", static_cast<long long>(r.tests_run)},
        {"tests_skipped", static_cast<long long>(r.tests_skipped)},
        {"max_normalized_violation", r.max_normalized_violation},
        {"worst_n", static_cast<long long>(r.worst_case.n)},
        {"worst_t", r.worst_case.t},
        {"worst_h", r.worst_case.h},
        {"resolved_fraction", r.resolved_fraction},
    };
    kv.emplace_back("lowest_failing_order",
                    r.lowest_failing_order ? Cell{static_cast<long long>(*r.lowest_failing_order)} : Cell{"none"});
    return kv;
}

inline int verdict_code(const CMReport& r) { return r.verdict == Verdict::fail ? verdict_fail : success; }

/// Reads "t,value" (or whitespace separated) rows; '#' comments and a
/// non-numeric header line are skipped.
inline std::pair<std::vector<double>, std::vector<double>> read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open table file '" + path + "'");
    std::vector<double> ts, vs;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        line = line.substr(0, line.find('#'));
        for (char& ch : line)
            if (ch == ',' || ch == '\t' || ch == ';') ch = ' ';
        std::istringstream row(line);
        std::string a, b;
        if (!(row >> a)) continue;
        if (!(row >> b)) throw UsageError("table row needs two columns: '" + line + "'");
        try {
            const double t = detail::parse_double(a, "t");
            const double v = detail::parse_double(b, "value");
            ts.push_back(t);
            vs.push_back(v);
        } catch (const std::invalid_argument&) {
            if (!first) throw UsageError("bad table row: '" + line + "'");
        }
        first = false;
    }
    if (ts.size() < 2) throw UsageError("table needs at least two rows");
    return {ts, vs};
}

inline HermitianMatrix read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open matrix file '" + path + "'");
    return read_hermitian(in);
}

// Subcommands ----------------------------------------------------------------

inline int run_spectrum(const RunConfig& c, Writer& w) {
    const auto pencil = pencil_from(c);
    const double t = c.t.value_or(1.0);
    const auto s = compute_spectrum({pencil, t, c.count, c.tol});
    auto cfg = echo(c);
    cfg.emplace_back("count", std::to_string(c.count));
    w.header("spectrum", cfg,
             {{"pencil", describe_pencil(pencil)},
              {"tolerance", "per-eigenvalue absolute tol " + format_number(c.tol) +
                                "; error = Richardson difference + domain doubling"},
              {"mesh", "half_width=" + format_number(s.mesh.half_width) +
                           " grid_points=" + std::to_string(s.mesh.grid_points) +
                           " refinement_levels=" + std::to_string(s.mesh.refinement_levels) +
                           " domain_doublings=" + std::to_string(s.mesh.domain_doublings)}});
    w.table("rows", {"n", "lambda", "error_estimate", "parity"});
    for (std::size_t n = 0; n < s.size(); ++n) {
        w.row({static_cast<long long>(n), s.eigenvalues[n], s.error_estimates[n],
               s.parities.empty() ? std::string("none") : std::string(to_string(s.parities[n]))});
    }
    return success;
}

inline int run_trace(const RunConfig& c, Writer& w) {
    const auto pencil = pencil_from(c);
    const auto grid = t_grid_from(c);
    if (c.split_parity && !pencil.is_even()) throw UsageError("--split-parity needs an even pencil");
    const bool closed = !c.closed_form.empty();
    if (closed) {
        if (c.closed_form != "harmonic") throw UsageError("--closed-form accepts only 'harmonic'");
        if (!(pencil == PencilPotential(std::nullopt, Potential::power(2)))) {
            throw UsageError("--closed-form harmonic needs --v0 none --v1 1:1:2");
        }
    }
    TraceOptions opts;
    const TraceEvaluator ev(pencil, grid.front(), grid.back(), c.tail_tol, opts);
    struct Row {
        TraceValue full;
        ParityTrace split;
    };
    std::vector<Row> rows(grid.size());
    parallel_for(grid.size(), [&](std::size_t i) {
        if (c.split_parity) {
            rows[i].split = ev.split(grid[i]);
            rows[i].full = rows[i].split.even;
            rows[i].full.value += rows[i].split.odd.value;
            rows[i].full.eigen_error += rows[i].split.odd.eigen_error;
        } else {
            rows[i].full = ev.value(grid[i]);
        }
    });
    auto cfg = echo(c);
    if (c.split_parity) cfg.emplace_back("split_parity", "true");
    if (closed) cfg.emplace_back("closed_form", c.closed_form);
    w.header("trace", cfg,
             {{"pencil", describe_pencil(pencil)},
              {"tolerance", "tail_bound <= " + format_number(c.tail_tol) + " from the counting envelope; eigen budget " +
                                format_number(opts.eigen_budget)}});
    std::vector<std::string> cols{"t", "phi", "tail_bound", "eigen_error", "modes"};
    if (c.split_parity) {
        cols.insert(cols.end(), {"phi_even", "phi_odd"});
    }
    if (closed) {
        cols.insert(cols.end(), {"closed_phi", "closed_even", "closed_odd", "unnormalized_phi", "unnormalized_even",
                                 "unnormalized_odd"});
    }
    w.table("rows", cols);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& r = rows[i];
        std::vector<Cell> cells{grid[i], r.full.value, r.full.tail_bound, r.full.eigen_error,
                                static_cast<long long>(r.full.modes)};
        if (c.split_parity) {
            cells.emplace_back(r.split.even.value);
            cells.emplace_back(r.split.odd.value);
        }
        if (closed) {
            const auto h = harmonic_closed_form(grid[i]);
            const auto u = harmonic_unnormalized_forms(grid[i]);
            for (double v : {h.phi, h.phi_even, h.phi_odd, u.phi, u.phi_even, u.phi_odd}) cells.emplace_back(v);
        }
        w.row(cells);
    }
    return success;
}

inline int run_cmtest(const RunConfig& c, Writer& w) {
    MonoTestConfig cfg;
    if (c.orders > max_test_order) throw UsageError("orders above " + std::to_string(max_test_order) + " are not supported");
    cfg.orders = c.orders;
    if (c.mode == "am") cfg.mode = MonoMode::am;
    else if (c.mode != "cm") throw UsageError("mode must be am or cm");
    std::string subject;
    std::optional<SampledFunction> f;
    std::unique_ptr<TraceEvaluator> ev;
    auto config = echo(c);
    config.emplace_back("family", c.family);
    config.emplace_back("orders", std::to_string(c.orders));
    config.emplace_back("mode", c.mode);
    config.emplace_back("steps", join(c.steps));

    if (c.family == "file") {
        if (c.file.empty()) throw UsageError("--family file needs --file");
        auto [ts, vs] = read_table(c.file);
        const double dt = ts[1] - ts[0];
        for (std::size_t i = 1; i < ts.size(); ++i) {
            if (std::abs((ts[i] - ts[i - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(ts[i]))) {
                throw UsageError("table t values must be equally spaced");
            }
        }
        cfg.t_grid = ts;
        cfg.steps.relative = false;
        cfg.steps.values = {dt, 2.0 * dt, 4.0 * dt};
        subject = "table " + c.file;
        f.emplace(SampledFunction::table(std::move(ts), std::move(vs)));
        config.emplace_back("file", c.file);
    } else {
        PencilPotential pencil = pencil_from(c);
        if (c.family == "harmonic") pencil = PencilPotential(std::nullopt, Potential::power(2));
        else if (c.family == "quartic") pencil = PencilPotential(Potential::power(2), Potential::power(4));
        else if (c.family != "pencil") throw UsageError("family must be harmonic, quartic, pencil or file");
        cfg.t_grid = t_grid_from(c);
        cfg.steps.values = c.steps;
        double reach = 0.0;
        for (double s : c.steps) {
            if (!(s > 0.0)) throw UsageError("steps must be positive");
            reach = std::max(reach, s);
        }
        const TraceKind kind = kind_from(c.kind);
        const double lo = cfg.t_grid.front();
        const double hi = cfg.t_grid.back() * (1.0 + reach * c.orders);
        ev = std::make_unique<TraceEvaluator>(pencil, lo, hi, c.tail_tol);
        const TraceEvaluator* e = ev.get();
        subject = describe_pencil(pencil);
        if (c.single_mode) {
            const std::size_t n = *c.single_mode;
            subject += ", single mode exp(-lambda_" + std::to_string(n) + "(t))";
            f.emplace(
                [e, n](double t) {
                    const Spectrum s = e->spectrum_at(t);
                    if (n >= s.size()) throw UsageError("single mode index beyond the retained modes");
                    const double v = std::exp(-s.eigenvalues[n]);
                    return Sample{v, v * std::expm1(s.error_estimates[n])};
                },
                0.0, std::numeric_limits<double>::max());
        } else {
            subject += std::string(", ") + to_string(kind) + " trace";
            f.emplace(
                [e, kind](double t) {
                    const auto v = e->value(t, kind);
                    return Sample{v.value, v.total_error()};
                },
                0.0, std::numeric_limits<double>::max());
        }
        if (c.mode == "am") throw UsageError("am mode applies to table input only; trace families use cm");
    }
    const CMReport rep = am_test(*f, cfg);
    w.header("cmtest", config,
             {{"subject", subject},
              {"tolerance", "eps(n,t,h) = 8 u sum C(n,k)|f| + sum C(n,k) err; fail above 10 eps"}});
    w.report("report", report_fields(rep));
    return verdict_code(rep);
}

inline int run_weyl(const RunConfig& c, Writer& w) {
    const auto pencil = pencil_from(c);
    if (!pencil.is_single_term()) throw UsageError("weyl needs a single homogeneous term (--v0 none)");
    const auto& v = pencil.v1();
    const double t = c.t.value_or(1.0);
    const double rho = v.terms().front().rho();
    const double s = std::pow(t, 2.0 / (2.0 + rho));
    const CountEnvelope env(v);
    const auto count = static_cast<std::size_t>(std::ceil(env(c.rmax / s))) + 2;
    const auto spec = compute_spectrum({pencil, t, count, c.tol});
    const auto rs = linear_grid(c.rmax / static_cast<double>(c.points), c.rmax, c.points);
    auto cfg = echo(c);
    cfg.emplace_back("rmax", format_number(c.rmax));
    w.header("weyl", cfg,
             {{"pencil", describe_pencil(pencil)},
              {"weyl_constant", format_number(weyl_constant(v))},
              {"weyl_exponent", format_number(weyl_exponent(v))},
              {"eigenvalues_computed", std::to_string(count)}});
    w.table("rows", {"r", "count_exact", "count_asymptotic", "ratio"});
    for (double r : rs) {
        const auto e = weyl_estimate(spec, r);
        w.row({r, static_cast<long long>(e.count_exact), e.count_asymptotic, e.ratio});
    }
    return success;
}

inline int run_measure(const RunConfig& c, Writer& w) {
    const auto pencil = pencil_from(c);
    if (!pencil.is_single_term()) {
        throw UsageError("measure is built from the scaling law and needs a single homogeneous term (--v0 none)");
    }
    const double rho = pencil.v1().terms().front().rho();
    const TraceKind kind = kind_from(c.kind);
    if (kind != TraceKind::full && !pencil.is_even()) throw UsageError("parity-restricted measures need an even term");
    const double t_ref = c.t.value_or(c.tmin);
    if (!(t_ref > 0.0)) throw UsageError("t must be positive");

    std::size_t count = c.modes.value_or(0);
    if (c.mode_index) count = std::max(count, *c.mode_index + 1);
    if (count == 0) {
        // Enough modes that the omitted ones contribute at most tail_tol at t_ref.
        const CountEnvelope env(pencil.v1());
        const double alpha = 2.0 / (2.0 + rho);
        const double tau = std::pow(t_ref, alpha);
        count = 4;
        while (env.tail(tau, tau * env.eigenvalue_floor(count)) > c.tail_tol) {
            count *= 2;
            if (count > 4096) throw NumericalFailure("measure: tail tolerance needs more than 4096 modes");
        }
    }
    const SpectralModes sm = spectral_modes(pencil, count, std::min(c.tol, 1e-10));
    std::vector<StableScaleDensity> modes = sm.modes;
    std::optional<ModeTail> tail = sm.tail;
    std::size_t cutoff = modes.size();
    if (c.mode_index) {
        modes = {sm.modes[*c.mode_index]};
        cutoff = 1;
        tail.reset();
    }
    std::vector<double> grid;
    if (c.lmin > 0.0 && c.lmax > c.lmin) grid = lambda_grid(c.lmin, c.lmax, c.lpoints);
    else grid = default_lambda_grid(modes, t_ref, c.lpoints);
    const MeasureGrid m = aggregate_measure(modes, grid, cutoff, c.mode_index ? TraceKind::full : kind, tail);
    const auto lt = laplace_transform(m, t_ref);
    double reference = 0.0;
    if (c.mode_index) {
        reference = modes.front().transform(t_ref);
    } else {
        for (std::size_t n = 0; n < sm.modes.size(); ++n) {
            if (kind == TraceKind::even && n % 2 == 1) continue;
            if (kind == TraceKind::odd && n % 2 == 0) continue;
            reference += sm.modes[n].transform(t_ref);
        }
    }
    auto cfg = echo(c);
    cfg.emplace_back("kind", c.kind);
    if (c.mode_index) cfg.emplace_back("mode", std::to_string(*c.mode_index));
    cfg.emplace_back("lpoints", std::to_string(c.lpoints));
    std::vector<std::pair<std::string, std::string>> notes{
        {"pencil", describe_pencil(pencil)},
        {"alpha", format_number(2.0 / (2.0 + rho))},
        {"truncation", m.truncation_note},
        {"omitted_mass_bound", format_number(m.omitted_mass_bound)},
        {"laplace_check", "t=" + format_number(t_ref) + " transform=" + format_number(lt.value) +
                              " modes_sum=" + format_number(reference) +
                              " truncation_bound=" + format_number(lt.truncation_bound)}};
    if (c.mode_index) notes.emplace_back("a", format_number(modes.front().a));
    w.header("measure", cfg, notes);
    w.table("rows", {"lambda", "density"});
    for (std::size_t i = 0; i < m.lambdas.size(); ++i) w.row({m.lambdas[i], m.density_values[i]});
    w.table("atoms", {"location", "weight"});
    for (const auto& a : m.atoms) w.row({a.location, a.weight});
    return success;
}

inline int run_bmv(const RunConfig& c, Writer& w) {
    std::optional<MatrixPencil> p;
    std::string source;
    if (!c.matrix_a.empty() || !c.matrix_b.empty()) {
        if (c.matrix_a.empty() || c.matrix_b.empty()) throw UsageError("--a and --b must be given together");
        p.emplace(read_matrix_file(c.matrix_a), read_matrix_file(c.matrix_b), c.project_psd);
        source = "files " + c.matrix_a + ", " + c.matrix_b;
    } else {
        if (c.random_n == 0 || c.random_n > 64) throw UsageError("--random n must lie in [1, 64]");
        p.emplace(random_pencil(c.random_n, c.seed));
        source = "random n=" + std::to_string(c.random_n) + " seed=" + std::to_string(c.seed);
    }
    MonoTestConfig cfg;
    if (c.orders > max_test_order) throw UsageError("orders above " + std::to_string(max_test_order) + " are not supported");
    cfg.orders = c.orders;
    cfg.t_grid = t_grid_from(c);
    cfg.steps.values = c.steps;
    const CMReport rep = bmv_cm_test(*p, cfg);
    std::optional<SlopeReport> slope;
    if (cfg.t_grid.size() >= 3) slope = support_slope_check(*p, cfg.t_grid);
    std::optional<CommutingMeasure> cm;
    std::string commuting = "no";
    try {
        cm = commuting_measure(*p, 1e-10, c.seed);
        commuting = "yes";
    } catch (const std::invalid_argument&) {
    }

    auto config = echo(c);
    config.emplace_back("orders", std::to_string(c.orders));
    config.emplace_back("seed", std::to_string(c.seed));
    const auto [bmin, bmax] = p->b_eigen_bounds();
    w.header("bmv", config,
             {{"source", source},
              {"b_eigen_bounds", format_number(bmin) + ";" + format_number(bmax)},
              {"commuting", commuting},
              {"tolerance", "eps(n,t,h) = 8 u sum C(n,k)|phi| + eigensolver backward error"}});
    w.table("rows", {"t", "phi", "slope"});
    for (std::size_t i = 0; i < cfg.t_grid.size(); ++i) {
        std::optional<double> sl;
        if (slope && i > 0 && i + 1 < cfg.t_grid.size()) sl = slope->slopes[i - 1];
        w.row({cfg.t_grid[i], pencil_trace_exp(*p, cfg.t_grid[i]),
               sl ? Cell{*sl} : Cell{std::string("")}});
    }
    auto kv = report_fields(rep);
    if (slope) {
        kv.emplace_back("slope_check", std::string(slope->passed() ? "pass" : "fail"));
        kv.emplace_back("slope_violations", static_cast<long long>(slope->violations));
    }
    w.report("report", kv);
    if (cm) {
        w.table("atoms", {"location", "weight"});
        for (const auto& a : cm->atoms) w.row({a.location, a.weight});
    }
    const bool ok = rep.verdict != Verdict::fail && (!slope || slope->passed());
    return ok ? success : verdict_fail;
}

// Argument handling ----------------------------------------------------------

/// key=value lines become --key=value arguments for keys not already given.
inline std::vector<std::string> merge_config_file(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::set<std::string> given;
    for (const auto& a : args) {
        if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
    }
    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line without '=': " + line);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "config" || given.count(key)) continue;
        if (value == "true") args.push_back("--" + key);
        else if (value != "false") args.push_back("--" + key + "=" + value);
    }
    return args;
}

inline void add_common(CLI::App* s, RunConfig& c, bool with_range = true) {
    s->add_option("--v0", c.v0, "fixed potential: 'none' or terms c+:c-:rho[,...]");
    s->add_option("--v1", c.v1, "coupled potential: terms c+:c-:rho[,...]");
    s->add_option("--t", c.t, "single coupling value");
    if (with_range) {
        s->add_option("--tmin", c.tmin, "smallest t");
        s->add_option("--tmax", c.tmax, "largest t");
        s->add_option("--points", c.points, "number of t points");
        s->add_option("--spacing", c.spacing, "linear or geometric")->check(CLI::IsMember({"linear", "geometric"}));
    }
    s->add_option("--tol", c.tol, "eigenvalue tolerance");
    s->add_option("--tail-tol", c.tail_tol, "bound on omitted modes in traces");
    s->add_option("--format", c.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    s->add_option("-o,--output", c.output, "output file (default stdout)");
    s->add_option("--seed", c.seed, "random seed");
    s->add_option("--config", "key=value file; command-line flags take precedence");
}

inline int run(const std::vector<std::string>& argv_in, std::ostream& out, std::ostream& err) {
    RunConfig c;
    CLI::App app{"Spectra, trace functions and monotonicity tests for -d^2/dx^2 + V0 + t V1", "anharmonic"};
    app.set_version_flag("--version", ANHARMONIC_VERSION);
    app.require_subcommand(1);

    auto* spectrum = app.add_subcommand("spectrum", "lowest eigenvalues with mesh metadata");
    add_common(spectrum, c, false);
    spectrum->add_option("--count", c.count, "number of eigenvalues");

    auto* trace = app.add_subcommand("trace", "trace function phi(t) = sum exp(-lambda_n(t))");
    add_common(trace, c);
    trace->add_flag("--split-parity", c.split_parity, "add even and odd parts");
    trace->add_option("--closed-form", c.closed_form, "compare with closed forms ('harmonic')");

    auto* cmtest = app.add_subcommand("cmtest", "complete monotonicity test by finite differences");
    add_common(cmtest, c);
    cmtest->add_option("--family", c.family, "harmonic, quartic, pencil (uses --v0/--v1) or file")
        ->check(CLI::IsMember({"harmonic", "quartic", "pencil", "file"}));
    cmtest->add_option("--file", c.file, "table of t,value rows (equally spaced t)");
    cmtest->add_option("--orders", c.orders, "highest difference order (<= 12)");
    cmtest->add_option("--mode", c.mode, "cm, or am for table input")->check(CLI::IsMember({"am", "cm"}));
    cmtest->add_option("--kind", c.kind, "full, even or odd trace")->check(CLI::IsMember({"full", "even", "odd"}));
    cmtest->add_option("--steps", c.steps, "step sizes as fractions of t")->delimiter(',');
    cmtest->add_option("--single-mode", c.single_mode, "test exp(-lambda_n(t)) instead of the trace");

    auto* weyl = app.add_subcommand("weyl", "eigenvalue counts against the Weyl law");
    add_common(weyl, c);
    weyl->add_option("--rmax", c.rmax, "largest energy r");

    auto* measure = app.add_subcommand("measure", "representing measure on a lambda grid");
    add_common(measure, c);
    measure->add_option("--mode", c.mode_index, "single mode n");
    measure->add_option("--modes", c.modes, "number of modes summed (default: from --tail-tol)");
    measure->add_option("--kind", c.kind, "full, even or odd")->check(CLI::IsMember({"full", "even", "odd"}));
    measure->add_option("--lmin", c.lmin, "smallest lambda (default automatic)");
    measure->add_option("--lmax", c.lmax, "largest lambda (default automatic)");
    measure->add_option("--lpoints", c.lpoints, "lambda grid points");

    auto* bmv = app.add_subcommand("bmv", "matrix pencil trace, CM test and support check");
    add_common(bmv, c);
    bmv->add_option("--a", c.matrix_a, "matrix file for A");
    bmv->add_option("--b", c.matrix_b, "matrix file for B");
    bmv->add_option("--random", c.random_n, "dimension of a random pencil (default 4)");
    bmv->add_option("--orders", c.orders, "highest difference order (<= 12)");
    bmv->add_option("--steps", c.steps, "step sizes as fractions of t")->delimiter(',');
    bmv->add_flag("--project-psd", c.project_psd, "clip negative eigenvalues of B");
    bmv->callback([&] {
        if (bmv->count("--orders") == 0) c.orders = 6;
    });

    try {
        std::vector<std::string> args = merge_config_file(argv_in);
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return success;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return success;
    } catch (const CLI::CallForVersion&) {
        out << ANHARMONIC_VERSION << '\n';
        return success;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return usage_error;
    } catch (const std::exception& e) {
        err << "usage error: " << e.what() << '\n';
        return usage_error;
    }

    std::ofstream file;
    std::ostream* os = &out;
    if (!c.output.empty()) {
        file.open(c.output);
        if (!file) {
            err << "usage error: cannot write '" << c.output << "'\n";
            return usage_error;
        }
        os = &file;
    }
    std::ostringstream buffer;
    buffer.imbue(std::locale::classic());
    Writer w(buffer, c.format == "jsonl");
    int code = success;
    try {
        if (*spectrum) code = run_spectrum(c, w);
        else if (*trace) code = run_trace(c, w);
        else if (*cmtest) code = run_cmtest(c, w);
        else if (*weyl) code = run_weyl(c, w);
        else if (*measure) code = run_measure(c, w);
        else if (*bmv) code = run_bmv(c, w);
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << '\n';
        return usage_error;
    } catch (const std::domain_error& e) {
        err << "usage error: " << e.what() << '\n';
        return usage_error;
    } catch (const std::out_of_range& e) {
        err << "usage error: " << e.what() << '\n';
        return usage_error;
    }
    *os << buffer.str();
    return code;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace anharmonic::cli

#pragma once

// Configuration, subcommand drivers and serialization behind the `pqeig` tool.
//
// Configuration documents are flat UTF-8 `key=value` lines; `#` starts a
// comment and blank lines are ignored. Later assignments override earlier ones,
// which is how command-line `--key value` flags override a config file.
//
// Output formats (numbers always printed with 17 significant digits):
//   solve report JSON  keys lambda, iterations, converged, termination, kkt_u,
//                      kkt_v, p, q, alpha, beta, dim, n, seed
//   field CSV          header x[,y],u,v; one row per interior node, row-major
//   sweep CSV          header p,q,alpha,beta,lambda,iterations,kkt_u,kkt_v,converged

#include "pqeig/errors.hpp"
#include "pqeig/functional.hpp"
#include "pqeig/mesh.hpp"
#include "pqeig/oracle.hpp"
#include "pqeig/proofcheck.hpp"
#include "pqeig/solver.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace pqeig::cli {

enum ExitCode : int { exit_ok = 0, exit_failed = 1, exit_config = 2 };

/// Closed range lo:hi sampled at `count` equispaced points.
struct Range {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 1;

    std::vector<double> points() const {
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = count == 1 ? lo
                                : lo + (hi - lo) * static_cast<double>(i) /
                                           static_cast<double>(count - 1);
        }
        return out;
    }
};

struct RunConfig {
    int dim = 1;
    std::size_t n = 100;
    double length = 1.0;
    Exponents exponents;
    SolverConfig solver;

    // sweep
    std::optional<Range> p_range;
    std::optional<Range> q_range;
    bool q_follows_p = false;
    double theta = 0.5;

    // verify
    std::size_t trials = 1000;

    /// Report destination ("-" is standard output).
    std::string output = "-";
    /// Field CSV written by solve; empty disables it.
    std::string fields = "fields.csv";

    Grid grid() const { return make_grid(dim, n, length); }
};

/// One `key=value` assignment and where it came from (e.g. "base.cfg:3").
struct Entry {
    std::string key;
    std::string value;
    std::string where;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double to_double(const Entry& en) {
    double x = 0.0;
    const char* first = en.value.data();
    const char* last = first + en.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc() || ptr != last || !std::isfinite(x)) {
        throw ParseError(en.where + ": '" + en.key + "' expects a number, got '" + en.value + "'");
    }
    return x;
}

inline std::uint64_t to_uint(const Entry& en) {
    std::uint64_t x = 0;
    const char* first = en.value.data();
    const char* last = first + en.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, x);
    if (ec != std::errc() || ptr != last) {
        throw ParseError(en.where + ": '" + en.key + "' expects a nonnegative integer, got '" +
                         en.value + "'");
    }
    return x;
}

inline bool to_bool(const Entry& en) {
    if (en.value == "true" || en.value == "1" || en.value == "yes") {
        return true;
    }
    if (en.value == "false" || en.value == "0" || en.value == "no") {
        return false;
    }
    throw ParseError(en.where + ": '" + en.key + "' expects true or false, got '" + en.value + "'");
}

inline Range to_range(const Entry& en) {
    const auto c1 = en.value.find(':');
    const auto c2 = en.value.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
        throw ParseError(en.where + ": '" + en.key + "' range must read lo:hi:count");
    }
    Range r;
    r.lo = to_double({en.key, en.value.substr(0, c1), en.where});
    r.hi = to_double({en.key, en.value.substr(c1 + 1, c2 - c1 - 1), en.where});
    r.count = static_cast<std::size_t>(to_uint({en.key, en.value.substr(c2 + 1), en.where}));
    if (r.count < 1 || (r.count == 1 && r.lo != r.hi) || r.hi < r.lo) {
        throw ParseError(en.where + ": '" + en.key +
                         "' range must be nonempty with a positive point count");
    }
    return r;
}

} // namespace detail

/// Splits a configuration document into assignments.
inline std::vector<Entry> parse_entries(std::string_view text, std::string_view source) {
    std::vector<Entry> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty()) {
            if (nl == text.size()) {
                break;
            }
            continue;
        }
        const std::string where = std::string(source) + ":" + std::to_string(line_no);
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ParseError(where + ": expected key=value, got '" + trimmed + "'");
        }
        Entry en{detail::trim(trimmed.substr(0, eq)), detail::trim(trimmed.substr(eq + 1)), where};
        if (en.key.empty() || en.value.empty()) {
            throw ParseError(where + ": expected key=value, got '" + trimmed + "'");
        }
        out.push_back(std::move(en));
        if (nl == text.size()) {
            break;
        }
    }
    return out;
}

/// Applies assignments in order on top of the defaults and validates the result.
/// Without `full_exponents` only p > 1 is required (the oracle reads nothing else).
inline RunConfig build_config(const std::vector<Entry>& entries, bool full_exponents = true) {
    RunConfig cfg;
    std::string exponent_where = "defaults";
    std::map<std::string, std::string> last_where;
    for (const Entry& en : entries) {
        const std::string& k = en.key;
        last_where[k] = en.where;
        if (k == "dim") {
            cfg.dim = static_cast<int>(detail::to_uint(en));
        } else if (k == "n") {
            cfg.n = static_cast<std::size_t>(detail::to_uint(en));
        } else if (k == "length") {
            cfg.length = detail::to_double(en);
        } else if (k == "p") {
            exponent_where = en.where;
            if (en.value.find(':') != std::string::npos) {
                cfg.p_range = detail::to_range(en);
            } else {
                cfg.p_range.reset();
                cfg.exponents.p = detail::to_double(en);
            }
        } else if (k == "q") {
            exponent_where = en.where;
            cfg.q_follows_p = false;
            cfg.q_range.reset();
            if (en.value == "p") {
                cfg.q_follows_p = true;
            } else if (en.value.find(':') != std::string::npos) {
                cfg.q_range = detail::to_range(en);
            } else {
                cfg.exponents.q = detail::to_double(en);
            }
        } else if (k == "alpha") {
            exponent_where = en.where;
            cfg.exponents.alpha = detail::to_double(en);
        } else if (k == "beta") {
            exponent_where = en.where;
            cfg.exponents.beta = detail::to_double(en);
        } else if (k == "theta") {
            cfg.theta = detail::to_double(en);
        } else if (k == "step_init") {
            cfg.solver.step_init = detail::to_double(en);
        } else if (k == "armijo_shrink") {
            cfg.solver.armijo_shrink = detail::to_double(en);
        } else if (k == "armijo_slope") {
            cfg.solver.armijo_slope = detail::to_double(en);
        } else if (k == "tol_lambda") {
            cfg.solver.tol_lambda = detail::to_double(en);
        } else if (k == "tol_kkt") {
            cfg.solver.tol_kkt = detail::to_double(en);
        } else if (k == "max_iters") {
            cfg.solver.max_iters = static_cast<std::size_t>(detail::to_uint(en));
        } else if (k == "eps_grad") {
            cfg.solver.eps_grad = detail::to_double(en);
        } else if (k == "eps_u") {
            cfg.solver.eps_u = detail::to_double(en);
        } else if (k == "seed") {
            cfg.solver.seed = detail::to_uint(en);
        } else if (k == "n_starts") {
            cfg.solver.n_starts = static_cast<std::size_t>(detail::to_uint(en));
        } else if (k == "positive_init") {
            cfg.solver.positive_init = detail::to_bool(en);
        } else if (k == "trials") {
            cfg.trials = static_cast<std::size_t>(detail::to_uint(en));
        } else if (k == "output") {
            cfg.output = en.value;
        } else if (k == "fields") {
            cfg.fields = en.value == "none" ? std::string() : en.value;
        } else {
            throw ParseError(en.where + ": unknown key '" + k + "'");
        }
    }

    auto where = [&](const char* key) {
        const auto it = last_where.find(key);
        return it == last_where.end() ? std::string("defaults") : it->second;
    };
    try {
        (void)cfg.grid();
    } catch (const ParameterError& e) {
        throw ParseError(where(cfg.dim != 1 && cfg.dim != 2 ? "dim" : cfg.n < 2 ? "n" : "length") +
                         ": " + e.what());
    }
    try {
        cfg.solver.validate();
    } catch (const ParameterError& e) {
        throw ParseError(std::string("solver settings: ") + e.what());
    }
    if (cfg.trials < 1) {
        throw ParseError(where("trials") + ": trials must be at least 1");
    }

    const bool sweep_mode = cfg.p_range.has_value() || cfg.q_range.has_value();
    if (sweep_mode) {
        if (!(cfg.theta > 0.0 && cfg.theta < 1.0)) {
            throw ParseError(where("theta") + ": theta must lie in (0, 1)");
        }
        if (!cfg.p_range) {
            throw ParseError(where("q") + ": a q range needs a p range");
        }
        if (cfg.q_range && cfg.q_range->count != cfg.p_range->count) {
            throw ParseError(where("q") + ": q range must have as many points as the p range");
        }
        if (!(cfg.p_range->lo > 1.0) || (cfg.q_range && !(cfg.q_range->lo > 1.0)) ||
            (!cfg.q_range && !cfg.q_follows_p && !(cfg.exponents.q > 1.0))) {
            throw ParseError(exponent_where + ": sweep exponents must exceed 1");
        }
        return cfg;
    }
    if (cfg.q_follows_p) {
        cfg.exponents.q = cfg.exponents.p;
    }
    const Exponents& e = cfg.exponents;
    if (!full_exponents) {
        if (!(e.p > 1.0)) {
            throw ParseError(exponent_where + ": need p > 1");
        }
        return cfg;
    }
    if (!(e.p > 1.0) || !(e.q > 1.0) || !(e.alpha > 0.0) || !(e.beta > 0.0)) {
        throw ParseError(exponent_where + ": need p > 1, q > 1, alpha > 0, beta > 0");
    }
    if (!(std::abs(e.admissibility_defect()) <= admissibility_tol)) {
        std::ostringstream msg;
        msg << exponent_where << ": alpha/p + beta/q = " << e.alpha / e.p + e.beta / e.q
            << " ≠ 1";
        throw ParseError(msg.str());
    }
    return cfg;
}

inline RunConfig parse_config(std::string_view text, std::string_view source = "config") {
    return build_config(parse_entries(text, source));
}

/// Shortest-safe rendering: 17 significant digits, JSON null for non-finite.
inline std::string format_number(double x) {
    if (!std::isfinite(x)) {
        return "null";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Minimal ordered JSON object writer.
class JsonObject {
public:
    JsonObject& add(std::string_view key, double x) { return raw(key, format_number(x)); }
    JsonObject& add(std::string_view key, std::uint64_t x) { return raw(key, std::to_string(x)); }
    JsonObject& add(std::string_view key, int x) { return raw(key, std::to_string(x)); }
    JsonObject& add(std::string_view key, bool x) { return raw(key, x ? "true" : "false"); }
    JsonObject& add(std::string_view key, std::string_view s) {
        return raw(key, "\"" + std::string(s) + "\"");
    }
    JsonObject& add(std::string_view key, const char* s) { return add(key, std::string_view(s)); }
    JsonObject& add(std::string_view key, const std::vector<double>& xs) {
        std::string out = "[";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            out += (i ? ", " : "") + format_number(xs[i]);
        }
        return raw(key, out + "]");
    }

    std::string str() const { return "{\n" + body_ + "\n}\n"; }

private:
    JsonObject& raw(std::string_view key, const std::string& value) {
        if (!body_.empty()) {
            body_ += ",\n";
        }
        body_ += "  \"" + std::string(key) + "\": " + value;
        return *this;
    }

    std::string body_;
};

inline std::string solve_json(const RunConfig& cfg, const EigenPair& pair,
                              const SolverReport& report) {
    const auto [ku, kv] = report.kkt_history.empty() ? std::pair{0.0, 0.0}
                                                     : report.kkt_history.back();
    JsonObject j;
    j.add("lambda", pair.lambda)
        .add("iterations", static_cast<std::uint64_t>(report.iterations))
        .add("converged", report.converged)
        .add("termination", to_string(report.termination))
        .add("kkt_u", ku)
        .add("kkt_v", kv)
        .add("p", pair.exponents.p)
        .add("q", pair.exponents.q)
        .add("alpha", pair.exponents.alpha)
        .add("beta", pair.exponents.beta)
        .add("dim", cfg.dim)
        .add("n", static_cast<std::uint64_t>(cfg.n))
        .add("seed", cfg.solver.seed);
    return j.str();
}

inline std::string fields_csv(const EigenPair& pair) {
    const Grid& g = pair.u.grid();
    std::string out = g.dim() == 1 ? "x,u,v\n" : "x,y,u,v\n";
    const std::size_t n = g.n();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.dim() == 1) {
            out += format_number(g.coordinate(k));
        } else {
            out += format_number(g.coordinate(k % n)) + "," + format_number(g.coordinate(k / n));
        }
        out += "," + format_number(pair.u[k]) + "," + format_number(pair.v[k]) + "\n";
    }
    return out;
}

struct SweepRow {
    Exponents exponents;
    double lambda = 0.0;
    std::size_t iterations = 0;
    double kkt_u = 0.0;
    double kkt_v = 0.0;
    bool converged = false;
};

/// Solves at every sweep point, alpha = theta p and beta = (1 - theta) q.
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg) {
    const Grid grid = cfg.grid();
    const std::vector<double> ps =
        cfg.p_range ? cfg.p_range->points() : std::vector<double>{cfg.exponents.p};
    std::vector<double> qs;
    if (cfg.q_range) {
        qs = cfg.q_range->points();
    } else if (cfg.q_follows_p) {
        qs = ps;
    } else {
        qs.assign(ps.size(), cfg.exponents.q);
    }
    std::vector<SweepRow> rows;
    rows.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        SweepRow row;
        row.exponents = exponents_from_theta(ps[i], qs[i], cfg.theta);
        try {
            auto [pair, report] = solve(grid, row.exponents, cfg.solver);
            row.lambda = pair.lambda;
            row.iterations = report.iterations;
            row.kkt_u = report.kkt_history.back().first;
            row.kkt_v = report.kkt_history.back().second;
            row.converged = report.converged;
        } catch (const SolverFailed&) {
            row.lambda = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "p,q,alpha,beta,lambda,iterations,kkt_u,kkt_v,converged\n";
    for (const SweepRow& r : rows) {
        out += format_number(r.exponents.p) + "," + format_number(r.exponents.q) + "," +
               format_number(r.exponents.alpha) + "," + format_number(r.exponents.beta) + "," +
               (std::isfinite(r.lambda) ? format_number(r.lambda) : std::string("nan")) + "," +
               std::to_string(r.iterations) + "," + format_number(r.kkt_u) + "," +
               format_number(r.kkt_v) + "," + (r.converged ? "1" : "0") + "\n";
    }
    return out;
}

inline constexpr double jensen_gap_floor = -1e-14;
inline constexpr double concavity_ceiling = 1e-12;
inline constexpr Exponents concavity_exponents{3.0, 3.0, 1.5, 1.5};

struct VerifySummary {
    proofcheck::JensenSweep jensen;
    double concavity_max_violation = 0.0;
    proofcheck::PathSuite path;
    SimplicityVerdict simplicity;
    bool jensen_pass = false;
    bool concavity_pass = false;
    bool path_pass = false;
    bool nonnegative_pass = false;
    bool passed() const {
        return jensen_pass && concavity_pass && path_pass && simplicity.simple && nonnegative_pass;
    }
};

inline constexpr double nonnegativity_floor = -1e-8;

/// Randomized proof-inequality suites plus the multi-start simplicity protocol.
inline VerifySummary run_verify(const RunConfig& cfg) {
    VerifySummary s;
    s.jensen = proofcheck::jensen_sweep(cfg.trials, cfg.solver.seed);
    s.jensen_pass = s.jensen.min_gap >= jensen_gap_floor;
    s.concavity_max_violation =
        proofcheck::concavity_sweep(cfg.trials, cfg.solver.seed, concavity_exponents);
    s.concavity_pass = s.concavity_max_violation <= concavity_ceiling;
    s.path = proofcheck::path_suite(cfg.exponents);
    s.path_pass = std::abs(s.path.proportional_delta) <= proofcheck::path_proportional_tol &&
                  s.path.distinct_variation <= proofcheck::path_variation_tol;
    for (double d : s.path.distinct_delta) {
        s.path_pass = s.path_pass && d > 0.0;
    }
    s.simplicity = multi_start(cfg.grid(), cfg.exponents, cfg.solver);
    s.nonnegative_pass = s.simplicity.min_value_ratio >= nonnegativity_floor;
    return s;
}

inline std::string verify_json(const RunConfig& cfg, const VerifySummary& s) {
    JsonObject j;
    j.add("passed", s.passed())
        .add("jensen_trials", static_cast<std::uint64_t>(s.jensen.trials))
        .add("jensen_min_gap", s.jensen.min_gap)
        .add("jensen_pass", s.jensen_pass)
        .add("concavity_trials", static_cast<std::uint64_t>(cfg.trials))
        .add("concavity_max_violation", s.concavity_max_violation)
        .add("concavity_pass", s.concavity_pass)
        .add("path_proportional_delta", s.path.proportional_delta)
        .add("path_distinct_delta", std::vector<double>(s.path.distinct_delta.begin(),
                                                        s.path.distinct_delta.end()))
        .add("path_distinct_variation", s.path.distinct_variation)
        .add("path_pass", s.path_pass)
        .add("simplicity", s.simplicity.simple ? "simple" : "not-simple")
        .add("n_starts", static_cast<std::uint64_t>(s.simplicity.n_runs))
        .add("n_converged", static_cast<std::uint64_t>(s.simplicity.n_converged))
        .add("lambda_min", s.simplicity.lambda_min)
        .add("lambda_spread", s.simplicity.lambda_spread)
        .add("max_misfit", s.simplicity.max_misfit)
        .add("max_sign_flip_fraction", s.simplicity.max_sign_flip_fraction)
        .add("min_value_ratio", s.simplicity.min_value_ratio)
        .add("nonnegative_pass", s.nonnegative_pass)
        .add("p", cfg.exponents.p)
        .add("q", cfg.exponents.q)
        .add("alpha", cfg.exponents.alpha)
        .add("beta", cfg.exponents.beta)
        .add("dim", cfg.dim)
        .add("n", static_cast<std::uint64_t>(cfg.n))
        .add("seed", cfg.solver.seed);
    return j.str();
}

/// Reference values for the configured grid and exponent p.
inline std::string oracle_json(const RunConfig& cfg) {
    const Grid grid = cfg.grid();
    const auto [lambda, vec] = oracle::linear_first_eig(grid);
    constexpr double pi = std::numbers::pi;
    JsonObject j;
    j.add("dim", cfg.dim)
        .add("n", static_cast<std::uint64_t>(cfg.n))
        .add("length", cfg.length)
        .add("linear_lambda1", lambda)
        .add("continuum_linear_lambda1",
             static_cast<double>(cfg.dim) * pi * pi / (cfg.length * cfg.length))
        .add("p", cfg.exponents.p)
        .add("pi_p", oracle::pi_p(cfg.exponents.p))
        .add("plap1d_lambda1", oracle::plap1d_lambda1(cfg.exponents.p, cfg.length));
    return j.str();
}

} // namespace pqeig::cli

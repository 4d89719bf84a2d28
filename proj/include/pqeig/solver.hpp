#pragma once

// Minimization of I(u, v) over {G(u, v) = 1} by projected gradient descent.
//
// I and G are separately homogeneous: I(su, tv) = s^p A + t^q B and
// G(su, tv) = s^alpha t^beta G(u, v). Minimizing over the two scales in closed
// form gives the balanced value
//
//   mu(u, v) = E_p(u)^{alpha/p} E_q(v)^{beta/q} / G(u, v),
//
// which is scale invariant and equals I on the constraint set. Every iterate is
// balanced, so lambda_k = mu(u_k, v_k), and the Euclidean gradient of the
// Lagrangian I - lambda_k G at a balanced point is exactly grad mu.

#include "pqeig/errors.hpp"
#include "pqeig/functional.hpp"
#include "pqeig/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace pqeig {

struct SolverConfig {
    double step_init = 1.0;
    double armijo_shrink = 0.5;
    double armijo_slope = 1e-4;
    double tol_lambda = 1e-10;
    double tol_kkt = 1e-6;
    std::size_t max_iters = 50000;
    double eps_grad = default_eps_grad;
    double eps_u = default_eps_u;
    std::uint64_t seed = 1;
    std::size_t n_starts = 4;
    bool positive_init = true;

    void validate() const {
        if (!(step_init > 0.0)) {
            throw ParameterError("step_init must be positive");
        }
        if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) {
            throw ParameterError("armijo_shrink must lie in (0, 1)");
        }
        if (!(armijo_slope > 0.0 && armijo_slope < 1.0)) {
            throw ParameterError("armijo_slope must lie in (0, 1)");
        }
        if (!(tol_lambda > 0.0) || !(tol_kkt > 0.0)) {
            throw ParameterError("tolerances must be positive");
        }
        if (max_iters < 1) {
            throw ParameterError("max_iters must be at least 1");
        }
        if (!(eps_grad >= 0.0) || !(eps_u >= 0.0)) {
            throw ParameterError("regularizations must be nonnegative");
        }
        if (n_starts < 1) {
            throw ParameterError("n_starts must be at least 1");
        }
    }
};

/// A pair on the constraint set together with its eigenvalue estimate.
struct EigenPair {
    ScalarField u;
    ScalarField v;
    double lambda = 0.0;
    Exponents exponents;
};

enum class Termination { lambda_stalled, kkt_met, max_iters };

inline std::string_view to_string(Termination t) noexcept {
    switch (t) {
    case Termination::lambda_stalled:
        return "lambda-stalled";
    case Termination::kkt_met:
        return "kkt-met";
    case Termination::max_iters:
        return "max-iters";
    }
    return "unknown";
}

struct SolverReport {
    std::size_t iterations = 0;
    std::vector<double> lambda_history;
    std::vector<std::pair<double, double>> kkt_history;
    bool converged = false;
    Termination termination = Termination::max_iters;
    std::size_t restarts = 0;
};

namespace detail {

struct Balance {
    double s = 1.0;
    double t = 1.0;
    double mu = 0.0;
};

/// Closed-form scale balancing; nullopt when G <= 0 or an energy vanishes.
inline std::optional<Balance> balance(const Grid& grid, std::span<const double> u,
                                      std::span<const double> v, const Exponents& e) {
    const double g0 = kernels::coupling(grid, u, v, e);
    const double ep = kernels::dirichlet_energy(grid, u, e.p);
    const double eq = kernels::dirichlet_energy(grid, v, e.q);
    if (!(g0 > 0.0) || !(ep > 0.0) || !(eq > 0.0) || !std::isfinite(g0) ||
        !std::isfinite(ep) || !std::isfinite(eq)) {
        return std::nullopt;
    }
    // A = (alpha/p) E_p, so alpha/(p A) = 1/E_p and likewise for B.
    const double log_mu = e.alpha / e.p * std::log(ep) + e.beta / e.q * std::log(eq) - std::log(g0);
    Balance b;
    b.mu = std::exp(log_mu);
    b.s = std::exp((log_mu - std::log(ep)) / e.p);
    b.t = std::exp((log_mu - std::log(eq)) / e.q);
    if (!std::isfinite(b.mu) || !std::isfinite(b.s) || !std::isfinite(b.t)) {
        return std::nullopt;
    }
    return b;
}

inline void scale_in_place(std::span<double> x, double s) noexcept {
    for (double& xi : x) {
        xi *= s;
    }
}

/// Divides by the largest magnitude; exact under power-of-two rescaling.
inline void canonicalize(std::span<double> x) noexcept {
    double m = 0.0;
    for (double xi : x) {
        m = std::max(m, std::abs(xi));
    }
    if (m > 0.0) {
        for (double& xi : x) {
            xi /= m;
        }
    }
}

} // namespace detail

/// Rescales (u, v) onto G = 1 with the scales minimizing I. Returns (s u, t v, mu)
/// with mu = I(s u, t v).
inline std::tuple<ScalarField, ScalarField, double> balance_project(const ScalarField& u,
                                                                    const ScalarField& v,
                                                                    const Exponents& e) {
    require_same_grid(u, v);
    const auto b = detail::balance(u.grid(), u.values(), v.values(), e);
    if (!b) {
        throw ProjectionInfeasible(
            "scale balancing needs positive coupling and nonzero energies");
    }
    return {u.scaled(b->s), v.scaled(b->t), b->mu};
}

namespace detail {

/// Projected gradient descent from a given (not necessarily balanced) start.
class Descent {
public:
    Descent(const Grid& grid, const Exponents& e, const SolverConfig& cfg)
        : grid_(grid), e_(e), cfg_(cfg), n_(grid.size()) {
        gu_.resize(n_);
        gv_.resize(n_);
        cu_.resize(n_);
        cv_.resize(n_);
        du_.resize(n_);
        dv_.resize(n_);
        tu_.resize(n_);
        tv_.resize(n_);
        su_.resize(n_);
        sv_.resize(n_);
    }

    /// Returns false if the start is not projectable.
    bool start(std::vector<double> u, std::vector<double> v) {
        canonicalize(u);
        canonicalize(v);
        const auto b = balance(grid_, u, v, e_);
        if (!b) {
            return false;
        }
        scale_in_place(u, b->s);
        scale_in_place(v, b->t);
        u_ = std::move(u);
        v_ = std::move(v);
        lambda_ = b->mu;
        return true;
    }

    void run(SolverReport& report) {
        report.lambda_history.push_back(lambda_);
        std::vector<double> prev_u;
        std::vector<double> prev_v;
        std::vector<double> prev_du;
        std::vector<double> prev_dv;
        double step = cfg_.step_init;
        double prev_lambda = std::numeric_limits<double>::infinity();
        std::size_t k = 0;
        for (;; ++k) {
            lagrangian_gradient();
            const double ku = norm2(du_) / e_.alpha;
            const double kv = norm2(dv_) / e_.beta;
            report.kkt_history.emplace_back(ku, kv);
            const bool kkt_ok = ku < cfg_.tol_kkt && kv < cfg_.tol_kkt;
            const double rel_change = std::abs(prev_lambda - lambda_) / lambda_;
            if (kkt_ok && rel_change < cfg_.tol_lambda) {
                finish(report, k, Termination::kkt_met, true);
                return;
            }
            if (k >= cfg_.max_iters) {
                finish(report, k, Termination::max_iters, false);
                return;
            }

            if (k > 0) {
                step = bb_step(prev_u, prev_v, prev_du, prev_dv, step);
            }
            prev_u = u_;
            prev_v = v_;
            prev_du = du_;
            prev_dv = dv_;

            const auto accepted = line_search(step);
            if (!accepted) {
                finish(report, k, Termination::lambda_stalled, kkt_ok);
                return;
            }
            step = accepted->first;
            prev_lambda = lambda_;
            lambda_ = accepted->second;
            report.lambda_history.push_back(lambda_);
        }
    }

    EigenPair pair() const {
        return EigenPair{ScalarField(grid_, u_), ScalarField(grid_, v_), lambda_, e_};
    }

private:
    /// (du, dv) = grad of I - lambda G at the current balanced point.
    void lagrangian_gradient() {
        kernels::grad_energy(grid_, u_, e_.p, cfg_.eps_grad, gu_);
        kernels::grad_energy(grid_, v_, e_.q, cfg_.eps_grad, gv_);
        kernels::grad_coupling(grid_, u_, v_, e_, cfg_.eps_u, cu_, cv_);
        const double wu = e_.alpha / e_.p;
        const double wv = e_.beta / e_.q;
        for (std::size_t i = 0; i < n_; ++i) {
            du_[i] = wu * gu_[i] - lambda_ * cu_[i];
            dv_[i] = wv * gv_[i] - lambda_ * cv_[i];
        }
    }

    /// Adaptive Barzilai-Borwein trial length: the short (s.y / y.y) step when it
    /// is less than half the long (s.s / s.y) one, else the long step. Clamped
    /// to three decades around the previous accepted step.
    double bb_step(const std::vector<double>& pu, const std::vector<double>& pv,
                   const std::vector<double>& pdu, const std::vector<double>& pdv,
                   double last) const {
        double ss = 0.0;
        double sy = 0.0;
        double yy = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double su = u_[i] - pu[i];
            const double sv = v_[i] - pv[i];
            const double yu = du_[i] - pdu[i];
            const double yv = dv_[i] - pdv[i];
            ss += su * su + sv * sv;
            sy += su * yu + sv * yv;
            yy += yu * yu + yv * yv;
        }
        if (!(sy > 0.0) || !(ss > 0.0)) {
            return 2.0 * last;
        }
        const double long_step = ss / sy;
        const double short_step = sy / yy;
        const double trial = short_step < 0.5 * long_step ? short_step : long_step;
        return std::clamp(trial, 1e-3 * last, 1e3 * last);
    }

    /// Backtracking along -d. The change of log mu is assembled from accurate
    /// per-term increments, so decreases far below the roundoff of mu itself
    /// are still resolved. Returns (step, mu) of the accepted trial, already
    /// projected into (u_, v_).
    std::optional<std::pair<double, double>> line_search(double step) {
        double dd = 0.0;
        double xx = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            dd += du_[i] * du_[i] + dv_[i] * dv_[i];
            xx += u_[i] * u_[i] + v_[i] * v_[i];
        }
        const double dnorm = std::sqrt(dd);
        const double xnorm = std::sqrt(xx);
        const double ep = kernels::dirichlet_energy(grid_, u_, e_.p);
        const double eq = kernels::dirichlet_energy(grid_, v_, e_.q);
        const double g0 = kernels::coupling(grid_, u_, v_, e_);
        while (step * dnorm > 1e-17 * xnorm) {
            for (std::size_t i = 0; i < n_; ++i) {
                tu_[i] = u_[i] - step * du_[i];
                tv_[i] = v_[i] - step * dv_[i];
                // Realized increments of the rounded trial point.
                su_[i] = tu_[i] - u_[i];
                sv_[i] = tv_[i] - v_[i];
            }
            const double dep = kernels::dirichlet_energy_delta(grid_, u_, su_, e_.p);
            const double deq = kernels::dirichlet_energy_delta(grid_, v_, sv_, e_.q);
            const double dg = kernels::coupling_delta(grid_, u_, v_, su_, sv_, e_);
            if (ep + dep > 0.0 && eq + deq > 0.0 && g0 + dg > 0.0) {
                const double dlog = e_.alpha / e_.p * std::log1p(dep / ep) +
                                    e_.beta / e_.q * std::log1p(deq / eq) - std::log1p(dg / g0);
                const double dmu = lambda_ * std::expm1(dlog);
                if (dmu < 0.0 && dmu <= -cfg_.armijo_slope * step * dd) {
                    const auto b = balance(grid_, tu_, tv_, e_);
                    if (b) {
                        std::swap(u_, tu_);
                        std::swap(v_, tv_);
                        scale_in_place(u_, b->s);
                        scale_in_place(v_, b->t);
                        return std::pair{step, std::min(b->mu, lambda_)};
                    }
                }
            }
            step *= cfg_.armijo_shrink;
        }
        return std::nullopt;
    }

    void finish(SolverReport& report, std::size_t k, Termination t, bool converged) const {
        report.iterations = k;
        report.termination = t;
        report.converged = converged;
    }

    Grid grid_;
    Exponents e_;
    SolverConfig cfg_;
    std::size_t n_;
    double lambda_ = 0.0;
    std::vector<double> u_, v_;
    std::vector<double> gu_, gv_, cu_, cv_, du_, dv_, tu_, tv_, su_, sv_;
};

inline constexpr std::size_t max_reseeds = 16;

} // namespace detail

/// Runs the descent from the pair (u0, v0).
inline std::pair<EigenPair, SolverReport> solve_from(const ScalarField& u0, const ScalarField& v0,
                                                     const Exponents& e,
                                                     const SolverConfig& cfg) {
    require_same_grid(u0, v0);
    cfg.validate();
    detail::Descent descent(u0.grid(), e, cfg);
    if (!descent.start({u0.values().begin(), u0.values().end()},
                       {v0.values().begin(), v0.values().end()})) {
        throw ProjectionInfeasible("initial pair cannot be balanced onto the constraint set");
    }
    SolverReport report;
    descent.run(report);
    return {descent.pair(), std::move(report)};
}

/// Random start for `solve`: attempt r draws u from stream counter_word(seed, 2r)
/// and v from stream counter_word(seed, 2r + 1).
inline std::pair<ScalarField, ScalarField> initial_pair(const Grid& grid, std::uint64_t seed,
                                                        std::uint64_t attempt, bool positive) {
    return {random_field(grid, detail::counter_word(seed, 2 * attempt), positive),
            random_field(grid, detail::counter_word(seed, 2 * attempt + 1), positive)};
}

/// Approximates lambda_1 = inf { I(u, v) : G(u, v) = 1 } from a seeded random start.
inline std::pair<EigenPair, SolverReport> solve(const Grid& grid, const Exponents& e,
                                                const SolverConfig& cfg) {
    cfg.validate();
    detail::Descent descent(grid, e, cfg);
    std::size_t attempt = 0;
    for (;; ++attempt) {
        if (attempt == detail::max_reseeds) {
            throw SolverFailed("no projectable random start after " +
                               std::to_string(detail::max_reseeds) + " attempts");
        }
        auto [u0, v0] = initial_pair(grid, cfg.seed, attempt, cfg.positive_init);
        if (descent.start({u0.values().begin(), u0.values().end()},
                          {v0.values().begin(), v0.values().end()})) {
            break;
        }
    }
    SolverReport report;
    report.restarts = attempt;
    descent.run(report);
    return {descent.pair(), std::move(report)};
}

struct Alignment {
    double k1 = 0.0;
    double k2 = 0.0;
    double misfit = 0.0;
};

/// Least-squares factors with a.u ~ k1 b.u and a.v ~ k2 b.v, plus the larger
/// relative misfit of the two fits.
inline Alignment align(const EigenPair& a, const EigenPair& b) {
    require_same_grid(a.u, b.u);
    require_same_grid(a.v, b.v);
    const double bu = dot(b.u.values(), b.u.values());
    const double bv = dot(b.v.values(), b.v.values());
    if (!(bu > 0.0) || !(bv > 0.0)) {
        throw DegenerateAlignment("cannot align against a zero field");
    }
    Alignment out;
    out.k1 = dot(a.u.values(), b.u.values()) / bu;
    out.k2 = dot(a.v.values(), b.v.values()) / bv;
    auto rel = [](std::span<const double> x, std::span<const double> y, double k) {
        double r = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - k * y[i];
            r += d * d;
        }
        const double nx = norm2(x);
        return nx > 0.0 ? std::sqrt(r) / nx : std::sqrt(r);
    };
    out.misfit = std::max(rel(a.u.values(), b.u.values(), out.k1),
                          rel(a.v.values(), b.v.values(), out.k2));
    return out;
}

/// Flips a field so that its nodal mean is positive.
inline ScalarField positive_mean(const ScalarField& f) {
    double sum = 0.0;
    for (double x : f.values()) {
        sum += x;
    }
    return sum < 0.0 ? f.scaled(-1.0) : f;
}

struct StartResult {
    std::uint64_t seed = 0;
    EigenPair pair;
    SolverReport report;
};

struct SimplicityVerdict {
    bool simple = false;
    std::size_t n_runs = 0;
    std::size_t n_converged = 0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double lambda_spread = 0.0;
    double max_misfit = 0.0;
    /// Largest fraction of nodes whose sign differs from the field's majority sign.
    double max_sign_flip_fraction = 0.0;
    /// Smallest min/max nodal ratio over all normalized fields.
    double min_value_ratio = 1.0;
    std::vector<StartResult> runs;
};

inline constexpr double simplicity_spread_tol = 1e-6;
inline constexpr double simplicity_misfit_tol = 1e-3;

/// Solves from seeds cfg.seed, cfg.seed + 1, ... and compares the converged runs.
inline SimplicityVerdict multi_start(const Grid& grid, const Exponents& e,
                                     const SolverConfig& cfg) {
    cfg.validate();
    SimplicityVerdict verdict;
    verdict.n_runs = cfg.n_starts;
    std::vector<EigenPair> normalized;
    for (std::size_t k = 0; k < cfg.n_starts; ++k) {
        SolverConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + k;
        auto [pair, report] = solve(grid, e, run_cfg);
        if (report.converged) {
            EigenPair np{positive_mean(pair.u), positive_mean(pair.v), pair.lambda, e};
            normalized.push_back(std::move(np));
        }
        verdict.runs.push_back(StartResult{run_cfg.seed, std::move(pair), std::move(report)});
    }
    verdict.n_converged = normalized.size();
    if (normalized.empty()) {
        throw SolverFailed("all " + std::to_string(cfg.n_starts) + " starts failed to converge");
    }

    verdict.lambda_min = std::numeric_limits<double>::infinity();
    verdict.lambda_max = -std::numeric_limits<double>::infinity();
    for (const auto& p : normalized) {
        verdict.lambda_min = std::min(verdict.lambda_min, p.lambda);
        verdict.lambda_max = std::max(verdict.lambda_max, p.lambda);
        for (const ScalarField* f : {&p.u, &p.v}) {
            std::size_t neg = 0;
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (double x : f->values()) {
                neg += x < 0.0 ? 1 : 0;
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            const std::size_t minority = std::min(neg, f->size() - neg);
            verdict.max_sign_flip_fraction =
                std::max(verdict.max_sign_flip_fraction,
                         static_cast<double>(minority) / static_cast<double>(f->size()));
            if (hi > 0.0) {
                verdict.min_value_ratio = std::min(verdict.min_value_ratio, lo / hi);
            }
        }
    }
    verdict.lambda_spread = (verdict.lambda_max - verdict.lambda_min) / verdict.lambda_min;
    for (std::size_t i = 0; i < normalized.size(); ++i) {
        for (std::size_t j = i + 1; j < normalized.size(); ++j) {
            verdict.max_misfit =
                std::max(verdict.max_misfit, align(normalized[i], normalized[j]).misfit);
        }
    }
    verdict.simple = verdict.lambda_spread < simplicity_spread_tol &&
                     verdict.max_misfit < simplicity_misfit_tol;
    return verdict;
}

} // namespace pqeig

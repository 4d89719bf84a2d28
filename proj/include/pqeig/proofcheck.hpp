#pragma once

// Numerical checks of the inequalities behind simplicity of the first
// eigenvalue. Given two nonnegative pairs (u, v) and (phi, psi), the midpoint
// pair
//
//   w1 = ((u^p + phi^p) / 2)^{1/p},   w2 = ((v^q + psi^q) / 2)^{1/q}
//
// is admissible, its energy is at most the average of the two energies
// (Jensen on log-gradients), and w1^alpha w2^beta dominates the averaged
// products pointwise. Equality throughout forces proportional pairs.

#include "pqeig/errors.hpp"
#include "pqeig/functional.hpp"
#include "pqeig/mesh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pqeig::proofcheck {

namespace detail {

inline void require_nonnegative(const ScalarField& f, const char* name) {
    for (double x : f.values()) {
        if (x < 0.0) {
            throw DomainError(std::string(name) + " has a negative node");
        }
    }
}

inline double power_mean(double a, double b, double p) noexcept {
    return std::pow(0.5 * (std::pow(a, p) + std::pow(b, p)), 1.0 / p);
}

} // namespace detail

/// Nodewise power means (w1, w2) of (u, phi) and (v, psi).
inline std::pair<ScalarField, ScalarField> midpoint_pair(const ScalarField& u,
                                                         const ScalarField& phi, double p,
                                                         const ScalarField& v,
                                                         const ScalarField& psi, double q) {
    if (!(p > 1.0) || !(q > 1.0)) {
        throw ParameterError("midpoint exponents must exceed 1");
    }
    require_same_grid(u, phi);
    require_same_grid(u, v);
    require_same_grid(u, psi);
    detail::require_nonnegative(u, "u");
    detail::require_nonnegative(phi, "phi");
    detail::require_nonnegative(v, "v");
    detail::require_nonnegative(psi, "psi");
    std::vector<double> w1(u.size());
    std::vector<double> w2(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        w1[i] = detail::power_mean(u[i], phi[i], p);
        w2[i] = detail::power_mean(v[i], psi[i], q);
    }
    return {ScalarField(u.grid(), std::move(w1)), ScalarField(u.grid(), std::move(w2))};
}

/// Weighted-average gap of theta(x) = |x|^p on two atoms:
/// sum a_k |x_k|^p / sum a_k - |sum a_k x_k / sum a_k|^p  (>= 0 up to roundoff).
inline double jensen_gap(double a1, double a2, std::span<const double> x1,
                         std::span<const double> x2, double p) {
    if (!(a1 >= 0.0) || !(a2 >= 0.0) || !(a1 + a2 > 0.0)) {
        throw ParameterError("Jensen weights must be nonnegative with positive sum");
    }
    if (x1.size() != x2.size()) {
        throw ShapeError("Jensen atoms must have the same dimension");
    }
    if (!(p >= 1.0)) {
        throw ParameterError("Jensen exponent must be at least 1");
    }
    const double total = a1 + a2;
    const double w1 = a1 / total;
    const double w2 = a2 / total;
    double n1 = 0.0;
    double n2 = 0.0;
    double nm = 0.0;
    for (std::size_t k = 0; k < x1.size(); ++k) {
        const double m = w1 * x1[k] + w2 * x2[k];
        n1 += x1[k] * x1[k];
        n2 += x2[k] * x2[k];
        nm += m * m;
    }
    return w1 * std::pow(n1, 0.5 * p) + w2 * std::pow(n2, 0.5 * p) - std::pow(nm, 0.5 * p);
}

/// max over nodes of ((u^a + phi^a)/2)((v^b + psi^b)/2) - w1^a w2^b; <= 0 up to roundoff.
inline double concavity_violation(const ScalarField& u, const ScalarField& v,
                                  const ScalarField& phi, const ScalarField& psi,
                                  const Exponents& e) {
    require_same_grid(u, v);
    require_same_grid(u, phi);
    require_same_grid(u, psi);
    detail::require_nonnegative(u, "u");
    detail::require_nonnegative(v, "v");
    detail::require_nonnegative(phi, "phi");
    detail::require_nonnegative(psi, "psi");
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double lhs = std::pow(0.5 * (std::pow(u[i], e.p) + std::pow(phi[i], e.p)),
                                    e.alpha / e.p) *
                           std::pow(0.5 * (std::pow(v[i], e.q) + std::pow(psi[i], e.q)),
                                    e.beta / e.q);
        const double rhs = 0.5 * (std::pow(u[i], e.alpha) + std::pow(phi[i], e.alpha)) * 0.5 *
                           (std::pow(v[i], e.beta) + std::pow(psi[i], e.beta));
        worst = std::max(worst, rhs - lhs);
    }
    return worst;
}

struct PathReport {
    /// (I(u, v) + I(phi, psi)) / 2 - I(w1, w2).
    double delta = 0.0;
    /// G(w1, w2) - 1.
    double surplus = 0.0;
    double energy_first = 0.0;
    double energy_second = 0.0;
    double energy_midpoint = 0.0;
};

inline constexpr double on_constraint_tol = 1e-6;

/// Energy comparison along the midpoint pair of two nonnegative pairs on G = 1.
inline PathReport path_energy_check(const ScalarField& u, const ScalarField& v,
                                    const ScalarField& phi, const ScalarField& psi,
                                    const Exponents& e) {
    const double g1 = coupling(u, v, e);
    const double g2 = coupling(phi, psi, e);
    if (std::abs(g1 - 1.0) > on_constraint_tol || std::abs(g2 - 1.0) > on_constraint_tol) {
        throw PreconditionError("both pairs must lie on the constraint set G = 1");
    }
    const auto [w1, w2] = midpoint_pair(u, phi, e.p, v, psi, e.q);
    PathReport r;
    r.energy_first = energy_total(u, v, e);
    r.energy_second = energy_total(phi, psi, e);
    r.energy_midpoint = energy_total(w1, w2, e);
    r.delta = 0.5 * (r.energy_first + r.energy_second) - r.energy_midpoint;
    r.surplus = coupling(w1, w2, e) - 1.0;
    return r;
}

struct FourNormalization {
    /// Multipliers for (u, v, phi, psi).
    std::array<double, 4> scales{};
    /// |log A11 + log A22 - log A12 - log A21|; zero iff all four
    /// cross-integrals can be made 1 simultaneously.
    double defect = 0.0;
    /// Cross-integrals (A11, A12, A21, A22) before scaling.
    std::array<double, 4> integrals{};
    /// Residuals of the four log equations at the returned scales.
    std::array<double, 4> residuals{};
};

/// Minimal-norm least-squares scales making
/// int u^a v^b = int u^a psi^b = int phi^a v^b = int phi^a psi^b = 1.
///
/// In logs x = (log s_u, log s_v, log s_phi, log s_psi) the system reads
///   a x1 + b x2 = -log A11,  a x1 + b x4 = -log A12,
///   a x3 + b x2 = -log A21,  a x3 + b x4 = -log A22,
/// whose rows satisfy r1 - r2 - r3 + r4 = 0 and whose kernel is spanned by
/// (b, -a, b, -a).
inline FourNormalization four_normalization(const ScalarField& u, const ScalarField& v,
                                            const ScalarField& phi, const ScalarField& psi,
                                            const Exponents& e) {
    const double a = e.alpha;
    const double b = e.beta;
    FourNormalization out;
    out.integrals = {coupling(u, v, e), coupling(u, psi, e), coupling(phi, v, e),
                     coupling(phi, psi, e)};
    for (double x : out.integrals) {
        if (!(x > 0.0)) {
            throw DomainError("cross-integrals must be strictly positive");
        }
    }
    std::array<double, 4> rhs{};
    for (std::size_t k = 0; k < 4; ++k) {
        rhs[k] = -std::log(out.integrals[k]);
    }
    const std::array<double, 4> left_null{1.0, -1.0, -1.0, 1.0};
    double inconsistency = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        inconsistency += left_null[k] * rhs[k];
    }
    out.defect = std::abs(inconsistency);

    std::array<double, 4> consistent{};
    for (std::size_t k = 0; k < 4; ++k) {
        consistent[k] = rhs[k] - 0.25 * inconsistency * left_null[k];
    }
    // Particular solution with x1 = 0, then remove the kernel component.
    std::array<double, 4> x{0.0, consistent[0] / b, 0.0, consistent[1] / b};
    x[2] = (consistent[2] - b * x[1]) / a;
    const std::array<double, 4> kernel{b, -a, b, -a};
    double xz = 0.0;
    double zz = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
        xz += x[k] * kernel[k];
        zz += kernel[k] * kernel[k];
    }
    for (std::size_t k = 0; k < 4; ++k) {
        x[k] -= xz / zz * kernel[k];
        out.scales[k] = std::exp(x[k]);
    }
    out.residuals = {rhs[0] - (a * x[0] + b * x[1]), rhs[1] - (a * x[0] + b * x[3]),
                     rhs[2] - (a * x[2] + b * x[1]), rhs[3] - (a * x[2] + b * x[3])};
    return out;
}

namespace detail {

/// Uniform draw in [0, 1) from the counter stream (seed, index).
inline double uniform(std::uint64_t seed, std::uint64_t index) noexcept {
    return static_cast<double>(pqeig::detail::counter_word(seed, index) >> 11) *
           (1.0 / 9007199254740992.0);
}

} // namespace detail

inline constexpr std::array<double, 4> jensen_exponents{1.5, 2.0, 3.0, 4.7};

struct JensenSweep {
    std::size_t trials = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    /// min of gap / max(|x1|^p, |x2|^p).
    double min_scaled_gap = std::numeric_limits<double>::infinity();
};

/// Randomized Jensen gaps: weights in (0, 1), atoms in [-1, 1]^3, p cycling
/// through jensen_exponents. Trial k draws from counter words 8k .. 8k+7.
inline JensenSweep jensen_sweep(std::size_t trials, std::uint64_t seed) {
    JensenSweep out;
    out.trials = trials;
    std::array<double, 3> x1{};
    std::array<double, 3> x2{};
    for (std::size_t k = 0; k < trials; ++k) {
        const std::uint64_t base = 8 * static_cast<std::uint64_t>(k);
        const double a1 = 1.0 - detail::uniform(seed, base);
        const double a2 = 1.0 - detail::uniform(seed, base + 1);
        for (std::size_t c = 0; c < 3; ++c) {
            x1[c] = 2.0 * detail::uniform(seed, base + 2 + c) - 1.0;
            x2[c] = 2.0 * detail::uniform(seed, base + 5 + c) - 1.0;
        }
        const double p = jensen_exponents[k % jensen_exponents.size()];
        const double gap = jensen_gap(a1, a2, x1, x2, p);
        const double scale = std::max(std::pow(x1[0] * x1[0] + x1[1] * x1[1] + x1[2] * x1[2], 0.5 * p),
                                      std::pow(x2[0] * x2[0] + x2[1] * x2[1] + x2[2] * x2[2], 0.5 * p));
        out.min_gap = std::min(out.min_gap, gap);
        if (scale > 0.0) {
            out.min_scaled_gap = std::min(out.min_scaled_gap, gap / scale);
        }
    }
    return out;
}

/// Largest concavity violation over `trials` random quadruples with values in (0, 1],
/// evaluated as four fields on a 1D grid with one quadruple per node.
inline double concavity_sweep(std::size_t trials, std::uint64_t seed, const Exponents& e) {
    const Grid grid = make_grid(1, std::max<std::size_t>(trials, 2), 1.0);
    const std::uint64_t s0 = pqeig::detail::counter_word(seed, 0);
    return concavity_violation(random_field(grid, s0, true), random_field(grid, s0 + 1, true),
                               random_field(grid, s0 + 2, true), random_field(grid, s0 + 3, true),
                               e);
}

inline constexpr std::array<std::size_t, 3> path_resolutions{50, 100, 200};

struct PathSuite {
    /// Delta for a proportional pair (phi, psi) = (k1 u, k2 v), both on G = 1.
    double proportional_delta = 0.0;
    /// Delta of two non-proportional smooth positive pairs at each resolution.
    std::array<double, 3> distinct_delta{};
    /// (max - min) / max over the three resolutions.
    double distinct_variation = 0.0;
};

inline constexpr double path_proportional_tol = 1e-10;
inline constexpr double path_variation_tol = 0.05;

namespace detail {

/// Scales a positive pair onto G = 1 by a common factor.
inline std::pair<ScalarField, ScalarField> onto_constraint(const ScalarField& u,
                                                           const ScalarField& v,
                                                           const Exponents& e) {
    const double g = coupling(u, v, e);
    const double s = std::pow(g, -1.0 / (e.alpha + e.beta));
    return {u.scaled(s), v.scaled(s)};
}

} // namespace detail

/// Midpoint-energy checks on fixed smooth pairs in 1D (L = 1).
inline PathSuite path_suite(const Exponents& e) {
    constexpr double pi = std::numbers::pi;
    PathSuite out;
    {
        const Grid grid = make_grid(1, 100, 1.0);
        const auto [u, v] = detail::onto_constraint(
            field_from_fn(grid, [](double x) { return std::sin(pi * x); }),
            field_from_fn(grid, [](double x) { return x * (1.0 - x); }), e);
        // k1^alpha k2^beta = 1 keeps (k1 u, k2 v) on the constraint set.
        const double k1 = 1.7;
        const double k2 = std::pow(k1, -e.alpha / e.beta);
        out.proportional_delta = path_energy_check(u, v, u.scaled(k1), v.scaled(k2), e).delta;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < path_resolutions.size(); ++r) {
        const Grid grid = make_grid(1, path_resolutions[r], 1.0);
        const auto [u, v] = detail::onto_constraint(
            field_from_fn(grid, [](double x) { return std::sin(pi * x); }),
            field_from_fn(grid, [](double x) { return x * (1.0 - x); }), e);
        const auto [phi, psi] = detail::onto_constraint(
            field_from_fn(grid, [](double x) { return x * (1.0 - x) * (1.0 + 2.0 * x); }),
            field_from_fn(grid, [](double x) { return std::sin(pi * x) * (2.0 - x); }), e);
        const double d = path_energy_check(u, v, phi, psi, e).delta;
        out.distinct_delta[r] = d;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    out.distinct_variation = (hi - lo) / hi;
    return out;
}

} // namespace pqeig::proofcheck

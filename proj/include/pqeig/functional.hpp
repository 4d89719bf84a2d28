#pragma once

// Discrete energies of the coupled (p,q)-Laplacian eigenproblem
//
//   -div(|grad u|^{p-2} grad u) = lambda |u|^{alpha-1} |v|^{beta-1} v
//   -div(|grad v|^{q-2} grad v) = lambda |u|^{alpha-1} |v|^{beta-1} u
//
// with zero Dirichlet data, and their exact gradients with respect to nodal
// values. Gradients of cells use forward differences, with the zero boundary
// values acting as ghosts, so for p = 2 the Dirichlet energy is exactly the
// quadratic form of the 3-point / 5-point stiffness matrix (scaled by h^d).

#include "pqeig/errors.hpp"
#include "pqeig/mesh.hpp"

#include <cmath>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

namespace pqeig {

inline constexpr double default_eps_grad = 1e-10;
inline constexpr double default_eps_u = 1e-12;
inline constexpr double admissibility_tol = 1e-12;

/// Exponent quadruple (p, q, alpha, beta) with alpha/p + beta/q = 1.
struct Exponents {
    double p = 2.0;
    double q = 2.0;
    double alpha = 1.0;
    double beta = 1.0;

    /// alpha/p + beta/q - 1.
    double admissibility_defect() const noexcept { return alpha / p + beta / q - 1.0; }
};

/// Validates and returns the quadruple.
inline Exponents make_exponents(double p, double q, double alpha, double beta) {
    if (!(p > 1.0) || !(q > 1.0)) {
        throw ParameterError("exponents p and q must exceed 1");
    }
    if (!(alpha > 0.0) || !(beta > 0.0)) {
        throw ParameterError("exponents alpha and beta must be positive");
    }
    Exponents e{p, q, alpha, beta};
    if (!(std::abs(e.admissibility_defect()) <= admissibility_tol)) {
        std::ostringstream msg;
        msg << "alpha/p + beta/q = " << alpha / p + beta / q << " != 1";
        throw ParameterError(msg.str());
    }
    return e;
}

/// Chart of the admissible set: alpha = theta p, beta = (1 - theta) q.
inline Exponents exponents_from_theta(double p, double q, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) {
        throw ParameterError("theta must lie in (0, 1)");
    }
    return make_exponents(p, q, theta * p, (1.0 - theta) * q);
}

namespace kernels {

/// |x|^p with an exact fast path for the quadratic case.
inline double pow_abs(double x, double p) noexcept {
    if (p == 2.0) {
        return x * x;
    }
    if (p == 1.0) {
        return std::abs(x);
    }
    return std::pow(std::abs(x), p);
}

/// Dirichlet value lookup with zero ghosts; (i, j) are padded indices in [0, n+1].
struct Padded2D {
    std::span<const double> u;
    std::size_t n;
    double operator()(std::size_t i, std::size_t j) const noexcept {
        if (i == 0 || j == 0 || i == n + 1 || j == n + 1) {
            return 0.0;
        }
        return u[(j - 1) * n + (i - 1)];
    }
};

inline double dirichlet_energy(const Grid& grid, std::span<const double> u, double p) noexcept {
    const std::size_t n = grid.n();
    const double inv_h = 1.0 / grid.h();
    double sum = 0.0;
    if (grid.dim() == 1) {
        for (std::size_t c = 0; c <= n; ++c) {
            const double left = c == 0 ? 0.0 : u[c - 1];
            const double right = c == n ? 0.0 : u[c];
            sum += pow_abs((right - left) * inv_h, p);
        }
    } else {
        const Padded2D at{u, n};
        for (std::size_t j = 0; j <= n; ++j) {
            for (std::size_t i = 0; i <= n; ++i) {
                const double c = at(i, j);
                const double dx = (at(i + 1, j) - c) * inv_h;
                const double dy = (at(i, j + 1) - c) * inv_h;
                const double sq = dx * dx + dy * dy;
                sum += p == 2.0 ? sq : std::pow(sq, 0.5 * p);
            }
        }
    }
    return sum * grid.cell_volume();
}

/// Flux weight p (|D|^2 + eps^2)^{(p-2)/2}; zero gradients contribute nothing.
inline double flux_weight(double sq, double p, double eps) noexcept {
    if (p == 2.0) {
        return 2.0;
    }
    const double reg = sq + eps * eps;
    if (reg == 0.0) {
        return 0.0;
    }
    return p * std::pow(reg, 0.5 * (p - 2.0));
}

/// Writes d/du_i of the (flux-regularized) Dirichlet energy into `out`.
inline void grad_energy(const Grid& grid, std::span<const double> u, double p, double eps,
                        std::span<double> out) noexcept {
    const std::size_t n = grid.n();
    const double inv_h = 1.0 / grid.h();
    const double vol = grid.cell_volume();
    for (double& g : out) {
        g = 0.0;
    }
    if (grid.dim() == 1) {
        for (std::size_t c = 0; c <= n; ++c) {
            const double left = c == 0 ? 0.0 : u[c - 1];
            const double right = c == n ? 0.0 : u[c];
            const double d = (right - left) * inv_h;
            const double w = flux_weight(d * d, p, eps) * d * inv_h * vol;
            if (c < n) {
                out[c] += w;
            }
            if (c > 0) {
                out[c - 1] -= w;
            }
        }
        return;
    }
    const Padded2D at{u, n};
    auto add = [&](std::size_t i, std::size_t j, double value) {
        if (i == 0 || j == 0 || i == n + 1 || j == n + 1) {
            return;
        }
        out[(j - 1) * n + (i - 1)] += value;
    };
    for (std::size_t j = 0; j <= n; ++j) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double c = at(i, j);
            const double dx = (at(i + 1, j) - c) * inv_h;
            const double dy = (at(i, j + 1) - c) * inv_h;
            const double w = flux_weight(dx * dx + dy * dy, p, eps) * inv_h * vol;
            add(i + 1, j, w * dx);
            add(i, j + 1, w * dy);
            add(i, j, -w * (dx + dy));
        }
    }
}

/// sign(u v) |u|^alpha |v|^beta, the coupling integrand at one node.
inline double coupling_term(double u, double v, double alpha, double beta) noexcept {
    const double mag = pow_abs(u, alpha) * pow_abs(v, beta);
    return (u < 0.0) != (v < 0.0) ? -mag : mag;
}

inline double coupling(const Grid& grid, std::span<const double> u, std::span<const double> v,
                       const Exponents& e) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        sum += coupling_term(u[i], v[i], e.alpha, e.beta);
    }
    return sum * grid.cell_volume();
}

/// |x|^{a-1}, regularized as (x^2 + eps^2)^{(a-1)/2} when a < 1.
inline double pow_abs_m1(double x, double a, double eps) noexcept {
    if (a == 1.0) {
        return 1.0;
    }
    if (a < 1.0) {
        return std::pow(x * x + eps * eps, 0.5 * (a - 1.0));
    }
    return a == 2.0 ? std::abs(x) : std::pow(std::abs(x), a - 1.0);
}

/// Writes (dG/du, dG/dv) into (gu, gv).
inline void grad_coupling(const Grid& grid, std::span<const double> u, std::span<const double> v,
                          const Exponents& e, double eps, std::span<double> gu,
                          std::span<double> gv) noexcept {
    const double vol = grid.cell_volume();
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double ru = pow_abs_m1(u[i], e.alpha, eps);
        const double rv = pow_abs_m1(v[i], e.beta, eps);
        gu[i] = e.alpha * ru * rv * v[i] * vol;
        gv[i] = e.beta * ru * rv * u[i] * vol;
    }
}

/// |a + d|^p - |a|^p without cancellation when d is small relative to a.
inline double pow_abs_delta(double a, double d, double p) noexcept {
    const double sq = a * a;
    const double dsq = d * (2.0 * a + d);
    if (p == 2.0) {
        return dsq;
    }
    if (sq == 0.0) {
        return pow_abs(d, p);
    }
    return std::pow(sq, 0.5 * p) * std::expm1(0.5 * p * std::log1p(dsq / sq));
}

/// E_p(u + du) - E_p(u), accurate for small perturbations.
inline double dirichlet_energy_delta(const Grid& grid, std::span<const double> u,
                                     std::span<const double> du, double p) noexcept {
    const std::size_t n = grid.n();
    const double inv_h = 1.0 / grid.h();
    double sum = 0.0;
    if (grid.dim() == 1) {
        for (std::size_t c = 0; c <= n; ++c) {
            const double d0 = ((c == n ? 0.0 : u[c]) - (c == 0 ? 0.0 : u[c - 1])) * inv_h;
            const double dd = ((c == n ? 0.0 : du[c]) - (c == 0 ? 0.0 : du[c - 1])) * inv_h;
            sum += pow_abs_delta(d0, dd, p);
        }
        return sum * grid.cell_volume();
    }
    const Padded2D at{u, n};
    const Padded2D dat{du, n};
    for (std::size_t j = 0; j <= n; ++j) {
        for (std::size_t i = 0; i <= n; ++i) {
            const double c = at(i, j);
            const double dc = dat(i, j);
            const double dx = (at(i + 1, j) - c) * inv_h;
            const double dy = (at(i, j + 1) - c) * inv_h;
            const double ddx = (dat(i + 1, j) - dc) * inv_h;
            const double ddy = (dat(i, j + 1) - dc) * inv_h;
            const double sq = dx * dx + dy * dy;
            const double dsq = ddx * (2.0 * dx + ddx) + ddy * (2.0 * dy + ddy);
            if (p == 2.0) {
                sum += dsq;
            } else if (sq == 0.0) {
                sum += std::pow(dsq, 0.5 * p);
            } else {
                sum += std::pow(sq, 0.5 * p) * std::expm1(0.5 * p * std::log1p(dsq / sq));
            }
        }
    }
    return sum * grid.cell_volume();
}

/// sign(x)|x|^a and its increment sign(x+d)|x+d|^a - sign(x)|x|^a.
inline double signed_pow(double x, double a) noexcept {
    const double m = pow_abs(x, a);
    return x < 0.0 ? -m : m;
}

inline double signed_pow_delta(double x, double d, double a) noexcept {
    if (a == 1.0) {
        return d;
    }
    if (x != 0.0) {
        const double r = d / x;
        if (r > -1.0) {
            return signed_pow(x, a) * std::expm1(a * std::log1p(r));
        }
    }
    return signed_pow(x + d, a) - signed_pow(x, a);
}

/// G(u + du, v + dv) - G(u, v), accurate for small perturbations.
inline double coupling_delta(const Grid& grid, std::span<const double> u,
                             std::span<const double> v, std::span<const double> du,
                             std::span<const double> dv, const Exponents& e) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = signed_pow(u[i], e.alpha);
        const double b = signed_pow(v[i], e.beta);
        const double da = signed_pow_delta(u[i], du[i], e.alpha);
        const double db = signed_pow_delta(v[i], dv[i], e.beta);
        sum += da * b + a * db + da * db;
    }
    return sum * grid.cell_volume();
}

} // namespace kernels

inline void require_p(double p) {
    if (!(p > 1.0)) {
        throw ParameterError("energy exponent must exceed 1");
    }
}

/// Sum over cells of |grad_h u|^p h^d, forward differences with zero ghosts.
inline double dirichlet_energy(const ScalarField& u, double p) {
    require_p(p);
    return kernels::dirichlet_energy(u.grid(), u.values(), p);
}

/// Node quadrature of |u|^{alpha-1} |v|^{beta-1} u v with weight h^d.
inline double coupling(const ScalarField& u, const ScalarField& v, const Exponents& e) {
    require_same_grid(u, v);
    return kernels::coupling(u.grid(), u.values(), v.values(), e);
}

/// I(u, v) = (alpha/p) E_p(u) + (beta/q) E_q(v).
inline double energy_total(const ScalarField& u, const ScalarField& v, const Exponents& e) {
    require_same_grid(u, v);
    return e.alpha / e.p * dirichlet_energy(u, e.p) + e.beta / e.q * dirichlet_energy(v, e.q);
}

/// Gradient of dirichlet_energy with the flux factor |D|^{p-2} replaced by
/// (|D|^2 + eps_grad^2)^{(p-2)/2}. The energy value itself is never regularized.
inline ScalarField grad_energy(const ScalarField& u, double p,
                               double eps_grad = default_eps_grad) {
    require_p(p);
    if (!(eps_grad >= 0.0)) {
        throw ParameterError("eps_grad must be nonnegative");
    }
    std::vector<double> g(u.size());
    kernels::grad_energy(u.grid(), u.values(), p, eps_grad, g);
    return ScalarField(u.grid(), std::move(g));
}

/// (dG/du, dG/dv) = (alpha |u|^{alpha-1}|v|^{beta-1} v, beta |u|^{alpha-1}|v|^{beta-1} u) h^d.
inline std::pair<ScalarField, ScalarField> grad_coupling(const ScalarField& u,
                                                         const ScalarField& v,
                                                         const Exponents& e,
                                                         double eps_u = default_eps_u) {
    require_same_grid(u, v);
    if (!(eps_u >= 0.0)) {
        throw ParameterError("eps_u must be nonnegative");
    }
    std::vector<double> gu(u.size());
    std::vector<double> gv(u.size());
    kernels::grad_coupling(u.grid(), u.values(), v.values(), e, eps_u, gu, gv);
    return {ScalarField(u.grid(), std::move(gu)), ScalarField(u.grid(), std::move(gv))};
}

/// Residual fields of the discrete system in weak (h^d-weighted) form:
///
///   r_u = (1/p) dE_p/du - (lambda/alpha) dG/du
///   r_v = (1/q) dE_q/dv - (lambda/beta)  dG/dv
///
/// These are the Lagrangian gradient of I - lambda (G - 1) divided by alpha and
/// beta. Dotting r_u with u and r_v with v gives E_p(u) = E_q(v) = lambda G at a
/// stationary point, so on G = 1 the multiplier lambda equals I(u, v).
struct KktFields {
    std::vector<double> r_u;
    std::vector<double> r_v;
};

inline KktFields kkt_fields(const ScalarField& u, const ScalarField& v, double lambda,
                            const Exponents& e, double eps_grad = default_eps_grad,
                            double eps_u = default_eps_u) {
    require_same_grid(u, v);
    const std::size_t n = u.size();
    KktFields r{std::vector<double>(n), std::vector<double>(n)};
    std::vector<double> gu(n);
    std::vector<double> gv(n);
    kernels::grad_energy(u.grid(), u.values(), e.p, eps_grad, r.r_u);
    kernels::grad_energy(v.grid(), v.values(), e.q, eps_grad, r.r_v);
    kernels::grad_coupling(u.grid(), u.values(), v.values(), e, eps_u, gu, gv);
    for (std::size_t i = 0; i < n; ++i) {
        r.r_u[i] = r.r_u[i] / e.p - lambda * gu[i] / e.alpha;
        r.r_v[i] = r.r_v[i] / e.q - lambda * gv[i] / e.beta;
    }
    return r;
}

/// Euclidean norms (|r_u|_2, |r_v|_2) of the weak-form residuals above.
inline std::pair<double, double> kkt_residual(const ScalarField& u, const ScalarField& v,
                                              double lambda, const Exponents& e,
                                              double eps_grad = default_eps_grad,
                                              double eps_u = default_eps_u) {
    const KktFields r = kkt_fields(u, v, lambda, e, eps_grad, eps_u);
    return {norm2(r.r_u), norm2(r.r_v)};
}

} // namespace pqeig

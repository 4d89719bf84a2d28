#pragma once

// Reference values that do not go through the descent solver or the energy
// kernels: the first eigenpair of the discrete Dirichlet Laplacian by inverse
// iteration, and the closed form of the 1D scalar p-Laplacian eigenvalue.

#include "pqeig/errors.hpp"
#include "pqeig/mesh.hpp"

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace pqeig::oracle {

namespace detail {

/// y = -Lap_h x (3-point or 5-point stencil, zero Dirichlet data).
inline void apply_laplacian(const Grid& grid, const std::vector<double>& x,
                            std::vector<double>& y) {
    const std::size_t n = grid.n();
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    if (grid.dim() == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            const double l = i > 0 ? x[i - 1] : 0.0;
            const double r = i + 1 < n ? x[i + 1] : 0.0;
            y[i] = (2.0 * x[i] - l - r) * inv_h2;
        }
        return;
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = j * n + i;
            double s = 4.0 * x[k];
            if (i > 0) s -= x[k - 1];
            if (i + 1 < n) s -= x[k + 1];
            if (j > 0) s -= x[k - n];
            if (j + 1 < n) s -= x[k + n];
            y[k] = s * inv_h2;
        }
    }
}

/// Thomas algorithm for (2, -1, -1) / h^2.
inline std::vector<double> solve_tridiagonal(const Grid& grid, const std::vector<double>& b) {
    const std::size_t n = b.size();
    const double off = -1.0 / (grid.h() * grid.h());
    const double diag = 2.0 / (grid.h() * grid.h());
    std::vector<double> c(n);
    std::vector<double> d(n);
    c[0] = off / diag;
    d[0] = b[0] / diag;
    for (std::size_t i = 1; i < n; ++i) {
        const double m = diag - off * c[i - 1];
        c[i] = off / m;
        d[i] = (b[i] - off * d[i - 1]) / m;
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    return x;
}

inline std::vector<double> solve_cg(const Grid& grid, const std::vector<double>& b) {
    const std::size_t n = b.size();
    std::vector<double> x(n, 0.0);
    std::vector<double> r(b);
    std::vector<double> p(b);
    std::vector<double> ap(n);
    double rr = dot(r, r);
    const double stop = 1e-28 * rr;
    for (std::size_t it = 0; it < 20 * n && rr > stop; ++it) {
        apply_laplacian(grid, p, ap);
        const double a = rr / dot(p, ap);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        const double rr_new = dot(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = r[i] + beta * p[i];
        }
    }
    if (rr > 1e-20 * dot(b, b)) {
        throw OracleFailed("conjugate gradients did not converge");
    }
    return x;
}

} // namespace detail

/// Smallest eigenvalue and unit eigenvector (positive mean) of -Lap_h on the
/// grid, by inverse iteration. The eigenvalue is that of the generalized problem
/// K u = lambda h^d u with K the stiffness of the p = 2 Dirichlet energy.
inline std::pair<double, ScalarField> linear_first_eig(const Grid& grid,
                                                       std::size_t max_steps = 500) {
    const std::size_t n = grid.size();
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> ax(n);
    double lambda = 0.0;
    for (std::size_t step = 0; step < max_steps; ++step) {
        std::vector<double> y =
            grid.dim() == 1 ? detail::solve_tridiagonal(grid, x) : detail::solve_cg(grid, x);
        const double ny = norm2(y);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] /= ny;
            change = std::max(change, std::abs(y[i] - x[i]));
        }
        x = std::move(y);
        detail::apply_laplacian(grid, x, ax);
        const double next = dot(x, ax);
        const bool settled = step > 0 && std::abs(next - lambda) <= 1e-15 * next && change < 1e-12;
        lambda = next;
        if (settled) {
            double sum = 0.0;
            for (double xi : x) {
                sum += xi;
            }
            if (sum < 0.0) {
                for (double& xi : x) {
                    xi = -xi;
                }
            }
            return {lambda, ScalarField(grid, std::move(x))};
        }
    }
    throw OracleFailed("inverse iteration did not settle");
}

/// Generalized pi: 2 pi (p - 1)^{1/p} / (p sin(pi / p)).
inline double pi_p(double p) {
    if (!(p > 1.0)) {
        throw DomainError("pi_p needs p > 1");
    }
    constexpr double pi = std::numbers::pi;
    return 2.0 * pi * std::pow(p - 1.0, 1.0 / p) / (p * std::sin(pi / p));
}

/// First Dirichlet eigenvalue of -(|u'|^{p-2} u')' = lambda |u|^{p-2} u on (0, L).
/// With the (p - 1)^{1/p} factor already inside pi_p this is (pi_p / L)^p.
inline double plap1d_lambda1(double p, double length) {
    if (!(length > 0.0)) {
        throw DomainError("interval length must be positive");
    }
    return std::pow(pi_p(p) / length, p);
}

} // namespace pqeig::oracle

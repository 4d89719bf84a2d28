#pragma once

#include "pqeig/errors.hpp"

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pqeig {

/// Uniform Cartesian grid on the box (0, L)^dim with homogeneous Dirichlet
/// boundary. Only interior nodes carry unknowns; boundary values are zero
/// and never stored.
class Grid {
public:
    Grid() = default;

    int dim() const noexcept { return dim_; }
    std::size_t n() const noexcept { return n_; }
    double length() const noexcept { return length_; }
    double h() const noexcept { return h_; }

    // Same resolution on every axis, kept per-axis for readability at call sites.
    std::size_t n_per_axis(int /*axis*/) const noexcept { return n_; }
    double length_per_axis(int /*axis*/) const noexcept { return length_; }
    double h_per_axis(int /*axis*/) const noexcept { return h_; }

    /// Number of interior nodes (n^dim).
    std::size_t size() const noexcept { return dim_ == 1 ? n_ : n_ * n_; }

    /// Quadrature weight of one node or one cell: h^dim.
    double cell_volume() const noexcept { return dim_ == 1 ? h_ : h_ * h_; }

    /// Coordinate of interior node `index` along one axis.
    double coordinate(std::size_t index) const noexcept {
        return static_cast<double>(index + 1) * h_;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    friend Grid make_grid(int dim, std::size_t n, double length);

    int dim_ = 1;
    std::size_t n_ = 2;
    double length_ = 1.0;
    double h_ = 1.0 / 3.0;
};

/// Builds a grid with `n` interior nodes and side `length` on each of `dim` axes.
inline Grid make_grid(int dim, std::size_t n, double length) {
    if (dim != 1 && dim != 2) {
        throw ParameterError("grid dimension must be 1 or 2, got " + std::to_string(dim));
    }
    if (n < 2) {
        throw ParameterError("grid needs at least 2 interior nodes per axis, got " +
                             std::to_string(n));
    }
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw ParameterError("grid length must be positive and finite");
    }
    Grid g;
    g.dim_ = dim;
    g.n_ = n;
    g.length_ = length;
    g.h_ = length / static_cast<double>(n + 1);
    return g;
}

/// Nodal values on the interior nodes of a grid, row-major (x fastest).
/// Every stored value is finite.
class ScalarField {
public:
    explicit ScalarField(const Grid& grid) : grid_(grid), values_(grid.size(), 0.0) {}

    ScalarField(const Grid& grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw InvalidFieldError("field has " + std::to_string(values_.size()) +
                                    " values, grid has " + std::to_string(grid_.size()) +
                                    " interior nodes");
        }
        for (double x : values_) {
            if (!std::isfinite(x)) {
                throw InvalidFieldError("field contains a non-finite value");
            }
        }
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    /// Returns s * this.
    ScalarField scaled(double s) const {
        std::vector<double> out(values_);
        for (double& x : out) {
            x *= s;
        }
        return ScalarField(grid_, std::move(out));
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

inline void require_same_grid(const ScalarField& a, const ScalarField& b) {
    if (!(a.grid() == b.grid())) {
        throw ShapeError("fields live on different grids");
    }
}

/// Samples `f` at the interior nodes. `f` receives (x) in 1D and (x, y) in 2D.
template <typename F>
ScalarField field_from_fn(const Grid& grid, F&& f) {
    std::vector<double> values(grid.size());
    const std::size_t n = grid.n();
    constexpr bool one_arg = std::invocable<F&, double>;
    constexpr bool two_arg = std::invocable<F&, double, double>;
    static_assert(one_arg || two_arg, "f must take (x) or (x, y)");
    if (grid.dim() == 1) {
        if constexpr (one_arg) {
            for (std::size_t i = 0; i < n; ++i) {
                values[i] = f(grid.coordinate(i));
            }
        } else {
            throw ParameterError("a 1D grid needs f(x)");
        }
    } else {
        if constexpr (two_arg) {
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < n; ++i) {
                    values[j * n + i] = f(grid.coordinate(i), grid.coordinate(j));
                }
            }
        } else {
            throw ParameterError("a 2D grid needs f(x, y)");
        }
    }
    for (double x : values) {
        if (!std::isfinite(x)) {
            throw InvalidFieldError("function is not finite at an interior node");
        }
    }
    return ScalarField(grid, std::move(values));
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t state) noexcept {
    std::uint64_t z = state + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based stream: word i of stream `seed` is
/// splitmix64(splitmix64(seed) + i * golden_gamma).
inline std::uint64_t counter_word(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(seed) + index * 0x9E3779B97F4A7C15ULL);
}

} // namespace detail

/// Deterministic pseudo-random field. Node i takes the top 53 bits k of
/// counter word i; positive fields map k to (k + 1) / 2^53 in (0, 1], signed
/// fields to 2 k / 2^53 - 1 in [-1, 1).
inline ScalarField random_field(const Grid& grid, std::uint64_t seed, bool positive) {
    constexpr double inv53 = 1.0 / 9007199254740992.0; // 2^-53
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint64_t k = detail::counter_word(seed, i) >> 11;
        values[i] = positive ? static_cast<double>(k + 1) * inv53
                             : 2.0 * static_cast<double>(k) * inv53 - 1.0;
    }
    return ScalarField(grid, std::move(values));
}

/// Euclidean inner product of nodal values (no quadrature weight).
inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

} // namespace pqeig

#include "pqeig/oracle.hpp"
#include "pqeig/solver.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace pqeig;
using pqeig::testkit::relative_error;

namespace {

void expect_on_constraint(const EigenPair& pair) {
    EXPECT_LE(std::abs(coupling(pair.u, pair.v, pair.exponents) - 1.0), 1e-8);
    EXPECT_GT(pair.lambda, 0.0);
    EXPECT_LE(relative_error(pair.lambda, energy_total(pair.u, pair.v, pair.exponents)), 1e-10);
}

void expect_monotone(const SolverReport& report) {
    for (std::size_t k = 1; k < report.lambda_history.size(); ++k) {
        ASSERT_LE(report.lambda_history[k], report.lambda_history[k - 1] + 1e-12)
            << "step " << k;
    }
}

} // namespace

TEST(SolverConfig, Validation) {
    EXPECT_NO_THROW(SolverConfig{}.validate());
    SolverConfig c;
    c.armijo_shrink = 1.0;
    EXPECT_THROW(c.validate(), ParameterError);
    c = {};
    c.tol_kkt = 0.0;
    EXPECT_THROW(c.validate(), ParameterError);
    c = {};
    c.max_iters = 0;
    EXPECT_THROW(c.validate(), ParameterError);
    c = {};
    c.n_starts = 0;
    EXPECT_THROW(c.validate(), ParameterError);
}

TEST(Termination, Names) {
    EXPECT_EQ(to_string(Termination::lambda_stalled), "lambda-stalled");
    EXPECT_EQ(to_string(Termination::kkt_met), "kkt-met");
    EXPECT_EQ(to_string(Termination::max_iters), "max-iters");
}

TEST(BalanceProject, SymmetricFixedPoint) {
    // p = q = 2, alpha = beta = 1, u = v with G = 1 gives A = B and s = t = 1.
    const Exponents e = make_exponents(2, 2, 1, 1);
    const Grid g = make_grid(1, 20, 1.0);
    const ScalarField raw = random_field(g, 3, true);
    const ScalarField u = raw.scaled(1.0 / std::sqrt(coupling(raw, raw, e)));
    ASSERT_NEAR(coupling(u, u, e), 1.0, 1e-14);
    const auto [su, tv, mu] = balance_project(u, u, e);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(su[i], u[i], 1e-14);
        EXPECT_NEAR(tv[i], u[i], 1e-14);
    }
    const double a = 0.5 * dirichlet_energy(u, 2.0);
    EXPECT_LE(relative_error(mu, 2.0 * a), 1e-13);
}

TEST(BalanceProject, LandsOnConstraintAndIsIdempotent) {
    for (const Exponents& e : {make_exponents(2, 3, 1, 1.5), make_exponents(3, 3, 1.5, 1.5),
                               make_exponents(1.6, 4, 0.4, 3.0)}) {
        const Grid g = make_grid(1, 30, 1.0);
        const ScalarField u = random_field(g, 1, true).scaled(7.0);
        const ScalarField v = random_field(g, 2, true).scaled(0.01);
        const auto [su, tv, mu] = balance_project(u, v, e);
        EXPECT_NEAR(coupling(su, tv, e), 1.0, 1e-12);
        EXPECT_LE(relative_error(energy_total(su, tv, e), mu), 1e-12);
        const auto [su2, tv2, mu2] = balance_project(su, tv, e);
        EXPECT_LE(relative_error(mu2, mu), 1e-12);
        for (std::size_t i = 0; i < g.size(); ++i) {
            EXPECT_LE(std::abs(su2[i] - su[i]), 1e-12 * std::abs(su[i]));
            EXPECT_LE(std::abs(tv2[i] - tv[i]), 1e-12 * std::abs(tv[i]));
        }
    }
}

TEST(BalanceProject, MatchesBruteForceGridSearch) {
    // I / G is invariant along (s, t) -> (k^{1/p} s, k^{1/q} t), so its minimum over
    // all s, t > 0 is the constrained minimum over G = 1.
    const Exponents e = make_exponents(2, 3, 1, 1.5);
    const Grid g = make_grid(1, 40, 1.0);
    const ScalarField u = random_field(g, 11, true);
    const ScalarField v = random_field(g, 12, true);
    const double a = e.alpha / e.p * dirichlet_energy(u, e.p);
    const double b = e.beta / e.q * dirichlet_energy(v, e.q);
    const double g0 = coupling(u, v, e);
    const auto [su, tv, mu] = balance_project(u, v, e);

    const int steps = 400;
    const double lo = -6.0;
    const double hi = 6.0;
    const double dl = (hi - lo) / (steps - 1);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < steps; ++i) {
        const double s = std::exp(lo + i * dl);
        for (int j = 0; j < steps; ++j) {
            const double t = std::exp(lo + j * dl);
            const double ratio = (std::pow(s, e.p) * a + std::pow(t, e.q) * b) /
                                 (std::pow(s, e.alpha) * std::pow(t, e.beta) * g0);
            best = std::min(best, ratio);
        }
    }
    EXPECT_GE(best, mu * (1.0 - 1e-12));
    // Quadratic in the log-offset from the optimum: within (p dl)^2 relative.
    EXPECT_LE(best, mu * (1.0 + std::pow(e.q * dl, 2)));
}

TEST(BalanceProject, InfeasibleInputs) {
    const Exponents e = make_exponents(2, 2, 1, 1);
    const Grid g = make_grid(1, 10, 1.0);
    const ScalarField u = random_field(g, 1, true);
    EXPECT_THROW(balance_project(u, u.scaled(-1.0), e), ProjectionInfeasible);
    EXPECT_THROW(balance_project(ScalarField(g), u, e), ProjectionInfeasible);
}

TEST(Solve, LinearOracleEquivalenceOnSmallGrids) {
    const Exponents e = make_exponents(2, 2, 1, 1);
    for (auto [dim, n] : {std::pair{1, 10}, std::pair{1, 50}, std::pair{2, 7}, std::pair{2, 16}}) {
        const Grid g = make_grid(dim, static_cast<std::size_t>(n), 1.0);
        const auto [pair, report] = solve(g, e, SolverConfig{});
        ASSERT_TRUE(report.converged) << to_string(report.termination);
        const double oracle = oracle::linear_first_eig(g).first;
        EXPECT_LE(relative_error(pair.lambda, oracle), 1e-6) << "dim=" << dim << " n=" << n;
        expect_on_constraint(pair);
        expect_monotone(report);
        const auto [ru, rv] = kkt_residual(pair.u, pair.v, pair.lambda, e);
        EXPECT_LT(ru, 1e-6);
        EXPECT_LT(rv, 1e-6);
    }
}

TEST(Solve, NonlinearCasesSatisfyInvariants) {
    for (const Exponents& e : {make_exponents(2, 3, 1, 1.5), make_exponents(3, 3, 1.5, 1.5),
                               make_exponents(1.6, 1.6, 0.8, 0.8)}) {
        const Grid g = make_grid(1, 60, 1.0);
        const auto [pair, report] = solve(g, e, SolverConfig{});
        ASSERT_TRUE(report.converged) << "p=" << e.p << " q=" << e.q;
        EXPECT_EQ(report.lambda_history.size(), report.kkt_history.size());
        EXPECT_EQ(report.lambda_history.back(), pair.lambda);
        expect_on_constraint(pair);
        expect_monotone(report);
        const auto [ru, rv] = kkt_residual(pair.u, pair.v, pair.lambda, e);
        EXPECT_LT(ru, 1e-6);
        EXPECT_LT(rv, 1e-6);
    }
}

TEST(Solve, OnePLaplacianMatchesTheLinearCaseAtPEqualsTwo) {
    const Grid g = make_grid(1, 100, 2.0);
    const auto [pair, report] = solve(g, make_exponents(2, 2, 1, 1), SolverConfig{});
    ASSERT_TRUE(report.converged);
    const double h = g.h();
    const double discrete = 4.0 / (h * h) * std::pow(std::sin(std::numbers::pi * h / 4.0), 2);
    EXPECT_LE(relative_error(pair.lambda, discrete), 1e-6);
}

TEST(SolveFrom, MaxItersGivesUnconvergedResult) {
    const Exponents e = make_exponents(2, 3, 1, 1.5);
    const Grid g = make_grid(1, 50, 1.0);
    SolverConfig cfg;
    cfg.max_iters = 5;
    const auto [pair, report] = solve(g, e, cfg);
    EXPECT_FALSE(report.converged);
    EXPECT_EQ(report.termination, Termination::max_iters);
    EXPECT_EQ(report.iterations, 5u);
    expect_on_constraint(pair);
}

TEST(SolveFrom, InfeasibleStartThrows) {
    const Grid g = make_grid(1, 10, 1.0);
    const ScalarField u = random_field(g, 1, true);
    EXPECT_THROW(solve_from(u, u.scaled(-1.0), make_exponents(2, 2, 1, 1), SolverConfig{}),
                 ProjectionInfeasible);
    EXPECT_THROW(solve_from(u, ScalarField(make_grid(1, 11, 1.0)), make_exponents(2, 2, 1, 1),
                            SolverConfig{}),
                 ShapeError);
}

TEST(SolveFrom, ScalingTheStartIsInvisibleAfterProjection) {
    const Exponents e = make_exponents(2, 3, 1, 1.5);
    const Grid g = make_grid(1, 40, 1.0);
    const auto [u0, v0] = initial_pair(g, 5, 0, true);
    SolverConfig cfg;
    cfg.max_iters = 300;
    const auto [base, base_report] = solve_from(u0, v0, e, cfg);

    // Power-of-two scales commute with every floating-point operation: bitwise.
    const auto [exact, exact_report] = solve_from(u0.scaled(4.0), v0.scaled(0.5), e, cfg);
    EXPECT_EQ(exact_report.lambda_history, base_report.lambda_history);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_EQ(exact.u[i], base.u[i]);
        EXPECT_EQ(exact.v[i], base.v[i]);
    }

    // Other scales differ by one rounding in the input. The projected start agrees
    // exactly; BB steps amplify the rounding mid-run, so only the limits are compared.
    SolverConfig full;
    const auto [ref, ref_report] = solve_from(u0, v0, e, full);
    const auto [other, other_report] = solve_from(u0.scaled(3.0), v0.scaled(0.7), e, full);
    EXPECT_EQ(other_report.lambda_history.front(), ref_report.lambda_history.front());
    ASSERT_TRUE(ref_report.converged);
    ASSERT_TRUE(other_report.converged);
    EXPECT_LE(relative_error(other.lambda, ref.lambda), 1e-10);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_LE(relative_error(other.u[i], ref.u[i]), 1e-5);
        EXPECT_LE(relative_error(other.v[i], ref.v[i]), 1e-5);
    }
}

TEST(Solve, DeterministicForFixedSeed) {
    const Exponents e = make_exponents(2, 3, 1, 1.5);
    const Grid g = make_grid(1, 40, 1.0);
    SolverConfig cfg;
    cfg.seed = 99;
    const auto [a, ra] = solve(g, e, cfg);
    const auto [b, rb] = solve(g, e, cfg);
    EXPECT_EQ(ra.lambda_history, rb.lambda_history);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_EQ(a.u[i], b.u[i]);
        EXPECT_EQ(a.v[i], b.v[i]);
    }
}

TEST(Solve, SignedStartReachesTheSameLevel) {
    const Exponents e = make_exponents(2, 2, 1, 1);
    const Grid g = make_grid(1, 30, 1.0);
    SolverConfig cfg;
    cfg.positive_init = false;
    const auto [pair, report] = solve(g, e, cfg);
    ASSERT_TRUE(report.converged);
    EXPECT_LE(relative_error(pair.lambda, oracle::linear_first_eig(g).first), 1e-6);
}

TEST(Align, ExactProportionality) {
    const Exponents e = make_exponents(2, 3, 1, 1.5);
    const Grid g = make_grid(1, 20, 1.0);
    const EigenPair a{random_field(g, 1, true), random_field(g, 2, true), 1.0, e};
    const EigenPair b{a.u.scaled(2.0), a.v.scaled(3.0), 1.0, e};
    const Alignment ab = align(a, b);
    EXPECT_NEAR(ab.k1, 0.5, 1e-15);
    EXPECT_NEAR(ab.k2, 1.0 / 3.0, 1e-15);
    EXPECT_LE(ab.misfit, 1e-15);
    const Alignment aa = align(a, a);
    EXPECT_DOUBLE_EQ(aa.k1, 1.0);
    EXPECT_DOUBLE_EQ(aa.k2, 1.0);
    EXPECT_LE(aa.misfit, 1e-15);
}

TEST(Align, DistinctLinearEigenvectorsAreFarApart) {
    const Exponents e = make_exponents(2, 2, 1, 1);
    const Grid g = make_grid(1, 25, 1.0);
    const auto [vals, vecs] = testkit::jacobi_eigen(testkit::assemble_stiffness(g));
    const ScalarField first(g, vecs[0]);
    const ScalarField second(g, vecs[1]);
    const Alignment al = align(EigenPair{first, first, vals[0], e}, EigenPair{second, second, vals[1], e});
    EXPECT_GT(al.misfit, 0.5);
}

TEST(Align, ZeroReferenceField) {
    const Exponents e = make_exponents(2, 2, 1, 1);
    const Grid g = make_grid(1, 5, 1.0);
    const ScalarField u = random_field(g, 1, true);
    EXPECT_THROW(align(EigenPair{u, u, 1.0, e}, EigenPair{ScalarField(g), u, 1.0, e}),
                 DegenerateAlignment);
}

TEST(MultiStart, SingleRunIsTriviallySimple) {
    const Grid g = make_grid(1, 30, 1.0);
    SolverConfig cfg;
    cfg.n_starts = 1;
    const SimplicityVerdict v = multi_start(g, make_exponents(2, 3, 1, 1.5), cfg);
    EXPECT_TRUE(v.simple);
    EXPECT_EQ(v.lambda_spread, 0.0);
    EXPECT_EQ(v.max_misfit, 0.0);
    EXPECT_EQ(v.runs.size(), 1u);
}

TEST(MultiStart, LinearCaseTenSeeds) {
    const Grid g = make_grid(1, 200, 1.0);
    SolverConfig cfg;
    cfg.n_starts = 10;
    const SimplicityVerdict v = multi_start(g, make_exponents(2, 2, 1, 1), cfg);
    EXPECT_TRUE(v.simple);
    EXPECT_EQ(v.n_converged, 10u);
    EXPECT_LT(v.lambda_spread, 1e-8);
    for (std::size_t k = 0; k < v.runs.size(); ++k) {
        EXPECT_EQ(v.runs[k].seed, cfg.seed + k);
    }
}

TEST(MultiStart, MixedExponentsAreSimpleAndSingleSigned) {
    const Grid g = make_grid(1, 100, 1.0);
    SolverConfig cfg;
    cfg.n_starts = 5;
    const SimplicityVerdict v = multi_start(g, make_exponents(2, 3, 1, 1.5), cfg);
    EXPECT_TRUE(v.simple);
    EXPECT_EQ(v.max_sign_flip_fraction, 0.0);
    EXPECT_GT(v.min_value_ratio, 0.0);
}

TEST(MultiStart, AllRunsFailing) {
    const Grid g = make_grid(1, 50, 1.0);
    SolverConfig cfg;
    cfg.n_starts = 2;
    cfg.max_iters = 3;
    EXPECT_THROW(multi_start(g, make_exponents(2, 3, 1, 1.5), cfg), SolverFailed);
}

TEST(PositiveMean, FlipsNegativeMean) {
    const Grid g = make_grid(1, 4, 1.0);
    const ScalarField f(g, {-1.0, -2.0, 0.5, 0.1});
    const ScalarField flipped = positive_mean(f);
    EXPECT_EQ(flipped[0], 1.0);
    EXPECT_EQ(positive_mean(flipped)[0], 1.0);
}

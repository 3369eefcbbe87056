#include "ejko/analysis.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ejko;

TEST_CASE("L1 distance") {
    const Grid grid(1, 16);
    const GridMeasure u = GridMeasure::uniform(grid);
    CHECK(l1_distance(u, u) == 0.0);

    GridFunction left(grid.size(), 0.0);
    GridFunction right(grid.size(), 0.0);
    for (std::size_t i = 0; i < 8; ++i) left[i] = 2.0;
    for (std::size_t i = 8; i < 16; ++i) right[i] = 2.0;
    CHECK(l1_distance(GridMeasure(grid, left), GridMeasure(grid, right)) == doctest::Approx(2.0));
    CHECK(l1_distance(GridMeasure(grid, left), u) == doctest::Approx(1.0));

    std::mt19937_64 rng(97);
    for (int k = 0; k < 10; ++k) {
        const GridMeasure a = testing::random_positive(grid, rng);
        const GridMeasure b = testing::random_positive(grid, rng);
        const GridMeasure c = testing::random_positive(grid, rng);
        CHECK(l1_distance(a, b) == l1_distance(b, a));
        CHECK(l1_distance(a, c) <= l1_distance(a, b) + l1_distance(b, c) + 1e-15);
        CHECK(l1_distance(a, b) <= 2.0);
    }
    CHECK_THROWS_AS(l1_distance(u, GridMeasure::uniform(Grid(1, 32))), GridMismatch);
}

TEST_CASE("Wasserstein distance on the line") {
    const Grid grid(1, 320);
    const GridMeasure mu = testing::bump(grid, 0.45, 0.04);
    CHECK(wasserstein2_1d(mu, mu) <= 1e-15);

    const GridMeasure shifted = testing::translate(mu, 32);
    CHECK(wasserstein2_1d(mu, shifted) == doctest::Approx(0.01).epsilon(1e-10));
    CHECK(wasserstein2_1d(shifted, mu) == doctest::Approx(0.01).epsilon(1e-10));

    const GridMeasure nu = testing::bump(grid, 0.55, 0.02);
    const double base = wasserstein2_1d(mu, nu);
    for (int cells : {-100, 7, 150}) {
        CHECK(wasserstein2_1d(testing::translate(mu, cells), testing::translate(nu, cells)) ==
              doctest::Approx(base).epsilon(1e-10));
    }
}

TEST_CASE("Wasserstein distance matches the monotone coupling") {
    const int n = 256;
    const Grid grid(1, n);
    const GridMeasure mu = testing::bump(grid, 0.4, 0.02);
    const GridMeasure nu = testing::bump(grid, 0.6, 0.035);
    oracle::Vec pa(n), pb(n), x(n);
    for (int i = 0; i < n; ++i) {
        pa[i] = mu[i] / n;
        pb[i] = nu[i] / n;
        x[i] = static_cast<double>(i) / n;
    }
    const double expected = oracle::coupling_cost(oracle::monotone_coupling(pa, pb), x);
    CHECK(std::abs(wasserstein2_1d(mu, nu) - expected) <= 1e-8);
}

TEST_CASE("Wasserstein distance refuses spread-out or 2D measures") {
    const Grid grid(1, 64);
    CHECK_THROWS_AS(wasserstein2_1d(GridMeasure::uniform(grid), testing::bump(grid, 0.5, 0.05)), LocalizationError);
    CHECK_THROWS_AS(wasserstein2_1d(testing::two_bumps(grid, 0.1, 0.6, 0.03), testing::bump(grid, 0.5, 0.05)),
                    LocalizationError);
    const Grid plane(2, 16);
    CHECK_THROWS_AS(wasserstein2_1d(GridMeasure::uniform(plane), GridMeasure::uniform(plane)), ConfigError);
}

TEST_CASE("trajectory comparison uses the nearest snapshots") {
    const Grid grid(1, 16);
    const GridMeasure u = GridMeasure::uniform(grid);
    GridFunction left(grid.size(), 0.0);
    for (std::size_t i = 0; i < 8; ++i) left[i] = 2.0;
    const GridMeasure l(grid, left);

    Trajectory a;
    a.times = {0.0, 0.25, 0.5};
    a.states = {u, u, l};
    Trajectory b;
    b.times = {0.0, 0.125, 0.25, 0.375, 0.5};
    b.states = {u, u, u, u, u};

    CHECK(compare_trajectories(a, b, 0.0) == 0.0);
    CHECK(compare_trajectories(a, b, 0.3) == 0.0);
    CHECK(compare_trajectories(a, b, 0.4) == doctest::Approx(1.0));
    // Ties go to the later snapshot.
    CHECK(compare_trajectories(a, b, 0.375) == doctest::Approx(1.0));
    CHECK(compare_trajectories(a, b, 0.5 + 1e-12) == doctest::Approx(1.0));
    CHECK_THROWS_AS(compare_trajectories(a, b, 0.6), ConfigError);
    CHECK_THROWS_AS(compare_trajectories(a, b, -0.01), ConfigError);
    CHECK_THROWS_AS(compare_trajectories(a, Trajectory{}, 0.0), ConfigError);
}

TEST_CASE("restriction samples the coarse nodes") {
    const Grid fine(1, 64);
    const Grid coarse(1, 16);
    std::mt19937_64 rng(101);
    const GridMeasure mu = testing::random_positive(fine, rng);
    const GridMeasure r = restrict_to(mu, coarse);
    double mean = 0.0;
    for (std::size_t i = 0; i < coarse.size(); ++i) mean += mu[4 * i];
    mean /= static_cast<double>(coarse.size());
    for (std::size_t i = 0; i < coarse.size(); ++i) CHECK(r[i] == doctest::Approx(mu[4 * i] / mean).epsilon(1e-14));

    const GridMeasure same = restrict_to(mu, fine);
    CHECK(l1_distance(same, mu) <= 1e-15);

    const Grid fine2(2, 32);
    const GridMeasure m2 = testing::bump(fine2, 0.5, 0.1, 0.1);
    const GridMeasure r2 = restrict_to(m2, Grid(2, 8));
    CHECK(r2.size() == 64);

    CHECK_THROWS_AS(restrict_to(mu, Grid(1, 24)), GridMismatch);
    CHECK_THROWS_AS(restrict_to(mu, Grid(2, 16)), GridMismatch);
}

TEST_CASE("sweep eps") {
    CHECK(sweep_eps(1.0, 0.01, 1.5) == doctest::Approx(0.01));
    CHECK(sweep_eps(2.0, 0.01, 1.5) == doctest::Approx(0.02));
    CHECK(sweep_eps(0.0, 0.01, 1.5) == doctest::Approx(0.001));
    CHECK(sweep_eps(0.0, 0.04, 2.0) == doctest::Approx(0.0016));
}

TEST_CASE("sweep validation") {
    SweepProblem problem;
    problem.initial = [](const Grid& g) { return testing::bump(g, 0.5, 0.08, 0.1); };
    problem.energy = [](const Grid& g) { return EnergySpec::internal_only(g, InternalEnergy::boltzmann()); };

    SweepOptions options;
    options.alphas = {1.0};
    options.taus = {};
    CHECK(run_sweep(problem, options).empty());

    options.taus = {0.03};
    CHECK_THROWS_AS(run_sweep(problem, options), ConfigError);
    options.taus = {-0.01};
    CHECK_THROWS_AS(run_sweep(problem, options), ConfigError);
    options.taus = {0.01};
    options.alphas = {-1.0};
    CHECK_THROWS_AS(run_sweep(problem, options), ConfigError);
    options.alphas = {1.0};
    options.zero_alpha_exponent = 1.0;
    CHECK_THROWS_AS(run_sweep(problem, options), ConfigError);
    CHECK_THROWS_AS(run_sweep(SweepProblem{}, SweepOptions{}), ConfigError);
}

TEST_CASE("heat sweep converges and separates the regimes") {
    SweepProblem problem;
    problem.initial = [](const Grid& g) { return testing::bump(g, 0.5, 0.08, 0.1); };
    problem.energy = [](const Grid& g) { return EnergySpec::internal_only(g, InternalEnergy::boltzmann()); };
    SweepOptions options;
    options.alphas = {0.0, 1.0};
    options.taus = {0.01, 0.005, 0.0025};
    options.t_end = 0.04;
    options.n = 128;
    const std::vector<SweepRow> rows = run_sweep(problem, options);
    REQUIRE(rows.size() == 6);

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const SweepRow& row = rows[r];
        CHECK(row.alpha == (r < 3 ? 0.0 : 1.0));
        CHECK(row.tau == options.taus[r % 3]);
        CHECK(row.n == 128);
        CHECK(row.ratio == doctest::Approx(row.eps / row.tau));
        CHECK(row.mean_sinkhorn_iterations >= 1.0);
        CHECK(std::isfinite(row.wall_time_s));
        if (row.alpha == 0.0) CHECK(row.l1_error == row.l1_error_vs_alpha0);
        if (r % 3 != 0) CHECK(row.l1_error < rows[r - 1].l1_error);
    }
    CHECK(rows[5].l1_error_vs_alpha0 > 5.0 * rows[5].l1_error);
}

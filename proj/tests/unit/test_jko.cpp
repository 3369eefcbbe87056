#include "ejko/analysis.hpp"
#include "ejko/energy.hpp"
#include "ejko/errors.hpp"
#include "ejko/jko.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>

using namespace ejko;

namespace {

JkoConfig config(double tau, double eps, int n_steps = 1) {
    JkoConfig cfg;
    cfg.tau = tau;
    cfg.eps = eps;
    cfg.n_steps = n_steps;
    return cfg;
}

double bisect(const std::function<double(double)>& g, double lo, double hi) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) hi = mid;
        else lo = mid;
    }
    return 0.5 * (lo + hi);
}

double sup_laplacian(const Grid& grid, const GridFunction& f) {
    const auto grad = spectral_gradient(grid, f);
    double sup = 0.0;
    GridFunction lap(grid.size(), 0.0);
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const auto second = spectral_gradient(grid, grad[axis]);
        for (std::size_t i = 0; i < lap.size(); ++i) lap[i] += second[axis][i];
    }
    for (double v : lap) sup = std::max(sup, std::abs(v));
    return sup;
}

}  // namespace

TEST_CASE("marginal update root examples") {
    const double tol = 1e-14;
    CHECK(marginal_update_root(0.5, 2.0, 0.3, InternalEnergy::zero(), tol) ==
          doctest::Approx(2.0 * std::exp(-0.3 / 0.5)).epsilon(1e-13));
    CHECK(marginal_update_root(1.0, 1.0, -1.0, InternalEnergy::boltzmann(), tol) == doctest::Approx(1.0).epsilon(1e-13));

    const double expected = bisect([](double r) { return std::log(r) + 2.0 * r; }, 1e-6, 10.0);
    const double root = marginal_update_root(1.0, 1.0, 0.0, InternalEnergy::power_law(2.0), tol);
    CHECK(root == doctest::Approx(expected).epsilon(1e-12));
    CHECK(root == doctest::Approx(0.4263).epsilon(1e-4));

    CHECK_THROWS_AS(marginal_update_root(0.0, 1.0, 0.0, InternalEnergy::zero(), tol), ConfigError);
    CHECK_THROWS_AS(marginal_update_root(1.0, 0.0, 0.0, InternalEnergy::zero(), tol), DomainError);
}

TEST_CASE("Newton path agrees with the entropy closed form") {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> lam(0.05, 20.0);
    std::uniform_real_distribution<double> log_s(-30.0, 30.0);
    std::uniform_real_distribution<double> v(-50.0, 50.0);
    for (int k = 0; k < 200; ++k) {
        const double l = lam(rng);
        const double ls = log_s(rng);
        const double ve = v(rng);
        const double expected = (l * ls - ve - 1.0) / (l + 1.0);
        const double u = marginal_update_log_root(l, ls, ve, InternalEnergy::boltzmann(), 1e-14);
        CHECK(std::abs(u - expected) <= 1e-11 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("power-law roots satisfy their equation") {
    std::mt19937_64 rng(67);
    std::uniform_real_distribution<double> lam(0.05, 5.0);
    std::uniform_real_distribution<double> log_s(-5.0, 5.0);
    std::uniform_real_distribution<double> v(-5.0, 5.0);
    for (double m : {0.5, 2.0, 3.0}) {
        const auto internal = InternalEnergy::power_law(m);
        for (int k = 0; k < 50; ++k) {
            const double l = lam(rng);
            const double ls = log_s(rng);
            const double ve = v(rng);
            const double r = std::exp(marginal_update_log_root(l, ls, ve, internal, 1e-14));
            const double lhs = l * (std::log(r) - ls) + ve + internal.f_prime(r);
            CHECK(std::abs(lhs) <= 1e-10 * std::max({1.0, std::abs(ve), l * std::abs(ls)}));
        }
    }
}

TEST_CASE("F = 0 step is the heat flow at time eps") {
    for (int d : {1, 2}) {
        const Grid grid(d, d == 1 ? 128 : 32);
        std::mt19937_64 rng(71);
        const GridMeasure mu = testing::random_positive(grid, rng);
        const JkoConfig cfg = config(0.02, 0.01);
        const ProxResult r = prox_step(mu, EnergySpec::internal_only(grid, InternalEnergy::zero()), cfg);
        const GridMeasure expected(grid, apply_heat(grid, cfg.eps, mu.density()));
        CHECK(l1_distance(r.rho, expected) <= 10.0 * cfg.inner_tol);
        CHECK(r.diagnostics.d_eps_sq == doctest::Approx(2.0 * cfg.eps * entropy(mu)).epsilon(1e-6));
    }
}

TEST_CASE("uniform is a fixed point for the entropy") {
    const Grid grid(1, 64);
    const GridMeasure u = GridMeasure::uniform(grid);
    const EnergySpec spec = EnergySpec::internal_only(grid, InternalEnergy::boltzmann());
    const ProxResult r = prox_step(u, spec, config(0.01, 0.01));
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(r.rho[i] - 1.0) <= 1e-13);
    CHECK(r.diagnostics.optimality_residual <= 1e-12);
    CHECK(optimality_residual(u, GridFunction(grid.size(), 0.0), spec) <= 1e-12);
}

TEST_CASE("small-grid step matches the projected-gradient oracle") {
    const Grid grid(1, 8);
    const GridMeasure mu = testing::bump(grid, 0.3, 0.15, 0.3);
    const GridFunction V = testing::cosine(grid, 1.0);
    const EnergySpec spec(grid, V, GridFunction(grid.size(), 0.0), InternalEnergy::boltzmann());
    JkoConfig cfg = config(0.05, 0.05);
    cfg.inner_tol = 1e-13;
    const ProxResult r = prox_step(mu, spec, cfg);

    oracle::Energy e;
    e.internal = oracle::Internal::Entropy;
    e.V = V;
    const oracle::Vec expected = oracle::projected_gradient_prox(mu.density(), e, cfg.eps, cfg.tau);
    double l1 = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) l1 += std::abs(r.rho[i] - expected[i]);
    CHECK(l1 * grid.weight() <= 1e-5);
    CHECK(r.diagnostics.optimality_residual <= 1e-4);
}

TEST_CASE("run_flow with F = 0 iterates the heat flow") {
    const Grid grid(1, 128);
    const GridMeasure rho0 = testing::bump(grid, 0.5, 0.05, 0.05);
    const JkoConfig cfg = config(0.01, 0.004, 5);
    const FlowResult flow = run_flow(rho0, EnergySpec::internal_only(grid, InternalEnergy::zero()), cfg);
    REQUIRE(flow.ok());
    REQUIRE(flow.trajectory.size() == 6);
    CHECK(flow.trajectory.diagnostics.size() == 5);
    CHECK(l1_distance(flow.trajectory.states[0], rho0) == 0.0);
    for (int k = 0; k <= 5; ++k) {
        CHECK(flow.trajectory.times[k] == doctest::Approx(k * cfg.tau));
        const GridMeasure expected(grid, apply_heat(grid, k * cfg.eps, rho0.density()));
        CHECK(l1_distance(flow.trajectory.states[k], expected) <= 50.0 * cfg.inner_tol);
    }
}

TEST_CASE("entropy decreases along the entropy flow") {
    const Grid grid(1, 128);
    const GridMeasure rho0 = testing::two_bumps(grid, 0.3, 0.6, 0.05, 0.05);
    const FlowResult flow = run_flow(rho0, EnergySpec::internal_only(grid, InternalEnergy::boltzmann()),
                                     config(0.005, 0.005, 8));
    REQUIRE(flow.ok());
    for (std::size_t k = 1; k < flow.trajectory.size(); ++k) {
        CHECK(entropy(flow.trajectory.states[k]) < entropy(flow.trajectory.states[k - 1]));
        CHECK(std::abs(flow.trajectory.states[k].grid().mean(flow.trajectory.states[k].density()) - 1.0) <= 1e-14);
        CHECK(flow.trajectory.states[k].min() >= 0.0);
    }
}

TEST_CASE("the minimizer beats both competitors and the energy stays bounded") {
    const Grid grid(1, 64);
    const GridFunction V = testing::cosine(grid, 0.8);
    const GridFunction W = testing::cosine(grid, -0.5, 2);
    const EnergySpec spec(grid, V, W, InternalEnergy::boltzmann());
    const GridMeasure rho0 = testing::bump(grid, 0.35, 0.07, 0.1);
    const JkoConfig cfg = config(0.01, 0.01, 5);
    const FlowResult flow = run_flow(rho0, spec, cfg);
    REQUIRE(flow.ok());
    const auto& traj = flow.trajectory;
    const double slack = 10.0 * cfg.inner_tol;

    const double C = 2.0 * 0.5 * (sup_laplacian(grid, V) + sup_laplacian(grid, W));
    double running = 0.0;
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
        const GridMeasure& now = traj.states[k];
        const GridMeasure& next = traj.states[k + 1];
        const StepDiagnostics& d = traj.diagnostics[k];
        const double value = d.d_eps_sq / (2.0 * cfg.tau) + eval_F(spec, next);

        CHECK(d.dissipation_slack >= -slack);
        const GridFunction heat = apply_heat(grid, cfg.eps, now.density());
        CHECK(value <= 2.0 * cfg.eps * entropy(now) / (2.0 * cfg.tau) + eval_F(spec, heat) + slack);

        const auto [pot, report] = sinkhorn(now, now, cfg.eps, 1e-12, 100000);
        REQUIRE(report.converged);
        const double stay = cost_from_potentials(pot, now, now, cfg.eps);
        CHECK(value <= stay / (2.0 * cfg.tau) + eval_F(spec, now) + slack);

        CHECK(d.F_before == doctest::Approx(eval_F(spec, now)));
        CHECK(d.F_after == doctest::Approx(eval_F(spec, next)));
        CHECK(d.H_after == doctest::Approx(entropy(next)));
        CHECK(d.mass_correction <= 1e-8);
        CHECK(d.optimality_residual <= 1e-4);
        CHECK(d.interaction_iterations >= 1);

        running += d.d_eps_sq / (2.0 * cfg.tau) - (cfg.eps / cfg.tau) * entropy(now);
        const double steps = static_cast<double>(k + 1);
        CHECK(eval_F(spec, next) + running <= eval_F(spec, rho0) + C * steps * cfg.tau + steps * slack);
    }
}

TEST_CASE("optimality residual responds to perturbations") {
    const Grid grid(1, 128);
    const EnergySpec spec(grid, testing::cosine(grid, 0.5), GridFunction(grid.size(), 0.0), InternalEnergy::boltzmann());
    const GridMeasure mu = testing::bump(grid, 0.5, 0.08, 0.1);
    const ProxResult r = prox_step(mu, spec, config(0.01, 0.01));
    CHECK(optimality_residual(r.rho, r.potentials.phi, spec) <= 1e-4);

    GridFunction perturbed = r.rho.density();
    for (std::size_t i = 0; i < perturbed.size(); ++i) {
        perturbed[i] *= 1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * grid.node(i)[0]);
    }
    CHECK(optimality_residual(GridMeasure(grid, perturbed), r.potentials.phi, spec) > 1e-2);

    GridFunction holed = r.rho.density();
    holed[3] = 0.0;
    CHECK_THROWS_AS(optimality_residual(GridMeasure(grid, holed), r.potentials.phi, spec), DomainError);
    CHECK_THROWS_AS(optimality_residual(r.rho, GridFunction(4, 0.0), spec), GridMismatch);
}

TEST_CASE("porous-medium steps stay positive with small mass correction") {
    const Grid grid(1, 128);
    const EnergySpec spec(grid, testing::cosine(grid, 0.5), GridFunction(grid.size(), 0.0),
                          InternalEnergy::power_law(2.0));
    const double tau = 0.01;
    const FlowResult flow = run_flow(testing::bump(grid, 0.4, 0.1, 0.2), spec, config(tau, std::pow(tau, 1.5), 3));
    REQUIRE(flow.ok());
    for (const auto& d : flow.trajectory.diagnostics) {
        CHECK(d.mass_correction <= 1e-8);
        CHECK(d.dissipation_slack >= -1e-9);
        CHECK(d.optimality_residual <= 1e-4);
    }
}

TEST_CASE("two-dimensional flow") {
    const Grid grid(2, 16);
    const EnergySpec spec = EnergySpec::internal_only(grid, InternalEnergy::boltzmann());
    const FlowResult flow = run_flow(testing::bump(grid, 0.5, 0.1, 0.1), spec, config(0.01, 0.01, 2));
    REQUIRE(flow.ok());
    CHECK(flow.trajectory.size() == 3);
    for (const auto& d : flow.trajectory.diagnostics) {
        CHECK(d.dissipation_slack >= -1e-9);
        CHECK(d.H_after < d.H_before);
    }
}

TEST_CASE("failures") {
    const Grid grid(1, 64);
    const EnergySpec spec = EnergySpec::internal_only(grid, InternalEnergy::boltzmann());

    // A zero entry still has finite entropy, so the flow accepts it.
    GridFunction holed(grid.size(), 1.0);
    holed[0] = 0.0;
    CHECK_NOTHROW(run_flow(GridMeasure(grid, holed), spec, config(0.01, 0.01, 0)));
    const EnergySpec infinite(grid, GridFunction(grid.size(), std::numeric_limits<double>::max()),
                              GridFunction(grid.size(), 0.0), InternalEnergy::zero());
    CHECK_THROWS_AS(run_flow(GridMeasure::uniform(grid), infinite, config(0.01, 0.01)), DomainError);

    // An inner budget of one iteration cannot converge from a concentrated state.
    JkoConfig tight = config(0.01, 0.01, 3);
    tight.inner_max_iter = 1;
    const FlowResult flow = run_flow(testing::bump(grid, 0.5, 0.05, 0.01), spec, tight);
    CHECK_FALSE(flow.ok());
    CHECK(flow.trajectory.size() == 1);
    CHECK(flow.trajectory.diagnostics.empty());
    try {
        std::rethrow_exception(flow.error);
    } catch (const StepError& e) {
        CHECK(e.iterations() == 1);
        CHECK(e.residual() > tight.inner_tol);
        CHECK(e.partial().inner_iterations == 1);
        CHECK(e.partial().F_before == doctest::Approx(eval_F(spec, testing::bump(grid, 0.5, 0.05, 0.01))));
    }

    CHECK_THROWS_AS(prox_step(GridMeasure::uniform(Grid(1, 32)), spec, config(0.01, 0.01)), GridMismatch);
}

TEST_CASE("config validation names the field") {
    auto message = [](JkoConfig cfg) {
        try {
            cfg.validate();
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    JkoConfig cfg;
    CHECK(message(cfg).empty());
    cfg.tau = 0.0;
    CHECK(message(cfg).find("scheme.tau") != std::string::npos);
    cfg = JkoConfig{};
    cfg.eps = -1.0;
    CHECK(message(cfg).find("scheme.eps") != std::string::npos);
    cfg = JkoConfig{};
    cfg.inner_tol = 0.0;
    CHECK(message(cfg).find("solver.inner_tol") != std::string::npos);
    cfg = JkoConfig{};
    cfg.n_steps = -1;
    CHECK(message(cfg).find("scheme.n_steps") != std::string::npos);
    cfg = JkoConfig{};
    cfg.inner_max_iter = 0;
    CHECK(message(cfg).find("solver.inner_max_iter") != std::string::npos);
    CHECK(config(0.02, 0.01).lambda() == doctest::Approx(0.5));
}

#include "ejko/schrodinger.hpp"

#include "ejko/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace ejko {

GridFunction DualPotentials::log_a() const {
    GridFunction out(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) out[i] = psi[i] / lambda;
    return out;
}

GridFunction DualPotentials::log_b() const {
    GridFunction out(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) out[i] = phi[i] / lambda;
    return out;
}

void DualPotentials::shift_gauge(double c) {
    for (double& v : phi) v += c;
    for (double& v : psi) v -= c;
}

GridFunction log_heat(const HeatKernelOp& kernel, std::span<const double> log_values) {
    return kernel.log_apply(log_values);
}

namespace {

GridFunction log_of(const GridMeasure& mu) {
    GridFunction out(mu.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(mu[i]);
    return out;
}

double l1_defect(const Grid& grid, std::span<const double> log_left, std::span<const double> log_right,
                 const GridMeasure& target) {
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) s += std::abs(std::exp(log_left[i] + log_right[i]) - target[i]);
    return s * grid.weight();
}

void require_eps(double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("regularization eps must be > 0");
}

}  // namespace

std::pair<DualPotentials, SinkhornReport> sinkhorn(const GridMeasure& mu, const GridMeasure& nu, double eps,
                                                   double tol, int max_iter) {
    require_same_grid(mu.grid(), nu.grid(), "sinkhorn");
    require_eps(eps);
    if (!(tol > 0.0)) throw ConfigError("sinkhorn: tol must be > 0");
    if (max_iter < 1) throw ConfigError("sinkhorn: max_iter must be >= 1");
    if (!mu.strictly_positive() || !nu.strictly_positive()) {
        throw DomainError("sinkhorn: marginals must be strictly positive (finite entropy)");
    }

    const Grid& grid = mu.grid();
    const GridMeasure mu_pos = floor_density(mu);
    const GridMeasure nu_pos = floor_density(nu);
    const GridFunction log_mu = log_of(mu_pos);
    const GridFunction log_nu = log_of(nu_pos);
    const HeatKernelOp kernel(grid, eps);
    const std::size_t n = grid.size();

    GridFunction la(n, 0.0);
    GridFunction lb(n, 0.0);
    GridFunction lkb = log_heat(kernel, lb);

    SinkhornReport report;
    for (int it = 1; it <= max_iter; ++it) {
        for (std::size_t i = 0; i < n; ++i) la[i] = log_mu[i] - lkb[i];
        const GridFunction lka = log_heat(kernel, la);
        for (std::size_t i = 0; i < n; ++i) lb[i] = log_nu[i] - lka[i];

        const double shift = grid.mean(lb);
        for (std::size_t i = 0; i < n; ++i) {
            lb[i] -= shift;
            la[i] += shift;
        }
        lkb = log_heat(kernel, lb);

        const double r_mu = l1_defect(grid, la, lkb, mu);
        double r_nu = 0.0;
        for (std::size_t i = 0; i < n; ++i) r_nu += std::abs(std::exp(lb[i] + lka[i] + shift) - nu[i]);
        r_nu *= grid.weight();

        const double residual = std::max(r_mu, r_nu);
        report.iterations = it;
        report.final_residual = residual;
        report.residual_history.push_back(residual);
        if (!std::isfinite(residual)) break;
        if (residual <= tol) {
            report.converged = true;
            break;
        }
    }

    DualPotentials pot;
    pot.lambda = eps;
    pot.kernel_time = eps;
    pot.converged = report.converged;
    pot.phi.resize(n);
    pot.psi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        pot.phi[i] = eps * lb[i];
        pot.psi[i] = eps * la[i];
    }
    report.cost = eps * (grid.dot(la, mu.density()) + grid.dot(lb, nu.density()));
    if (!report.converged) {
        spdlog::warn("sinkhorn stopped after {} iterations with residual {:.3e} (tol {:.3e})", report.iterations,
                     report.final_residual, tol);
    }
    return {std::move(pot), std::move(report)};
}

double cost_from_potentials(const DualPotentials& pot, const GridMeasure& mu, const GridMeasure& nu, double eps) {
    require_same_grid(mu.grid(), nu.grid(), "cost_from_potentials");
    require_eps(eps);
    if (!pot.converged) throw SolverError("cost_from_potentials: potentials are not converged");
    if (pot.phi.size() != mu.size() || pot.psi.size() != mu.size()) {
        throw GridMismatch("cost_from_potentials: potential size does not match the grid");
    }
    const Grid& grid = mu.grid();
    return 2.0 * eps * (grid.dot(pot.log_a(), mu.density()) + grid.dot(pot.log_b(), nu.density()));
}

std::pair<double, double> marginal_residuals(const DualPotentials& pot, const GridMeasure& mu, const GridMeasure& nu) {
    require_same_grid(mu.grid(), nu.grid(), "marginal_residuals");
    const Grid& grid = mu.grid();
    const HeatKernelOp kernel(grid, pot.kernel_time);
    const GridFunction la = pot.log_a();
    const GridFunction lb = pot.log_b();
    return {l1_defect(grid, la, log_heat(kernel, lb), mu), l1_defect(grid, lb, log_heat(kernel, la), nu)};
}

Interpolant entropic_interpolation(const Grid& grid, const DualPotentials& pot, double eps, double s) {
    require_eps(eps);
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("entropic_interpolation: s must lie in [0,1]");
    if (pot.phi.size() != grid.size()) throw GridMismatch("entropic_interpolation: potential size mismatch");

    const GridFunction from_a = log_heat(HeatKernelOp(grid, eps * s), pot.log_a());
    const GridFunction from_b = log_heat(HeatKernelOp(grid, eps * (1.0 - s)), pot.log_b());
    GridFunction rho(grid.size());
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = std::exp(from_a[i] + from_b[i]);

    GridMeasure measure(grid, std::move(rho));
    const double correction = measure.normalization_correction();
    if (correction > 1e-8) {
        spdlog::warn("entropic interpolation at s={} renormalized by {:.3e}", s, correction);
    } else {
        spdlog::debug("entropic interpolation at s={} renormalized by {:.3e}", s, correction);
    }
    return {std::move(measure), correction};
}

VectorField forward_velocity(const Grid& grid, const DualPotentials& pot, double eps, double s) {
    require_eps(eps);
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("forward_velocity: s must lie in [0,1]");
    if (pot.phi.size() != grid.size()) throw GridMismatch("forward_velocity: potential size mismatch");
    GridFunction phi_s = log_heat(HeatKernelOp(grid, eps * (1.0 - s)), pot.log_b());
    for (double& v : phi_s) v *= pot.lambda;
    return spectral_gradient(grid, phi_s);
}

}  // namespace ejko

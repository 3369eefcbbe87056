#pragma once

#include "ejko/measure.hpp"
#include "ejko/torus_grid.hpp"

#include <utility>
#include <vector>

namespace ejko {

/// Schrodinger potentials in log-domain form.
///
/// The implicit plan is gamma_ij = a_i k(x_j - x_i) b_j / N^2 with
/// a = exp(psi / lambda), b = exp(phi / lambda) and k the heat kernel at
/// time `kernel_time`. Plain Sinkhorn uses lambda = kernel_time = eps; inside
/// a JKO step lambda = eps / tau while the kernel time stays eps.
struct DualPotentials {
    GridFunction phi;
    GridFunction psi;
    double lambda = 0.0;
    double kernel_time = 0.0;
    bool converged = false;

    GridFunction log_a() const;
    GridFunction log_b() const;
    /// phi += c, psi -= c; leaves the plan unchanged.
    void shift_gauge(double c);
};

struct SinkhornReport {
    int iterations = 0;
    double final_residual = 0.0;
    /// D_eps^2 / 2.
    double cost = 0.0;
    bool converged = false;
    /// Marginal residual after every iteration.
    std::vector<double> residual_history;
};

/// log(K_t exp(l)), accurate at every node even when the values span many
/// orders of magnitude (see HeatKernelOp::log_apply).
GridFunction log_heat(const HeatKernelOp& kernel, std::span<const double> log_values);

/// Log-domain Sinkhorn for min { eps H(gamma | R_eps) : gamma in Pi(mu, nu) }.
///
/// Iterates psi <- eps log mu - eps log K(exp(phi/eps)) and
/// phi <- eps log nu - eps log K(exp(psi/eps)), fixing mean(phi) = 0 after
/// every sweep. Stops when the L1 marginal residual drops below `tol`; a run
/// that exhausts `max_iter` returns with converged = false.
/// Throws DomainError if either measure has a zero entry.
std::pair<DualPotentials, SinkhornReport> sinkhorn(const GridMeasure& mu, const GridMeasure& nu, double eps,
                                                   double tol, int max_iter);

/// D_eps^2 = 2 eps [ <log a, mu> + <log b, nu> ] (grid-weighted).
/// Throws SolverError for unconverged potentials.
double cost_from_potentials(const DualPotentials& pot, const GridMeasure& mu, const GridMeasure& nu, double eps);

/// Marginal residuals ||a (K b) - mu||_1 and ||b (K a) - nu||_1.
std::pair<double, double> marginal_residuals(const DualPotentials& pot, const GridMeasure& mu, const GridMeasure& nu);

/// Result of an entropic interpolation, with the mass defect removed by the
/// final renormalization.
struct Interpolant {
    GridMeasure rho;
    double mass_correction;
};

/// rho_s = (K_{eps s} a) (K_{eps (1-s)} b), s in [0,1].
Interpolant entropic_interpolation(const Grid& grid, const DualPotentials& pot, double eps, double s);

/// grad phi(s) with phi(s) = lambda log(K_{eps (1-s)} b).
VectorField forward_velocity(const Grid& grid, const DualPotentials& pot, double eps, double s);

}  // namespace ejko

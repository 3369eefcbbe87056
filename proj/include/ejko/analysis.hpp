#pragma once

#include "ejko/energy.hpp"
#include "ejko/jko.hpp"
#include "ejko/measure.hpp"
#include "ejko/pde_ref.hpp"
#include "ejko/trajectory.hpp"

#include <functional>
#include <vector>

namespace ejko {

/// (1/N) sum |a_i - b_i|, in [0, 2].
double l1_distance(const GridMeasure& a, const GridMeasure& b);

/// The line formula was asked for measures that are not localized on a half-period.
class LocalizationError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Squared 2-Wasserstein distance of two 1D grid measures, each node value
/// read as an atom of mass rho_i / N at x_i.
///
/// The circle is cut opposite a window of length 1/2 that holds at least
/// 99.9% of both masses, and the quantile functions of the lifted measures
/// are integrated exactly by merging their breakpoints. Throws
/// LocalizationError when no such window exists.
double wasserstein2_1d(const GridMeasure& mu, const GridMeasure& nu);

/// L1 distance between the snapshots of `a` and `b` nearest to time t.
/// Throws ConfigError if t lies outside either time range.
double compare_trajectories(const Trajectory& a, const Trajectory& b, double t);

/// Samples a fine-grid measure at the nodes of a coarser grid whose
/// resolution divides it.
GridMeasure restrict_to(const GridMeasure& fine, const Grid& coarse);

struct SweepRow {
    double tau = 0.0;
    double eps = 0.0;
    /// Target regime alpha = lim eps / tau.
    double alpha = 0.0;
    /// eps / tau actually used (equals alpha unless alpha = 0).
    double ratio = 0.0;
    int n = 0;
    /// Terminal L1 error against the PDE reference with the same alpha.
    double l1_error = 0.0;
    /// Terminal L1 error against the alpha = 0 PDE reference.
    double l1_error_vs_alpha0 = 0.0;
    double mean_sinkhorn_iterations = 0.0;
    double wall_time_s = 0.0;
};

/// Builds the initial state and energy on any grid, so the reference can be
/// computed at a finer resolution than the scheme.
struct SweepProblem {
    std::function<GridMeasure(const Grid&)> initial;
    std::function<EnergySpec(const Grid&)> energy;
};

struct SweepOptions {
    std::vector<double> alphas;
    std::vector<double> taus;
    double t_end = 0.05;
    int dim = 1;
    int n = 64;
    /// The reference runs on a grid this many times finer.
    int reference_factor = 2;
    /// alpha = 0 cannot be realized as eps = 0; it is approached through eps = tau^p.
    double zero_alpha_exponent = 1.5;
    /// Tolerances for the JKO steps; tau, eps and n_steps are set per row.
    JkoConfig solver;
    double cfl_safety = 0.4;
};

/// One row per (alpha, tau) pair, alphas outermost, in input order.
std::vector<SweepRow> run_sweep(const SweepProblem& problem, const SweepOptions& options);

/// eps used for a sweep row.
double sweep_eps(double alpha, double tau, double zero_alpha_exponent);

}  // namespace ejko

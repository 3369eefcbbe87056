#pragma once

#include "ejko/energy.hpp"
#include "ejko/errors.hpp"
#include "ejko/measure.hpp"
#include "ejko/schrodinger.hpp"
#include "ejko/trajectory.hpp"

#include <exception>
#include <optional>
#include <span>

namespace ejko {

/// Parameters of the entropic JKO scheme.
///
/// Each step minimizes D_eps(rho_n, rho)^2 / (2 tau) + F(rho). The static
/// Gibbs kernel of a step is the heat kernel at time eps and the KL weight
/// is lambda = eps / tau.
struct JkoConfig {
    double tau = 0.01;
    double eps = 0.01;
    int n_steps = 1;
    double inner_tol = 1e-10;
    int inner_max_iter = 20000;
    double interaction_tol = 1e-10;
    int interaction_max_iter = 500;
    double newton_tol = 1e-14;

    double lambda() const noexcept { return eps / tau; }
    /// Throws ConfigError naming the first invalid field.
    void validate() const;
};

/// A step that failed to converge; carries what was known at the time.
class StepError : public ConvergenceError {
public:
    StepError(const std::string& what, int iterations, double residual, StepDiagnostics partial)
        : ConvergenceError(what, iterations, residual), partial_(partial) {}
    const StepDiagnostics& partial() const noexcept { return partial_; }

private:
    StepDiagnostics partial_;
};

struct ProxResult {
    GridMeasure rho;
    DualPotentials potentials;
    StepDiagnostics diagnostics;
};

/// One entropic JKO step from `mu`.
///
/// Alternates the plain Sinkhorn update enforcing the first marginal with a
/// KL-proximal update of the second marginal: given s = K_eps a, every node
/// solves lambda log(rho / s) + V_eff + f'(rho) = 0 and sets b = rho / s. The
/// interaction enters through V_eff = V + W * rho_lag, where rho_lag is
/// refreshed in an outer loop until it stops moving in L1.
/// `warm_log_b` optionally seeds log b (e.g. from the previous step).
ProxResult prox_step(const GridMeasure& mu, const EnergySpec& spec, const JkoConfig& cfg,
                     std::optional<std::span<const double>> warm_log_b = std::nullopt);

/// Root of rho -> lambda log(rho / s) + v_eff + f'(rho) on the open domain of f.
double marginal_update_root(double lambda, double s, double v_eff, const InternalEnergy& internal, double tol);
/// Same equation solved for u = log rho, given log s.
double marginal_update_log_root(double lambda, double log_s, double v_eff, const InternalEnergy& internal,
                                double tol);

struct FlowResult {
    Trajectory trajectory;
    /// Set when a step failed; the trajectory then holds the steps that succeeded.
    std::exception_ptr error;

    bool ok() const noexcept { return !error; }
};

/// Iterates prox_step n_steps times from rho0. States are stamped t_n = n tau.
/// Throws DomainError if F(rho0) or H(rho0) is infinite.
FlowResult run_flow(const GridMeasure& rho0, const EnergySpec& spec, const JkoConfig& cfg);

/// Spread of zeta = phi + V + W * rho + f'(rho): population standard
/// deviation of zeta divided by max(1, range(phi), range(V + W * rho + f'(rho))).
/// Vanishes when zeta is constant.
double optimality_residual(const GridMeasure& rho_next, std::span<const double> phi, const EnergySpec& spec);

}  // namespace ejko

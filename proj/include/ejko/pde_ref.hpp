#pragma once

#include "ejko/energy.hpp"
#include "ejko/errors.hpp"
#include "ejko/measure.hpp"
#include "ejko/trajectory.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace ejko {

/// Explicit solver for
///   d_t rho - div(rho (grad V + grad W * rho)) = Lap g(rho) + (alpha/2) Lap rho
/// on the torus.
struct PdeConfig {
    double alpha = 0.0;
    double t_end = 0.1;
    double cfl_safety = 0.4;
    double max_dt = std::numeric_limits<double>::infinity();
    /// Snapshot instants in (0, t_end]; t = 0 and t_end are always recorded.
    std::vector<double> snapshot_times;

    void validate() const;
};

/// Blow-up or step-size collapse; carries the last state that passed the checks.
class PdeError : public SolverError {
public:
    PdeError(const std::string& what, double time, GridMeasure last_valid)
        : SolverError(what), time_(time), last_valid_(std::move(last_valid)) {}
    double time() const noexcept { return time_; }
    const GridMeasure& last_valid() const noexcept { return last_valid_; }

private:
    double time_;
    GridMeasure last_valid_;
};

/// Largest dt keeping the explicit update monotone:
/// dt (max|u| / h + 2 d D_max / h^2) <= 1 with D = g'(rho) + alpha/2.
double stable_dt(const GridMeasure& state, const EnergySpec& spec, double alpha);

/// CFL-limited step used by solve_pde:
/// cfl * min(h / max|u|, h^2 / (2 d D_max)).
double cfl_dt(const GridMeasure& state, const EnergySpec& spec, double alpha, double cfl_safety);

struct PdeStepInfo {
    double min_before_clip = 0.0;
    double mass_correction = 0.0;
};

/// One conservative explicit update: upwind advection with face velocity
/// averaged from the spectral gradient of V + W * rho, central differences
/// on g(rho) + (alpha/2) rho. Throws SolverError if dt exceeds stable_dt.
GridMeasure pde_step(const GridMeasure& state, const EnergySpec& spec, double alpha, double dt,
                     PdeStepInfo* info = nullptr);

/// Marches from rho0 to cfg.t_end, landing exactly on every snapshot time.
Trajectory solve_pde(const GridMeasure& rho0, const EnergySpec& spec, const PdeConfig& cfg);

}  // namespace ejko

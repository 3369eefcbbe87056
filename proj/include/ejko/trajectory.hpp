#pragma once

#include "ejko/measure.hpp"

#include <vector>

namespace ejko {

/// Per-step record of an entropic JKO step.
struct StepDiagnostics {
    double d_eps_sq = 0.0;
    double F_before = 0.0;
    double F_after = 0.0;
    double H_before = 0.0;
    double H_after = 0.0;
    double optimality_residual = 0.0;
    int inner_iterations = 0;
    int interaction_iterations = 0;
    /// [eps H(rho_n) / tau + F(rho_n * sigma_eps)] - [D_eps^2 / (2 tau) + F(rho_{n+1})].
    double dissipation_slack = 0.0;
    double mass_correction = 0.0;
};

/// Time-stamped snapshots. JKO trajectories store one state per step and
/// one diagnostics entry per step; PDE trajectories leave diagnostics empty.
struct Trajectory {
    std::vector<double> times;
    std::vector<GridMeasure> states;
    std::vector<StepDiagnostics> diagnostics;

    std::size_t size() const noexcept { return states.size(); }
    bool empty() const noexcept { return states.empty(); }
    const GridMeasure& back() const { return states.back(); }
};

}  // namespace ejko

#include "ejko/pde_ref.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ejko {

void PdeConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("pde.alpha must be >= 0");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("pde.t_end must be > 0");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) throw ConfigError("pde.cfl_safety must lie in (0, 1]");
    if (!(max_dt > 0.0)) throw ConfigError("pde.max_dt must be > 0");
    for (double t : snapshot_times) {
        if (!(t > 0.0 && t <= t_end)) throw ConfigError("pde snapshot times must lie in (0, t_end]");
    }
}

namespace {

constexpr double kMinDt = 1e-12;

/// u = -grad(V + W * rho) per axis.
VectorField advection_velocity(const GridMeasure& state, const EnergySpec& spec) {
    GridFunction potential = spec.effective_potential(state.density());
    VectorField u = spectral_gradient(state.grid(), potential);
    for (auto& axis : u) {
        for (double& v : axis) v = -v;
    }
    return u;
}

// Effective diffusivity bounding the diffusive outflow of a node: the
// nonlinear flux g(rho_i) is at most D rho_i.
double local_diffusivity(const InternalEnergy& internal, double rho, double alpha) {
    double d = internal.g_prime_closed(rho);
    if (rho > 0.0) d = std::max(d, internal.g_closed(rho) / rho);
    return d + 0.5 * alpha;
}

double stable_dt_with(const GridMeasure& state, const EnergySpec& spec, double alpha, const VectorField& u) {
    const Grid& grid = state.grid();
    const double h = grid.spacing();
    const int d = grid.dim();
    double worst_rate = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double outflow = 0.0;
        for (int a = 0; a < d; ++a) {
            const std::size_t right = grid.neighbor(i, a, +1);
            const std::size_t left = grid.neighbor(i, a, -1);
            outflow += std::max(0.5 * (u[a][i] + u[a][right]), 0.0);
            outflow += std::max(-0.5 * (u[a][i] + u[a][left]), 0.0);
        }
        const double rate = outflow / h + 2.0 * d * local_diffusivity(spec.internal(), state[i], alpha) / (h * h);
        worst_rate = std::max(worst_rate, rate);
    }
    return worst_rate > 0.0 ? 1.0 / worst_rate : std::numeric_limits<double>::infinity();
}

double cfl_dt_with(const GridMeasure& state, const EnergySpec& spec, double alpha, double cfl, const VectorField& u) {
    const Grid& grid = state.grid();
    const double h = grid.spacing();
    double max_u = 0.0;
    for (const auto& axis : u) {
        for (double v : axis) max_u = std::max(max_u, std::abs(v));
    }
    double max_diffusivity = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        max_diffusivity = std::max(max_diffusivity, local_diffusivity(spec.internal(), state[i], alpha));
    }
    double dt = std::numeric_limits<double>::infinity();
    if (max_u > 0.0) dt = std::min(dt, h / max_u);
    if (max_diffusivity > 0.0) dt = std::min(dt, h * h / (2.0 * grid.dim() * max_diffusivity));
    return cfl * dt;
}

/// Conservative update without clipping.
GridFunction raw_update(const GridMeasure& state, const EnergySpec& spec, double alpha, double dt, const VectorField& u) {
    const Grid& grid = state.grid();
    const double h = grid.spacing();
    const auto& internal = spec.internal();
    const std::size_t n = grid.size();

    GridFunction flux_potential(n);
    for (std::size_t i = 0; i < n; ++i) flux_potential[i] = internal.g_closed(state[i]) + 0.5 * alpha * state[i];

    GridFunction next = state.density();
    const double ratio = dt / h;
    for (int a = 0; a < grid.dim(); ++a) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = grid.neighbor(i, a, +1);
            const double face_u = 0.5 * (u[a][i] + u[a][j]);
            const double advective = face_u > 0.0 ? face_u * state[i] : face_u * state[j];
            const double diffusive = -(flux_potential[j] - flux_potential[i]) / h;
            const double flux = advective + diffusive;
            next[i] -= ratio * flux;
            next[j] += ratio * flux;
        }
    }
    return next;
}

GridMeasure finish_step(const Grid& grid, GridFunction next, PdeStepInfo* info) {
    double lowest = std::numeric_limits<double>::infinity();
    for (double& v : next) {
        if (!std::isfinite(v)) throw SolverError("pde_step: non-finite density");
        lowest = std::min(lowest, v);
        v = std::max(v, 0.0);
    }
    GridMeasure out(grid, std::move(next));
    if (out.normalization_correction() > 1e-12) {
        spdlog::warn("pde_step: renormalization correction {:.3e}", out.normalization_correction());
    }
    if (info) {
        info->min_before_clip = lowest;
        info->mass_correction = out.normalization_correction();
    }
    return out;
}

}  // namespace

double stable_dt(const GridMeasure& state, const EnergySpec& spec, double alpha) {
    require_same_grid(state.grid(), spec.grid(), "stable_dt");
    return stable_dt_with(state, spec, alpha, advection_velocity(state, spec));
}

double cfl_dt(const GridMeasure& state, const EnergySpec& spec, double alpha, double cfl_safety) {
    require_same_grid(state.grid(), spec.grid(), "cfl_dt");
    return cfl_dt_with(state, spec, alpha, cfl_safety, advection_velocity(state, spec));
}

GridMeasure pde_step(const GridMeasure& state, const EnergySpec& spec, double alpha, double dt, PdeStepInfo* info) {
    require_same_grid(state.grid(), spec.grid(), "pde_step");
    if (!(alpha >= 0.0)) throw ConfigError("pde_step: alpha must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("pde_step: dt must be > 0");
    const VectorField u = advection_velocity(state, spec);
    const double limit = stable_dt_with(state, spec, alpha, u);
    if (dt > limit) {
        std::ostringstream os;
        os << "pde_step: dt=" << dt << " violates the stability bound " << limit;
        throw SolverError(os.str());
    }
    return finish_step(state.grid(), raw_update(state, spec, alpha, dt, u), info);
}

Trajectory solve_pde(const GridMeasure& rho0, const EnergySpec& spec, const PdeConfig& cfg) {
    cfg.validate();
    require_same_grid(rho0.grid(), spec.grid(), "solve_pde");
    const Grid& grid = rho0.grid();

    std::vector<double> targets = cfg.snapshot_times;
    targets.push_back(cfg.t_end);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(rho0);

    // Without interaction the velocity does not depend on the state.
    std::optional<VectorField> frozen_u;
    if (!spec.has_interaction()) frozen_u = advection_velocity(rho0, spec);

    GridMeasure state = rho0;
    double t = 0.0;
    for (double target : targets) {
        while (t < target) {
            const VectorField u = frozen_u ? *frozen_u : advection_velocity(state, spec);
            const double limit = stable_dt_with(state, spec, cfg.alpha, u);
            const double proposal = std::min({cfl_dt_with(state, spec, cfg.alpha, cfg.cfl_safety, u), limit, cfg.max_dt});
            if (proposal < kMinDt) {
                throw PdeError("solve_pde: time step underflow (dt=" + std::to_string(proposal) + ")", t, state);
            }
            double dt = proposal;
            bool lands = false;
            if (t + dt >= target) {
                dt = target - t;
                lands = true;
            }
            GridFunction raw = raw_update(state, spec, cfg.alpha, dt, u);
            const double scale = std::max(1.0, state.max());
            for (double v : raw) {
                if (!std::isfinite(v) || v < -1e-14 * scale) {
                    throw PdeError("solve_pde: blow-up (non-finite or negative density)", t, state);
                }
            }
            state = finish_step(grid, std::move(raw), nullptr);
            t = lands ? target : t + dt;
        }
        traj.times.push_back(target);
        traj.states.push_back(state);
    }
    return traj;
}

}  // namespace ejko

#include "ejko/jko.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ejko {

void JkoConfig::validate() const {
    auto positive = [](double v, const char* key) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be > 0");
    };
    positive(tau, "scheme.tau");
    positive(eps, "scheme.eps");
    positive(inner_tol, "solver.inner_tol");
    positive(interaction_tol, "solver.interaction_tol");
    positive(newton_tol, "solver.newton_tol");
    if (n_steps < 0) throw ConfigError("scheme.n_steps must be >= 0");
    if (inner_max_iter < 1) throw ConfigError("solver.inner_max_iter must be >= 1");
    if (interaction_max_iter < 1) throw ConfigError("solver.interaction_max_iter must be >= 1");
}

// ---------------------------------------------------------------------------
// Pointwise marginal update

namespace {

constexpr int kMaxBracketDoublings = 200;
constexpr int kMaxNewtonIterations = 200;

// f'(e^u) and d/du f'(e^u) = e^u f''(e^u).
double fprime_at_log(const InternalEnergy& internal, double u) {
    switch (internal.kind()) {
    case InternalKind::Zero: return 0.0;
    case InternalKind::BoltzmannEntropy: return u + 1.0;
    case InternalKind::PowerLaw: {
        const double m = internal.exponent();
        return m / (m - 1.0) * std::exp((m - 1.0) * u);
    }
    }
    return 0.0;
}

double dfprime_at_log(const InternalEnergy& internal, double u) {
    switch (internal.kind()) {
    case InternalKind::Zero: return 0.0;
    case InternalKind::BoltzmannEntropy: return 1.0;
    case InternalKind::PowerLaw: {
        const double m = internal.exponent();
        return m * std::exp((m - 1.0) * u);
    }
    }
    return 0.0;
}

std::string bracket_message(const char* what, double lambda, double log_s, double v_eff, double lo, double hi) {
    std::ostringstream os;
    os << what << " (lambda=" << lambda << ", log s=" << log_s << ", v_eff=" << v_eff << ", log-bracket=[" << lo
       << ", " << hi << "])";
    return os.str();
}

}  // namespace

double marginal_update_log_root(double lambda, double log_s, double v_eff, const InternalEnergy& internal,
                                double tol) {
    if (!(lambda > 0.0)) throw ConfigError("marginal update: lambda must be > 0");
    const double u0 = log_s - v_eff / lambda;
    if (internal.kind() == InternalKind::Zero) return u0;

    auto h = [&](double u) { return lambda * (u - log_s) + v_eff + fprime_at_log(internal, u); };
    auto dh = [&](double u) { return lambda + dfprime_at_log(internal, u); };

    const double h0 = h(u0);
    if (h0 == 0.0) return u0;

    // h is increasing in u; grow the bracket away from u0 until h changes sign.
    double lo = u0;
    double hi = u0;
    double step = 1.0;
    int doublings = 0;
    if (h0 > 0.0) {
        for (lo = u0 - step; h(lo) > 0.0; lo = u0 - step) {
            hi = lo;
            step *= 2.0;
            if (++doublings > kMaxBracketDoublings) {
                throw SolverError(bracket_message("marginal update: bracket search failed", lambda, log_s, v_eff, lo, hi));
            }
        }
    } else {
        for (hi = u0 + step; h(hi) < 0.0; hi = u0 + step) {
            lo = hi;
            step *= 2.0;
            if (++doublings > kMaxBracketDoublings) {
                throw SolverError(bracket_message("marginal update: bracket search failed", lambda, log_s, v_eff, lo, hi));
            }
        }
    }

    double u = u0;
    for (int it = 0; it < kMaxNewtonIterations; ++it) {
        const double hu = h(u);
        if (hu == 0.0) return u;
        if (hu > 0.0) hi = std::min(hi, u);
        else lo = std::max(lo, u);
        double next = u - hu / dh(u);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - u) <= tol * std::max(1.0, std::abs(u)) || hi - lo <= tol * std::max(1.0, std::abs(u))) {
            return next;
        }
        u = next;
    }
    throw SolverError(bracket_message("marginal update: Newton iteration did not converge", lambda, log_s, v_eff, lo, hi));
}

double marginal_update_root(double lambda, double s, double v_eff, const InternalEnergy& internal, double tol) {
    if (!(s > 0.0)) throw DomainError("marginal update: s must be > 0");
    return std::exp(marginal_update_log_root(lambda, std::log(s), v_eff, internal, tol));
}

// ---------------------------------------------------------------------------
// Proximal step

ProxResult prox_step(const GridMeasure& mu, const EnergySpec& spec, const JkoConfig& cfg,
                     std::optional<std::span<const double>> warm_log_b) {
    cfg.validate();
    require_same_grid(mu.grid(), spec.grid(), "prox_step");
    const Grid& grid = mu.grid();
    const std::size_t n = grid.size();
    const double lambda = cfg.lambda();
    const auto& internal = spec.internal();

    const GridMeasure mu_pos = floor_density(mu);
    GridFunction log_mu(n);
    for (std::size_t i = 0; i < n; ++i) log_mu[i] = std::log(mu_pos[i]);

    const HeatKernelOp kernel(grid, cfg.eps);
    GridFunction lb(n, 0.0);
    if (warm_log_b && warm_log_b->size() == n) std::copy(warm_log_b->begin(), warm_log_b->end(), lb.begin());
    GridFunction lkb = log_heat(kernel, lb);
    GridFunction la(n, 0.0);
    GridFunction u(n, 0.0);
    GridFunction rho_lag = mu_pos.density();

    StepDiagnostics diag;
    diag.F_before = eval_F(spec, mu);
    diag.H_before = entropy(mu);

    double previous_gap = std::numeric_limits<double>::infinity();
    double damping = 1.0;
    for (int outer = 1;; ++outer) {
        diag.interaction_iterations = outer;
        const GridFunction v_eff = spec.effective_potential(rho_lag);

        bool converged = false;
        double residual = std::numeric_limits<double>::infinity();
        for (int it = 1; it <= cfg.inner_max_iter; ++it) {
            for (std::size_t i = 0; i < n; ++i) la[i] = log_mu[i] - lkb[i];
            const GridFunction lka = log_heat(kernel, la);
            for (std::size_t j = 0; j < n; ++j) {
                try {
                    u[j] = marginal_update_log_root(lambda, lka[j], v_eff[j], internal, cfg.newton_tol);
                } catch (const SolverError& e) {
                    throw StepError(std::string(e.what()) + " at node " + std::to_string(j), diag.inner_iterations,
                                    residual, diag);
                }
                lb[j] = u[j] - lka[j];
            }
            lkb = log_heat(kernel, lb);

            residual = 0.0;
            for (std::size_t i = 0; i < n; ++i) residual += std::abs(std::exp(la[i] + lkb[i]) - mu[i]);
            residual *= grid.weight();
            ++diag.inner_iterations;
            if (!std::isfinite(residual)) break;
            if (residual <= cfg.inner_tol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw StepError("prox_step: generalized Sinkhorn did not reach inner_tol", diag.inner_iterations, residual,
                            diag);
        }
        if (!spec.has_interaction()) break;

        double gap = 0.0;
        for (std::size_t i = 0; i < n; ++i) gap += std::abs(std::exp(u[i]) - rho_lag[i]);
        gap *= grid.weight();
        if (gap <= cfg.interaction_tol) break;
        if (outer >= cfg.interaction_max_iter) {
            throw StepError("prox_step: interaction loop did not reach interaction_tol", outer, gap, diag);
        }
        if (gap > previous_gap && damping == 1.0) {
            spdlog::debug("prox_step: interaction loop oscillates, damping rho_lag updates");
            damping = 0.5;
        }
        previous_gap = gap;
        for (std::size_t i = 0; i < n; ++i) rho_lag[i] += damping * (std::exp(u[i]) - rho_lag[i]);
    }

    GridFunction rho(n);
    for (std::size_t i = 0; i < n; ++i) rho[i] = std::exp(u[i]);
    GridMeasure next(grid, std::move(rho));
    diag.mass_correction = next.normalization_correction();
    if (diag.mass_correction > 1e-8) {
        spdlog::warn("prox_step: mass correction {:.3e} exceeds 1e-8", diag.mass_correction);
    } else {
        spdlog::debug("prox_step: mass correction {:.3e}", diag.mass_correction);
    }

    DualPotentials pot;
    pot.lambda = lambda;
    pot.kernel_time = cfg.eps;
    pot.converged = true;
    pot.phi.resize(n);
    pot.psi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        pot.phi[i] = lambda * lb[i];
        pot.psi[i] = lambda * la[i];
    }
    pot.shift_gauge(-grid.mean(pot.phi));

    diag.d_eps_sq = cost_from_potentials(pot, mu, next, cfg.eps);
    diag.F_after = eval_F(spec, next);
    diag.H_after = entropy(next);
    diag.optimality_residual = optimality_residual(next, pot.phi, spec);
    const GridFunction heat_competitor = kernel.apply(mu.density());
    diag.dissipation_slack = (cfg.eps * diag.H_before / cfg.tau + eval_F(spec, heat_competitor)) -
                             (diag.d_eps_sq / (2.0 * cfg.tau) + diag.F_after);

    return {std::move(next), std::move(pot), diag};
}

// ---------------------------------------------------------------------------

FlowResult run_flow(const GridMeasure& rho0, const EnergySpec& spec, const JkoConfig& cfg) {
    cfg.validate();
    require_same_grid(rho0.grid(), spec.grid(), "run_flow");
    if (!std::isfinite(eval_F(spec, rho0)) || !std::isfinite(entropy(rho0))) {
        throw DomainError("run_flow: the initial state must have finite energy and entropy");
    }

    FlowResult result;
    auto& traj = result.trajectory;
    traj.times.push_back(0.0);
    traj.states.push_back(rho0);

    GridFunction warm;
    for (int step = 1; step <= cfg.n_steps; ++step) {
        try {
            std::optional<std::span<const double>> seed;
            if (!warm.empty()) seed = std::span<const double>(warm);
            ProxResult r = prox_step(traj.states.back(), spec, cfg, seed);
            warm = r.potentials.log_b();
            traj.times.push_back(step * cfg.tau);
            traj.states.push_back(std::move(r.rho));
            traj.diagnostics.push_back(r.diagnostics);
        } catch (const std::exception& e) {
            spdlog::error("run_flow: step {} failed: {}", step, e.what());
            result.error = std::current_exception();
            break;
        }
    }
    return result;
}

double optimality_residual(const GridMeasure& rho_next, std::span<const double> phi, const EnergySpec& spec) {
    require_same_grid(rho_next.grid(), spec.grid(), "optimality_residual");
    if (phi.size() != rho_next.size()) throw GridMismatch("optimality_residual: potential size mismatch");
    const GridFunction variation = first_variation(spec, rho_next);
    const std::size_t n = variation.size();

    auto range = [](std::span<const double> v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *hi - *lo;
    };
    GridFunction zeta(n);
    for (std::size_t i = 0; i < n; ++i) zeta[i] = phi[i] + variation[i];
    double mean = 0.0;
    for (double z : zeta) mean += z;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double z : zeta) var += (z - mean) * (z - mean);
    var /= static_cast<double>(n);

    const double scale = std::max({1.0, range(phi), range(variation)});
    return std::sqrt(var) / scale;
}

}  // namespace ejko

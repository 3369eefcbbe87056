#include "ejko/analysis.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <sstream>

namespace ejko {

double l1_distance(const GridMeasure& a, const GridMeasure& b) {
    require_same_grid(a.grid(), b.grid(), "l1_distance");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum * a.grid().weight();
}

namespace {

constexpr double kLocalizedMass = 0.999;

// Masses of the windows [x_s, x_s + 1/2], inclusive, for every start node s.
std::vector<double> window_masses(const GridMeasure& m, int width) {
    const int n = static_cast<int>(m.size());
    std::vector<double> out(n, 0.0);
    double running = 0.0;
    for (int k = 0; k < width; ++k) running += m[k];
    for (int s = 0; s < n; ++s) {
        out[s] = running * m.grid().weight();
        running += m[(s + width) % n] - m[s];
    }
    return out;
}

}  // namespace

double wasserstein2_1d(const GridMeasure& mu, const GridMeasure& nu) {
    require_same_grid(mu.grid(), nu.grid(), "wasserstein2_1d");
    const Grid& grid = mu.grid();
    if (grid.dim() != 1) throw ConfigError("wasserstein2_1d: only 1D grids are supported");
    const int n = grid.n();
    const double h = grid.spacing();
    const int width = n / 2 + 1;

    const auto wm = window_masses(mu, width);
    const auto wn = window_masses(nu, width);
    int start = 0;
    double best = -1.0;
    for (int s = 0; s < n; ++s) {
        const double held = std::min(wm[s], wn[s]);
        if (held > best) {
            best = held;
            start = s;
        }
    }
    if (best < kLocalizedMass - 1e-12) {
        std::ostringstream os;
        os << "wasserstein2_1d: no interval of length 1/2 holds 99.9% of both masses (best " << best
           << "); the quantile formula on the line is not valid for spread-out measures on the circle";
        throw LocalizationError(os.str());
    }

    // Cut a quarter period before the window so it sits in [1/4, 3/4].
    const int shift = n / 4 - start;
    std::vector<double> pos(n), pa(n), pb(n);
    for (int k = 0; k < n; ++k) {
        const int node = ((k - shift) % n + n) % n;
        pos[k] = k * h;
        pa[k] = mu[node] * grid.weight();
        pb[k] = nu[node] * grid.weight();
    }

    double total = 0.0;
    int i = 0;
    int j = 0;
    double ra = pa[0];
    double rb = pb[0];
    while (i < n && j < n) {
        const double q = std::min(ra, rb);
        const double dx = pos[i] - pos[j];
        total += q * dx * dx;
        ra -= q;
        rb -= q;
        if (ra <= 0.0 && ++i < n) ra = pa[i];
        if (rb <= 0.0 && ++j < n) rb = pb[j];
    }
    return total;
}

namespace {

std::size_t nearest_index(const Trajectory& traj, double t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < traj.times.size(); ++k) {
        if (std::abs(traj.times[k] - t) <= std::abs(traj.times[best] - t)) best = k;
    }
    return best;
}

}  // namespace

double compare_trajectories(const Trajectory& a, const Trajectory& b, double t) {
    if (a.empty() || b.empty()) throw ConfigError("compare_trajectories: empty trajectory");
    const double slack = 1e-9;
    const double lo = std::max(a.times.front(), b.times.front());
    const double hi = std::min(a.times.back(), b.times.back());
    if (!(t >= lo - slack && t <= hi + slack)) {
        std::ostringstream os;
        os << "compare_trajectories: t=" << t << " lies outside the common horizon [" << lo << ", " << hi << "]";
        throw ConfigError(os.str());
    }
    return l1_distance(a.states[nearest_index(a, t)], b.states[nearest_index(b, t)]);
}

GridMeasure restrict_to(const GridMeasure& fine, const Grid& coarse) {
    const Grid& f = fine.grid();
    if (f.dim() != coarse.dim() || f.n() % coarse.n() != 0) {
        throw GridMismatch("restrict_to: the coarse resolution must divide the fine one");
    }
    const int factor = f.n() / coarse.n();
    GridFunction values(coarse.size());
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        auto idx = coarse.multi_index(i);
        for (auto& k : idx) k *= factor;
        values[i] = fine[f.flat_index(idx)];
    }
    return GridMeasure(coarse, std::move(values));
}

double sweep_eps(double alpha, double tau, double zero_alpha_exponent) {
    if (alpha > 0.0) return alpha * tau;
    return std::pow(tau, zero_alpha_exponent);
}

std::vector<SweepRow> run_sweep(const SweepProblem& problem, const SweepOptions& options) {
    if (!problem.initial || !problem.energy) throw ConfigError("run_sweep: problem builders are not set");
    if (!(options.t_end > 0.0)) throw ConfigError("sweep.t_end must be > 0");
    if (options.reference_factor < 1) throw ConfigError("sweep.reference_factor must be >= 1");
    if (!(options.zero_alpha_exponent > 1.0)) throw ConfigError("sweep.zero_alpha_exponent must be > 1");
    for (double a : options.alphas) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("sweep.alphas must be finite and >= 0");
    }
    std::vector<int> steps;
    for (double tau : options.taus) {
        if (!(tau > 0.0)) throw ConfigError("sweep.taus must be > 0");
        const double k = options.t_end / tau;
        if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
            throw ConfigError("sweep.taus must divide sweep.t_end");
        }
        steps.push_back(static_cast<int>(std::round(k)));
    }
    std::vector<SweepRow> rows;
    if (options.alphas.empty() || options.taus.empty()) return rows;

    const Grid grid(options.dim, options.n);
    const Grid fine(options.dim, options.n * options.reference_factor);
    const GridMeasure rho0 = problem.initial(grid);
    const EnergySpec spec = problem.energy(grid);
    const GridMeasure fine_rho0 = problem.initial(fine);
    const EnergySpec fine_spec = problem.energy(fine);

    auto reference = [&](double alpha) {
        PdeConfig pde;
        pde.alpha = alpha;
        pde.t_end = options.t_end;
        pde.cfl_safety = options.cfl_safety;
        const Trajectory traj = solve_pde(fine_rho0, fine_spec, pde);
        return restrict_to(traj.back(), grid);
    };
    const GridMeasure reference_alpha0 = reference(0.0);

    for (double alpha : options.alphas) {
        const GridMeasure reference_alpha = alpha > 0.0 ? reference(alpha) : reference_alpha0;
        for (std::size_t k = 0; k < options.taus.size(); ++k) {
            const auto started = std::chrono::steady_clock::now();
            JkoConfig cfg = options.solver;
            cfg.tau = options.taus[k];
            cfg.eps = sweep_eps(alpha, cfg.tau, options.zero_alpha_exponent);
            cfg.n_steps = steps[k];
            spdlog::info("sweep: alpha={} tau={} eps={} steps={}", alpha, cfg.tau, cfg.eps, cfg.n_steps);
            FlowResult flow = run_flow(rho0, spec, cfg);
            if (!flow.ok()) std::rethrow_exception(flow.error);

            SweepRow row;
            row.tau = cfg.tau;
            row.eps = cfg.eps;
            row.alpha = alpha;
            row.ratio = cfg.eps / cfg.tau;
            row.n = options.n;
            row.l1_error = l1_distance(flow.trajectory.back(), reference_alpha);
            row.l1_error_vs_alpha0 = l1_distance(flow.trajectory.back(), reference_alpha0);
            double iterations = 0.0;
            for (const auto& d : flow.trajectory.diagnostics) iterations += d.inner_iterations;
            if (!flow.trajectory.diagnostics.empty()) {
                iterations /= static_cast<double>(flow.trajectory.diagnostics.size());
            }
            row.mean_sinkhorn_iterations = iterations;
            row.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace ejko

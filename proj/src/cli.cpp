#include "ejko/cli.hpp"

#include "ejko/analysis.hpp"
#include "ejko/energy.hpp"
#include "ejko/errors.hpp"
#include "ejko/jko.hpp"
#include "ejko/pde_ref.hpp"
#include "ejko/schrodinger.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace ejko::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config text

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::pair<std::string, std::string> split_assignment(std::string_view line, const std::string& where) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected `key = value`");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    return {std::move(key), std::move(value)};
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
    Config cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        auto [key, value] = split_assignment(line, source + ":" + std::to_string(number));
        cfg.entries_[key] = value;
    }
    return cfg;
}

Config Config::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str(), path.string());
}

void Config::set(std::string_view assignment) {
    auto [key, value] = split_assignment(assignment, "--set " + std::string(assignment));
    entries_[key] = value;
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::optional<std::string> Config::get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Resolution

namespace {

std::string shortest(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> k{
            "seed", "output.dir", "grid.d", "grid.n",
            "energy.internal", "energy.m",
            "scheme.tau", "scheme.eps", "scheme.alpha", "scheme.n_steps", "scheme.t_end",
            "solver.inner_tol", "solver.inner_max_iter", "solver.interaction_tol",
            "solver.interaction_max_iter", "solver.newton_tol",
            "pde.alpha", "pde.t_end", "pde.cfl_safety", "pde.max_dt", "pde.snapshot_dt", "pde.refine",
            "sinkhorn.eps", "sinkhorn.tol", "sinkhorn.max_iter", "sinkhorn.n_interp",
            "sweep.alphas", "sweep.taus", "sweep.t_end", "sweep.zero_alpha_exponent", "sweep.reference_factor",
        };
        for (const char* m : {"initial", "target"}) {
            for (const char* f : {"kind", "center", "width", "c1", "c2", "floor", "path"}) {
                k.insert(std::string(m) + "." + f);
            }
        }
        for (const char* p : {"energy.V", "energy.W"}) {
            k.insert(p);
            for (const char* f : {"amplitude", "frequency", "path"}) k.insert(std::string(p) + "." + f);
        }
        return k;
    }();
    return keys;
}

/// Typed access to a Config that records every value it hands out, defaults
/// included, so the manifest echoes the configuration actually used.
class Resolver {
public:
    explicit Resolver(const Config& cfg) : cfg_(cfg) {
        for (const auto& [key, value] : cfg.entries()) {
            if (!known_keys().count(key)) throw ConfigError("unknown config key `" + key + "`");
        }
    }

    bool given(const std::string& key) const { return cfg_.get(key).has_value(); }

    std::string text(const std::string& key, const std::string& fallback) {
        std::string v = cfg_.get(key).value_or(fallback);
        resolved_[key] = v;
        return v;
    }

    std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& options) {
        std::string v = text(key, fallback);
        if (std::find(options.begin(), options.end(), v) == options.end()) {
            std::string list;
            for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
            throw ConfigError(key + ": `" + v + "` is not one of {" + list + "}");
        }
        return v;
    }

    double real(const std::string& key, double fallback) {
        const auto raw = cfg_.get(key);
        const double v = raw ? parse_real(key, *raw) : fallback;
        resolved_[key] = shortest(v);
        return v;
    }

    int integer(const std::string& key, int fallback) {
        const auto raw = cfg_.get(key);
        int v = fallback;
        if (raw) {
            const std::string s = trim(*raw);
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
                throw ConfigError(key + ": `" + *raw + "` is not an integer");
            }
        }
        resolved_[key] = std::to_string(v);
        return v;
    }

    std::vector<double> reals(const std::string& key, const std::string& fallback) {
        const std::string raw = cfg_.get(key).value_or(fallback);
        std::vector<double> out;
        std::string joined;
        std::istringstream in(raw);
        std::string item;
        while (std::getline(in, item, ',')) {
            if (trim(item).empty()) continue;
            out.push_back(parse_real(key, item));
            joined += (joined.empty() ? "" : ",") + shortest(out.back());
        }
        resolved_[key] = joined;
        return out;
    }

    void record(const std::string& key, const std::string& value) { resolved_[key] = value; }
    void record(const std::string& key, double value) { resolved_[key] = shortest(value); }
    void record(const std::string& key, int value) { resolved_[key] = std::to_string(value); }

    const std::map<std::string, std::string>& resolved() const noexcept { return resolved_; }

    /// Keys that were given but not consumed by the command.
    std::vector<std::string> unused() const {
        std::vector<std::string> out;
        for (const auto& [key, value] : cfg_.entries()) {
            if (!resolved_.count(key)) out.push_back(key);
        }
        return out;
    }

private:
    static double parse_real(const std::string& key, const std::string& raw) {
        const std::string s = trim(raw);
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            throw ConfigError(key + ": `" + raw + "` is not a number");
        }
        return v;
    }

    const Config& cfg_;
    std::map<std::string, std::string> resolved_;
};

// ---------------------------------------------------------------------------
// Problem descriptors

std::vector<double> read_numbers(const fs::path& path, const std::string& key) {
    std::ifstream in(path);
    if (!in) throw IoError(key + ": cannot read " + path.string());
    std::vector<double> values;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        std::string token;
        std::vector<double> parsed;
        bool numeric = true;
        while (row >> token) {
            double v = 0.0;
            const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
            if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
                numeric = false;
                break;
            }
            parsed.push_back(v);
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;  // header row
            }
            throw ConfigError(key + ": non-numeric entry in " + path.string());
        }
        first = false;
        values.insert(values.end(), parsed.begin(), parsed.end());
    }
    return values;
}

struct MeasureDesc {
    std::string kind;
    double center = 0.5;
    double width = 0.1;
    double c1 = 0.3;
    double c2 = 0.7;
    double floor = 0.0;
    std::vector<double> values;
};

MeasureDesc resolve_measure(Resolver& r, const std::string& prefix, double default_center) {
    MeasureDesc m;
    m.kind = r.choice(prefix + ".kind", "wrapped-gaussian", {"uniform", "wrapped-gaussian", "two-bumps", "random", "csv"});
    if (m.kind == "wrapped-gaussian") {
        m.center = r.real(prefix + ".center", default_center);
        m.width = r.real(prefix + ".width", 0.1);
        m.floor = r.real(prefix + ".floor", 0.0);
    } else if (m.kind == "two-bumps") {
        m.c1 = r.real(prefix + ".c1", 0.3);
        m.c2 = r.real(prefix + ".c2", 0.7);
        m.width = r.real(prefix + ".width", 0.1);
        m.floor = r.real(prefix + ".floor", 0.0);
    } else if (m.kind == "csv") {
        const std::string path = r.text(prefix + ".path", "");
        if (path.empty()) throw ConfigError(prefix + ".path is required for kind csv");
        m.values = read_numbers(path, prefix + ".path");
    }
    if (!(m.width > 0.0)) throw ConfigError(prefix + ".width must be > 0");
    if (!(m.floor >= 0.0)) throw ConfigError(prefix + ".floor must be >= 0");
    return m;
}

double wrapped_gaussian(double x, double center, double width) {
    double sum = 0.0;
    for (int k = -4; k <= 4; ++k) {
        const double dx = x - center + k;
        sum += std::exp(-dx * dx / (2.0 * width * width));
    }
    return sum;
}

// Uniform draws from the raw 64-bit stream, identical on every standard library.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

GridMeasure build_measure(const Grid& grid, const MeasureDesc& m, std::uint64_t seed, const std::string& prefix) {
    GridFunction f(grid.size(), 0.0);
    auto profile = [&](std::size_t i, double c, double w) {
        const auto x = grid.node(i);
        double v = wrapped_gaussian(x[0], c, w);
        if (grid.dim() == 2) v *= wrapped_gaussian(x[1], c, w);
        return v;
    };
    if (m.kind == "uniform") {
        return GridMeasure::uniform(grid);
    } else if (m.kind == "wrapped-gaussian") {
        for (std::size_t i = 0; i < grid.size(); ++i) f[i] = m.floor + profile(i, m.center, m.width);
    } else if (m.kind == "two-bumps") {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            f[i] = m.floor + profile(i, m.c1, m.width) + profile(i, m.c2, m.width);
        }
    } else if (m.kind == "random") {
        std::mt19937_64 rng(seed);
        std::fill(f.begin(), f.end(), 0.2);
        for (int b = 0; b < 3; ++b) {
            const double c = unit_draw(rng);
            const double w = 0.04 + 0.11 * unit_draw(rng);
            const double a = 0.5 + 1.5 * unit_draw(rng);
            for (std::size_t i = 0; i < grid.size(); ++i) f[i] += a * profile(i, c, w);
        }
    } else {
        if (m.values.size() != grid.size()) {
            throw ConfigError(prefix + ".path: expected " + std::to_string(grid.size()) + " values, found " +
                              std::to_string(m.values.size()));
        }
        f = m.values;
    }
    try {
        return GridMeasure(grid, std::move(f));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(prefix + ": " + e.what());
    }
}

struct PotentialDesc {
    std::string kind;
    double amplitude = 1.0;
    int frequency = 1;
    std::vector<double> values;
};

PotentialDesc resolve_potential(Resolver& r, const std::string& key) {
    PotentialDesc p;
    p.kind = r.choice(key, "zero", {"zero", "cosine", "csv"});
    if (p.kind == "cosine") {
        p.amplitude = r.real(key + ".amplitude", 1.0);
        p.frequency = r.integer(key + ".frequency", 1);
    } else if (p.kind == "csv") {
        const std::string path = r.text(key + ".path", "");
        if (path.empty()) throw ConfigError(key + ".path is required for kind csv");
        p.values = read_numbers(path, key + ".path");
    }
    return p;
}

/// amplitude * sum over axes of cos(2 pi k x_a).
GridFunction build_potential(const Grid& grid, const PotentialDesc& p, const std::string& key) {
    if (p.kind == "zero") return GridFunction(grid.size(), 0.0);
    if (p.kind == "csv") {
        if (p.values.size() != grid.size()) {
            throw ConfigError(key + ".path: expected " + std::to_string(grid.size()) + " values, found " +
                              std::to_string(p.values.size()));
        }
        return p.values;
    }
    GridFunction f(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto x = grid.node(i);
        for (int a = 0; a < grid.dim(); ++a) {
            f[i] += p.amplitude * std::cos(2.0 * std::numbers::pi * p.frequency * x[a]);
        }
    }
    return f;
}

struct EnergyDesc {
    PotentialDesc V;
    PotentialDesc W;
    std::string internal;
    double m = 2.0;
};

EnergyDesc resolve_energy(Resolver& r) {
    EnergyDesc e;
    e.V = resolve_potential(r, "energy.V");
    e.W = resolve_potential(r, "energy.W");
    e.internal = r.choice("energy.internal", "entropy", {"zero", "entropy", "power"});
    if (e.internal == "power") e.m = r.real("energy.m", 2.0);
    return e;
}

EnergySpec build_energy(const Grid& grid, const EnergyDesc& e) {
    InternalEnergy internal = InternalEnergy::zero();
    if (e.internal == "entropy") internal = InternalEnergy::boltzmann();
    if (e.internal == "power") {
        try {
            internal = InternalEnergy::power_law(e.m);
        } catch (const std::exception& ex) {
            throw ConfigError(std::string("energy.m: ") + ex.what());
        }
    }
    try {
        return EnergySpec(grid, build_potential(grid, e.V, "energy.V"), build_potential(grid, e.W, "energy.W"),
                          internal);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError(std::string("energy: ") + ex.what());
    }
}

struct Common {
    int d = 1;
    int n = 128;
    std::uint64_t seed = 0;
    std::optional<Grid> grid;
};

Common resolve_common(Resolver& r) {
    Common c;
    c.seed = static_cast<std::uint64_t>(r.integer("seed", 0));
    c.d = r.integer("grid.d", 1);
    c.n = r.integer("grid.n", 128);
    try {
        c.grid.emplace(c.d, c.n);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    return c;
}

JkoConfig resolve_scheme(Resolver& r) {
    JkoConfig cfg;
    cfg.tau = r.real("scheme.tau", 0.01);
    if (r.given("scheme.eps") && r.given("scheme.alpha")) {
        throw ConfigError("scheme.eps and scheme.alpha are mutually exclusive");
    }
    if (r.given("scheme.alpha")) {
        const double alpha = r.real("scheme.alpha", 1.0);
        if (!(alpha > 0.0)) throw ConfigError("scheme.alpha must be > 0 (give scheme.eps to approach alpha = 0)");
        cfg.eps = alpha * cfg.tau;
        r.record("scheme.eps", cfg.eps);
    } else {
        cfg.eps = r.real("scheme.eps", cfg.tau);
        r.record("scheme.alpha", cfg.eps / cfg.tau);
    }
    if (r.given("scheme.n_steps") && r.given("scheme.t_end")) {
        throw ConfigError("scheme.n_steps and scheme.t_end are mutually exclusive");
    }
    if (r.given("scheme.t_end")) {
        const double t_end = r.real("scheme.t_end", 0.0);
        const double k = t_end / cfg.tau;
        if (!(t_end > 0.0) || std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
            throw ConfigError("scheme.t_end must be a positive multiple of scheme.tau");
        }
        cfg.n_steps = static_cast<int>(std::round(k));
        r.record("scheme.n_steps", cfg.n_steps);
    } else {
        cfg.n_steps = r.integer("scheme.n_steps", 10);
        r.record("scheme.t_end", cfg.n_steps * cfg.tau);
    }
    cfg.inner_tol = r.real("solver.inner_tol", cfg.inner_tol);
    cfg.inner_max_iter = r.integer("solver.inner_max_iter", cfg.inner_max_iter);
    cfg.interaction_tol = r.real("solver.interaction_tol", cfg.interaction_tol);
    cfg.interaction_max_iter = r.integer("solver.interaction_max_iter", cfg.interaction_max_iter);
    cfg.newton_tol = r.real("solver.newton_tol", cfg.newton_tol);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Output

class OutputDir {
public:
    explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {}

    const fs::path& path() const noexcept { return dir_; }

    std::ofstream open(const std::string& name) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + (dir_ / name).string());
        written_.push_back(name);
        return out;
    }

    void close(std::ofstream& out, const std::string& name) {
        out.close();
        if (!out) throw IoError("failed while writing " + (dir_ / name).string());
    }

    const std::vector<std::string>& written() const noexcept { return written_; }

private:
    fs::path dir_;
    std::vector<std::string> written_;
};

void write_states(OutputDir& out, const std::string& name, const std::string& time_column,
                  const std::vector<double>& times, const std::vector<GridMeasure>& states) {
    auto f = out.open(name);
    const std::size_t n = states.empty() ? 0 : states.front().size();
    f << time_column;
    for (std::size_t i = 0; i < n; ++i) f << ",rho_" << i;
    f << '\n';
    for (std::size_t k = 0; k < states.size(); ++k) {
        f << format_value(times[k]);
        for (std::size_t i = 0; i < n; ++i) f << ',' << format_value(states[k][i]);
        f << '\n';
    }
    out.close(f, name);
}

void write_diagnostics(OutputDir& out, const Trajectory& traj, const std::vector<StepDiagnostics>& extra = {}) {
    auto f = out.open("diagnostics.csv");
    f << "step,t,d_eps_sq,F_before,F_after,H_before,H_after,optimality_residual,inner_iterations,"
         "interaction_iterations,dissipation_slack,mass_correction\n";
    std::vector<StepDiagnostics> rows = traj.diagnostics;
    rows.insert(rows.end(), extra.begin(), extra.end());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& d = rows[k];
        const double t = k + 1 < traj.times.size() ? traj.times[k + 1] : std::nan("");
        f << (k + 1) << ',' << format_value(t) << ',' << format_value(d.d_eps_sq) << ',' << format_value(d.F_before)
          << ',' << format_value(d.F_after) << ',' << format_value(d.H_before) << ',' << format_value(d.H_after)
          << ',' << format_value(d.optimality_residual) << ',' << d.inner_iterations << ','
          << d.interaction_iterations << ',' << format_value(d.dissipation_slack) << ','
          << format_value(d.mass_correction) << '\n';
    }
    out.close(f, "diagnostics.csv");
}

void write_error(const fs::path& dir, const std::string& message) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream f(dir / "error.txt", std::ios::binary | std::ios::trunc);
    if (f) f << message << '\n';
}

void write_manifest(OutputDir& out, const std::string& command, const std::map<std::string, std::string>& resolved,
                    const std::map<std::string, std::string>& extra) {
    auto f = out.open("manifest");
    f << "command = " << command << '\n';
    f << "version = " << kVersion << '\n';
    for (const auto& [key, value] : resolved) f << key << " = " << value << '\n';
    for (const auto& [key, value] : extra) f << key << " = " << value << '\n';
    std::string files;
    for (const auto& name : out.written()) {
        if (name != "manifest") files += (files.empty() ? "" : ",") + name;
    }
    f << "outputs = " << files << '\n';
    out.close(f, "manifest");
}

// ---------------------------------------------------------------------------
// Commands

/// A fully validated command, ready to run.
struct Prepared {
    std::function<void(OutputDir&, std::map<std::string, std::string>&)> execute;
};

Prepared prepare_flow(Resolver& r, bool with_reference) {
    const Common common = resolve_common(r);
    const MeasureDesc initial = resolve_measure(r, "initial", 0.5);
    const EnergyDesc energy = resolve_energy(r);
    const JkoConfig cfg = resolve_scheme(r);
    const Grid grid = *common.grid;
    const GridMeasure rho0 = build_measure(grid, initial, common.seed, "initial");
    const EnergySpec spec = build_energy(grid, energy);

    PdeConfig pde;
    int refine = 1;
    if (with_reference) {
        pde.alpha = r.real("pde.alpha", cfg.lambda());
        pde.cfl_safety = r.real("pde.cfl_safety", pde.cfl_safety);
        pde.max_dt = r.real("pde.max_dt", pde.max_dt);
        refine = r.integer("pde.refine", 2);
        if (refine < 1) throw ConfigError("pde.refine must be >= 1");
        if (initial.kind == "csv" && refine != 1) throw ConfigError("pde.refine must be 1 for initial.kind = csv");
        if ((energy.V.kind == "csv" || energy.W.kind == "csv") && refine != 1) {
            throw ConfigError("pde.refine must be 1 for csv potentials");
        }
        pde.t_end = cfg.n_steps * cfg.tau;
        for (int k = 1; k < cfg.n_steps; ++k) pde.snapshot_times.push_back(k * cfg.tau);
        if (cfg.n_steps > 0) pde.validate();
    }
    if (!std::isfinite(eval_F(spec, rho0)) || !std::isfinite(entropy(rho0))) {
        throw ConfigError("initial: the initial state has infinite energy or entropy for energy.internal");
    }

    return {[=](OutputDir& out, std::map<std::string, std::string>& extra) {
        FlowResult flow = run_flow(rho0, spec, cfg);
        const Trajectory& traj = flow.trajectory;
        write_states(out, "trajectory.csv", "t", traj.times, traj.states);
        std::vector<StepDiagnostics> failed;
        if (!flow.ok()) {
            try {
                std::rethrow_exception(flow.error);
            } catch (const StepError& e) {
                failed.push_back(e.partial());
            } catch (...) {
            }
        }
        write_diagnostics(out, traj, failed);
        if (!flow.ok()) std::rethrow_exception(flow.error);
        if (!with_reference) return;

        const Grid fine(grid.dim(), grid.n() * refine);
        const GridMeasure fine_rho0 = build_measure(fine, initial, common.seed, "initial");
        const EnergySpec fine_spec = build_energy(fine, energy);
        std::vector<double> times{0.0};
        std::vector<GridMeasure> states{rho0};
        if (cfg.n_steps > 0) {
            const Trajectory ref = solve_pde(fine_rho0, fine_spec, pde);
            times = ref.times;
            states.clear();
            for (const auto& s : ref.states) states.push_back(restrict_to(s, grid));
        }
        write_states(out, "reference.csv", "t", times, states);
        Trajectory reference{times, states, {}};

        auto f = out.open("comparison.csv");
        f << "t,l1_error\n";
        for (double t : traj.times) f << format_value(t) << ',' << format_value(compare_trajectories(traj, reference, t)) << '\n';
        out.close(f, "comparison.csv");
        extra["pde.t_end"] = format_value(pde.t_end);
    }};
}

Prepared prepare_pde(Resolver& r) {
    const Common common = resolve_common(r);
    const MeasureDesc initial = resolve_measure(r, "initial", 0.5);
    const EnergyDesc energy = resolve_energy(r);
    PdeConfig pde;
    pde.alpha = r.real("pde.alpha", 0.0);
    pde.t_end = r.real("pde.t_end", 0.1);
    pde.cfl_safety = r.real("pde.cfl_safety", pde.cfl_safety);
    pde.max_dt = r.real("pde.max_dt", pde.max_dt);
    const double every = r.real("pde.snapshot_dt", pde.t_end / 10.0);
    if (!(every > 0.0)) throw ConfigError("pde.snapshot_dt must be > 0");
    for (int k = 1; k * every < pde.t_end * (1.0 - 1e-12); ++k) pde.snapshot_times.push_back(k * every);
    pde.validate();
    const Grid grid = *common.grid;
    const GridMeasure rho0 = build_measure(grid, initial, common.seed, "initial");
    const EnergySpec spec = build_energy(grid, energy);

    return {[=](OutputDir& out, std::map<std::string, std::string>&) {
        try {
            const Trajectory traj = solve_pde(rho0, spec, pde);
            write_states(out, "trajectory.csv", "t", traj.times, traj.states);
        } catch (const PdeError& e) {
            write_states(out, "trajectory.csv", "t", {e.time()}, {e.last_valid()});
            throw;
        }
    }};
}

Prepared prepare_sinkhorn(Resolver& r) {
    const Common common = resolve_common(r);
    const MeasureDesc mu_desc = resolve_measure(r, "initial", 0.4);
    const MeasureDesc nu_desc = resolve_measure(r, "target", 0.6);
    const double eps = r.real("sinkhorn.eps", 0.01);
    const double tol = r.real("sinkhorn.tol", 1e-10);
    const int max_iter = r.integer("sinkhorn.max_iter", 100000);
    const int n_interp = r.integer("sinkhorn.n_interp", 11);
    if (!(eps > 0.0)) throw ConfigError("sinkhorn.eps must be > 0");
    if (!(tol > 0.0)) throw ConfigError("sinkhorn.tol must be > 0");
    if (max_iter < 1) throw ConfigError("sinkhorn.max_iter must be >= 1");
    if (n_interp < 2) throw ConfigError("sinkhorn.n_interp must be >= 2");
    const Grid grid = *common.grid;
    const GridMeasure mu = build_measure(grid, mu_desc, common.seed, "initial");
    const GridMeasure nu = build_measure(grid, nu_desc, common.seed + 1, "target");
    if (!mu.strictly_positive()) throw ConfigError("initial: sinkhorn needs a strictly positive density");
    if (!nu.strictly_positive()) throw ConfigError("target: sinkhorn needs a strictly positive density");

    return {[=](OutputDir& out, std::map<std::string, std::string>&) {
        auto [pot, report] = sinkhorn(mu, nu, eps, tol, max_iter);
        auto f = out.open("sinkhorn.csv");
        f << "eps,iterations,final_residual,converged,d_eps_sq\n";
        const double d2 = report.converged ? 2.0 * report.cost : std::nan("");
        f << format_value(eps) << ',' << report.iterations << ',' << format_value(report.final_residual) << ','
          << (report.converged ? 1 : 0) << ',' << format_value(d2) << '\n';
        out.close(f, "sinkhorn.csv");
        if (!report.converged) {
            throw ConvergenceError("sinkhorn did not reach sinkhorn.tol", report.iterations, report.final_residual);
        }
        std::vector<double> s_values;
        std::vector<GridMeasure> states;
        for (int k = 0; k < n_interp; ++k) {
            const double s = static_cast<double>(k) / (n_interp - 1);
            s_values.push_back(s);
            states.push_back(entropic_interpolation(grid, pot, eps, s).rho);
        }
        write_states(out, "interpolation.csv", "s", s_values, states);
    }};
}

Prepared prepare_sweep(Resolver& r) {
    const Common common = resolve_common(r);
    const MeasureDesc initial = resolve_measure(r, "initial", 0.5);
    const EnergyDesc energy = resolve_energy(r);
    if (initial.kind == "csv" || energy.V.kind == "csv" || energy.W.kind == "csv") {
        throw ConfigError("sweep: csv inputs are not supported because the reference runs on a finer grid");
    }
    SweepOptions opt;
    opt.alphas = r.reals("sweep.alphas", "0,1");
    opt.taus = r.reals("sweep.taus", "0.02,0.01,0.005");
    opt.t_end = r.real("sweep.t_end", 0.04);
    opt.zero_alpha_exponent = r.real("sweep.zero_alpha_exponent", 1.5);
    opt.reference_factor = r.integer("sweep.reference_factor", 2);
    opt.cfl_safety = r.real("pde.cfl_safety", opt.cfl_safety);
    opt.dim = common.d;
    opt.n = common.n;
    opt.solver.inner_tol = r.real("solver.inner_tol", opt.solver.inner_tol);
    opt.solver.inner_max_iter = r.integer("solver.inner_max_iter", opt.solver.inner_max_iter);
    opt.solver.interaction_tol = r.real("solver.interaction_tol", opt.solver.interaction_tol);
    opt.solver.interaction_max_iter = r.integer("solver.interaction_max_iter", opt.solver.interaction_max_iter);
    opt.solver.newton_tol = r.real("solver.newton_tol", opt.solver.newton_tol);
    opt.solver.validate();
    if (!(opt.cfl_safety > 0.0 && opt.cfl_safety <= 1.0)) throw ConfigError("pde.cfl_safety must lie in (0, 1]");
    for (double a : opt.alphas) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("sweep.alphas must be finite and >= 0");
    }
    for (double t : opt.taus) {
        const double k = opt.t_end / t;
        if (!(t > 0.0) || std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
            throw ConfigError("sweep.taus must be positive divisors of sweep.t_end");
        }
    }
    if (!(opt.t_end > 0.0)) throw ConfigError("sweep.t_end must be > 0");
    if (!(opt.zero_alpha_exponent > 1.0)) throw ConfigError("sweep.zero_alpha_exponent must be > 1");
    if (opt.reference_factor < 1) throw ConfigError("sweep.reference_factor must be >= 1");
    // Build once on the scheme grid so invalid data fails before any computation.
    build_measure(*common.grid, initial, common.seed, "initial");
    build_energy(*common.grid, energy);

    SweepProblem problem;
    const std::uint64_t seed = common.seed;
    problem.initial = [=](const Grid& g) { return build_measure(g, initial, seed, "initial"); };
    problem.energy = [=](const Grid& g) { return build_energy(g, energy); };

    return {[=](OutputDir& out, std::map<std::string, std::string>& extra) {
        const std::vector<SweepRow> rows = run_sweep(problem, opt);
        auto f = out.open("sweep.csv");
        f << "alpha,tau,eps,ratio,n,l1_error,l1_error_vs_alpha0,mean_sinkhorn_iterations\n";
        std::string times;
        for (const auto& row : rows) {
            f << format_value(row.alpha) << ',' << format_value(row.tau) << ',' << format_value(row.eps) << ','
              << format_value(row.ratio) << ',' << row.n << ',' << format_value(row.l1_error) << ','
              << format_value(row.l1_error_vs_alpha0) << ',' << format_value(row.mean_sinkhorn_iterations) << '\n';
            times += (times.empty() ? "" : ",") + format_value(row.wall_time_s);
        }
        out.close(f, "sweep.csv");
        extra["sweep.row_wall_time_s"] = times;
    }};
}

Prepared prepare(const std::string& command, Resolver& r) {
    if (command == "flow") return prepare_flow(r, false);
    if (command == "compare") return prepare_flow(r, true);
    if (command == "pde") return prepare_pde(r);
    if (command == "sinkhorn") return prepare_sinkhorn(r);
    if (command == "sweep") return prepare_sweep(r);
    throw ConfigError("unknown command `" + command + "`");
}

fs::path output_dir(const Config& config, const std::optional<fs::path>& out_dir) {
    if (out_dir) return *out_dir;
    return config.get("output.dir").value_or("out");
}

}  // namespace

int run(const std::string& command, Config config, const std::optional<fs::path>& out_dir) {
    const fs::path dir = output_dir(config, out_dir);
    config.set("output.dir", dir.string());
    const auto started = std::chrono::steady_clock::now();

    std::optional<Resolver> resolver;
    Prepared prepared;
    try {
        resolver.emplace(config);
        resolver->text("output.dir", "out");
        prepared = prepare(command, *resolver);
        for (const auto& key : resolver->unused()) spdlog::warn("config key `{}` is not used by `{}`", key, command);
    } catch (const IoError& e) {
        spdlog::error("{}", e.what());
        write_error(dir, std::string("io error: ") + e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        write_error(dir, std::string("config error: ") + e.what());
        return kExitConfig;
    }

    OutputDir out(dir);
    std::map<std::string, std::string> extra;
    int code = kExitOk;
    std::string status = "ok";
    try {
        prepared.execute(out, extra);
    } catch (const IoError& e) {
        spdlog::error("{}", e.what());
        write_error(dir, std::string("io error: ") + e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        write_error(dir, std::string("solver error: ") + e.what());
        code = kExitSolver;
        status = std::string("solver_error: ") + e.what();
    }

    extra["status"] = status;
    extra["wall_time_s"] =
        format_value(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    try {
        write_manifest(out, command, resolver->resolved(), extra);
    } catch (const IoError& e) {
        spdlog::error("{}", e.what());
        return kExitIo;
    }
    return code;
}

int run(const Request& request) {
    Config config;
    try {
        config = Config::load(request.config_path);
        for (const auto& assignment : request.overrides) config.set(assignment);
    } catch (const IoError& e) {
        spdlog::error("{}", e.what());
        if (request.out_dir) write_error(*request.out_dir, std::string("io error: ") + e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        write_error(output_dir(config, request.out_dir), std::string("config error: ") + e.what());
        return kExitConfig;
    }
    return run(request.command, std::move(config), request.out_dir);
}

}  // namespace ejko::cli

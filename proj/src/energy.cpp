#include "ejko/energy.hpp"

#include "ejko/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ejko {

InternalEnergy InternalEnergy::zero() { return {InternalKind::Zero, 0.0}; }

InternalEnergy InternalEnergy::boltzmann() { return {InternalKind::BoltzmannEntropy, 1.0}; }

InternalEnergy InternalEnergy::power_law(double m) {
    if (!(m > 0.0) || m == 1.0 || !std::isfinite(m)) {
        throw ConfigError("power-law exponent must be > 0 and != 1");
    }
    return {InternalKind::PowerLaw, m};
}

std::string InternalEnergy::name() const {
    switch (kind_) {
    case InternalKind::Zero: return "zero";
    case InternalKind::BoltzmannEntropy: return "entropy";
    case InternalKind::PowerLaw: {
        std::ostringstream os;
        os << "power(" << m_ << ")";
        return os.str();
    }
    }
    return "unknown";
}

void InternalEnergy::require_open(double s, const char* what) const {
    if (!in_open_domain(s)) {
        std::ostringstream os;
        os << what << ": density " << s << " outside the open domain (" << d_minus() << ", " << d_plus() << ")";
        throw DomainError(os.str());
    }
}

double InternalEnergy::f(double s) const noexcept {
    if (std::isnan(s) || s < d_minus()) return std::numeric_limits<double>::infinity();
    switch (kind_) {
    case InternalKind::Zero: return 0.0;
    case InternalKind::BoltzmannEntropy: return s > 0.0 ? s * std::log(s) : 0.0;
    case InternalKind::PowerLaw: return std::pow(s, m_) / (m_ - 1.0);
    }
    return 0.0;
}

double InternalEnergy::f_prime(double s) const {
    require_open(s, "f'");
    switch (kind_) {
    case InternalKind::Zero: return 0.0;
    case InternalKind::BoltzmannEntropy: return std::log(s) + 1.0;
    case InternalKind::PowerLaw: return m_ * std::pow(s, m_ - 1.0) / (m_ - 1.0);
    }
    return 0.0;
}

double InternalEnergy::f_second(double s) const {
    require_open(s, "f''");
    switch (kind_) {
    case InternalKind::Zero: return 0.0;
    case InternalKind::BoltzmannEntropy: return 1.0 / s;
    case InternalKind::PowerLaw: return m_ * std::pow(s, m_ - 2.0);
    }
    return 0.0;
}

double InternalEnergy::g(double s) const {
    require_open(s, "g");
    return g_closed(s);
}

double InternalEnergy::g_prime(double s) const {
    require_open(s, "g'");
    return g_prime_closed(s);
}

double InternalEnergy::g_closed(double s) const {
    if (s < 0.0) throw DomainError("g: negative density");
    switch (kind_) {
    case InternalKind::Zero: return 0.0;
    case InternalKind::BoltzmannEntropy: return s;
    case InternalKind::PowerLaw: return std::pow(s, m_);
    }
    return 0.0;
}

double InternalEnergy::g_prime_closed(double s) const {
    if (s < 0.0) throw DomainError("g': negative density");
    switch (kind_) {
    case InternalKind::Zero: return 0.0;
    case InternalKind::BoltzmannEntropy: return 1.0;
    case InternalKind::PowerLaw:
        if (s == 0.0) return m_ > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return m_ * std::pow(s, m_ - 1.0);
    }
    return 0.0;
}

double f_prime(const InternalEnergy& internal, double s) { return internal.f_prime(s); }

double g_of(const InternalEnergy& internal, double s) { return internal.g(s); }

// ---------------------------------------------------------------------------

EnergySpec::EnergySpec(Grid grid, GridFunction potential, GridFunction interaction, InternalEnergy internal)
    : grid_(std::move(grid)), V_(std::move(potential)), W_(std::move(interaction)), internal_(internal) {
    if (V_.size() != grid_.size()) throw GridMismatch("EnergySpec: potential V has the wrong size");
    if (W_.size() != grid_.size()) throw GridMismatch("EnergySpec: interaction W has the wrong size");
    double scale = 1.0;
    for (std::size_t i = 0; i < W_.size(); ++i) {
        if (!std::isfinite(V_[i]) || !std::isfinite(W_[i])) throw ConfigError("EnergySpec: V and W must be finite");
        scale = std::max(scale, std::abs(W_[i]));
    }
    for (std::size_t i = 0; i < W_.size(); ++i) {
        if (std::abs(W_[i] - W_[grid_.reflect(i)]) > 1e-12 * scale) {
            throw ConfigError("EnergySpec: interaction kernel W must satisfy W(-x) = W(x) (node " + std::to_string(i) +
                              ")");
        }
    }
    has_interaction_ = std::any_of(W_.begin(), W_.end(), [](double w) { return w != 0.0; });
}

EnergySpec EnergySpec::internal_only(const Grid& grid, InternalEnergy internal) {
    return EnergySpec(grid, GridFunction(grid.size(), 0.0), GridFunction(grid.size(), 0.0), internal);
}

GridFunction EnergySpec::effective_potential(std::span<const double> rho) const {
    if (!has_interaction_) {
        if (rho.size() != grid_.size()) throw GridMismatch("effective_potential: density has the wrong size");
        return V_;
    }
    GridFunction out = convolve(grid_, W_, rho);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += V_[i];
    return out;
}

double eval_F(const EnergySpec& spec, std::span<const double> rho) {
    const Grid& grid = spec.grid();
    if (rho.size() != grid.size()) throw GridMismatch("eval_F: density has the wrong size");
    const auto& internal = spec.internal();
    for (double r : rho) {
        if (!(r >= internal.d_minus() && r <= internal.d_plus())) return std::numeric_limits<double>::infinity();
    }
    GridFunction conv;
    if (spec.has_interaction()) conv = convolve(grid, spec.interaction(), rho);
    const auto& V = spec.potential();
    double total = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        double term = V[i] * rho[i] + internal.f(rho[i]);
        if (!conv.empty()) term += 0.5 * conv[i] * rho[i];
        total += term;
    }
    return total * grid.weight();
}

double eval_F(const EnergySpec& spec, const GridMeasure& rho) {
    require_same_grid(spec.grid(), rho.grid(), "eval_F");
    return eval_F(spec, rho.density());
}

GridFunction first_variation(const EnergySpec& spec, std::span<const double> rho) {
    const auto& internal = spec.internal();
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (!internal.in_open_domain(rho[i])) {
            std::ostringstream os;
            os << "first_variation: density " << rho[i] << " at node " << i << " outside the open domain of f";
            throw DomainError(os.str());
        }
    }
    GridFunction out = spec.effective_potential(rho);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += internal.f_prime(rho[i]);
    return out;
}

GridFunction first_variation(const EnergySpec& spec, const GridMeasure& rho) {
    require_same_grid(spec.grid(), rho.grid(), "first_variation");
    return first_variation(spec, rho.density());
}

double entropy(const Grid& grid, std::span<const double> rho) {
    if (rho.size() != grid.size()) throw GridMismatch("entropy: density has the wrong size");
    double s = 0.0;
    for (double r : rho) {
        if (r > 0.0) s += r * std::log(r);
    }
    return s * grid.weight();
}

double entropy(const GridMeasure& rho) { return entropy(rho.grid(), rho.density()); }

}  // namespace ejko

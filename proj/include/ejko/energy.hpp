#pragma once

#include "ejko/measure.hpp"
#include "ejko/torus_grid.hpp"

#include <limits>
#include <string>

namespace ejko {

enum class InternalKind { Zero, BoltzmannEntropy, PowerLaw };

/// Convex internal energy density f with domain (d_minus, d_plus).
///
/// The kinds form a closed set so that f, f', f'' are analytic and the
/// convexity / smoothness requirements hold by construction:
///   Zero              f = 0
///   BoltzmannEntropy  f(s) = s log s
///   PowerLaw(m)       f(s) = s^m / (m - 1),  m > 0, m != 1
/// All three live on (0, +inf).
class InternalEnergy {
public:
    static InternalEnergy zero();
    static InternalEnergy boltzmann();
    static InternalEnergy power_law(double m);

    InternalKind kind() const noexcept { return kind_; }
    double exponent() const noexcept { return m_; }
    double d_minus() const noexcept { return 0.0; }
    double d_plus() const noexcept { return std::numeric_limits<double>::infinity(); }
    std::string name() const;

    /// f on the closed domain; continuous extension at 0, +inf for s < 0.
    double f(double s) const noexcept;
    /// The remaining members require s in the open domain and throw DomainError otherwise.
    double f_prime(double s) const;
    double f_second(double s) const;
    /// g(s) = s f'(s) - f(s).
    double g(double s) const;
    /// g'(s) = s f''(s).
    double g_prime(double s) const;

    /// g and g' extended by continuity to s = 0 (used by the PDE solver on clipped states).
    double g_closed(double s) const;
    double g_prime_closed(double s) const;

    bool in_open_domain(double s) const noexcept { return s > d_minus() && s < d_plus(); }

private:
    InternalEnergy(InternalKind kind, double m) : kind_(kind), m_(m) {}
    void require_open(double s, const char* what) const;

    InternalKind kind_;
    double m_;
};

double f_prime(const InternalEnergy& internal, double s);
double g_of(const InternalEnergy& internal, double s);

/// F(rho) = int V rho + 1/2 (W * rho) rho + f(rho).
class EnergySpec {
public:
    /// Throws GridMismatch on size errors and ConfigError if W is not even.
    EnergySpec(Grid grid, GridFunction potential, GridFunction interaction, InternalEnergy internal);

    /// V = W = 0.
    static EnergySpec internal_only(const Grid& grid, InternalEnergy internal);

    const Grid& grid() const noexcept { return grid_; }
    const GridFunction& potential() const noexcept { return V_; }
    const GridFunction& interaction() const noexcept { return W_; }
    const InternalEnergy& internal() const noexcept { return internal_; }
    bool has_interaction() const noexcept { return has_interaction_; }

    /// V + W * rho.
    GridFunction effective_potential(std::span<const double> rho) const;

private:
    Grid grid_;
    GridFunction V_;
    GridFunction W_;
    InternalEnergy internal_;
    bool has_interaction_;
};

/// Returns +inf if some value lies outside the closed domain of f.
double eval_F(const EnergySpec& spec, const GridMeasure& rho);
double eval_F(const EnergySpec& spec, std::span<const double> rho);

/// V + W * rho + f'(rho). Throws DomainError naming the first node outside
/// the open domain of f.
GridFunction first_variation(const EnergySpec& spec, const GridMeasure& rho);
GridFunction first_variation(const EnergySpec& spec, std::span<const double> rho);

/// H(rho) = (1/N) sum rho log rho, with 0 log 0 = 0.
double entropy(const GridMeasure& rho);
double entropy(const Grid& grid, std::span<const double> rho);

}  // namespace ejko

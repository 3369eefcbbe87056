#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace ejko {

/// Real samples on the grid nodes, flattened row-major (last axis fastest).
using GridFunction = std::vector<double>;
/// One GridFunction per axis.
using VectorField = std::vector<GridFunction>;

class SpectralPlan;

/// Periodic uniform grid on the unit torus T^d, d in {1,2}.
///
/// Nodes sit at x_i = i/n on every axis and each node carries the
/// quadrature weight 1/N, so grid averages approximate integrals against
/// the normalized Lebesgue measure.
class Grid {
public:
    /// Throws ConfigError unless d is 1 or 2 and n is even and >= 4.
    Grid(int d, int n);

    int dim() const noexcept { return d_; }
    int n() const noexcept { return n_; }
    std::size_t size() const noexcept { return size_; }
    double spacing() const noexcept { return 1.0 / n_; }
    double weight() const noexcept { return 1.0 / static_cast<double>(size_); }

    /// Per-axis integer index of a flat node index.
    std::array<int, 2> multi_index(std::size_t flat) const noexcept;
    std::size_t flat_index(std::array<int, 2> idx) const noexcept;
    /// Coordinates of a node in [0,1)^d (only the first dim() entries are used).
    std::array<double, 2> node(std::size_t flat) const noexcept;

    /// Flat index of the node at -x_i (mod 1).
    std::size_t reflect(std::size_t flat) const noexcept;
    /// Flat index of the node shifted by `offset` cells on every axis, wrapping.
    std::size_t neighbor(std::size_t flat, int axis, int offset) const noexcept;

    const SpectralPlan& spectral() const noexcept { return *plan_; }

    /// Grid average (1/N) sum_i f_i.
    double mean(std::span<const double> f) const;
    /// Weighted inner product (1/N) sum_i f_i g_i.
    double dot(std::span<const double> f, std::span<const double> g) const;

    friend bool operator==(const Grid& a, const Grid& b) noexcept {
        return a.d_ == b.d_ && a.n_ == b.n_;
    }

private:
    int d_;
    int n_;
    std::size_t size_;
    std::shared_ptr<const SpectralPlan> plan_;
};

Grid make_grid(int d, int n);

/// Real-to-complex FFT of grid functions, shared across copies of a Grid.
///
/// Plans are created once per (d, n) under a global lock; execution uses
/// the new-array interface and is safe to call concurrently.
class SpectralPlan {
public:
    SpectralPlan(int d, int n);
    ~SpectralPlan();
    SpectralPlan(const SpectralPlan&) = delete;
    SpectralPlan& operator=(const SpectralPlan&) = delete;

    std::size_t real_size() const noexcept { return real_size_; }
    std::size_t complex_size() const noexcept { return complex_size_; }

    /// Signed wavenumber of a spectral coefficient along an axis.
    int wavenumber(std::size_t coeff, int axis) const noexcept;
    /// True if the coefficient sits on the Nyquist line of the given axis.
    bool nyquist(std::size_t coeff, int axis) const noexcept;
    /// |k|^2 summed over axes.
    double wavenumber_sq(std::size_t coeff) const noexcept;

    std::vector<std::complex<double>> forward(std::span<const double> f) const;
    /// Inverse transform including the 1/N normalization.
    GridFunction backward(std::vector<std::complex<double>> coeffs) const;

private:
    int d_;
    int n_;
    std::size_t real_size_;
    std::size_t complex_size_;
    void* forward_plan_;
    void* backward_plan_;
};

/// Heat semigroup f -> f * sigma_t for d_t sigma = (1/2) Laplacian sigma.
///
/// sigma_t is the periodized Gaussian of variance t sampled at the nodes and
/// normalized to unit grid mass. Its Fourier multipliers are
/// sum_m exp(-2 pi^2 |k + m n|^2 t), which equal exp(-2 pi^2 |k|^2 t) up to
/// aliasing of order exp(-pi^2 n^2 t / 2).
class HeatKernelOp {
public:
    /// Throws ConfigError for t < 0.
    HeatKernelOp(const Grid& grid, double t);

    double time() const noexcept { return t_; }
    const Grid& grid() const noexcept { return grid_; }
    /// One factor per spectral coefficient of the r2c layout.
    std::span<const double> multipliers() const noexcept { return multipliers_; }

    /// Negative round-off on nonnegative input is clipped to zero; the result
    /// is not renormalized.
    GridFunction apply(std::span<const double> f) const;

    /// log(K exp(l)) without overflow. Nodes where the transform result falls
    /// below kFftRelativeFloor times its peak are recomputed by a direct
    /// log-sum-exp against the same kernel.
    GridFunction log_apply(std::span<const double> log_values) const;

    static constexpr double kFftRelativeFloor = 1e-3;

private:
    Grid grid_;
    double t_;
    std::vector<double> multipliers_;
    /// log sigma_t at per-axis offsets 0..n-1.
    std::vector<double> log_kernel_;
};

GridFunction apply_heat(const Grid& grid, double t, std::span<const double> f);

/// Per-axis derivative through the multiplier 2 pi i k (Nyquist mode dropped).
VectorField spectral_gradient(const Grid& grid, std::span<const double> f);

/// Periodic cost -eps log sum_k exp(-|y + k - x|^2 / (2 eps)) between two
/// points of [0,1)^d, the image sum truncated at |k_axis| <= max(6, ceil(6 sqrt(eps))).
double torus_cost(double eps, std::span<const double> x, std::span<const double> y);

/// (W * rho)(x_i) = (1/N) sum_j W(x_i - x_j) rho_j, evaluated by FFT.
GridFunction convolve(const Grid& grid, std::span<const double> kernel, std::span<const double> rho);

}  // namespace ejko

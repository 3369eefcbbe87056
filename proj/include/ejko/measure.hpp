#pragma once

#include "ejko/torus_grid.hpp"

#include <span>

namespace ejko {

/// Smallest density value admitted wherever a logarithm is taken.
inline constexpr double kDensityFloor = 1e-300;

/// Probability density on a periodic grid: nonnegative, grid mean 1.
class GridMeasure {
public:
    /// Validates the samples (finite, nonnegative, positive mass) and rescales
    /// them to mean 1. Throws std::invalid_argument otherwise.
    GridMeasure(Grid grid, GridFunction density);

    static GridMeasure uniform(const Grid& grid);

    const Grid& grid() const noexcept { return grid_; }
    const GridFunction& density() const noexcept { return rho_; }
    std::size_t size() const noexcept { return rho_.size(); }
    double operator[](std::size_t i) const noexcept { return rho_[i]; }

    /// |mean - 1| of the samples before they were rescaled.
    double normalization_correction() const noexcept { return correction_; }

    double min() const noexcept;
    double max() const noexcept;
    bool strictly_positive() const noexcept { return min() > 0.0; }

private:
    Grid grid_;
    GridFunction rho_;
    double correction_ = 0.0;
};

/// Copy of `mu` with every entry raised to at least `floor`, renormalized.
/// Logs a warning when any entry had to be raised.
GridMeasure floor_density(const GridMeasure& mu, double floor = kDensityFloor);

void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace ejko

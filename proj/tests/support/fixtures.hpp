#pragma once

#include "ejko/energy.hpp"
#include "ejko/measure.hpp"

#include <random>

namespace ejko::testing {

/// floor + wrapped Gaussian of standard deviation `width` centered at `center` (1D),
/// or the tensor product of two such profiles (2D).
GridMeasure bump(const Grid& grid, double center, double width, double floor = 0.0);

/// Two wrapped Gaussians of equal weight on a floor.
GridMeasure two_bumps(const Grid& grid, double c1, double c2, double width, double floor = 0.0);

/// Indicator of [lo, hi] with tanh edges of half-width `edge`, on a floor.
GridMeasure smooth_box(const Grid& grid, double lo, double hi, double edge, double floor);

/// Positive random density: 0.2 + three random bumps.
GridMeasure random_positive(const Grid& grid, std::mt19937_64& rng);

/// A * cos(2 pi k x_0) sampled on the grid.
GridFunction cosine(const Grid& grid, double amplitude, int frequency = 1);

/// mu moved by `cells` nodes along the first axis.
GridMeasure translate(const GridMeasure& mu, int cells);

}  // namespace ejko::testing

#include "fixtures.hpp"

#include <cmath>
#include <numbers>

namespace ejko::testing {

namespace {

double wrapped_gaussian(double x, double center, double width) {
    double sum = 0.0;
    for (int k = -4; k <= 4; ++k) {
        const double dx = x - center + k;
        sum += std::exp(-dx * dx / (2.0 * width * width));
    }
    return sum;
}

}  // namespace

GridMeasure bump(const Grid& grid, double center, double width, double floor) {
    GridFunction f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto x = grid.node(i);
        double v = wrapped_gaussian(x[0], center, width);
        if (grid.dim() == 2) v *= wrapped_gaussian(x[1], center, width);
        f[i] = floor + v;
    }
    return GridMeasure(grid, std::move(f));
}

GridMeasure two_bumps(const Grid& grid, double c1, double c2, double width, double floor) {
    GridFunction f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto x = grid.node(i);
        f[i] = floor + wrapped_gaussian(x[0], c1, width) + wrapped_gaussian(x[0], c2, width);
    }
    return GridMeasure(grid, std::move(f));
}

GridMeasure smooth_box(const Grid& grid, double lo, double hi, double edge, double floor) {
    GridFunction f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.node(i)[0];
        f[i] = floor + 0.5 * (std::tanh((x - lo) / edge) - std::tanh((x - hi) / edge));
    }
    return GridMeasure(grid, std::move(f));
}

GridMeasure random_positive(const Grid& grid, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> center(0.0, 1.0);
    std::uniform_real_distribution<double> width(0.04, 0.15);
    std::uniform_real_distribution<double> weight(0.5, 2.0);
    GridFunction f(grid.size(), 0.2);
    for (int b = 0; b < 3; ++b) {
        const double c0 = center(rng);
        const double c1 = center(rng);
        const double w = width(rng);
        const double a = weight(rng);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto x = grid.node(i);
            double v = wrapped_gaussian(x[0], c0, w);
            if (grid.dim() == 2) v *= wrapped_gaussian(x[1], c1, w);
            f[i] += a * v;
        }
    }
    return GridMeasure(grid, std::move(f));
}

GridFunction cosine(const Grid& grid, double amplitude, int frequency) {
    GridFunction f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        f[i] = amplitude * std::cos(2.0 * std::numbers::pi * frequency * grid.node(i)[0]);
    }
    return f;
}

GridMeasure translate(const GridMeasure& mu, int cells) {
    const Grid& grid = mu.grid();
    GridFunction f(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) f[grid.neighbor(i, 0, cells)] = mu[i];
    return GridMeasure(grid, std::move(f));
}

}  // namespace ejko::testing

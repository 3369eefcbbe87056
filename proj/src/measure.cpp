#include "ejko/measure.hpp"

#include "ejko/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace ejko {

GridMeasure::GridMeasure(Grid grid, GridFunction density) : grid_(std::move(grid)), rho_(std::move(density)) {
    if (rho_.size() != grid_.size()) {
        throw GridMismatch("GridMeasure: expected " + std::to_string(grid_.size()) + " values, got " +
                           std::to_string(rho_.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < rho_.size(); ++i) {
        const double v = rho_[i];
        if (!std::isfinite(v)) throw std::invalid_argument("GridMeasure: non-finite density at node " + std::to_string(i));
        if (v < 0.0) throw std::invalid_argument("GridMeasure: negative density at node " + std::to_string(i));
        sum += v;
    }
    const double mean = sum * grid_.weight();
    if (!(mean > 0.0)) throw std::invalid_argument("GridMeasure: density has zero mass");
    correction_ = std::abs(mean - 1.0);
    if (mean != 1.0) {
        for (double& v : rho_) v /= mean;
    }
}

GridMeasure GridMeasure::uniform(const Grid& grid) { return GridMeasure(grid, GridFunction(grid.size(), 1.0)); }

double GridMeasure::min() const noexcept { return *std::min_element(rho_.begin(), rho_.end()); }

double GridMeasure::max() const noexcept { return *std::max_element(rho_.begin(), rho_.end()); }

GridMeasure floor_density(const GridMeasure& mu, double floor) {
    if (mu.min() >= floor) return mu;
    GridFunction rho = mu.density();
    std::size_t raised = 0;
    for (double& v : rho) {
        if (v < floor) {
            v = floor;
            ++raised;
        }
    }
    spdlog::warn("raised {} density values to the floor {:g} before taking logarithms", raised, floor);
    return GridMeasure(mu.grid(), std::move(rho));
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) {
        throw GridMismatch(std::string(what) + ": grids differ (d=" + std::to_string(a.dim()) + ", n=" +
                           std::to_string(a.n()) + " vs d=" + std::to_string(b.dim()) + ", n=" +
                           std::to_string(b.n()) + ")");
    }
}

}  // namespace ejko

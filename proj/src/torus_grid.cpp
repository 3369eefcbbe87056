#include "ejko/torus_grid.hpp"

#include "ejko/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>

namespace ejko {

namespace {

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::shared_ptr<const SpectralPlan> cached_plan(int d, int n) {
    static std::map<std::pair<int, int>, std::shared_ptr<const SpectralPlan>> cache;
    static std::mutex cache_mutex;
    std::lock_guard lock(cache_mutex);
    auto& slot = cache[{d, n}];
    if (!slot) slot = std::make_shared<const SpectralPlan>(d, n);
    return slot;
}

void require_finite(std::span<const double> f, const char* what) {
    for (double v : f) {
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
    }
}

void require_size(const Grid& grid, std::span<const double> f, const char* what) {
    if (f.size() != grid.size()) {
        throw GridMismatch(std::string(what) + ": expected " + std::to_string(grid.size()) +
                           " values, got " + std::to_string(f.size()));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(int d, int n) : d_(d), n_(n), size_(0) {
    if (d != 1 && d != 2) throw ConfigError("grid.d must be 1 or 2, got " + std::to_string(d));
    if (n < 4 || n % 2 != 0) throw ConfigError("grid.n must be even and >= 4, got " + std::to_string(n));
    size_ = d == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
    plan_ = cached_plan(d, n);
}

Grid make_grid(int d, int n) { return Grid(d, n); }

std::array<int, 2> Grid::multi_index(std::size_t flat) const noexcept {
    if (d_ == 1) return {static_cast<int>(flat), 0};
    return {static_cast<int>(flat / n_), static_cast<int>(flat % n_)};
}

std::size_t Grid::flat_index(std::array<int, 2> idx) const noexcept {
    if (d_ == 1) return static_cast<std::size_t>(idx[0]);
    return static_cast<std::size_t>(idx[0]) * n_ + idx[1];
}

std::array<double, 2> Grid::node(std::size_t flat) const noexcept {
    auto idx = multi_index(flat);
    return {idx[0] * spacing(), d_ == 2 ? idx[1] * spacing() : 0.0};
}

std::size_t Grid::reflect(std::size_t flat) const noexcept {
    auto idx = multi_index(flat);
    for (int a = 0; a < d_; ++a) idx[a] = (n_ - idx[a]) % n_;
    return flat_index(idx);
}

std::size_t Grid::neighbor(std::size_t flat, int axis, int offset) const noexcept {
    auto idx = multi_index(flat);
    idx[axis] = ((idx[axis] + offset) % n_ + n_) % n_;
    return flat_index(idx);
}

double Grid::mean(std::span<const double> f) const {
    require_size(*this, f, "Grid::mean");
    double s = 0.0;
    for (double v : f) s += v;
    return s * weight();
}

double Grid::dot(std::span<const double> f, std::span<const double> g) const {
    require_size(*this, f, "Grid::dot");
    require_size(*this, g, "Grid::dot");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
    return s * weight();
}

// ---------------------------------------------------------------------------
// SpectralPlan

SpectralPlan::SpectralPlan(int d, int n) : d_(d), n_(n) {
    real_size_ = d == 1 ? n : static_cast<std::size_t>(n) * n;
    complex_size_ = d == 1 ? n / 2 + 1 : static_cast<std::size_t>(n) * (n / 2 + 1);

    std::vector<double> real(real_size_);
    std::vector<std::complex<double>> cplx(complex_size_);
    auto* in = real.data();
    auto* out = reinterpret_cast<fftw_complex*>(cplx.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;

    std::lock_guard lock(planner_mutex());
    if (d == 1) {
        forward_plan_ = fftw_plan_dft_r2c_1d(n, in, out, flags);
        backward_plan_ = fftw_plan_dft_c2r_1d(n, out, in, flags);
    } else {
        forward_plan_ = fftw_plan_dft_r2c_2d(n, n, in, out, flags);
        backward_plan_ = fftw_plan_dft_c2r_2d(n, n, out, in, flags);
    }
}

SpectralPlan::~SpectralPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
}

int SpectralPlan::wavenumber(std::size_t coeff, int axis) const noexcept {
    const int half = n_ / 2;
    if (d_ == 1) {
        if (axis != 0) return 0;
        const int j = static_cast<int>(coeff);
        return j == half ? -half : j;
    }
    const int row = static_cast<int>(coeff / (half + 1));
    const int col = static_cast<int>(coeff % (half + 1));
    if (axis == 0) return row < half ? row : row - n_;
    return col == half ? -half : col;
}

bool SpectralPlan::nyquist(std::size_t coeff, int axis) const noexcept {
    return wavenumber(coeff, axis) == -n_ / 2;
}

double SpectralPlan::wavenumber_sq(std::size_t coeff) const noexcept {
    double s = 0.0;
    for (int a = 0; a < d_; ++a) {
        const double k = wavenumber(coeff, a);
        s += k * k;
    }
    return s;
}

std::vector<std::complex<double>> SpectralPlan::forward(std::span<const double> f) const {
    std::vector<double> in(f.begin(), f.end());
    std::vector<std::complex<double>> out(complex_size_);
    fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), in.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

GridFunction SpectralPlan::backward(std::vector<std::complex<double>> coeffs) const {
    GridFunction out(real_size_);
    fftw_execute_dft_c2r(static_cast<fftw_plan>(backward_plan_),
                         reinterpret_cast<fftw_complex*>(coeffs.data()), out.data());
    const double scale = 1.0 / static_cast<double>(real_size_);
    for (double& v : out) v *= scale;
    return out;
}

// ---------------------------------------------------------------------------
// Heat kernel

HeatKernelOp::HeatKernelOp(const Grid& grid, double t) : grid_(grid), t_(t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("heat kernel time must be >= 0");
    const int n = grid.n();
    const auto& plan = grid.spectral();
    multipliers_.assign(plan.complex_size(), 1.0);
    if (t == 0.0) return;

    // Fourier coefficients of the sampled kernel: sum over aliases k + m n.
    const double c = 2.0 * std::numbers::pi * std::numbers::pi * t;
    auto aliased = [&](int k) {
        double s = 0.0;
        for (int m = -8; m <= 8; ++m) {
            const double q = static_cast<double>(k) + static_cast<double>(m) * n;
            s += std::exp(-c * q * q);
        }
        return s;
    };
    const double mass = aliased(0);
    for (std::size_t k = 0; k < multipliers_.size(); ++k) {
        for (int a = 0; a < grid.dim(); ++a) multipliers_[k] *= aliased(plan.wavenumber(k, a)) / mass;
    }

    log_kernel_.resize(n);
    const double origin[1] = {0.0};
    for (int j = 0; j < n; ++j) {
        const double y[1] = {static_cast<double>(j) / n};
        log_kernel_[j] = -torus_cost(t, origin, y) / t - 0.5 * std::log(2.0 * std::numbers::pi * t) - std::log(mass);
    }
}

GridFunction HeatKernelOp::apply(std::span<const double> f) const {
    require_size(grid_, f, "apply_heat");
    require_finite(f, "apply_heat");
    if (t_ == 0.0) return GridFunction(f.begin(), f.end());

    const auto& plan = grid_.spectral();
    auto coeffs = plan.forward(f);
    for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] *= multipliers_[k];
    auto out = plan.backward(std::move(coeffs));

    const bool nonnegative = std::all_of(f.begin(), f.end(), [](double v) { return v >= 0.0; });
    if (nonnegative) {
        for (double& v : out) v = std::max(v, 0.0);
    }
    return out;
}

GridFunction HeatKernelOp::log_apply(std::span<const double> log_values) const {
    require_size(grid_, log_values, "log_heat");
    if (t_ == 0.0) return GridFunction(log_values.begin(), log_values.end());
    const std::size_t size = grid_.size();
    const double top = *std::max_element(log_values.begin(), log_values.end());
    if (!std::isfinite(top)) throw DomainError("log_heat: non-finite input");

    GridFunction scaled(size);
    for (std::size_t i = 0; i < size; ++i) scaled[i] = std::exp(log_values[i] - top);
    const auto& plan = grid_.spectral();
    auto coeffs = plan.forward(scaled);
    for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] *= multipliers_[k];
    const GridFunction smooth = plan.backward(std::move(coeffs));
    const double peak = *std::max_element(smooth.begin(), smooth.end());

    GridFunction out(size);
    GridFunction terms(size);
    for (std::size_t i = 0; i < size; ++i) {
        if (smooth[i] >= kFftRelativeFloor * peak) {
            out[i] = std::log(smooth[i]) + top;
            continue;
        }
        // The transform's absolute round-off would dominate here: sum directly.
        const auto xi = grid_.multi_index(i);
        const int n = grid_.n();
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < size; ++j) {
            const auto xj = grid_.multi_index(j);
            double lk = log_kernel_[((xj[0] - xi[0]) % n + n) % n];
            if (grid_.dim() == 2) lk += log_kernel_[((xj[1] - xi[1]) % n + n) % n];
            terms[j] = log_values[j] + lk;
            best = std::max(best, terms[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < size; ++j) sum += std::exp(terms[j] - best);
        out[i] = best + std::log(sum) - std::log(static_cast<double>(size));
    }
    return out;
}

GridFunction apply_heat(const Grid& grid, double t, std::span<const double> f) {
    return HeatKernelOp(grid, t).apply(f);
}

// ---------------------------------------------------------------------------
// Spectral gradient and convolution

VectorField spectral_gradient(const Grid& grid, std::span<const double> f) {
    require_size(grid, f, "spectral_gradient");
    require_finite(f, "spectral_gradient");
    const auto& plan = grid.spectral();
    const auto coeffs = plan.forward(f);
    VectorField grad;
    grad.reserve(grid.dim());
    for (int axis = 0; axis < grid.dim(); ++axis) {
        std::vector<std::complex<double>> g(coeffs.size());
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            if (plan.nyquist(k, axis)) continue;
            const double w = 2.0 * std::numbers::pi * plan.wavenumber(k, axis);
            g[k] = std::complex<double>(0.0, w) * coeffs[k];
        }
        grad.push_back(plan.backward(std::move(g)));
    }
    return grad;
}

GridFunction convolve(const Grid& grid, std::span<const double> kernel, std::span<const double> rho) {
    require_size(grid, kernel, "convolve (kernel)");
    require_size(grid, rho, "convolve (density)");
    require_finite(kernel, "convolve");
    require_finite(rho, "convolve");
    const auto& plan = grid.spectral();
    auto kc = plan.forward(kernel);
    const auto rc = plan.forward(rho);
    for (std::size_t k = 0; k < kc.size(); ++k) kc[k] *= rc[k];
    auto out = plan.backward(std::move(kc));
    const double w = grid.weight();
    for (double& v : out) v *= w;
    return out;
}

// ---------------------------------------------------------------------------
// Torus cost

double torus_cost(double eps, std::span<const double> x, std::span<const double> y) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("torus_cost: eps must be > 0");
    if (x.size() != y.size() || x.empty() || x.size() > 2) {
        throw std::invalid_argument("torus_cost: points must share a dimension of 1 or 2");
    }
    const int kmax = std::max(6, static_cast<int>(std::ceil(6.0 * std::sqrt(eps))));
    // The image sum factorizes over axes.
    double cost = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) {
        const double diff = y[a] - x[a];
        double top = -std::numeric_limits<double>::infinity();
        for (int k = -kmax; k <= kmax; ++k) {
            const double z = diff + k;
            top = std::max(top, -z * z / (2.0 * eps));
        }
        double s = 0.0;
        for (int k = -kmax; k <= kmax; ++k) {
            const double z = diff + k;
            s += std::exp(-z * z / (2.0 * eps) - top);
        }
        cost += -eps * (top + std::log(s));
    }
    return cost;
}

}  // namespace ejko

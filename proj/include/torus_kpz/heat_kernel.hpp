#pragma once

#include <cmath>
#include <vector>

#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"

namespace torus_kpz {

// Periodic heat semigroup e^{t Delta/2}. The kernel factorizes over axes, so
// everything is built from the 1-d kernel
//   p_t(x) = (2 pi t)^{-1/2} sum_n exp(-(x+n)^2 / (2t))      (image sum)
//          = sum_k exp(-2 pi^2 k^2 t) exp(i 2 pi k x)         (Fourier sum)
// with the image sum used for t <= t_star and the Fourier sum above it.
struct KernelConfig {
    double t_star = 0.15;
    int image_sum_radius = 6;
    double spectral_cutoff = 1e-16;
};

namespace detail {

inline double heat_kernel_1d(double t, double x, const KernelConfig& cfg) {
    x -= std::floor(x);  // wrap to [0,1)
    if (t <= cfg.t_star) {
        double s = 0.0;
        const double inv2t = 1.0 / (2.0 * t);
        for (int n = -cfg.image_sum_radius; n <= cfg.image_sum_radius; ++n) {
            const double dxn = x + n;
            s += std::exp(-dxn * dxn * inv2t);
        }
        return s / std::sqrt(2.0 * M_PI * t);
    }
    double s = 1.0;
    const double damp = 2.0 * M_PI * M_PI * t;
    for (int k = 1;; ++k) {
        const double term = std::exp(-damp * k * k);
        if (term < cfg.spectral_cutoff) break;
        s += 2.0 * term * std::cos(2.0 * M_PI * k * x);
    }
    return s;
}

}  // namespace detail

// p_t(x) on the d-torus (product of 1-d kernels).
inline double eval_p(double t, const std::vector<double>& x,
                     const KernelConfig& cfg = {}) {
    if (!(t > 0.0)) throw NonpositiveTime("eval_p: t must be > 0");
    double v = 1.0;
    for (double xa : x) v *= detail::heat_kernel_1d(t, xa, cfg);
    return v;
}

inline double eval_p(double t, double x, const KernelConfig& cfg = {}) {
    return eval_p(t, std::vector<double>{x}, cfg);
}

// Precomputed spectral multipliers exp(-2 pi^2 |k|^2 t) for a grid; reused by
// every step of a fixed-dt run.
class SemigroupMultipliers {
  public:
    SemigroupMultipliers() = default;
    SemigroupMultipliers(const TorusGrid& grid, double t) : grid_(grid), t_(t) {
        if (t < 0.0) throw NegativeTime("apply_semigroup: t must be >= 0");
        const std::size_t n = static_cast<std::size_t>(grid.points_per_dim);
        const std::size_t total = grid.size();
        mult_.resize(total);
        std::vector<double> axis(n);
        for (std::size_t j = 0; j < n; ++j) {
            const long k = j <= n / 2 ? static_cast<long>(j)
                                      : static_cast<long>(j) - static_cast<long>(n);
            axis[j] = static_cast<double>(k) * static_cast<double>(k);
        }
        for (std::size_t i = 0; i < total; ++i) {
            std::size_t rem = i;
            std::size_t div = total / n;
            double k2 = 0.0;
            for (int a = 0; a < grid.dim; ++a) {
                k2 += axis[rem / div];
                rem %= div;
                div = div >= n ? div / n : 1;
            }
            mult_[i] = std::exp(-2.0 * M_PI * M_PI * k2 * t);
        }
    }

    const TorusGrid& grid() const { return grid_; }
    double time() const { return t_; }
    const std::vector<double>& values() const { return mult_; }

  private:
    TorusGrid grid_;
    double t_ = 0.0;
    std::vector<double> mult_;
};

// Spectral application of e^{t Delta/2}: c_k <- exp(-2 pi^2 |k|^2 t) c_k.
// The k=0 multiplier is exactly 1, so mass is conserved to rounding.
inline Field apply_semigroup(const Field& f, const SemigroupMultipliers& m) {
    if (f.grid != m.grid()) throw SizeMismatch("apply_semigroup: grid mismatch");
    if (m.time() == 0.0) return f;
    std::vector<std::complex<double>> work(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) work[i] = f.values[i];
    detail::fft_nd(work.data(), f.grid.dim, f.grid.points_per_dim, -1);
    for (std::size_t i = 0; i < work.size(); ++i) work[i] *= m.values()[i];
    detail::fft_nd(work.data(), f.grid.dim, f.grid.points_per_dim, +1);
    Field out(f.grid);
    const double scale = 1.0 / static_cast<double>(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out.values[i] = work[i].real() * scale;
    return out;
}

inline Field apply_semigroup(const Field& f, double t) {
    if (t < 0.0) throw NegativeTime("apply_semigroup: t must be >= 0");
    if (t == 0.0) return f;
    return apply_semigroup(f, SemigroupMultipliers(f.grid, t));
}

}  // namespace torus_kpz

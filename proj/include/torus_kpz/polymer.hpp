#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"
#include "torus_kpz/noise.hpp"

namespace torus_kpz {

// Drift and diffusion operators of the nonlocal SPDE satisfied by the
// endpoint density,
//   A(f)   = 1/2 Laplace f + f <f, R*f> - f (R*f)
//   B_k(f) = f e_k - f <f, e_{-k}>,        e_k = sqrt(r_k) exp(i 2 pi k.x)
// plus a direct Euler-Maruyama stepper used as a cross-check against the
// normalize-after-SHE route. Smooth covariances only (R*f needs a function R).
class PolymerOps {
  public:
    PolymerOps(const CovarianceSpec& spec, const TorusGrid& grid)
        : table_(spec, grid) {
        if (spec.kind == NoiseKind::white)
            throw Unsupported("polymer operators need a smooth covariance");
    }

    const ModeTable& table() const { return table_; }

    // R * f, computed mode by mode (band-limited convolution).
    Field convolve_R(const Field& f) const {
        const auto& spec = table_.spec();
        Field out(f.grid, 0.0);
        if (spec.kind == NoiseKind::none) return out;
        if (table_.has_zero_mode()) {
            const double m = spec.modes.front().r_hat * integrate(f);
            for (double& v : out.values) v = m;
        }
        for (std::size_t j = 0; j < table_.pair_count(); ++j) {
            double C, S;
            table_.project(f, j, C, S);
            const double r2 = 2.0 * table_.pair_r(j);
            const auto& c = table_.pair_cos(j);
            const auto& s = table_.pair_sin(j);
            for (std::size_t i = 0; i < out.size(); ++i)
                out.values[i] += r2 * (C * c[i] + S * s[i]);
        }
        return out;
    }

    // 1/2 Laplace f, spectral.
    Field half_laplacian(const Field& f) const {
        const TorusGrid& g = f.grid;
        std::vector<std::complex<double>> work(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) work[i] = f.values[i];
        detail::fft_nd(work.data(), g.dim, g.points_per_dim, -1);
        const std::size_t n = static_cast<std::size_t>(g.points_per_dim);
        const std::size_t total = g.size();
        for (std::size_t i = 0; i < total; ++i) {
            std::size_t rem = i;
            std::size_t div = total / n;
            double k2 = 0.0;
            for (int a = 0; a < g.dim; ++a) {
                const std::size_t ja = rem / div;
                rem %= div;
                div = div >= n ? div / n : 1;
                const double k = ja <= n / 2 ? static_cast<double>(ja)
                                             : static_cast<double>(ja) - static_cast<double>(n);
                k2 += k * k;
            }
            work[i] *= -2.0 * M_PI * M_PI * k2;
        }
        detail::fft_nd(work.data(), g.dim, g.points_per_dim, +1);
        Field out(g);
        const double scale = 1.0 / static_cast<double>(total);
        for (std::size_t i = 0; i < total; ++i) out.values[i] = work[i].real() * scale;
        return out;
    }

    // A(u). integrate(A(u)) vanishes identically for densities because the
    // two nonlocal terms use the same quadrature.
    Field drift_A(const DensityField& u) const {
        const Field& f = u.field;
        Field Rsu = convolve_R(f);
        double inner = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) inner += f.values[i] * Rsu.values[i];
        inner *= f.grid.cell_volume();
        Field out = half_laplacian(f);
        for (std::size_t i = 0; i < f.size(); ++i)
            out.values[i] += f.values[i] * (inner - Rsu.values[i]);
        return out;
    }

    // B_k(u) as (real, imaginary) fields. k must lie in the covariance band.
    std::pair<Field, Field> diffusion_B(const DensityField& u,
                                        const std::vector<int>& k) const {
        const auto& spec = table_.spec();
        if (static_cast<int>(k.size()) != spec.dim)
            throw ConfigError("diffusion_B: frequency dimension mismatch");
        const Field& f = u.field;
        bool is_zero = true;
        for (int c : k) is_zero = is_zero && c == 0;
        if (is_zero) {
            if (!table_.has_zero_mode())
                throw FrequencyOutOfBand("diffusion_B: k=0 not in covariance");
            const double sr = std::sqrt(spec.modes.front().r_hat);
            const double m = integrate(f);
            Field re(f.grid), im(f.grid, 0.0);
            for (std::size_t i = 0; i < f.size(); ++i)
                re.values[i] = sr * (f.values[i] - f.values[i] * m);
            return {re, im};
        }
        // locate the pair; remember whether k is the stored representative
        // or its negative (e_{-k} = conj(e_k))
        std::vector<int> rep = k;
        bool flipped = false;
        for (int c : rep) {
            if (c > 0) break;
            if (c < 0) {
                for (int& q : rep) q = -q;
                flipped = true;
                break;
            }
        }
        std::size_t j = 0;
        bool found = false;
        std::size_t idx = 0;
        for (const auto& m : spec.modes) {
            if (m.is_zero) continue;
            if (m.k == rep) {
                j = idx;
                found = true;
                break;
            }
            ++idx;
        }
        if (!found)
            throw FrequencyOutOfBand("diffusion_B: frequency outside covariance band");
        const double sr = std::sqrt(table_.pair_r(j));
        double C, S;
        table_.project(f, j, C, S);
        const auto& c = table_.pair_cos(j);
        const auto& s = table_.pair_sin(j);
        // e_k = sr (cos + i sin) for the representative; conjugate if flipped.
        const double sgn = flipped ? -1.0 : 1.0;
        Field re(f.grid), im(f.grid);
        for (std::size_t i = 0; i < f.size(); ++i) {
            re.values[i] = sr * f.values[i] * (c[i] - C);
            im.values[i] = sgn * sr * f.values[i] * (s[i] - S);
        }
        return {re, im};
    }

    // Largest stable dt of the explicit stepper (the 1/2 Laplacian eigenvalue
    // at the Nyquist mode bounds it).
    double max_stable_dt(const TorusGrid& g) const {
        const double n = static_cast<double>(g.points_per_dim);
        return 4.0 / (M_PI * M_PI * n * n * static_cast<double>(g.dim));
    }

    struct StepResult {
        DensityField density;
        double mass_drift = 0.0;     // |int u' - 1| before renormalization
        std::size_t clamped = 0;
    };

    // One plain Euler-Maruyama step driven by the same mode draws as the
    // paired SHE step, then renormalized. The sum over k of B_k(u) dw_k is
    // assembled pairwise, which keeps everything real:
    //   B_k dw_k + B_{-k} dw_{-k} = 2 sqrt(r_k) u [ (cos - C) a - (sin - S) b ].
    StepResult step(const DensityField& u, double dt, const NoiseIncrement& inc,
                    double clamp_budget_fraction = 1e-3) const {
        if (!(dt > 0.0)) throw ConfigError("spde_step_direct: dt must be > 0");
        if (dt > max_stable_dt(u.grid()) * (1.0 + 1e-12))
            throw ConfigError("spde_step_direct: explicit step unstable, need dt <= " +
                              std::to_string(max_stable_dt(u.grid())));
        const Field& f = u.field;
        Field out = drift_A(u);
        for (std::size_t i = 0; i < f.size(); ++i)
            out.values[i] = f.values[i] + dt * out.values[i];
        for (std::size_t j = 0; j < table_.pair_count(); ++j) {
            const double amp = 2.0 * std::sqrt(table_.pair_r(j));
            double C, S;
            table_.project(f, j, C, S);
            const auto& c = table_.pair_cos(j);
            const auto& s = table_.pair_sin(j);
            const double a = inc.pair_a[j];
            const double b = inc.pair_b[j];
            for (std::size_t i = 0; i < f.size(); ++i)
                out.values[i] += amp * f.values[i] * ((c[i] - C) * a - (s[i] - S) * b);
        }
        // the k=0 diffusion term vanishes on densities; nothing to add
        StepResult res;
        double mass = 0.0;
        for (double& v : out.values) {
            if (v < 0.0) {
                v = 0.0;
                ++res.clamped;
            }
            mass += v;
        }
        mass *= f.grid.cell_volume();
        if (!std::isfinite(mass) || !(mass > 0.0))
            throw BlowUp("spde_step_direct: mass blow-up");
        if (res.clamped >
            clamp_budget_fraction * static_cast<double>(f.size()))
            throw PositivityBreach("spde_step_direct: clamped " +
                                   std::to_string(res.clamped) + " cells");
        res.mass_drift = std::abs(mass - 1.0);
        const double inv = 1.0 / mass;
        for (double& v : out.values) v *= inv;
        res.density.field = std::move(out);
        return res;
    }

  private:
    ModeTable table_;
};

inline Field drift_A(const DensityField& u, const CovarianceSpec& spec) {
    return PolymerOps(spec, u.grid()).drift_A(u);
}

inline std::pair<Field, Field> diffusion_B(const DensityField& u,
                                           const std::vector<int>& k,
                                           const CovarianceSpec& spec) {
    return PolymerOps(spec, u.grid()).diffusion_B(u, k);
}

inline PolymerOps::StepResult spde_step_direct(const DensityField& u, double dt,
                                               const NoiseIncrement& inc,
                                               const CovarianceSpec& spec) {
    return PolymerOps(spec, u.grid()).step(u, dt, inc);
}

}  // namespace torus_kpz

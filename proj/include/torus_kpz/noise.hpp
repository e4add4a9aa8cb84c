#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"
#include "torus_kpz/rng.hpp"

namespace torus_kpz {

// Spatial covariance of the forcing. Three kinds:
//   smooth - finitely many nonnegative Fourier coefficients r_k (band-limited),
//   white  - delta covariance, d=1 only,
//   none   - deterministic control mode, R identically 0 (no forcing, no
//            Ito compensator). Exempt from the r_0 = 1 normalization.
enum class NoiseKind { none, smooth, white };

// One representative of the conjugate pair {k,-k}; k=0 appears once with
// is_zero set. Representatives have their first nonzero component positive.
struct FourierMode {
    std::vector<int> k;
    double r_hat = 0.0;
    bool is_zero = false;
};

struct CovarianceSpec {
    NoiseKind kind = NoiseKind::smooth;
    int dim = 1;
    std::vector<FourierMode> modes;  // smooth only; k=0 first if present

    // |k|_inf band limit (0 for white/none).
    int band_limit() const {
        int N = 0;
        for (const auto& m : modes)
            for (int c : m.k) N = std::max(N, std::abs(c));
        return N;
    }

    // R(0) = sum_k r_k. Defined for smooth and none (0); not for white.
    double R_zero() const {
        if (kind == NoiseKind::white)
            throw Unsupported("R(0) is not defined for white noise");
        double s = 0.0;
        for (const auto& m : modes) s += m.is_zero ? m.r_hat : 2.0 * m.r_hat;
        return s;
    }

    static CovarianceSpec none_spec(int dim) {
        CovarianceSpec s;
        s.kind = NoiseKind::none;
        s.dim = dim;
        return s;
    }

    static CovarianceSpec white1d() {
        CovarianceSpec s;
        s.kind = NoiseKind::white;
        s.dim = 1;
        return s;
    }

    // Builds a smooth spec from (k, r_hat) entries. Symmetry r_{-k} = r_k is
    // implied; if both members of a pair are listed their values must agree.
    // Validation: r_0 = 1, all r_k >= 0.
    static CovarianceSpec smooth(int dim,
                                 const std::vector<std::pair<std::vector<int>, double>>& entries) {
        CovarianceSpec s;
        s.kind = NoiseKind::smooth;
        s.dim = dim;
        std::vector<FourierMode> pos;
        FourierMode zero;
        bool have_zero = false;
        for (const auto& [k, r] : entries) {
            if (static_cast<int>(k.size()) != dim)
                throw ConfigError("covariance entry has wrong dimension");
            if (r < 0.0) throw ConfigError("covariance coefficient r_hat < 0");
            bool is_zero = true;
            for (int c : k) is_zero = is_zero && c == 0;
            if (is_zero) {
                if (have_zero && zero.r_hat != r)
                    throw ConfigError("conflicting r_0 entries");
                zero = FourierMode{k, r, true};
                have_zero = true;
                continue;
            }
            // canonical representative: first nonzero component positive
            std::vector<int> rep = k;
            for (int c : rep) {
                if (c > 0) break;
                if (c < 0) {
                    for (int& q : rep) q = -q;
                    break;
                }
            }
            bool merged = false;
            for (auto& m : pos) {
                if (m.k == rep) {
                    if (std::abs(m.r_hat - r) > 0.0)
                        throw ConfigError("asymmetric covariance: r_k != r_{-k}");
                    merged = true;
                }
            }
            if (!merged) pos.push_back(FourierMode{rep, r, false});
        }
        if (!have_zero || zero.r_hat != 1.0)
            throw ConfigError("covariance must have r_0 = 1 (integral of R is 1)");
        s.modes.push_back(zero);
        for (auto& m : pos) s.modes.push_back(std::move(m));
        return s;
    }

    // The default experimental covariance: d=1, N=2, r_0=1, r_1=0.5, r_2=0.25.
    static CovarianceSpec smooth_default() {
        return smooth(1, {{{0}, 1.0}, {{1}, 0.5}, {{2}, 0.25}});
    }
};

// Per-grid trig tables for the smooth modes; all mode sums go through this.
class ModeTable {
  public:
    ModeTable() = default;

    ModeTable(const CovarianceSpec& spec, const TorusGrid& grid)
        : spec_(spec), grid_(grid) {
        if (spec.kind == NoiseKind::white && grid.dim != 1)
            throw Unsupported("white noise is d=1 only");
        if (spec.kind == NoiseKind::smooth &&
            spec.band_limit() >= grid.points_per_dim / 2)
            throw ConfigError("band limit " + std::to_string(spec.band_limit()) +
                              " too large for n = " + std::to_string(grid.points_per_dim));
        if (spec.kind != NoiseKind::smooth) return;
        const std::size_t total = grid.size();
        const std::size_t n = static_cast<std::size_t>(grid.points_per_dim);
        for (const auto& m : spec.modes) {
            if (m.is_zero) continue;
            std::vector<double> c(total), s(total);
            for (std::size_t i = 0; i < total; ++i) {
                // phase 2*pi*k.x for row-major cell i
                std::size_t rem = i;
                std::size_t div = total / n;
                double phase = 0.0;
                for (int a = 0; a < grid.dim; ++a) {
                    const std::size_t ia = rem / div;
                    rem %= div;
                    div = div >= n ? div / n : 1;
                    phase += m.k[a] * (static_cast<double>(ia) * grid.spacing());
                }
                c[i] = std::cos(2.0 * M_PI * phase);
                s[i] = std::sin(2.0 * M_PI * phase);
            }
            cos_.push_back(std::move(c));
            sin_.push_back(std::move(s));
            r_.push_back(m.r_hat);
        }
    }

    const CovarianceSpec& spec() const { return spec_; }
    const TorusGrid& grid() const { return grid_; }
    std::size_t pair_count() const { return r_.size(); }
    double pair_r(std::size_t j) const { return r_[j]; }
    const std::vector<double>& pair_cos(std::size_t j) const { return cos_[j]; }
    const std::vector<double>& pair_sin(std::size_t j) const { return sin_[j]; }

    bool has_zero_mode() const {
        return spec_.kind == NoiseKind::smooth && spec_.modes.front().is_zero;
    }

    // h^d sum f*cos_j and h^d sum f*sin_j: the projections every operator needs.
    void project(const Field& f, std::size_t j, double& C, double& S) const {
        double c = 0.0, s = 0.0;
        const auto& cj = cos_[j];
        const auto& sj = sin_[j];
        for (std::size_t i = 0; i < f.size(); ++i) {
            c += f.values[i] * cj[i];
            s += f.values[i] * sj[i];
        }
        const double hd = grid_.cell_volume();
        C = c * hd;
        S = s * hd;
    }

  private:
    CovarianceSpec spec_;
    TorusGrid grid_;
    std::vector<std::vector<double>> cos_, sin_;
    std::vector<double> r_;
};

// Evaluates R(x) = sum_k r_k exp(i 2 pi k.x) (real by symmetry).
inline double evaluate_R(const CovarianceSpec& spec, const std::vector<double>& x) {
    if (spec.kind == NoiseKind::white)
        throw Unsupported("evaluate_R: white-noise covariance is not a function");
    if (spec.kind == NoiseKind::none) return 0.0;
    if (static_cast<int>(x.size()) != spec.dim)
        throw ConfigError("evaluate_R: point dimension mismatch");
    double v = 0.0;
    for (const auto& m : spec.modes) {
        if (m.is_zero) {
            v += m.r_hat;
            continue;
        }
        double phase = 0.0;
        for (int a = 0; a < spec.dim; ++a) phase += m.k[a] * x[a];
        v += 2.0 * m.r_hat * std::cos(2.0 * M_PI * phase);
    }
    return v;
}

// One step's worth of forcing: the real field dW plus the mode draws that
// generated it (the direct SPDE stepper consumes the same draws).
struct NoiseIncrement {
    Field dW;
    double dw0 = 0.0;               // k=0 real increment, variance dt (smooth)
    std::vector<double> pair_a;     // Re dw_k per pair, variance dt/2
    std::vector<double> pair_b;     // -Im conj ... sign convention: dw_k = a + i b
    double dt = 0.0;
};

// Seeded, replayable source of per-step increments. Identical (seed, stream,
// step) always produce identical draws; coupled runs share one path.
class NoisePath {
  public:
    NoisePath() = default;
    NoisePath(std::uint64_t master_seed, std::uint64_t stream)
        : seed_(master_seed), stream_(stream), rng_(master_seed, stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t step_index() const { return step_; }

    // Pure draw for an explicit step index; does not advance the path.
    NoiseIncrement increment_at(const ModeTable& table, double dt,
                                std::uint64_t step) const {
        if (!(dt > 0.0)) throw ConfigError("NoisePath: dt must be > 0");
        const auto& spec = table.spec();
        const TorusGrid& grid = table.grid();
        NoiseIncrement inc;
        inc.dt = dt;
        inc.dW = Field(grid, 0.0);
        if (spec.kind == NoiseKind::none) return inc;
        if (spec.kind == NoiseKind::white) {
            const double sd = std::sqrt(dt / grid.cell_volume());
            std::vector<double> g(grid.size());
            rng_.normals(step, grid.size(), g.begin());
            for (std::size_t i = 0; i < g.size(); ++i) inc.dW.values[i] = sd * g[i];
            return inc;
        }
        // smooth: dw_0 real N(0,dt); per pair {k,-k}: dw_k = a+ib with
        // a,b ~ N(0,dt/2), dw_{-k} = conj(dw_k). Then
        // dW(x) = sqrt(r_0) dw_0 + sum_pairs 2 sqrt(r_k) (a cos - b sin).
        const std::size_t pairs = table.pair_count();
        std::vector<double> g(1 + 2 * pairs);
        rng_.normals(step, g.size(), g.begin());
        const double sqrt_dt = std::sqrt(dt);
        const double sqrt_half_dt = std::sqrt(0.5 * dt);
        std::size_t gi = 0;
        if (table.has_zero_mode()) {
            inc.dw0 = sqrt_dt * g[gi];
        }
        gi = 1;
        inc.pair_a.resize(pairs);
        inc.pair_b.resize(pairs);
        const double w0 = table.has_zero_mode()
                              ? std::sqrt(table.spec().modes.front().r_hat) * inc.dw0
                              : 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) inc.dW.values[i] = w0;
        for (std::size_t j = 0; j < pairs; ++j) {
            const double a = sqrt_half_dt * g[gi++];
            const double b = sqrt_half_dt * g[gi++];
            inc.pair_a[j] = a;
            inc.pair_b[j] = b;
            const double amp = 2.0 * std::sqrt(table.pair_r(j));
            const auto& c = table.pair_cos(j);
            const auto& s = table.pair_sin(j);
            for (std::size_t i = 0; i < grid.size(); ++i)
                inc.dW.values[i] += amp * (a * c[i] - b * s[i]);
        }
        return inc;
    }

    // Stateful variant: draws for the current step and advances it.
    NoiseIncrement next_increment(const ModeTable& table, double dt) {
        return increment_at(table, dt, step_++);
    }

    void reset(std::uint64_t step = 0) { step_ = step; }

    const CounterRng& rng() const { return rng_; }

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t step_ = 0;
    CounterRng rng_;
};

// Replica overlap R(u,v) = int int R(x-y) u(x) v(y) dx dy.
// Smooth: sum_k r_k u_k conj(v_k) via the cos/sin projections (this form is
// real identically, so no imaginary part needs discarding). White (d=1): the
// discrete L2 pairing h sum u_i v_i. None: 0.
inline double overlap(const ModeTable& table, const Field& u, const Field& v) {
    if (u.grid != table.grid() || v.grid != table.grid())
        throw SizeMismatch("overlap: field/grid mismatch");
    const auto& spec = table.spec();
    if (spec.kind == NoiseKind::none) return 0.0;
    if (spec.kind == NoiseKind::white) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += u.values[i] * v.values[i];
        return s * u.grid.cell_volume();
    }
    double res = 0.0;
    if (table.has_zero_mode()) {
        res = spec.modes.front().r_hat * integrate(u) * integrate(v);
    }
    for (std::size_t j = 0; j < table.pair_count(); ++j) {
        double Cu, Su, Cv, Sv;
        table.project(u, j, Cu, Su);
        table.project(v, j, Cv, Sv);
        res += 2.0 * table.pair_r(j) * (Cu * Cv + Su * Sv);
    }
    return res;
}

// Convenience overload; builds the trig tables on the fly.
inline double overlap(const CovarianceSpec& spec, const Field& u, const Field& v) {
    return overlap(ModeTable(spec, u.grid), u, v);
}

}  // namespace torus_kpz

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"
#include "torus_kpz/heat_kernel.hpp"
#include "torus_kpz/noise.hpp"

namespace torus_kpz {

// Time integration of d U = 1/2 Laplace U dt + U dW (Ito), kept in the
// normalized form (endpoint density u, accumulated log Z). Two schemes:
//
//   exp_euler_multiplicative (smooth/none noise):
//       u~ <- e^{dt Delta/2} [ u * exp(dW - R(0) dt / 2) ]
//   positivity-preserving and exact for covariances with only the k=0 mode.
//
//   fd_euler_white (white noise, d=1, dt <= h^2/4):
//       u~_i <- u_i + dt/2 * (u_{i+1} - 2u_i + u_{i-1})/h^2 + u_i dW_i
//
// Every step renormalizes and accumulates log Z, plus the martingale ledger:
// m_inc = int u dW with the pre-step u (non-anticipating) and
// qv_inc = R(u,u) dt.
enum class Scheme { exp_euler_multiplicative, fd_euler_white };

struct SchemeConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::exp_euler_multiplicative;
    double clamp_floor = 1e-300;
    TorusGrid grid;
    // a step counts as a positivity breach when more than this fraction of
    // cells needed clamping
    double breach_fraction = 1e-3;

    void validate(const CovarianceSpec& spec) const {
        if (!(dt > 0.0)) throw ConfigError("SchemeConfig: dt must be > 0");
        if (spec.dim != grid.dim) throw ConfigError("SchemeConfig: dim mismatch");
        if (scheme == Scheme::exp_euler_multiplicative) {
            if (spec.kind == NoiseKind::white)
                throw ConfigError(
                    "exp_euler_multiplicative requires a smooth covariance");
        } else {
            if (spec.kind != NoiseKind::white)
                throw ConfigError("fd_euler_white requires white noise");
            if (grid.dim != 1) throw ConfigError("fd_euler_white is d=1 only");
            const double h = grid.spacing();
            if (dt > 0.25 * h * h + 1e-18)
                throw ConfigError("fd_euler_white stability requires dt <= h^2/4 = " +
                                  std::to_string(0.25 * h * h));
        }
    }
};

struct MartingaleLedger {
    double M = 0.0;
    double QV = 0.0;
    std::uint64_t clamped_cells = 0;
    std::uint64_t breach_steps = 0;
};

struct SheState {
    double time = 0.0;
    DensityField density;
    double log_mass = 0.0;  // accumulated log Z
    MartingaleLedger ledger;

    static SheState from(DensityField init) {
        SheState s;
        s.density = std::move(init);
        return s;
    }
};

// Owns the per-run precomputation (trig tables, semigroup multipliers) and
// scratch buffers. One stepper per task; step() is not reentrant.
class SheStepper {
  public:
    SheStepper(const CovarianceSpec& spec, const SchemeConfig& cfg)
        : spec_(spec), cfg_(cfg), table_(spec, cfg.grid) {
        cfg.validate(spec);
        if (cfg_.scheme == Scheme::exp_euler_multiplicative) {
            hm_ = SemigroupMultipliers(cfg.grid, cfg.dt);
            r0_ = spec_.R_zero();
        }
        work_.resize(cfg.grid.size());
    }

    const ModeTable& table() const { return table_; }
    const SchemeConfig& config() const { return cfg_; }
    const CovarianceSpec& spec() const { return spec_; }

    // Advances the state by one step using a given increment (coupled runs
    // and propagator columns share increments this way).
    void step(SheState& state, const NoiseIncrement& inc) {
        const Field& u = state.density.field;
        const double hd = cfg_.grid.cell_volume();

        double m_inc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) m_inc += u.values[i] * inc.dW.values[i];
        m_inc *= hd;
        const double qv_inc = overlap(table_, u, u) * cfg_.dt;

        Field& ut = scratch_;
        ut = u;
        apply_unnormalized(ut, inc);

        std::uint64_t clamped = 0;
        double mass = 0.0;
        for (double& v : ut.values) {
            if (v < cfg_.clamp_floor) {
                v = cfg_.clamp_floor;
                ++clamped;
            }
            mass += v;
        }
        mass *= hd;
        if (!std::isfinite(mass) || !(mass > 0.0))
            throw BlowUp("she_step: non-finite mass at t = " + std::to_string(state.time));

        const double inv = 1.0 / mass;
        for (double& v : ut.values) v *= inv;

        state.density.field.values.swap(ut.values);
        state.log_mass += std::log(mass);
        state.ledger.M += m_inc;
        state.ledger.QV += qv_inc;
        state.ledger.clamped_cells += clamped;
        if (clamped > cfg_.breach_fraction * static_cast<double>(u.size()))
            state.ledger.breach_steps += 1;
        state.time += cfg_.dt;
    }

    void step(SheState& state, NoisePath& path) {
        step(state, path.next_increment(table_, cfg_.dt));
    }

    // Applies the unnormalized one-step linear map in place (no clamping, no
    // ledger). Used by the propagator for signed/column fields.
    void apply_unnormalized(Field& f, const NoiseIncrement& inc) {
        if (cfg_.scheme == Scheme::exp_euler_multiplicative) {
            const double comp = 0.5 * r0_ * cfg_.dt;
            for (std::size_t i = 0; i < f.size(); ++i)
                f.values[i] *= std::exp(inc.dW.values[i] - comp);
            spectral_heat(f);
        } else {
            const double h = cfg_.grid.spacing();
            const double c = 0.5 * cfg_.dt / (h * h);
            const std::size_t n = f.size();
            Field& tmp = scratch2_;
            tmp = f;
            for (std::size_t i = 0; i < n; ++i) {
                const double up = tmp.values[(i + 1) % n];
                const double dn = tmp.values[(i + n - 1) % n];
                const double lap = up - 2.0 * tmp.values[i] + dn;
                f.values[i] = tmp.values[i] + c * lap +
                              tmp.values[i] * inc.dW.values[i];
            }
        }
    }

  private:
    void spectral_heat(Field& f) {
        const auto& mult = hm_.values();
        for (std::size_t i = 0; i < f.size(); ++i) work_[i] = f.values[i];
        detail::fft_nd(work_.data(), cfg_.grid.dim, cfg_.grid.points_per_dim, -1);
        for (std::size_t i = 0; i < work_.size(); ++i) work_[i] *= mult[i];
        detail::fft_nd(work_.data(), cfg_.grid.dim, cfg_.grid.points_per_dim, +1);
        const double scale = 1.0 / static_cast<double>(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) f.values[i] = work_[i].real() * scale;
    }

    CovarianceSpec spec_;
    SchemeConfig cfg_;
    ModeTable table_;
    SemigroupMultipliers hm_;
    double r0_ = 0.0;
    std::vector<std::complex<double>> work_;
    Field scratch_, scratch2_;
};

// Single step through a fresh stepper (tests and small experiments; runs
// should reuse a SheStepper).
inline SheState she_step(SheState state, const CovarianceSpec& spec,
                         const SchemeConfig& cfg, NoisePath& path) {
    SheStepper stepper(spec, cfg);
    stepper.step(state, path);
    return state;
}

namespace detail {

inline std::uint64_t steps_for(double t, double dt, const char* what) {
    const double raw = t / dt;
    const double rounded = std::round(raw);
    if (std::abs(raw - rounded) > 1e-6 * std::max(1.0, rounded))
        throw ConfigError(std::string(what) + " must be an integer multiple of dt");
    return static_cast<std::uint64_t>(rounded);
}

}  // namespace detail

// Runs from an initial density, returning snapshots at the requested times
// (each must be a multiple of dt; 0 is allowed and returns the initial state).
inline std::vector<SheState> run(const DensityField& init, double t_end,
                                 const CovarianceSpec& spec, const SchemeConfig& cfg,
                                 NoisePath& path,
                                 const std::vector<double>& snapshot_times) {
    SheStepper stepper(spec, cfg);
    const std::uint64_t n_steps = detail::steps_for(t_end, cfg.dt, "t_end");
    std::vector<std::uint64_t> snap_steps;
    snap_steps.reserve(snapshot_times.size());
    for (double ts : snapshot_times) {
        const std::uint64_t s = detail::steps_for(ts, cfg.dt, "snapshot time");
        if (s > n_steps) throw ConfigError("snapshot time beyond t_end");
        snap_steps.push_back(s);
    }
    SheState state = SheState::from(init);
    std::vector<SheState> out;
    for (std::size_t j = 0; j < snap_steps.size(); ++j)
        if (snap_steps[j] == 0) out.push_back(state);
    for (std::uint64_t s = 1; s <= n_steps; ++s) {
        stepper.step(state, path);
        for (std::size_t j = 0; j < snap_steps.size(); ++j)
            if (snap_steps[j] == s) out.push_back(state);
    }
    return out;
}

// Z_{t,s}: the SHE propagator as a matrix P[x][y], column y being the
// solution at time t started from the grid Dirac at y at time s, all columns
// driven by one shared noise window. Step indices are absolute
// (round(s/dt) + j), so any run using the same path and dt sees the same
// increments.
struct Propagator {
    TorusGrid grid;
    double s = 0.0;
    double t = 0.0;
    std::vector<double> matrix;  // row-major [x * N + y]

    double at(std::size_t x, std::size_t y) const {
        return matrix[x * grid.size() + y];
    }
};

inline Propagator propagator(double s, double t, const CovarianceSpec& spec,
                             const SchemeConfig& cfg, const NoisePath& path) {
    if (!(t - s >= cfg.dt - 1e-12)) throw ConfigError("propagator: need t - s >= dt");
    SheStepper stepper(spec, cfg);
    const std::uint64_t step0 = detail::steps_for(s, cfg.dt, "propagator start");
    const std::uint64_t n_steps = detail::steps_for(t - s, cfg.dt, "propagator window");
    const std::size_t N = cfg.grid.size();
    const double hd = cfg.grid.cell_volume();

    // columns as normalized fields with per-column log-mass
    std::vector<Field> cols(N, Field(cfg.grid, 0.0));
    std::vector<double> logm(N, 0.0);
    for (std::size_t y = 0; y < N; ++y) cols[y].values[y] = 1.0 / hd;

    for (std::uint64_t j = 0; j < n_steps; ++j) {
        const NoiseIncrement inc = path.increment_at(stepper.table(), cfg.dt, step0 + j);
        for (std::size_t y = 0; y < N; ++y) {
            stepper.apply_unnormalized(cols[y], inc);
            double mass = 0.0;
            for (double& v : cols[y].values) {
                if (v < cfg.clamp_floor) v = cfg.clamp_floor;
                mass += v;
            }
            mass *= hd;
            if (!std::isfinite(mass) || !(mass > 0.0))
                throw BlowUp("propagator: non-finite column mass");
            const double inv = 1.0 / mass;
            for (double& v : cols[y].values) v *= inv;
            logm[y] += std::log(mass);
        }
    }

    Propagator P;
    P.grid = cfg.grid;
    P.s = s;
    P.t = t;
    P.matrix.resize(N * N);
    for (std::size_t y = 0; y < N; ++y) {
        const double scale = std::exp(logm[y]);
        for (std::size_t x = 0; x < N; ++x) P.matrix[x * N + y] = scale * cols[y].values[x];
    }
    return P;
}

}  // namespace torus_kpz

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "torus_kpz/ergodicity.hpp"
#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"
#include "torus_kpz/noise.hpp"
#include "torus_kpz/she.hpp"
#include "torus_kpz/stats.hpp"

namespace torus_kpz {

// gamma = 1/2 int R(u) d pi_infty, estimated by ergodic time averaging of
// R(u(s), u(s)) along one trajectory after burn-in; stderr by batch means.
struct GammaEstimate {
    double gamma = 0.0;
    double stderr_ = 0.0;
    double burn_in = 0.0;
    std::size_t samples = 0;
};

inline GammaEstimate estimate_gamma(const CovarianceSpec& spec, const SchemeConfig& cfg,
                                    std::uint64_t seed, double burn_in, double t_end,
                                    std::uint64_t stream = 0) {
    if (!(t_end > burn_in)) throw ConfigError("estimate_gamma: t_end must exceed burn_in");
    SheStepper stepper(spec, cfg);
    NoisePath path(seed, stream);
    SheState state = SheState::from(DensityField::uniform(cfg.grid));
    const std::uint64_t burn_steps = detail::steps_for(burn_in, cfg.dt, "burn_in");
    const std::uint64_t total_steps = detail::steps_for(t_end, cfg.dt, "t_end");
    for (std::uint64_t j = 0; j < burn_steps; ++j) stepper.step(state, path);
    std::vector<double> series;
    series.reserve(total_steps - burn_steps);
    for (std::uint64_t j = burn_steps; j < total_steps; ++j) {
        stepper.step(state, path);
        series.push_back(overlap(stepper.table(), state.density.field, state.density.field));
    }
    if (series.size() < 40)
        throw InsufficientSamples("estimate_gamma: fewer than 40 post-burn-in steps");
    GammaEstimate g;
    g.gamma = 0.5 * mean_of(series);
    g.stderr_ = 0.5 * batch_means_stderr(series, 20);
    g.burn_in = burn_in;
    g.samples = series.size();
    return g;
}

struct ValueWithError {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t samples = 0;
};

// Plain Monte Carlo estimate of P_t R~ (v) = E[R(u(t;v))] - 2 gamma_hat.
inline ValueWithError estimate_PtR_tilde(const DensityField& v, double t,
                                         std::size_t n_mc, const CovarianceSpec& spec,
                                         const SchemeConfig& cfg, std::uint64_t seed,
                                         double gamma_hat,
                                         std::uint64_t stream_base = 0) {
    if (n_mc == 0) throw InsufficientSamples("estimate_PtR_tilde: n_mc must be > 0");
    std::vector<double> vals;
    vals.reserve(n_mc);
    const std::uint64_t n_steps = detail::steps_for(t, cfg.dt, "t");
    for (std::size_t i = 0; i < n_mc; ++i) {
        SheStepper stepper(spec, cfg);
        NoisePath path(seed, stream_base + i);
        SheState state = SheState::from(v);
        for (std::uint64_t j = 0; j < n_steps; ++j) stepper.step(state, path);
        vals.push_back(overlap(stepper.table(), state.density.field, state.density.field) -
                       2.0 * gamma_hat);
    }
    const Moments m = compute_moments(vals);
    return {m.mean, std::sqrt(m.variance / static_cast<double>(n_mc)), n_mc};
}

// Coupled estimator of the same quantity with relative accuracy that does not
// degrade as t grows: P_t R~(v) = E[R(u(t;v)) - R(u(t;rho))] with rho drawn
// from (a long-burn-in approximation of) the invariant law and both runs
// driven by the same noise. The difference is evaluated through the factored
// coupling representation, R(u1) - R(u2) = e^s (2 R(phi,u2) + e^s R(phi,phi)),
// so values of order exp(-lambda t) are computed without cancellation.
// Returns one estimate per requested time from a single sweep.
inline std::vector<ValueWithError> estimate_PtR_tilde_coupled(
    const DensityField& v, const std::vector<double>& times, std::size_t n_mc,
    const CovarianceSpec& spec, const SchemeConfig& cfg, std::uint64_t seed,
    double stationary_burn_in, std::uint64_t stream_base = 0) {
    if (n_mc < 2) throw InsufficientSamples("estimate_PtR_tilde_coupled: need n_mc >= 2");
    if (times.empty()) throw ConfigError("estimate_PtR_tilde_coupled: no times");
    double t_max = 0.0;
    for (double t : times) t_max = std::max(t_max, t);
    std::vector<std::uint64_t> time_steps;
    for (double t : times) time_steps.push_back(detail::steps_for(t, cfg.dt, "time"));
    const std::uint64_t n_steps = detail::steps_for(t_max, cfg.dt, "t_max");

    std::vector<std::vector<double>> vals(times.size());
    for (std::size_t i = 0; i < n_mc; ++i) {
        // stationary start, independent noise
        const InvariantEnsemble start =
            sample_invariant(spec, cfg, stationary_burn_in, 1, cfg.dt, seed,
                             stream_base + 2 * i);
        const DensityField& rho = start.samples.front();

        SheStepper stepper(spec, cfg);
        NoisePath path(seed, stream_base + 2 * i + 1);
        SheState ref = SheState::from(rho);
        Field phi(cfg.grid);
        double s;
        {
            double mx = 0.0;
            for (std::size_t q = 0; q < phi.size(); ++q) {
                phi.values[q] = v.values()[q] - rho.values()[q];
                mx = std::max(mx, std::abs(phi.values[q]));
            }
            if (mx == 0.0) {
                for (std::size_t ti = 0; ti < times.size(); ++ti) vals[ti].push_back(0.0);
                continue;
            }
            s = std::log(mx);
            for (double& q : phi.values) q /= mx;
        }
        Field work(cfg.grid);
        const double hd = cfg.grid.cell_volume();
        for (std::uint64_t j = 1; j <= n_steps; ++j) {
            const NoiseIncrement inc = path.next_increment(stepper.table(), cfg.dt);
            work = phi;
            stepper.apply_unnormalized(work, inc);
            double int_Ad = 0.0;
            for (double q : work.values) int_Ad += q;
            int_Ad *= hd;
            const double lm_before = ref.log_mass;
            stepper.step(ref, inc);
            const double m2 = std::exp(ref.log_mass - lm_before);
            const double m1 = m2 + std::exp(s) * int_Ad;
            if (!(m1 > 0.0)) throw BlowUp("estimate_PtR_tilde_coupled: nonpositive mass");
            double mx = 0.0;
            for (std::size_t q = 0; q < work.size(); ++q) {
                work.values[q] = (work.values[q] - ref.density.values()[q] * int_Ad) / m1;
                mx = std::max(mx, std::abs(work.values[q]));
            }
            s += std::log(mx);
            const double inv = 1.0 / mx;
            for (std::size_t q = 0; q < work.size(); ++q) phi.values[q] = work.values[q] * inv;
            for (std::size_t ti = 0; ti < times.size(); ++ti) {
                if (time_steps[ti] == j) {
                    const double cross = overlap(stepper.table(), phi, ref.density.field);
                    const double self = overlap(stepper.table(), phi, phi);
                    vals[ti].push_back(std::exp(s) * (2.0 * cross + std::exp(s) * self));
                }
            }
        }
    }
    std::vector<ValueWithError> out;
    for (auto& vv : vals) {
        const Moments m = compute_moments(vv);
        out.push_back({m.mean, std::sqrt(m.variance / static_cast<double>(vv.size())),
                       vv.size()});
    }
    return out;
}

// chi(T, v) = int_0^T P_s R~(v) ds by per-step trapezoidal accumulation along
// Monte Carlo paths. The gamma_hat error enters linearly in T and is reported
// separately rather than folded into the MC error.
struct CorrectorEstimate {
    double chi = 0.0;
    double stderr_ = 0.0;
    double gamma_bias = 0.0;  // 2 * stderr(gamma_hat) * T
    double tail_bound = 0.0;  // |fitted profile at T| / lambda_hat, 0 if no fit
    std::size_t samples = 0;
    std::vector<double> profile_t;      // recording grid
    std::vector<double> profile_value;  // MC mean of R(u(t)) - 2 gamma_hat
};

inline CorrectorEstimate estimate_chi(const DensityField& v, double T, std::size_t n_mc,
                                      double profile_dt, const CovarianceSpec& spec,
                                      const SchemeConfig& cfg, std::uint64_t seed,
                                      const GammaEstimate& gamma,
                                      std::uint64_t stream_base = 0) {
    if (!(T > 0.0)) throw ConfigError("estimate_chi: T must be > 0");
    if (n_mc < 2) throw InsufficientSamples("estimate_chi: need n_mc >= 2");
    const std::uint64_t n_steps = detail::steps_for(T, cfg.dt, "T");
    const std::uint64_t prof_every = detail::steps_for(profile_dt, cfg.dt, "profile_dt");
    if (prof_every == 0) throw ConfigError("estimate_chi: profile_dt too small");

    std::vector<double> integrals;
    integrals.reserve(n_mc);
    std::vector<double> prof_sum(n_steps / prof_every + 1, 0.0);
    for (std::size_t i = 0; i < n_mc; ++i) {
        SheStepper stepper(spec, cfg);
        NoisePath path(seed, stream_base + i);
        SheState state = SheState::from(v);
        double prev = overlap(stepper.table(), state.density.field, state.density.field);
        prof_sum[0] += prev;
        double acc = 0.0;
        for (std::uint64_t j = 1; j <= n_steps; ++j) {
            stepper.step(state, path);
            const double cur =
                overlap(stepper.table(), state.density.field, state.density.field);
            acc += 0.5 * (prev + cur) * cfg.dt;
            prev = cur;
            if (j % prof_every == 0) prof_sum[j / prof_every] += cur;
        }
        integrals.push_back(acc - 2.0 * gamma.gamma * T);
    }
    CorrectorEstimate est;
    const Moments m = compute_moments(integrals);
    est.chi = m.mean;
    est.stderr_ = std::sqrt(m.variance / static_cast<double>(n_mc));
    est.gamma_bias = 2.0 * gamma.stderr_ * T;
    est.samples = n_mc;
    for (std::size_t k = 0; k < prof_sum.size(); ++k) {
        est.profile_t.push_back(static_cast<double>(k * prof_every) * cfg.dt);
        est.profile_value.push_back(prof_sum[k] / static_cast<double>(n_mc) -
                                    2.0 * gamma.gamma);
    }
    // crude tail bound from a log-linear fit on the second half of the profile
    std::vector<double> fx, fy;
    for (std::size_t k = 0; k < est.profile_t.size(); ++k) {
        if (est.profile_t[k] < 0.5 * T) continue;
        const double a = std::abs(est.profile_value[k]);
        if (a > 0.0) {
            fx.push_back(est.profile_t[k]);
            fy.push_back(std::log(a));
        }
    }
    if (fx.size() >= 4) {
        const LinearFit lf = linear_fit(fx, fy);
        if (lf.slope < 0.0)
            est.tail_bound = std::abs(est.profile_value.back()) / (-lf.slope);
    }
    return est;
}

// Frechet gradient of the corrector, D chi(T, v)(z), estimated per noise path
// from the full propagator: with column solutions Z_{t,0}(., z) and the v-run
// under the same noise,
//   D P_t R(v)(z) = 2 w_z [ R(phi_z, u(t;v)) - R(u(t;v)) ],
// where phi_z is the unit-mass column shape and w_z = exp(l_z - log Z_t(v))
// its mass relative to the v-run. The z-field is integrated over [0, T] with
// per-step trapezoids.
struct GradientEstimate {
    Field dchi;
    Field stderr_;
    double orth_value = 0.0;    // <v, Dchi(v)> per-path mean
    double orth_stderr = 0.0;
    std::size_t samples = 0;
};

inline GradientEstimate estimate_Dchi(const DensityField& v, double T, std::size_t n_mc,
                                      const CovarianceSpec& spec, const SchemeConfig& cfg,
                                      std::uint64_t seed, std::uint64_t stream_base = 0) {
    if (cfg.grid.dim != 1 || cfg.grid.points_per_dim > 128)
        throw CostGuard("estimate_Dchi: limited to d=1, n <= 128");
    if (n_mc < 2) throw InsufficientSamples("estimate_Dchi: need n_mc >= 2");
    const std::uint64_t n_steps = detail::steps_for(T, cfg.dt, "T");
    const std::size_t N = cfg.grid.size();
    const double hd = cfg.grid.cell_volume();

    std::vector<std::vector<double>> per_path;  // integrated gradient per path
    std::vector<double> orth;
    for (std::size_t i = 0; i < n_mc; ++i) {
        SheStepper stepper(spec, cfg);
        NoisePath path(seed, stream_base + i);
        SheState vrun = SheState::from(v);
        std::vector<Field> cols(N, Field(cfg.grid, 0.0));
        std::vector<double> logm(N, 0.0);
        for (std::size_t z = 0; z < N; ++z) cols[z].values[z] = 1.0 / hd;

        std::vector<double> integ(N, 0.0);
        std::vector<double> prev(N);
        auto eval_integrand = [&](std::vector<double>& out) {
            const double Ruu =
                overlap(stepper.table(), vrun.density.field, vrun.density.field);
            for (std::size_t z = 0; z < N; ++z) {
                const double w = std::exp(logm[z] - vrun.log_mass);
                const double cross =
                    overlap(stepper.table(), cols[z], vrun.density.field);
                out[z] = 2.0 * w * (cross - Ruu);
            }
        };
        eval_integrand(prev);
        std::vector<double> cur(N);
        for (std::uint64_t j = 1; j <= n_steps; ++j) {
            const NoiseIncrement inc = path.increment_at(stepper.table(), cfg.dt, j - 1);
            for (std::size_t z = 0; z < N; ++z) {
                stepper.apply_unnormalized(cols[z], inc);
                double mass = 0.0;
                for (double& q : cols[z].values) {
                    if (q < cfg.clamp_floor) q = cfg.clamp_floor;
                    mass += q;
                }
                mass *= hd;
                if (!std::isfinite(mass) || !(mass > 0.0))
                    throw BlowUp("estimate_Dchi: column mass blow-up");
                const double inv = 1.0 / mass;
                for (double& q : cols[z].values) q *= inv;
                logm[z] += std::log(mass);
            }
            stepper.step(vrun, inc);
            eval_integrand(cur);
            for (std::size_t z = 0; z < N; ++z)
                integ[z] += 0.5 * (prev[z] + cur[z]) * cfg.dt;
            prev.swap(cur);
        }
        double dot = 0.0;
        for (std::size_t z = 0; z < N; ++z) dot += v.values()[z] * integ[z];
        orth.push_back(dot * hd);
        per_path.push_back(std::move(integ));
    }

    GradientEstimate g;
    g.dchi = Field(cfg.grid);
    g.stderr_ = Field(cfg.grid);
    for (std::size_t z = 0; z < N; ++z) {
        std::vector<double> vals;
        vals.reserve(n_mc);
        for (const auto& p : per_path) vals.push_back(p[z]);
        const Moments m = compute_moments(vals);
        g.dchi.values[z] = m.mean;
        g.stderr_.values[z] = std::sqrt(m.variance / static_cast<double>(n_mc));
    }
    const Moments mo = compute_moments(orth);
    g.orth_value = mo.mean;
    g.orth_stderr = std::sqrt(mo.variance / static_cast<double>(n_mc));
    g.samples = n_mc;
    return g;
}

// <D chi(v), h> for a signed perturbation h, per path, via the signed-field
// evolution U(t;h,v) (no propagator needed). Uses the same stream numbering
// as chi_diff_quotient so the two sides pair path-by-path.
inline ValueWithError dchi_inner_product(const DensityField& v, const Field& h, double T,
                                         std::size_t n_mc, const CovarianceSpec& spec,
                                         const SchemeConfig& cfg, std::uint64_t seed,
                                         std::uint64_t stream_base = 0) {
    if (n_mc < 2) throw InsufficientSamples("dchi_inner_product: need n_mc >= 2");
    const std::uint64_t n_steps = detail::steps_for(T, cfg.dt, "T");
    const double hd = cfg.grid.cell_volume();
    std::vector<double> vals;
    for (std::size_t i = 0; i < n_mc; ++i) {
        SheStepper stepper(spec, cfg);
        NoisePath path(seed, stream_base + i);
        SheState vrun = SheState::from(v);
        // factored signed field: U = exp(sigma) psi
        Field psi = h;
        double sigma = 0.0;
        {
            double mx = 0.0;
            for (double q : psi.values) mx = std::max(mx, std::abs(q));
            if (mx == 0.0) return {0.0, 0.0, n_mc};
            sigma = std::log(mx);
            for (double& q : psi.values) q /= mx;
        }
        auto integrand = [&]() {
            const double Ruu =
                overlap(stepper.table(), vrun.density.field, vrun.density.field);
            const double cross = overlap(stepper.table(), psi, vrun.density.field);
            double mass_psi = 0.0;
            for (double q : psi.values) mass_psi += q;
            mass_psi *= hd;
            return 2.0 * std::exp(sigma - vrun.log_mass) * (cross - mass_psi * Ruu);
        };
        double prev = integrand();
        double acc = 0.0;
        for (std::uint64_t j = 1; j <= n_steps; ++j) {
            const NoiseIncrement inc = path.next_increment(stepper.table(), cfg.dt);
            stepper.apply_unnormalized(psi, inc);
            double mx = 0.0;
            for (double q : psi.values) mx = std::max(mx, std::abs(q));
            if (mx > 0.0) {
                sigma += std::log(mx);
                for (double& q : psi.values) q /= mx;
            }
            stepper.step(vrun, inc);
            const double cur = integrand();
            acc += 0.5 * (prev + cur) * cfg.dt;
            prev = cur;
        }
        vals.push_back(acc);
    }
    const Moments m = compute_moments(vals);
    return {m.mean, std::sqrt(m.variance / static_cast<double>(n_mc)), n_mc};
}

// Central difference (chi(v + eps h) - chi(v - eps h)) / (2 eps) with common
// noise across the pair (gamma_hat cancels exactly).
inline ValueWithError chi_diff_quotient(const DensityField& v, const Field& h, double eps,
                                        double T, std::size_t n_mc,
                                        const CovarianceSpec& spec, const SchemeConfig& cfg,
                                        std::uint64_t seed, std::uint64_t stream_base = 0) {
    if (n_mc < 2) throw InsufficientSamples("chi_diff_quotient: need n_mc >= 2");
    const std::uint64_t n_steps = detail::steps_for(T, cfg.dt, "T");
    Field up(v.grid()), dn(v.grid());
    for (std::size_t i = 0; i < up.size(); ++i) {
        up.values[i] = v.values()[i] + eps * h.values[i];
        dn.values[i] = v.values()[i] - eps * h.values[i];
    }
    const DensityField vp = DensityField::certify(up);
    const DensityField vm = DensityField::certify(dn);
    std::vector<double> vals;
    for (std::size_t i = 0; i < n_mc; ++i) {
        SheStepper sp(spec, cfg), sm(spec, cfg);
        NoisePath path(seed, stream_base + i);
        SheState a = SheState::from(vp), b = SheState::from(vm);
        double prev = overlap(sp.table(), a.density.field, a.density.field) -
                      overlap(sp.table(), b.density.field, b.density.field);
        double acc = 0.0;
        for (std::uint64_t j = 1; j <= n_steps; ++j) {
            const NoiseIncrement inc = path.next_increment(sp.table(), cfg.dt);
            sp.step(a, inc);
            sm.step(b, inc);
            const double cur = overlap(sp.table(), a.density.field, a.density.field) -
                               overlap(sp.table(), b.density.field, b.density.field);
            acc += 0.5 * (prev + cur) * cfg.dt;
            prev = cur;
        }
        vals.push_back(acc / (2.0 * eps));
    }
    const Moments m = compute_moments(vals);
    return {m.mean, std::sqrt(m.variance / static_cast<double>(n_mc)), n_mc};
}

// Diffusivity, two independent routes.
struct SigmaEstimate {
    double sigma2_qv = 0.0;
    double stderr_qv = 0.0;
    double sigma2_var = 0.0;
    double stderr_var = 0.0;
};

// Quadratic-variation route: time average over stationary states of
// R(g, g) with g = u (1 - Dchi(u)/2).
inline ValueWithError sigma2_qv_route(const CovarianceSpec& spec, const SchemeConfig& cfg,
                                      std::uint64_t seed, double burn_in,
                                      std::size_t n_states, double thinning,
                                      double T_grad, std::size_t n_mc_grad) {
    const InvariantEnsemble ens =
        sample_invariant(spec, cfg, burn_in, n_states, thinning, seed, /*stream=*/1000);
    ModeTable table(spec, cfg.grid);
    std::vector<double> vals;
    for (std::size_t k = 0; k < ens.samples.size(); ++k) {
        const DensityField& u = ens.samples[k];
        const GradientEstimate grad = estimate_Dchi(u, T_grad, n_mc_grad, spec, cfg, seed,
                                                    /*stream_base=*/2000 + 100 * k);
        Field g(cfg.grid);
        for (std::size_t i = 0; i < g.size(); ++i)
            g.values[i] = u.values()[i] * (1.0 - 0.5 * grad.dchi.values[i]);
        vals.push_back(overlap(table, g, g));
    }
    const Moments m = compute_moments(vals);
    return {m.mean, std::sqrt(m.variance / static_cast<double>(vals.size())), vals.size()};
}

// Replica-variance route from samples of log Z_t + gamma_hat t at one t.
inline ValueWithError sigma2_var_route(const std::vector<double>& zt_samples, double t) {
    if (zt_samples.size() < 2)
        throw InsufficientSamples("sigma2_var_route: need >= 2 samples");
    const Moments m = compute_moments(zt_samples);
    const double n = static_cast<double>(zt_samples.size());
    ValueWithError r;
    r.value = m.variance / t;
    r.stderr_ = r.value * std::sqrt(2.0 / (n - 1.0));
    r.samples = zt_samples.size();
    return r;
}

}  // namespace torus_kpz

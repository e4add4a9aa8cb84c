#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"
#include "torus_kpz/noise.hpp"
#include "torus_kpz/rng.hpp"
#include "torus_kpz/she.hpp"
#include "torus_kpz/stats.hpp"

namespace torus_kpz {

// Synchronous (same-noise) coupling of two endpoint densities. The coupling
// distance decays below double rounding within a couple of time units, so the
// difference delta = u1 - u2 is propagated in factored form
// delta = exp(s) * phi, ||phi||_inf = 1, via the exact one-step recursion
//
//   delta' = [ A(delta) - u2' * int A(delta) ] / m1,    m1 = m2 + int A(delta),
//
// where A is the scheme's unnormalized linear step map and m2 = int A(u2).
// Everything on the right is O(1), so log distances are exact down to
// arbitrarily small scales; the distances themselves underflow only past
// exp(-745).
struct CouplingRecord {
    std::vector<double> t;
    std::vector<double> log_dist_linf;  // -inf marks an exactly-zero distance
    std::vector<double> log_dist_l1;

    double dist_linf(std::size_t i) const { return std::exp(log_dist_linf[i]); }
    double dist_l1(std::size_t i) const { return std::exp(log_dist_l1[i]); }
};

inline CouplingRecord coupled_run(const DensityField& nu1, const DensityField& nu2,
                                  double t_end, const CovarianceSpec& spec,
                                  const SchemeConfig& cfg, std::uint64_t seed,
                                  double snapshot_interval,
                                  std::uint64_t stream = 0) {
    if (nu1.grid() != cfg.grid || nu2.grid() != cfg.grid)
        throw SizeMismatch("coupled_run: initial data grid mismatch");
    SheStepper stepper(spec, cfg);
    NoisePath path(seed, stream);
    const std::uint64_t n_steps = detail::steps_for(t_end, cfg.dt, "t_end");
    const std::uint64_t snap_every =
        detail::steps_for(snapshot_interval, cfg.dt, "snapshot interval");
    if (snap_every == 0) throw ConfigError("coupled_run: snapshot interval too small");

    SheState ref = SheState::from(nu2);
    Field phi(cfg.grid, 0.0);
    double s = -std::numeric_limits<double>::infinity();
    bool zero = true;
    {
        double mx = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            phi.values[i] = nu1.values()[i] - nu2.values()[i];
            mx = std::max(mx, std::abs(phi.values[i]));
        }
        if (mx > 0.0) {
            zero = false;
            s = std::log(mx);
            for (double& v : phi.values) v /= mx;
        }
    }

    CouplingRecord rec;
    const double hd = cfg.grid.cell_volume();
    Field work(cfg.grid);
    for (std::uint64_t j = 1; j <= n_steps; ++j) {
        const NoiseIncrement inc = path.next_increment(stepper.table(), cfg.dt);
        double int_Adelta = 0.0;
        if (!zero) {
            work = phi;
            stepper.apply_unnormalized(work, inc);
            double acc = 0.0;
            for (double v : work.values) acc += v;
            int_Adelta = acc * hd;
        }
        const double log_mass_before = ref.log_mass;
        stepper.step(ref, inc);
        const double m2 = std::exp(ref.log_mass - log_mass_before);
        if (!zero) {
            const double m1 = m2 + std::exp(s) * int_Adelta;
            if (!(m1 > 0.0)) throw BlowUp("coupled_run: nonpositive coupled mass");
            double mx = 0.0;
            for (std::size_t i = 0; i < work.size(); ++i) {
                work.values[i] =
                    (work.values[i] - ref.density.values()[i] * int_Adelta) / m1;
                mx = std::max(mx, std::abs(work.values[i]));
            }
            if (mx == 0.0) {
                zero = true;
                s = -std::numeric_limits<double>::infinity();
            } else {
                s += std::log(mx);
                const double inv = 1.0 / mx;
                for (std::size_t i = 0; i < work.size(); ++i)
                    phi.values[i] = work.values[i] * inv;
            }
        }
        if (j % snap_every == 0) {
            rec.t.push_back(static_cast<double>(j) * cfg.dt);
            if (zero) {
                rec.log_dist_linf.push_back(-std::numeric_limits<double>::infinity());
                rec.log_dist_l1.push_back(-std::numeric_limits<double>::infinity());
            } else {
                rec.log_dist_linf.push_back(s);
                double l1 = 0.0;
                for (double v : phi.values) l1 += std::abs(v);
                rec.log_dist_l1.push_back(s + std::log(l1 * hd));
            }
        }
    }
    return rec;
}

struct DecayFit {
    double lambda = 0.0;  // +inf when every distance is exactly zero
    double C = 0.0;       // prefactor exp(intercept)
    double r_squared = 0.0;
};

// Least-squares fit of log dist = log C - lambda t over [t_min, t_max].
inline DecayFit fit_decay_rate(const CouplingRecord& rec, double t_min, double t_max,
                               bool use_linf = true) {
    std::vector<double> xs, ys;
    const auto& ld = use_linf ? rec.log_dist_linf : rec.log_dist_l1;
    bool any_nonzero = false;
    for (std::size_t i = 0; i < rec.t.size(); ++i) {
        if (rec.t[i] < t_min || rec.t[i] > t_max) continue;
        if (std::isfinite(ld[i])) {
            any_nonzero = true;
            xs.push_back(rec.t[i]);
            ys.push_back(ld[i]);
        }
    }
    if (!any_nonzero) {
        // coupling already exact
        DecayFit f;
        f.lambda = std::numeric_limits<double>::infinity();
        f.C = 0.0;
        f.r_squared = 1.0;
        return f;
    }
    if (xs.size() < 10)
        throw InsufficientSamples("fit_decay_rate: need >= 10 points with positive distances");
    const LinearFit lf = linear_fit(xs, ys);
    DecayFit f;
    f.lambda = -lf.slope;
    f.C = std::exp(lf.intercept);
    f.r_squared = lf.r_squared;
    return f;
}

// Median-over-seeds coupling profile; the pathwise records are combined
// snapshot-by-snapshot (all records share snapshot times).
inline CouplingRecord median_coupling(const std::vector<CouplingRecord>& recs) {
    if (recs.empty()) throw EmptyEnsemble("median_coupling: no records");
    CouplingRecord out;
    out.t = recs.front().t;
    for (std::size_t i = 0; i < out.t.size(); ++i) {
        std::vector<double> li, l1;
        li.reserve(recs.size());
        l1.reserve(recs.size());
        for (const auto& r : recs) {
            li.push_back(r.log_dist_linf[i]);
            l1.push_back(r.log_dist_l1[i]);
        }
        out.log_dist_linf.push_back(median_of(li));
        out.log_dist_l1.push_back(median_of(l1));
    }
    return out;
}

// inf over (x,y,z) of Z_{t+1,t}(x,y) Z_{t,t-1}(y,z) divided by
// sup over (x,z) of int Z_{t+1,t}(x,y') Z_{t,t-1}(y',z) dy'. Always in (0,1].
inline double b_ratio_statistic(const CovarianceSpec& spec, const SchemeConfig& cfg,
                                std::uint64_t seed, double t,
                                std::uint64_t stream = 0) {
    if (!(t >= 1.0)) throw ConfigError("b_ratio_statistic: need t >= 1");
    NoisePath path(seed, stream);
    const Propagator P1 = propagator(t - 1.0, t, spec, cfg, path);       // Z_{t,t-1}
    const Propagator P2 = propagator(t, t + 1.0, spec, cfg, path);       // Z_{t+1,t}
    const std::size_t N = cfg.grid.size();
    const double hd = cfg.grid.cell_volume();

    // numerator: min over y of (min_x P2(x,y)) * (min_z P1(y,z))
    double num = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < N; ++y) {
        double min_x = std::numeric_limits<double>::infinity();
        for (std::size_t x = 0; x < N; ++x) min_x = std::min(min_x, P2.at(x, y));
        double min_z = std::numeric_limits<double>::infinity();
        for (std::size_t z = 0; z < N; ++z) min_z = std::min(min_z, P1.at(y, z));
        num = std::min(num, min_x * min_z);
    }
    // denominator: sup over (x,z) of the h-quadrature composition
    double den = 0.0;
    for (std::size_t x = 0; x < N; ++x) {
        for (std::size_t z = 0; z < N; ++z) {
            double s = 0.0;
            for (std::size_t y = 0; y < N; ++y) s += P2.at(x, y) * P1.at(y, z);
            den = std::max(den, s * hd);
        }
    }
    if (!(den > 0.0)) throw NumericError("b_ratio_statistic: degenerate denominator");
    return num / den;
}

// Empirical moments of one-unit propagator windows (runtime diagnostics).
struct PropagatorMoments {
    double mean_inv_inf_sq = 0.0;  // E[(inf Z)^{-2}]
    double mean_sup_sq = 0.0;      // E[(sup Z)^2]
};

inline PropagatorMoments propagator_moments(const CovarianceSpec& spec,
                                            const SchemeConfig& cfg,
                                            std::uint64_t seed, double t,
                                            std::size_t n_seeds) {
    PropagatorMoments m;
    for (std::size_t r = 0; r < n_seeds; ++r) {
        NoisePath path(seed, r);
        const Propagator P = propagator(t - 1.0, t, spec, cfg, path);
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (double v : P.matrix) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        m.mean_inv_inf_sq += 1.0 / (lo * lo);
        m.mean_sup_sq += hi * hi;
    }
    m.mean_inv_inf_sq /= static_cast<double>(n_seeds);
    m.mean_sup_sq /= static_cast<double>(n_seeds);
    return m;
}

// Stationary samples of the endpoint density from one chain.
struct InvariantEnsemble {
    std::vector<DensityField> samples;
    double burn_in = 0.0;
    double thinning = 0.0;
    std::uint64_t seed = 0;
    NoiseKind kind = NoiseKind::smooth;
};

inline InvariantEnsemble sample_invariant(const CovarianceSpec& spec,
                                          const SchemeConfig& cfg, double burn_in,
                                          std::size_t n_samples, double thinning,
                                          std::uint64_t seed,
                                          std::uint64_t stream = 0,
                                          const DensityField* init = nullptr) {
    if (!(burn_in > 0.0)) throw ConfigError("sample_invariant: burn_in must be > 0");
    if (n_samples == 0) throw ConfigError("sample_invariant: n_samples must be > 0");
    SheStepper stepper(spec, cfg);
    NoisePath path(seed, stream);
    SheState state =
        SheState::from(init ? *init : DensityField::uniform(cfg.grid));
    const std::uint64_t burn_steps = detail::steps_for(burn_in, cfg.dt, "burn_in");
    const std::uint64_t thin_steps = detail::steps_for(thinning, cfg.dt, "thinning");
    if (thin_steps == 0) throw ConfigError("sample_invariant: thinning too small");
    InvariantEnsemble ens;
    ens.burn_in = burn_in;
    ens.thinning = thinning;
    ens.seed = seed;
    ens.kind = spec.kind;
    for (std::uint64_t j = 0; j < burn_steps; ++j) stepper.step(state, path);
    ens.samples.reserve(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        for (std::uint64_t j = 0; j < thin_steps; ++j) stepper.step(state, path);
        ens.samples.push_back(state.density);
    }
    return ens;
}

// Comparison of the stationary log-density increments against the Brownian
// bridge law: Var[log u(x) - log u(0)] vs x(1-x) and
// Cov[log u(x)-log u(0), log u(y)-log u(0)] vs min(x,y) - xy.
struct BridgeReport {
    std::vector<double> x;
    std::vector<double> emp_var;
    std::vector<double> target_var;
    double max_abs_dev_var = 0.0;
    double max_abs_dev_cov = 0.0;
};

inline BridgeReport bridge_compare(const InvariantEnsemble& ens) {
    if (ens.kind != NoiseKind::white)
        throw WrongNoiseKind("bridge_compare: requires a white-noise d=1 ensemble");
    if (ens.samples.empty()) throw EmptyEnsemble("bridge_compare: empty ensemble");
    const TorusGrid grid = ens.samples.front().grid();
    const std::size_t n = grid.size();
    const std::size_t m = ens.samples.size();
    // y_k(x) = log u_k(x) - log u_k(0)
    std::vector<std::vector<double>> y(m, std::vector<double>(n));
    for (std::size_t k = 0; k < m; ++k) {
        const auto& v = ens.samples[k].values();
        const double l0 = std::log(v[0]);
        for (std::size_t i = 0; i < n; ++i) y[k][i] = std::log(v[i]) - l0;
    }
    BridgeReport rep;
    std::vector<double> mean(n, 0.0);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < n; ++i) mean[i] += y[k][i];
    for (double& v : mean) v /= static_cast<double>(m);
    rep.x.resize(n);
    rep.emp_var.resize(n);
    rep.target_var.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = static_cast<double>(i) * grid.spacing();
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double d = y[k][i] - mean[i];
            s += d * d;
        }
        rep.x[i] = xi;
        rep.emp_var[i] = m > 1 ? s / static_cast<double>(m - 1) : 0.0;
        rep.target_var[i] = xi * (1.0 - xi);
        rep.max_abs_dev_var =
            std::max(rep.max_abs_dev_var, std::abs(rep.emp_var[i] - rep.target_var[i]));
    }
    // covariance spot checks on a coarse sub-grid
    const std::size_t stride = std::max<std::size_t>(1, n / 8);
    for (std::size_t i = stride; i < n; i += stride) {
        for (std::size_t j = stride; j < n; j += stride) {
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k)
                s += (y[k][i] - mean[i]) * (y[k][j] - mean[j]);
            const double cov = m > 1 ? s / static_cast<double>(m - 1) : 0.0;
            const double xi = static_cast<double>(i) * grid.spacing();
            const double xj = static_cast<double>(j) * grid.spacing();
            const double target = std::min(xi, xj) - xi * xj;
            rep.max_abs_dev_cov = std::max(rep.max_abs_dev_cov, std::abs(cov - target));
        }
    }
    return rep;
}

// Finite dictionary of functionals F_j(u) = tanh(int phi_j u dx) with
// ||phi_j||_inf <= 1. Each F_j is bounded by 1 and Lipschitz-1 with respect
// to the total-variation norm ||u - v||_{L^1}.
struct LipschitzDictionary {
    std::vector<Field> phis;

    static LipschitzDictionary default_dict(const TorusGrid& grid) {
        LipschitzDictionary d;
        const std::size_t n = grid.size();
        const std::size_t nn = static_cast<std::size_t>(grid.points_per_dim);
        for (int m = 1; m <= 4; ++m) {
            for (int kind = 0; kind < 2; ++kind) {
                for (double amp : {1.0, 0.5}) {
                    Field phi(grid);
                    for (std::size_t i = 0; i < n; ++i) {
                        // first-axis coordinate of cell i
                        std::size_t lead = i;
                        std::size_t div = n / nn;
                        lead /= div;
                        const double x = static_cast<double>(lead) * grid.spacing();
                        phi.values[i] = amp * (kind == 0 ? std::cos(2.0 * M_PI * m * x)
                                                         : std::sin(2.0 * M_PI * m * x));
                    }
                    d.phis.push_back(std::move(phi));
                }
            }
        }
        return d;
    }

    double eval(std::size_t j, const DensityField& u) const {
        const Field& phi = phis.at(j);
        if (phi.grid != u.grid()) throw SizeMismatch("LipschitzDictionary: grid mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i)
            s += phi.values[i] * u.values()[i];
        return std::tanh(s * phi.grid.cell_volume());
    }
};

// max_j | mean_A F_j - mean_B F_j |: a lower bound on the Fortet-Mourier
// distance between the sampled laws.
inline double fm_proxy_distance(const InvariantEnsemble& A, const InvariantEnsemble& B,
                                const LipschitzDictionary& dict) {
    if (A.samples.empty() || B.samples.empty())
        throw EmptyEnsemble("fm_proxy_distance: empty ensemble");
    double best = 0.0;
    for (std::size_t j = 0; j < dict.phis.size(); ++j) {
        double ma = 0.0, mb = 0.0;
        for (const auto& u : A.samples) ma += dict.eval(j, u);
        for (const auto& u : B.samples) mb += dict.eval(j, u);
        ma /= static_cast<double>(A.samples.size());
        mb /= static_cast<double>(B.samples.size());
        best = std::max(best, std::abs(ma - mb));
    }
    return best;
}

// Bootstrap standard error of fm_proxy_distance under resampling of both
// ensembles.
inline double fm_proxy_bootstrap_stderr(const InvariantEnsemble& A,
                                        const InvariantEnsemble& B,
                                        const LipschitzDictionary& dict,
                                        std::size_t n_boot, std::uint64_t seed) {
    if (A.samples.empty() || B.samples.empty())
        throw EmptyEnsemble("fm_proxy_bootstrap_stderr: empty ensemble");
    CounterRng rng(seed, 0xB007);
    // precompute F_j on every sample
    const std::size_t J = dict.phis.size();
    std::vector<std::vector<double>> fa(J, std::vector<double>(A.samples.size()));
    std::vector<std::vector<double>> fb(J, std::vector<double>(B.samples.size()));
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t k = 0; k < A.samples.size(); ++k) fa[j][k] = dict.eval(j, A.samples[k]);
        for (std::size_t k = 0; k < B.samples.size(); ++k) fb[j][k] = dict.eval(j, B.samples[k]);
    }
    std::vector<double> ds;
    ds.reserve(n_boot);
    std::uint64_t draw = 0;
    for (std::size_t b = 0; b < n_boot; ++b) {
        double best = 0.0;
        std::vector<std::size_t> ia(A.samples.size()), ib(B.samples.size());
        for (auto& v : ia)
            v = static_cast<std::size_t>(rng.uniform(b, draw++) *
                                         static_cast<double>(A.samples.size()));
        for (auto& v : ib)
            v = static_cast<std::size_t>(rng.uniform(b, draw++) *
                                         static_cast<double>(B.samples.size()));
        for (std::size_t j = 0; j < J; ++j) {
            double ma = 0.0, mb = 0.0;
            for (std::size_t k : ia) ma += fa[j][k];
            for (std::size_t k : ib) mb += fb[j][k];
            ma /= static_cast<double>(ia.size());
            mb /= static_cast<double>(ib.size());
            best = std::max(best, std::abs(ma - mb));
        }
        ds.push_back(best);
    }
    const Moments m = compute_moments(ds);
    return std::sqrt(m.variance);
}

}  // namespace torus_kpz

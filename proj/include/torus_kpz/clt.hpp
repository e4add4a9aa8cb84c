#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"
#include "torus_kpz/noise.hpp"
#include "torus_kpz/parallel.hpp"
#include "torus_kpz/she.hpp"
#include "torus_kpz/stats.hpp"

namespace torus_kpz {

// Replica orchestration for the free-energy fluctuation experiments and the
// log U(t,x) vs log Z_t gap diagnostics.

struct CltSample {
    std::size_t replica = 0;
    std::uint64_t stream = 0;
    std::vector<double> t;                   // record times
    std::vector<double> logZ;                // one per record time
    std::vector<std::vector<double>> logU;   // [time][probe]
};

struct CltRunResult {
    std::vector<CltSample> samples;  // sorted by replica id; failures excluded
    std::size_t failed = 0;
    std::vector<std::size_t> failed_ids;
};

// Runs n_rep independent replicas from the uniform initial condition,
// recording log Z and log U at the probe points at each record time.
// Deterministic for a fixed master seed and any worker count.
inline CltRunResult run_replicas(const CovarianceSpec& spec, const SchemeConfig& cfg,
                                 std::uint64_t master_seed, std::size_t n_rep,
                                 const std::vector<double>& record_times,
                                 const std::vector<std::vector<double>>& probe_points,
                                 int workers = 1) {
    if (n_rep < 2) throw ConfigError("run_replicas: need n_rep >= 2");
    if (record_times.empty()) throw ConfigError("run_replicas: no record times");
    std::vector<std::uint64_t> rec_steps;
    std::uint64_t max_step = 0;
    for (double t : record_times) {
        rec_steps.push_back(detail::steps_for(t, cfg.dt, "record time"));
        max_step = std::max(max_step, rec_steps.back());
    }
    std::vector<std::size_t> probe_cells;
    for (const auto& p : probe_points) {
        if (static_cast<int>(p.size()) != cfg.grid.dim)
            throw ConfigError("run_replicas: probe dimension mismatch");
        std::size_t idx = 0;
        for (int a = 0; a < cfg.grid.dim; ++a) {
            double xa = p[a] - std::floor(p[a]);
            long cell = std::lround(xa * cfg.grid.points_per_dim) % cfg.grid.points_per_dim;
            idx = idx * cfg.grid.points_per_dim + static_cast<std::size_t>(cell);
        }
        probe_cells.push_back(idx);
    }

    std::vector<CltSample> slots(n_rep);
    std::vector<char> ok(n_rep, 0);
    parallel_for_index(n_rep, workers, [&](std::size_t r) {
        CltSample s;
        s.replica = r;
        s.stream = r;
        try {
            SheStepper stepper(spec, cfg);
            NoisePath path(master_seed, r);
            SheState state = SheState::from(DensityField::uniform(cfg.grid));
            auto record = [&](std::uint64_t step) {
                for (std::size_t k = 0; k < rec_steps.size(); ++k) {
                    if (rec_steps[k] != step) continue;
                    s.t.push_back(record_times[k]);
                    s.logZ.push_back(state.log_mass);
                    std::vector<double> lu;
                    for (std::size_t c : probe_cells)
                        lu.push_back(std::log(state.density.values()[c]) + state.log_mass);
                    s.logU.push_back(std::move(lu));
                }
            };
            record(0);
            for (std::uint64_t j = 1; j <= max_step; ++j) {
                stepper.step(state, path);
                record(j);
            }
            slots[r] = std::move(s);
            ok[r] = 1;
        } catch (const NumericError&) {
            ok[r] = 0;
        }
    });
    CltRunResult out;
    for (std::size_t r = 0; r < n_rep; ++r) {
        if (ok[r])
            out.samples.push_back(std::move(slots[r]));
        else {
            ++out.failed;
            out.failed_ids.push_back(r);
        }
    }
    return out;
}

struct NormalityReport {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double ks_statistic = 0.0;
    double ks_p_value = 0.0;
    double ad_statistic = 0.0;
    std::vector<double> qq_prob;
    std::vector<double> qq_empirical;
    std::vector<double> qq_theoretical;
};

// Moments, KS and Anderson-Darling against N(0, sigma2) (plug-in sigma2
// treated as fixed, which makes the KS p-value conservative for a fitted
// variance), plus a quantile table.
inline NormalityReport normality_report(std::vector<double> samples, double sigma2) {
    if (samples.size() < 100)
        throw TooFewSamples("normality_report: need >= 100 samples");
    NormalityReport rep;
    const Moments m = compute_moments(samples);
    rep.count = m.count;
    rep.mean = m.mean;
    rep.variance = m.variance;
    rep.skewness = m.skewness;
    rep.excess_kurtosis = m.excess_kurtosis;
    const KsResult ks = ks_test_normal(samples, 0.0, sigma2);
    rep.ks_statistic = ks.statistic;
    rep.ks_p_value = ks.p_value;
    rep.ad_statistic = anderson_darling_normal(samples, 0.0, sigma2);
    std::sort(samples.begin(), samples.end());
    const double sd = std::sqrt(sigma2);
    for (double p : {0.01, 0.02, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.98, 0.99}) {
        const double pos = p * static_cast<double>(samples.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        const double emp = lo + 1 < samples.size()
                               ? samples[lo] * (1.0 - frac) + samples[lo + 1] * frac
                               : samples[lo];
        rep.qq_prob.push_back(p);
        rep.qq_empirical.push_back(emp);
        rep.qq_theoretical.push_back(sd * normal_quantile(p));
    }
    return rep;
}

struct GapReport {
    std::vector<double> t;
    std::vector<double> mean_abs_gap;       // mean over replicas and probes
    std::vector<double> gap_over_sqrt_t;
};

// |log U(t, x_probe) - log Z_t| = |log u(t, x_probe)| averaged across
// replicas; bounded in t when the endpoint density stays comparable to
// uniform, which is what makes the two CLT normalizations interchangeable.
inline GapReport logU_gap_check(const CltRunResult& run) {
    if (run.samples.empty()) throw EmptyEnsemble("logU_gap_check: no samples");
    const auto& t = run.samples.front().t;
    GapReport rep;
    rep.t = t;
    for (std::size_t k = 0; k < t.size(); ++k) {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (const auto& s : run.samples) {
            for (double lu : s.logU[k]) {
                acc += std::abs(lu - s.logZ[k]);
                ++cnt;
            }
        }
        const double gap = acc / static_cast<double>(cnt);
        rep.mean_abs_gap.push_back(gap);
        rep.gap_over_sqrt_t.push_back(t[k] > 0.0 ? gap / std::sqrt(t[k]) : gap);
    }
    return rep;
}

}  // namespace torus_kpz

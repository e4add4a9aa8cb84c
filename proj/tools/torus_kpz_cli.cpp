// torus_kpz: experiments on the stochastic heat equation on the torus, the
// polymer endpoint density, and the free-energy fluctuation statistics.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 4 an acceptance threshold failed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "torus_kpz/torus_kpz.hpp"

namespace fs = std::filesystem;
using namespace torus_kpz;
using nlohmann::json;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::string format;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 0;
};

ExperimentConfig load_config(const CliOptions& opt) {
    ExperimentConfig cfg;
    bool config_sets_seed = false;
    if (!opt.config_path.empty()) {
        std::ifstream is(opt.config_path);
        if (!is) throw ConfigError("cannot read config file " + opt.config_path);
        std::stringstream buf;
        buf << is.rdbuf();
        std::vector<std::string> seen;
        cfg = parse_config(buf.str(), &seen);
        for (const auto& k : seen) config_sets_seed |= (k == "run.seed");
    }
    if (opt.seed_given) {
        cfg.seed = opt.seed;
    } else if (!config_sets_seed) {
        if (const char* env = std::getenv("TORUS_KPZ_SEED")) {
            try {
                cfg.seed = std::stoull(env);
            } catch (...) {
                throw ConfigError("TORUS_KPZ_SEED is not an integer");
            }
        }
    }
    if (opt.workers > 0) cfg.workers = opt.workers;
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    if (!opt.format.empty()) cfg.format = opt.format;
    cfg.validate();
    return cfg;
}

std::vector<double> snapshot_grid(double t_end, double interval) {
    std::vector<double> ts;
    const auto n = static_cast<std::uint64_t>(std::round(t_end / interval));
    for (std::uint64_t k = 1; k <= n; ++k) ts.push_back(static_cast<double>(k) * interval);
    return ts;
}

void write_json(const fs::path& p, const json& j) {
    auto os = io::open_out(p);
    os << j.dump(2) << '\n';
}

int verdict_line(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[pass] " : "[FAIL] ") << name << ": " << detail << '\n';
    return pass ? 0 : 4;
}

std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

int cmd_simulate(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    io::write_manifest(dir, "simulate", cfg);
    const CovarianceSpec spec = cfg.covariance();
    const SchemeConfig scheme = cfg.scheme();
    NoisePath path(cfg.seed, 0);
    const auto snaps = run(cfg.initial_condition(), cfg.t_end, spec, scheme, path,
                           snapshot_grid(cfg.t_end, cfg.snapshot_interval));
    const ModeTable table(spec, scheme.grid);
    if (cfg.format == "json") {
        json rows = json::array();
        for (const auto& s : snaps)
            rows.push_back({{"t", s.time},
                            {"logZ", s.log_mass},
                            {"M", s.ledger.M},
                            {"QV", s.ledger.QV},
                            {"min_u", min_value(s.density.field)},
                            {"max_u", max_value(s.density.field)},
                            {"overlap_uu", overlap(table, s.density.field, s.density.field)}});
        write_json(dir / "trajectory.json", rows);
    } else {
        io::write_trajectory_csv(dir / "trajectory.csv", snaps, table);
    }
    std::cout << "simulate: t_end = " << fmt17(cfg.t_end)
              << "  logZ = " << fmt17(snaps.back().log_mass) << '\n';
    return 0;
}

int cmd_coupling(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    io::write_manifest(dir, "coupling", cfg);
    const CovarianceSpec spec = cfg.covariance();
    const SchemeConfig scheme = cfg.scheme();
    const DensityField nu1 = DensityField::dirac(scheme.grid, cfg.init_dirac_x);
    const DensityField nu2 = DensityField::uniform(scheme.grid);

    std::vector<CouplingRecord> recs(cfg.coupling_seeds);
    parallel_for_index(cfg.coupling_seeds, cfg.workers, [&](std::size_t i) {
        recs[i] = coupled_run(nu1, nu2, cfg.t_end, spec, scheme, cfg.seed,
                              cfg.snapshot_interval, /*stream=*/i);
    });
    const CouplingRecord med = median_coupling(recs);
    io::write_coupling_csv(dir / "coupling_median.csv", med);
    const DecayFit fit =
        fit_decay_rate(med, cfg.coupling_fit_t_min, cfg.coupling_fit_t_max);
    json j;
    j["lambda_hat"] = fit.lambda;
    j["prefactor_C"] = fit.C;
    j["r_squared"] = fit.r_squared;
    j["fit_window"] = {cfg.coupling_fit_t_min, cfg.coupling_fit_t_max};
    j["seeds"] = cfg.coupling_seeds;
    write_json(dir / "coupling_fit.json", j);
    const bool pass = fit.lambda > 0.0 && fit.r_squared > 0.9;
    return verdict_line("coupling decay",
                        pass, "lambda_hat = " + fmt17(fit.lambda) +
                                  ", R2 = " + fmt17(fit.r_squared));
}

int cmd_invariant(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    io::write_manifest(dir, "invariant", cfg);
    const CovarianceSpec spec = cfg.covariance();
    const SchemeConfig scheme = cfg.scheme();
    const InvariantEnsemble ens =
        sample_invariant(spec, scheme, cfg.invariant_burn_in, cfg.invariant_samples,
                         cfg.invariant_thinning, cfg.seed, /*stream=*/0);
    const ModeTable table(spec, scheme.grid);
    double mean_overlap = 0.0;
    for (const auto& u : ens.samples) mean_overlap += overlap(table, u.field, u.field);
    mean_overlap /= static_cast<double>(ens.samples.size());

    json j;
    j["samples"] = ens.samples.size();
    j["burn_in"] = ens.burn_in;
    j["thinning"] = ens.thinning;
    j["seed"] = ens.seed;
    j["mean_overlap_uu"] = mean_overlap;

    int rc = 0;
    if (spec.kind == NoiseKind::white) {
        const BridgeReport rep = bridge_compare(ens);
        io::write_bridge_csv(dir / "bridge.csv", rep);
        j["bridge_max_abs_dev_var"] = rep.max_abs_dev_var;
        j["bridge_max_abs_dev_cov"] = rep.max_abs_dev_cov;
        rc |= verdict_line("bridge variance profile", rep.max_abs_dev_var <= 0.05,
                           "max |Var[log u(x)-log u(0)] - x(1-x)| = " +
                               fmt17(rep.max_abs_dev_var));
    }
    // uniqueness proxy: same experiment started from a Dirac
    const InvariantEnsemble ens2 = sample_invariant(
        spec, scheme, cfg.invariant_burn_in, std::min<std::size_t>(cfg.invariant_samples, 200),
        cfg.invariant_thinning, cfg.seed, /*stream=*/500000,
        /*init=*/nullptr);
    const InvariantEnsemble ensd = [&] {
        const DensityField dir0 = DensityField::dirac(scheme.grid, cfg.init_dirac_x);
        return sample_invariant(spec, scheme, cfg.invariant_burn_in,
                                std::min<std::size_t>(cfg.invariant_samples, 200),
                                cfg.invariant_thinning, cfg.seed, /*stream=*/600000, &dir0);
    }();
    const LipschitzDictionary dict = LipschitzDictionary::default_dict(scheme.grid);
    const double fm = fm_proxy_distance(ens2, ensd, dict);
    const double fm_se = fm_proxy_bootstrap_stderr(ens2, ensd, dict, 200, cfg.seed);
    j["fm_proxy_distance"] = fm;
    j["fm_proxy_bootstrap_stderr"] = fm_se;
    rc |= verdict_line("invariant-measure uniqueness proxy", fm <= 3.0 * fm_se,
                       "fm = " + fmt17(fm) + ", 3*bootstrap se = " + fmt17(3.0 * fm_se));
    rc |= verdict_line("ensemble mean overlap >= 1", mean_overlap >= 1.0 - 1e-9,
                       "mean R(u,u) = " + fmt17(mean_overlap));
    write_json(dir / "invariant.json", j);
    return rc;
}

int cmd_gamma(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    io::write_manifest(dir, "gamma", cfg);
    const GammaEstimate g = estimate_gamma(cfg.covariance(), cfg.scheme(), cfg.seed,
                                           cfg.gamma_burn_in, cfg.gamma_t_end);
    json j;
    j["gamma"] = {{"value", g.gamma}, {"stderr", g.stderr_}};
    j["burn_in"] = g.burn_in;
    j["samples"] = g.samples;
    write_json(dir / "gamma.json", j);
    std::cout << "gamma_hat = " << fmt17(g.gamma) << " +- " << fmt17(g.stderr_) << '\n';
    return verdict_line("gamma lower bound", g.gamma >= 0.5 - 3.0 * g.stderr_,
                        "gamma_hat = " + fmt17(g.gamma));
}

int cmd_corrector(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    io::write_manifest(dir, "corrector", cfg);
    const CovarianceSpec spec = cfg.covariance();
    const SchemeConfig scheme = cfg.scheme();
    const GammaEstimate g = estimate_gamma(spec, scheme, cfg.seed + 1, cfg.gamma_burn_in,
                                           cfg.gamma_t_end);
    const DensityField v1 = DensityField::uniform(scheme.grid);
    Field bump(scheme.grid);
    for (std::size_t i = 0; i < bump.size(); ++i) {
        const double x = static_cast<double>(i) * scheme.grid.spacing();
        bump.values[i] = 1.0 + 0.5 * std::cos(2.0 * M_PI * x);
    }
    const DensityField v2 = DensityField::certify(bump);

    json j;
    j["gamma"] = {{"value", g.gamma}, {"stderr", g.stderr_}};
    int rc = 0;
    const char* names[2] = {"uniform", "one_plus_half_cos"};
    const DensityField* vs[2] = {&v1, &v2};
    for (int q = 0; q < 2; ++q) {
        const CorrectorEstimate chi =
            estimate_chi(*vs[q], cfg.corrector_T, cfg.corrector_n_mc,
                         cfg.corrector_profile_dt, spec, scheme, cfg.seed, g,
                         /*stream_base=*/1000u * (q + 1));
        const GradientEstimate grad =
            estimate_Dchi(*vs[q], cfg.corrector_T, std::max<std::size_t>(4, cfg.corrector_n_mc / 8),
                          spec, scheme, cfg.seed, /*stream_base=*/4000u * (q + 1));
        json jq;
        jq["chi"] = {{"value", chi.chi},
                     {"stderr", chi.stderr_},
                     {"gamma_bias", chi.gamma_bias},
                     {"tail_bound", chi.tail_bound}};
        jq["chi_profile"] = json::array();
        for (std::size_t k = 0; k < chi.profile_t.size(); ++k)
            jq["chi_profile"].push_back({{"t", chi.profile_t[k]}, {"value", chi.profile_value[k]}});
        jq["orthogonality_check"] = {{"value", grad.orth_value},
                                     {"stderr", grad.orth_stderr},
                                     {"samples", grad.samples}};
        j[names[q]] = jq;
        rc |= verdict_line(std::string("corrector orthogonality (") + names[q] + ")",
                           std::abs(grad.orth_value) <= 3.0 * grad.orth_stderr + 1e-10,
                           "<v,Dchi(v)> = " + fmt17(grad.orth_value) + " +- " +
                               fmt17(grad.orth_stderr));
    }
    // finite-difference cross-check on v = uniform, h = cos(2 pi x)
    Field h(scheme.grid);
    for (std::size_t i = 0; i < h.size(); ++i)
        h.values[i] = std::cos(2.0 * M_PI * static_cast<double>(i) * scheme.grid.spacing());
    const std::size_t n_mc = std::max<std::size_t>(8, cfg.corrector_n_mc / 4);
    const ValueWithError lhs = dchi_inner_product(v1, h, cfg.corrector_T, n_mc, spec,
                                                  scheme, cfg.seed, /*stream_base=*/9000);
    const ValueWithError rhs =
        chi_diff_quotient(v1, h, cfg.corrector_eps_fd, cfg.corrector_T, n_mc, spec, scheme,
                          cfg.seed, /*stream_base=*/9000);
    const double tol = 3.0 * std::sqrt(lhs.stderr_ * lhs.stderr_ + rhs.stderr_ * rhs.stderr_) +
                       10.0 * cfg.corrector_eps_fd * cfg.corrector_eps_fd + 1e-10;
    j["fd_cross_check"] = {{"dchi_dot_h", lhs.value},
                           {"dchi_dot_h_stderr", lhs.stderr_},
                           {"central_difference", rhs.value},
                           {"central_difference_stderr", rhs.stderr_},
                           {"tolerance", tol}};
    rc |= verdict_line("corrector gradient finite-difference cross-check",
                       std::abs(lhs.value - rhs.value) <= tol,
                       fmt17(lhs.value) + " vs " + fmt17(rhs.value));
    write_json(dir / "corrector.json", j);
    return rc;
}

int cmd_sigma(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    if (cfg.sigma_gamma_file.empty())
        throw ConfigError("cmd_sigma requires sigma.gamma_file (output of the gamma command)");
    std::ifstream is(cfg.sigma_gamma_file);
    if (!is) throw ConfigError("cannot read gamma artifact " + cfg.sigma_gamma_file);
    json gj;
    try {
        is >> gj;
    } catch (...) {
        throw ConfigError("gamma artifact is not valid JSON: " + cfg.sigma_gamma_file);
    }
    if (!gj.contains("gamma")) throw ConfigError("gamma artifact missing 'gamma' field");
    const double gamma_hat = gj["gamma"]["value"].get<double>();

    io::write_manifest(dir, "sigma", cfg);
    const CovarianceSpec spec = cfg.covariance();
    const SchemeConfig scheme = cfg.scheme();

    // variance route
    const CltRunResult reps =
        run_replicas(spec, scheme, cfg.seed, cfg.sigma_replicas, {cfg.sigma_t}, {},
                     cfg.workers);
    std::vector<double> zt;
    for (const auto& s : reps.samples) zt.push_back(s.logZ.back() + gamma_hat * cfg.sigma_t);
    const ValueWithError var_route = sigma2_var_route(zt, cfg.sigma_t);

    // quadratic-variation route
    const ValueWithError qv_route =
        sigma2_qv_route(spec, scheme, cfg.seed + 17, cfg.invariant_burn_in,
                        cfg.sigma_qv_states, cfg.invariant_thinning, cfg.sigma_qv_T,
                        cfg.sigma_qv_n_mc);

    json j;
    j["gamma_hat"] = gamma_hat;
    j["sigma2_var"] = {{"value", var_route.value}, {"stderr", var_route.stderr_},
                       {"t", cfg.sigma_t}, {"replicas", var_route.samples}};
    j["sigma2_qv"] = {{"value", qv_route.value}, {"stderr", qv_route.stderr_},
                      {"states", qv_route.samples}};
    write_json(dir / "sigma.json", j);
    int rc = 0;
    rc |= verdict_line("sigma2 (variance route) >= 1",
                       var_route.value >= 1.0 - 3.0 * var_route.stderr_,
                       fmt17(var_route.value) + " +- " + fmt17(var_route.stderr_));
    rc |= verdict_line("sigma2 (qv route) >= 1",
                       qv_route.value >= 1.0 - 3.0 * qv_route.stderr_,
                       fmt17(qv_route.value) + " +- " + fmt17(qv_route.stderr_));
    return rc;
}

int cmd_clt(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out_dir);
    io::write_manifest(dir, "clt", cfg);
    const CovarianceSpec spec = cfg.covariance();
    const SchemeConfig scheme = cfg.scheme();

    // centered with a gamma from an independent pilot run, not from the
    // replicas themselves
    GammaEstimate g;
    if (spec.kind == NoiseKind::none) {
        g.gamma = 0.0;
    } else {
        g = estimate_gamma(spec, scheme, cfg.seed + 1000003, cfg.gamma_burn_in,
                           cfg.gamma_t_end);
    }

    std::vector<double> record_times = cfg.clt_record_times;
    if (record_times.empty())
        record_times = {0.25 * cfg.clt_t, 0.5 * cfg.clt_t, cfg.clt_t};
    const CltRunResult reps = run_replicas(spec, scheme, cfg.seed, cfg.replicas,
                                           record_times, cfg.clt_probes, cfg.workers);
    io::write_clt_samples_csv(dir / "clt_samples.csv", reps, cfg.seed);

    const double frac_failed =
        static_cast<double>(reps.failed) / static_cast<double>(cfg.replicas);
    if (frac_failed > 1e-3)
        throw BlowUp("clt: " + std::to_string(reps.failed) + " replicas failed");

    std::vector<double> zt;
    for (const auto& s : reps.samples)
        zt.push_back((s.logZ.back() + g.gamma * cfg.clt_t) / std::sqrt(cfg.clt_t));
    double sigma2 = cfg.clt_sigma2;
    if (sigma2 <= 0.0) sigma2 = compute_moments(zt).variance;
    const NormalityReport rep = normality_report(zt, sigma2);
    write_json(dir / "normality.json", io::normality_json(rep));

    const GapReport gap = logU_gap_check(reps);
    json summary;
    summary["gamma"] = {{"value", g.gamma}, {"stderr", g.stderr_}};
    summary["sigma2_reference"] = sigma2;
    summary["sigma2_var_route"] = sigma2_var_route(
        [&] {
            std::vector<double> v;
            for (const auto& s : reps.samples)
                v.push_back(s.logZ.back() + g.gamma * cfg.clt_t);
            return v;
        }(),
        cfg.clt_t).value;
    summary["ks_p_value"] = rep.ks_p_value;
    summary["failed_replicas"] = reps.failed;
    summary["gap"] = json::array();
    for (std::size_t k = 0; k < gap.t.size(); ++k)
        summary["gap"].push_back({{"t", gap.t[k]},
                                  {"mean_abs_gap", gap.mean_abs_gap[k]},
                                  {"gap_over_sqrt_t", gap.gap_over_sqrt_t[k]}});
    write_json(dir / "summary.json", summary);

    return verdict_line("normality of rescaled log Z", rep.ks_p_value > 0.01,
                        "KS p = " + fmt17(rep.ks_p_value) + " (n = " +
                            std::to_string(rep.count) + ")");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic heat equation on the torus: polymer endpoint and "
                 "free-energy fluctuation experiments"};
    app.require_subcommand(1);

    CliOptions opt;
    app.add_option("--config", opt.config_path, "configuration file (key = value lines)");
    auto* seed_opt = app.add_option("--seed", opt.seed, "master seed (u64)");
    app.add_option("--workers", opt.workers, "worker thread count");
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_option("--format", opt.format, "csv or json");

    auto* sim = app.add_subcommand("simulate", "integrate the SHE, write a trajectory");
    auto* coup = app.add_subcommand("coupling", "same-noise coupling decay experiment");
    auto* inv = app.add_subcommand("invariant", "stationary ensemble and bridge/FM checks");
    auto* gam = app.add_subcommand("gamma", "ergodic estimate of gamma");
    auto* cor = app.add_subcommand("corrector", "corrector, gradient and orthogonality");
    auto* sig = app.add_subcommand("sigma", "diffusivity by two routes");
    auto* clt = app.add_subcommand("clt", "replica CLT experiment and normality tests");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    opt.seed_given = seed_opt->count() > 0;

    try {
        const ExperimentConfig cfg = load_config(opt);
        if (sim->parsed()) return cmd_simulate(cfg);
        if (coup->parsed()) return cmd_coupling(cfg);
        if (inv->parsed()) return cmd_invariant(cfg);
        if (gam->parsed()) return cmd_gamma(cfg);
        if (cor->parsed()) return cmd_corrector(cfg);
        if (sig->parsed()) return cmd_sigma(cfg);
        if (clt->parsed()) return cmd_clt(cfg);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "torus_kpz/errors.hpp"
#include "torus_kpz/grid.hpp"
#include "torus_kpz/noise.hpp"
#include "torus_kpz/she.hpp"

namespace torus_kpz {

// Flat key = value configuration with dotted sections. '#' starts a comment.
// Serialization is canonical (fixed key order, 17 significant digits), so
// parse(serialize(c)) == c and manifests diff cleanly.
struct ExperimentConfig {
    // grid
    int grid_dim = 1;
    int grid_n = 64;
    // noise
    std::string noise_kind = "smooth";  // smooth | white | none
    std::vector<std::pair<std::vector<int>, double>> noise_coeffs = {
        {{0}, 1.0}, {{1}, 0.5}, {{2}, 0.25}};
    // scheme
    std::string scheme_kind = "exp_euler";  // exp_euler | fd_euler
    double dt = 1e-3;
    double clamp_floor = 1e-300;
    // run
    double t_end = 10.0;
    double snapshot_interval = 0.5;
    std::size_t replicas = 200;
    int workers = 1;
    std::uint64_t seed = 20240901;
    std::string out_dir = "out";
    std::string format = "csv";  // csv | json
    // init
    std::string init_kind = "uniform";  // uniform | dirac
    std::vector<double> init_dirac_x = {0.5};
    // coupling
    std::size_t coupling_seeds = 100;
    double coupling_fit_t_min = 2.0;
    double coupling_fit_t_max = 20.0;
    // invariant
    double invariant_burn_in = 3.0;
    std::size_t invariant_samples = 500;
    double invariant_thinning = 0.25;
    // gamma
    double gamma_burn_in = 2.0;
    double gamma_t_end = 42.0;
    // corrector
    double corrector_T = 1.0;
    std::size_t corrector_n_mc = 48;
    double corrector_profile_dt = 0.02;
    double corrector_eps_fd = 0.05;
    // sigma
    std::string sigma_gamma_file;
    double sigma_t = 10.0;
    std::size_t sigma_qv_states = 10;
    double sigma_qv_T = 1.0;
    std::size_t sigma_qv_n_mc = 4;
    std::size_t sigma_replicas = 400;
    // clt
    double clt_t = 10.0;
    std::vector<std::vector<double>> clt_probes = {{0.0}, {1.0 / 3.0}, {2.0 / 3.0}};
    std::vector<double> clt_record_times;  // empty: {t/4, t/2, t}
    double clt_sigma2 = 0.0;               // 0: plug-in sample variance

    bool operator==(const ExperimentConfig&) const = default;

    CovarianceSpec covariance() const {
        if (noise_kind == "none") return CovarianceSpec::none_spec(grid_dim);
        if (noise_kind == "white") {
            if (grid_dim != 1) throw ConfigError("noise.kind = white requires grid.dim = 1");
            return CovarianceSpec::white1d();
        }
        if (noise_kind == "smooth") return CovarianceSpec::smooth(grid_dim, noise_coeffs);
        throw ConfigError("noise.kind must be smooth, white or none");
    }

    SchemeConfig scheme() const {
        SchemeConfig cfg;
        cfg.grid = TorusGrid(grid_dim, grid_n);
        cfg.dt = dt;
        cfg.clamp_floor = clamp_floor;
        if (scheme_kind == "exp_euler")
            cfg.scheme = Scheme::exp_euler_multiplicative;
        else if (scheme_kind == "fd_euler")
            cfg.scheme = Scheme::fd_euler_white;
        else
            throw ConfigError("scheme.kind must be exp_euler or fd_euler");
        return cfg;
    }

    DensityField initial_condition() const {
        const TorusGrid g(grid_dim, grid_n);
        if (init_kind == "uniform") return DensityField::uniform(g);
        if (init_kind == "dirac") return DensityField::dirac(g, init_dirac_x);
        throw ConfigError("init.kind must be uniform or dirac");
    }

    // Cross-field validation beyond what the typed accessors already check.
    void validate() const {
        scheme().validate(covariance());
        (void)initial_condition();
        if (replicas < 1) throw ConfigError("run.replicas must be >= 1");
        if (workers < 1) throw ConfigError("run.workers must be >= 1");
        if (!(t_end > 0.0)) throw ConfigError("run.t_end must be > 0");
        if (format != "csv" && format != "json")
            throw ConfigError("run.format must be csv or json");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ConfigError("bad numeric value for " + key + ": '" + s + "'");
    }
}

inline long long parse_int(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw ConfigError("bad integer value for " + key + ": '" + s + "'");
    }
}

// "[[0, 1.0], [1 1, 0.5]]" -> {({0},1.0), ({1,1},0.5)}; k components are
// space-separated inside each pair.
inline std::vector<std::pair<std::vector<int>, double>> parse_coeffs(
    const std::string& raw) {
    std::string s = trim(raw);
    if (s.size() < 4 || s.front() != '[' || s.back() != ']')
        throw ConfigError("noise.coeffs must look like [[k, r], ...]");
    s = trim(s.substr(1, s.size() - 2));
    std::vector<std::pair<std::vector<int>, double>> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const std::size_t open = s.find('[', pos);
        if (open == std::string::npos) break;
        const std::size_t close = s.find(']', open);
        if (close == std::string::npos) throw ConfigError("noise.coeffs: unbalanced brackets");
        const std::string body = s.substr(open + 1, close - open - 1);
        const auto parts = split(body, ',');
        if (parts.size() != 2) throw ConfigError("noise.coeffs: each entry is [k, r_hat]");
        std::vector<int> k;
        for (const auto& comp : split(trim(parts[0]), ' ')) {
            if (trim(comp).empty()) continue;
            k.push_back(static_cast<int>(parse_int(trim(comp), "noise.coeffs k")));
        }
        if (k.empty()) throw ConfigError("noise.coeffs: empty frequency");
        out.emplace_back(k, parse_double(trim(parts[1]), "noise.coeffs r_hat"));
        pos = close + 1;
    }
    if (out.empty()) throw ConfigError("noise.coeffs: no entries");
    return out;
}

inline std::string format_coeffs(const std::vector<std::pair<std::vector<int>, double>>& cs) {
    std::ostringstream os;
    os << std::setprecision(17) << '[';
    for (std::size_t i = 0; i < cs.size(); ++i) {
        if (i) os << ", ";
        os << '[';
        for (std::size_t a = 0; a < cs[i].first.size(); ++a) {
            if (a) os << ' ';
            os << cs[i].first[a];
        }
        os << ", " << cs[i].second << ']';
    }
    os << ']';
    return os.str();
}

// points "x1,y1; x2,y2"
inline std::vector<std::vector<double>> parse_points(const std::string& s,
                                                     const std::string& key) {
    std::vector<std::vector<double>> out;
    for (const auto& part : split(s, ';')) {
        if (trim(part).empty()) continue;
        std::vector<double> p;
        for (const auto& comp : split(part, ','))
            p.push_back(parse_double(trim(comp), key));
        out.push_back(std::move(p));
    }
    if (out.empty()) throw ConfigError(key + ": no points");
    return out;
}

inline std::string format_points(const std::vector<std::vector<double>>& ps) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (i) os << "; ";
        for (std::size_t a = 0; a < ps[i].size(); ++a) {
            if (a) os << ',';
            os << ps[i][a];
        }
    }
    return os.str();
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& part : split(s, ','))
        if (!trim(part).empty()) out.push_back(parse_double(trim(part), key));
    return out;
}

inline std::string format_double_list(const std::vector<double>& xs) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) os << ',';
        os << xs[i];
    }
    return os.str();
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text,
                                     std::vector<std::string>* seen_keys = nullptr) {
    ExperimentConfig c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (seen_keys) seen_keys->push_back(key);
        using detail::parse_double;
        using detail::parse_int;
        if (key == "grid.dim") c.grid_dim = static_cast<int>(parse_int(val, key));
        else if (key == "grid.n") c.grid_n = static_cast<int>(parse_int(val, key));
        else if (key == "noise.kind") c.noise_kind = val;
        else if (key == "noise.coeffs") c.noise_coeffs = detail::parse_coeffs(val);
        else if (key == "scheme.kind") c.scheme_kind = val;
        else if (key == "scheme.dt") c.dt = parse_double(val, key);
        else if (key == "scheme.clamp_floor") c.clamp_floor = parse_double(val, key);
        else if (key == "run.t_end") c.t_end = parse_double(val, key);
        else if (key == "run.snapshot_interval") c.snapshot_interval = parse_double(val, key);
        else if (key == "run.replicas") c.replicas = static_cast<std::size_t>(parse_int(val, key));
        else if (key == "run.workers") c.workers = static_cast<int>(parse_int(val, key));
        else if (key == "run.seed") c.seed = static_cast<std::uint64_t>(parse_int(val, key));
        else if (key == "run.out_dir") c.out_dir = val;
        else if (key == "run.format") c.format = val;
        else if (key == "init.kind") c.init_kind = val;
        else if (key == "init.dirac_x") c.init_dirac_x = detail::parse_double_list(val, key);
        else if (key == "coupling.seeds") c.coupling_seeds = static_cast<std::size_t>(parse_int(val, key));
        else if (key == "coupling.fit_t_min") c.coupling_fit_t_min = parse_double(val, key);
        else if (key == "coupling.fit_t_max") c.coupling_fit_t_max = parse_double(val, key);
        else if (key == "invariant.burn_in") c.invariant_burn_in = parse_double(val, key);
        else if (key == "invariant.samples") c.invariant_samples = static_cast<std::size_t>(parse_int(val, key));
        else if (key == "invariant.thinning") c.invariant_thinning = parse_double(val, key);
        else if (key == "gamma.burn_in") c.gamma_burn_in = parse_double(val, key);
        else if (key == "gamma.t_end") c.gamma_t_end = parse_double(val, key);
        else if (key == "corrector.T") c.corrector_T = parse_double(val, key);
        else if (key == "corrector.n_mc") c.corrector_n_mc = static_cast<std::size_t>(parse_int(val, key));
        else if (key == "corrector.profile_dt") c.corrector_profile_dt = parse_double(val, key);
        else if (key == "corrector.eps_fd") c.corrector_eps_fd = parse_double(val, key);
        else if (key == "sigma.gamma_file") c.sigma_gamma_file = val;
        else if (key == "sigma.t") c.sigma_t = parse_double(val, key);
        else if (key == "sigma.qv_states") c.sigma_qv_states = static_cast<std::size_t>(parse_int(val, key));
        else if (key == "sigma.qv_T") c.sigma_qv_T = parse_double(val, key);
        else if (key == "sigma.qv_n_mc") c.sigma_qv_n_mc = static_cast<std::size_t>(parse_int(val, key));
        else if (key == "sigma.replicas") c.sigma_replicas = static_cast<std::size_t>(parse_int(val, key));
        else if (key == "clt.t") c.clt_t = parse_double(val, key);
        else if (key == "clt.probes") c.clt_probes = detail::parse_points(val, key);
        else if (key == "clt.record_times") c.clt_record_times = detail::parse_double_list(val, key);
        else if (key == "clt.sigma2") c.clt_sigma2 = parse_double(val, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return c;
}

inline std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "grid.dim = " << c.grid_dim << '\n';
    os << "grid.n = " << c.grid_n << '\n';
    os << "noise.kind = " << c.noise_kind << '\n';
    os << "noise.coeffs = " << detail::format_coeffs(c.noise_coeffs) << '\n';
    os << "scheme.kind = " << c.scheme_kind << '\n';
    os << "scheme.dt = " << c.dt << '\n';
    os << "scheme.clamp_floor = " << c.clamp_floor << '\n';
    os << "run.t_end = " << c.t_end << '\n';
    os << "run.snapshot_interval = " << c.snapshot_interval << '\n';
    os << "run.replicas = " << c.replicas << '\n';
    os << "run.workers = " << c.workers << '\n';
    os << "run.seed = " << c.seed << '\n';
    os << "run.out_dir = " << c.out_dir << '\n';
    os << "run.format = " << c.format << '\n';
    os << "init.kind = " << c.init_kind << '\n';
    os << "init.dirac_x = " << detail::format_double_list(c.init_dirac_x) << '\n';
    os << "coupling.seeds = " << c.coupling_seeds << '\n';
    os << "coupling.fit_t_min = " << c.coupling_fit_t_min << '\n';
    os << "coupling.fit_t_max = " << c.coupling_fit_t_max << '\n';
    os << "invariant.burn_in = " << c.invariant_burn_in << '\n';
    os << "invariant.samples = " << c.invariant_samples << '\n';
    os << "invariant.thinning = " << c.invariant_thinning << '\n';
    os << "gamma.burn_in = " << c.gamma_burn_in << '\n';
    os << "gamma.t_end = " << c.gamma_t_end << '\n';
    os << "corrector.T = " << c.corrector_T << '\n';
    os << "corrector.n_mc = " << c.corrector_n_mc << '\n';
    os << "corrector.profile_dt = " << c.corrector_profile_dt << '\n';
    os << "corrector.eps_fd = " << c.corrector_eps_fd << '\n';
    os << "sigma.gamma_file = " << c.sigma_gamma_file << '\n';
    os << "sigma.t = " << c.sigma_t << '\n';
    os << "sigma.qv_states = " << c.sigma_qv_states << '\n';
    os << "sigma.qv_T = " << c.sigma_qv_T << '\n';
    os << "sigma.qv_n_mc = " << c.sigma_qv_n_mc << '\n';
    os << "sigma.replicas = " << c.sigma_replicas << '\n';
    os << "clt.t = " << c.clt_t << '\n';
    os << "clt.probes = " << detail::format_points(c.clt_probes) << '\n';
    os << "clt.record_times = " << detail::format_double_list(c.clt_record_times) << '\n';
    os << "clt.sigma2 = " << c.clt_sigma2 << '\n';
    return os.str();
}

}  // namespace torus_kpz

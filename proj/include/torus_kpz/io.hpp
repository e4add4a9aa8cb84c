#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "torus_kpz/clt.hpp"
#include "torus_kpz/config.hpp"
#include "torus_kpz/ergodicity.hpp"
#include "torus_kpz/errors.hpp"
#include "torus_kpz/she.hpp"

namespace torus_kpz {

inline constexpr const char* kVersion = "0.1.0";

namespace io {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);  // fixed newlines across platforms
    if (!os) throw ConfigError("cannot open output file " + p.string());
    os << std::setprecision(17);
    return os;
}

// Every output directory gets a manifest sufficient to reproduce the run.
inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["tool"] = "torus_kpz";
    j["version"] = kVersion;
    j["command"] = command;
    j["seed"] = cfg.seed;
    j["config"] = serialize_config(cfg);
    auto os = open_out(dir / "manifest.json");
    os << j.dump(2) << '\n';
}

inline void write_trajectory_csv(const std::filesystem::path& p,
                                 const std::vector<SheState>& snaps,
                                 const ModeTable& table) {
    auto os = open_out(p);
    os << "t,logZ,M,QV,min_u,max_u,overlap_uu\n";
    for (const auto& s : snaps) {
        os << s.time << ',' << s.log_mass << ',' << s.ledger.M << ',' << s.ledger.QV
           << ',' << min_value(s.density.field) << ',' << max_value(s.density.field)
           << ',' << overlap(table, s.density.field, s.density.field) << '\n';
    }
}

inline void write_coupling_csv(const std::filesystem::path& p, const CouplingRecord& rec) {
    auto os = open_out(p);
    os << "t,dist_l1,dist_linf\n";
    for (std::size_t i = 0; i < rec.t.size(); ++i)
        os << rec.t[i] << ',' << rec.dist_l1(i) << ',' << rec.dist_linf(i) << '\n';
}

inline void write_bridge_csv(const std::filesystem::path& p, const BridgeReport& rep) {
    auto os = open_out(p);
    os << "x,emp_var,target_var\n";
    for (std::size_t i = 0; i < rep.x.size(); ++i)
        os << rep.x[i] << ',' << rep.emp_var[i] << ',' << rep.target_var[i] << '\n';
}

inline void write_clt_samples_csv(const std::filesystem::path& p, const CltRunResult& run,
                                  std::uint64_t master_seed) {
    auto os = open_out(p);
    os << "replica,t,logZ";
    const std::size_t n_probes =
        run.samples.empty() ? 0 : run.samples.front().logU.front().size();
    for (std::size_t i = 0; i < n_probes; ++i) os << ",logU_probe" << i;
    os << ",seed\n";
    for (const auto& s : run.samples) {
        for (std::size_t k = 0; k < s.t.size(); ++k) {
            os << s.replica << ',' << s.t[k] << ',' << s.logZ[k];
            for (double v : s.logU[k]) os << ',' << v;
            os << ',' << master_seed << '\n';
        }
    }
}

inline nlohmann::json normality_json(const NormalityReport& rep) {
    nlohmann::json j;
    j["count"] = rep.count;
    j["mean"] = rep.mean;
    j["variance"] = rep.variance;
    j["skewness"] = rep.skewness;
    j["excess_kurtosis"] = rep.excess_kurtosis;
    j["ks_statistic"] = rep.ks_statistic;
    j["ks_p_value"] = rep.ks_p_value;
    j["ad_statistic"] = rep.ad_statistic;
    j["qq"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rep.qq_prob.size(); ++i)
        j["qq"].push_back({{"p", rep.qq_prob[i]},
                           {"empirical", rep.qq_empirical[i]},
                           {"theoretical", rep.qq_theoretical[i]}});
    return j;
}

}  // namespace io

}  // namespace torus_kpz

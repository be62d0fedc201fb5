#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "varcontrib/config.hpp"
#include "varcontrib/error.hpp"
#include "varcontrib/experiment.hpp"
#include "varcontrib/model.hpp"
#include "varcontrib/moments.hpp"

namespace varcontrib {

inline constexpr const char* kVersion = "1.0.0";

/// 64-bit FNV-1a hash, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

/// Six significant digits.
inline std::string format_value(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.6g", v);
    return buffer;
}

inline std::string format_value(const std::optional<double>& v) { return v ? format_value(*v) : std::string(); }

inline void write_table_csv(const ReportTable& table, std::ostream& out) {
    if (table.sector_key) out << "sector,";
    if (table.asset_key) out << "asset,";
    out << "statistic,first_run,mean_of_runs,coef_of_variation\n";
    for (const ReportRow& row : table.rows) {
        const StatSummary s = row.summary();
        if (table.sector_key) out << row.sector.value_or(0) << ',';
        if (table.asset_key) out << row.asset.value_or(0) << ',';
        out << row.statistic << ',' << format_value(s.first_run) << ',' << format_value(s.mean) << ','
            << format_value(s.coef_of_variation) << '\n';
    }
}

inline void write_cov_pairs_csv(const std::vector<CovPair>& pairs, std::ostream& out) {
    out << "sector,asset,cov_standard,cov_importance\n";
    for (const CovPair& p : pairs) {
        out << p.sector << ',' << p.asset << ',' << format_value(p.standard) << ',' << format_value(p.importance)
            << '\n';
    }
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace detail

inline constexpr const char* kFigureFile = "figure1_cov_comparison.csv";
inline constexpr const char* kConfigFile = "config.normalized.cfg";
inline constexpr const char* kManifestFile = "manifest.json";

/// Writes every table, the CoV plot data, the normalized config and a
/// manifest into `directory`. Returns the file names written. The content
/// depends only on the config, so reruns are byte-identical.
inline std::vector<std::string> write_report(const ExperimentReport& report, const RunConfig& config,
                                             const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    std::vector<std::string> files;
    for (const ReportTable& table : report.tables) {
        std::ostringstream out;
        write_table_csv(table, out);
        const std::string name = table.name + ".csv";
        detail::write_file(directory / name, out.str());
        files.push_back(name);
    }
    {
        std::ostringstream out;
        write_cov_pairs_csv(report.cov_pairs, out);
        detail::write_file(directory / kFigureFile, out.str());
        files.push_back(kFigureFile);
    }
    const std::string normalized = format_config(config);
    detail::write_file(directory / kConfigFile, normalized);
    files.push_back(kConfigFile);

    nlohmann::ordered_json manifest;
    manifest["tool"] = "varcontrib";
    manifest["version"] = kVersion;
    manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
    manifest["config_fnv1a"] = fnv1a_hex(normalized);
    manifest["seed"] = config.seed;
    manifest["runs"] = config.runs;
    manifest["scenarios"] = config.scenarios;
    manifest["alpha"] = config.alpha;
    manifest["files"] = files;
    detail::write_file(directory / kManifestFile, manifest.dump(2) + "\n");
    files.push_back(kManifestFile);
    return files;
}

/// Simulation-free outputs: obligor stand-alone VaRs and the analytic loss
/// distribution characteristics.
inline void write_analytic_tables(const Portfolio& portfolio, double alpha, std::ostream& out) {
    out << "sector,asset,id,pd,exposure,lgd_mean,lgd_variance,standalone_var\n";
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
        const AssetSpec& a = portfolio.asset(i);
        out << a.sector + 1 << ',' << portfolio.position_in_sector(i) << ',' << a.id << ',' << format_value(a.pd)
            << ',' << format_value(a.exposure) << ',' << format_value(a.lgd_mean) << ','
            << format_value(a.lgd_variance) << ',' << format_value(standalone_var(a, alpha)) << '\n';
    }
    const PortfolioMoments m = conditional_loss_stats(portfolio);
    out << "\nstatistic,original\n";
    out << "expected_loss," << format_value(m.expected_loss) << '\n';
    out << "stddev_loss," << format_value(m.loss_stddev) << '\n';
    out << "prob_positive_loss," << format_value(m.prob_positive_loss) << '\n';
    out << "conditional_mean," << format_value(m.conditional_mean) << '\n';
    out << "conditional_stddev," << format_value(m.conditional_stddev) << '\n';
}

}  // namespace varcontrib

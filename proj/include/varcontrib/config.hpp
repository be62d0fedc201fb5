#pragma once

// Line-oriented run configuration:
//
//   [run]          key = value pairs
//   [factors]      count, loading
//   [correlation]  one whitespace-separated row per factor
//   [assets]       id sector pd exposure lgd_mean lgd_variance
//
// Sectors are 1-based in the text and 0-based in memory. '#' starts a comment.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "varcontrib/error.hpp"
#include "varcontrib/experiment.hpp"
#include "varcontrib/linalg.hpp"
#include "varcontrib/model.hpp"
#include "varcontrib/risk.hpp"

namespace varcontrib {

struct RunConfig {
    double alpha = 0.999;
    std::size_t runs = 25;
    std::size_t scenarios = 50000;
    std::uint64_t seed = 1;
    bool standard = true;
    bool importance = true;
    std::vector<double> multipliers{1.0};
    bool reuse_sample = true;
    bool refined_var = true;
    BandwidthMode bandwidth_mode = BandwidthMode::sample;
    std::string output = "results";
    double loading = 0.18;
    Matrix correlation;
    std::vector<AssetSpec> assets;

    ExperimentSettings settings(unsigned workers = worker_count()) const {
        ExperimentSettings s;
        s.alpha = alpha;
        s.scenarios = scenarios;
        s.standard = standard;
        s.importance = importance;
        s.multipliers = multipliers;
        s.reuse_sample = reuse_sample;
        s.refined_var = refined_var;
        s.bandwidth_mode = bandwidth_mode;
        s.workers = workers;
        return s;
    }

    Portfolio portfolio() const { return Portfolio(assets, FactorModel(correlation, loading)); }

    friend bool operator==(const RunConfig& a, const RunConfig& b) {
        return a.alpha == b.alpha && a.runs == b.runs && a.scenarios == b.scenarios && a.seed == b.seed &&
               a.standard == b.standard && a.importance == b.importance && a.multipliers == b.multipliers &&
               a.reuse_sample == b.reuse_sample && a.refined_var == b.refined_var &&
               a.bandwidth_mode == b.bandwidth_mode && a.output == b.output && a.loading == b.loading &&
               a.correlation.rows() == b.correlation.rows() && a.correlation.cols() == b.correlation.cols() &&
               a.correlation == b.correlation && a.assets == b.assets;
    }
};

/// Checks the run parameters; the portfolio is checked by validate_portfolio.
inline ValidationReport validate_run(const RunConfig& c) {
    ValidationReport report;
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) report.push_back("alpha must lie in (0,1)");
    if (c.runs < 1) report.push_back("runs must be at least 1");
    if (c.scenarios < 100) report.push_back("scenarios must be at least 100");
    if (!c.standard && !c.importance) report.push_back("methods must name at least one method");
    if (c.multipliers.empty()) report.push_back("multipliers must not be empty");
    for (double m : c.multipliers) {
        if (!(m > 0.0)) report.push_back("multipliers must be positive");
    }
    return report;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, std::string_view separators) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto start = s.find_first_not_of(separators, pos);
        if (start == std::string_view::npos) break;
        auto end = s.find_first_of(separators, start);
        if (end == std::string_view::npos) end = s.size();
        parts.push_back(s.substr(start, end - start));
        pos = end;
    }
    return parts;
}

inline double parse_double(std::string_view token, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw ParseError(line, "expected a number, got '" + std::string(token) + "'");
    }
    return value;
}

template <class Int>
Int parse_integer(std::string_view token, std::size_t line) {
    Int value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw ParseError(line, "expected a non-negative integer, got '" + std::string(token) + "'");
    }
    return value;
}

inline bool parse_flag(std::string_view token, std::size_t line) {
    if (token == "true" || token == "on" || token == "yes" || token == "1") return true;
    if (token == "false" || token == "off" || token == "no" || token == "0") return false;
    throw ParseError(line, "expected true or false, got '" + std::string(token) + "'");
}

inline std::string format_number(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

}  // namespace detail

/// Parses and validates a configuration. Structural problems raise a
/// ParseError carrying the line number; invalid values raise a
/// ValidationError listing every violation.
inline RunConfig parse_config(std::string_view text) {
    RunConfig c;
    enum class Section { none, run, factors, correlation, assets };
    Section section = Section::none;
    std::optional<int> factor_count;
    bool have_loading = false;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;

    const auto finish_correlation = [&](std::size_t at) {
        if (section != Section::correlation) return;
        if (!factor_count) throw ParseError(at, "[factors] count must precede [correlation]");
        if (static_cast<int>(rows.size()) < *factor_count) {
            throw ParseError(at, "missing correlation row " + std::to_string(rows.size() + 1) + " of " +
                                     std::to_string(*factor_count));
        }
    };

    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
            finish_correlation(line_no);
            const std::string_view name = line.substr(1, line.size() - 2);
            if (name == "run") section = Section::run;
            else if (name == "factors") section = Section::factors;
            else if (name == "correlation") section = Section::correlation;
            else if (name == "assets") section = Section::assets;
            else throw ParseError(line_no, "unknown section [" + std::string(name) + "]");
            continue;
        }

        switch (section) {
        case Section::none:
            throw ParseError(line_no, "content before the first section");
        case Section::run:
        case Section::factors: {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
            const std::string_view key = detail::trim(line.substr(0, eq));
            const std::string_view value = detail::trim(line.substr(eq + 1));
            if (value.empty()) throw ParseError(line_no, "missing value for '" + std::string(key) + "'");
            if (section == Section::factors) {
                if (key == "count") {
                    factor_count = detail::parse_integer<int>(value, line_no);
                    if (*factor_count < 1) throw ParseError(line_no, "factor count must be at least 1");
                } else if (key == "loading") {
                    c.loading = detail::parse_double(value, line_no);
                    have_loading = true;
                } else {
                    throw ParseError(line_no, "unknown factors key '" + std::string(key) + "'");
                }
                break;
            }
            if (key == "alpha") {
                c.alpha = detail::parse_double(value, line_no);
            } else if (key == "runs") {
                c.runs = detail::parse_integer<std::size_t>(value, line_no);
            } else if (key == "scenarios") {
                c.scenarios = detail::parse_integer<std::size_t>(value, line_no);
            } else if (key == "seed") {
                c.seed = detail::parse_integer<std::uint64_t>(value, line_no);
            } else if (key == "methods") {
                c.standard = c.importance = false;
                for (std::string_view m : detail::split(value, ", \t")) {
                    if (m == "standard") c.standard = true;
                    else if (m == "importance") c.importance = true;
                    else throw ParseError(line_no, "unknown method '" + std::string(m) + "'");
                }
            } else if (key == "multipliers") {
                c.multipliers.clear();
                for (std::string_view m : detail::split(value, ", \t")) {
                    c.multipliers.push_back(detail::parse_double(m, line_no));
                }
            } else if (key == "reuse_sample") {
                c.reuse_sample = detail::parse_flag(value, line_no);
            } else if (key == "refined_var") {
                c.refined_var = detail::parse_flag(value, line_no);
            } else if (key == "bandwidth_mode") {
                if (value == "sample") c.bandwidth_mode = BandwidthMode::sample;
                else if (value == "analytic") c.bandwidth_mode = BandwidthMode::analytic;
                else throw ParseError(line_no, "bandwidth_mode must be sample or analytic");
            } else if (key == "output") {
                c.output = std::string(value);
            } else {
                throw ParseError(line_no, "unknown run key '" + std::string(key) + "'");
            }
            break;
        }
        case Section::correlation: {
            if (!factor_count) throw ParseError(line_no, "[factors] count must precede [correlation]");
            if (static_cast<int>(rows.size()) == *factor_count) {
                throw ParseError(line_no, "more correlation rows than factors");
            }
            std::vector<double> row;
            for (std::string_view token : detail::split(line, " \t,")) row.push_back(detail::parse_double(token, line_no));
            if (static_cast<int>(row.size()) != *factor_count) {
                throw ParseError(line_no, "correlation row has " + std::to_string(row.size()) + " entries, expected " +
                                              std::to_string(*factor_count));
            }
            rows.push_back(std::move(row));
            break;
        }
        case Section::assets: {
            const auto tokens = detail::split(line, " \t,");
            if (tokens.size() != 6) {
                throw ParseError(line_no, "asset row needs 6 columns (id sector pd exposure lgd_mean lgd_variance)");
            }
            AssetSpec a;
            a.id = detail::parse_integer<int>(tokens[0], line_no);
            const int sector = detail::parse_integer<int>(tokens[1], line_no);
            if (sector < 1) throw ParseError(line_no, "sector numbers start at 1");
            a.sector = sector - 1;
            a.pd = detail::parse_double(tokens[2], line_no);
            a.exposure = detail::parse_double(tokens[3], line_no);
            a.lgd_mean = detail::parse_double(tokens[4], line_no);
            a.lgd_variance = detail::parse_double(tokens[5], line_no);
            c.assets.push_back(a);
            break;
        }
        }
    }
    finish_correlation(line_no + 1);
    if (!factor_count) throw ParseError(line_no + 1, "missing [factors] count");
    if (!have_loading) throw ParseError(line_no + 1, "missing [factors] loading");
    if (rows.empty()) throw ParseError(line_no + 1, "missing [correlation] section");
    if (c.assets.empty()) throw ParseError(line_no + 1, "missing [assets] section");

    c.correlation.resize(*factor_count, *factor_count);
    for (int i = 0; i < *factor_count; ++i) {
        for (int j = 0; j < *factor_count; ++j) c.correlation(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }

    ValidationReport report = validate_run(c);
    if (!(c.loading >= 0.0 && c.loading < 1.0)) report.push_back("factor loading must lie in [0,1)");
    if (report.empty()) {
        try {
            const ValidationReport portfolio = validate_portfolio(c.assets, FactorModel(c.correlation, c.loading));
            report.insert(report.end(), portfolio.begin(), portfolio.end());
        } catch (const DecompositionError& e) {
            report.push_back(std::string("correlation matrix: ") + e.what());
        } catch (const ValidationError& e) {
            report.push_back(std::string("correlation matrix: ") + e.what());
        }
    }
    if (!report.empty()) {
        std::string message = "invalid configuration:";
        for (const auto& line : report) message += "\n  " + line;
        throw ValidationError(message);
    }
    return c;
}

/// Normalized text form; numbers carry 17 significant digits so that
/// parse_config(format_config(c)) == c.
inline std::string format_config(const RunConfig& c) {
    using detail::format_number;
    std::ostringstream out;
    out << "[run]\n";
    out << "alpha = " << format_number(c.alpha) << '\n';
    out << "runs = " << c.runs << '\n';
    out << "scenarios = " << c.scenarios << '\n';
    out << "seed = " << c.seed << '\n';
    out << "methods =";
    if (c.standard) out << " standard";
    if (c.importance) out << " importance";
    out << '\n';
    out << "multipliers =";
    for (std::size_t i = 0; i < c.multipliers.size(); ++i) out << (i ? ", " : " ") << format_number(c.multipliers[i]);
    out << '\n';
    out << "reuse_sample = " << (c.reuse_sample ? "true" : "false") << '\n';
    out << "refined_var = " << (c.refined_var ? "true" : "false") << '\n';
    out << "bandwidth_mode = " << to_string(c.bandwidth_mode) << '\n';
    out << "output = " << c.output << "\n\n";
    out << "[factors]\n";
    out << "count = " << c.correlation.rows() << '\n';
    out << "loading = " << format_number(c.loading) << "\n\n";
    out << "[correlation]\n";
    for (Eigen::Index i = 0; i < c.correlation.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.correlation.cols(); ++j) out << (j ? " " : "") << format_number(c.correlation(i, j));
        out << '\n';
    }
    out << "\n[assets]\n# id sector pd exposure lgd_mean lgd_variance\n";
    for (const AssetSpec& a : c.assets) {
        out << a.id << ' ' << a.sector + 1 << ' ' << format_number(a.pd) << ' ' << format_number(a.exposure) << ' '
            << format_number(a.lgd_mean) << ' ' << format_number(a.lgd_variance) << '\n';
    }
    return out.str();
}

}  // namespace varcontrib

#pragma once

// Repeated Monte Carlo runs over a portfolio with first-run / mean / CoV
// summaries of every reported statistic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "varcontrib/error.hpp"
#include "varcontrib/kernel.hpp"
#include "varcontrib/model.hpp"
#include "varcontrib/moments.hpp"
#include "varcontrib/parallel.hpp"
#include "varcontrib/risk.hpp"
#include "varcontrib/scenario.hpp"

namespace varcontrib {

struct StatSummary {
    double first_run = 0.0;
    double mean = 0.0;
    std::optional<double> coef_of_variation;  // empty for one run or zero mean
};

/// First value, mean and n-1 sample CoV (stddev / |mean|) of per-run values.
inline StatSummary summarize(std::span<const double> values) {
    if (values.empty()) throw ValidationError("summarize: no values");
    StatSummary s;
    s.first_run = values.front();
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1 && s.mean != 0.0) {
        s.coef_of_variation = sample_stddev(values) / std::abs(s.mean);
    }
    return s;
}

struct ExperimentSettings {
    double alpha = 0.999;
    std::size_t scenarios = 50000;
    bool standard = true;
    bool importance = true;
    std::vector<double> multipliers{1.0};
    bool reuse_sample = true;
    bool refined_var = true;
    BandwidthMode bandwidth_mode = BandwidthMode::sample;
    unsigned workers = worker_count();

    /// The multiplier reported as the main estimate: 1 when listed, else the first.
    double primary_multiplier() const {
        if (multipliers.empty()) return 1.0;
        return std::find(multipliers.begin(), multipliers.end(), 1.0) != multipliers.end() ? 1.0
                                                                                           : multipliers.front();
    }
};

/// Per-run seed derived from the master seed.
inline std::uint64_t run_seed(std::uint64_t master, std::size_t run) {
    return detail::substream_seed(master ^ 0x5851f42d4c957f2dULL, run);
}

inline std::vector<std::uint64_t> run_seeds(std::uint64_t master, std::size_t runs) {
    std::vector<std::uint64_t> seeds(runs);
    for (std::size_t r = 0; r < runs; ++r) seeds[r] = run_seed(master, r);
    return seeds;
}

/// Estimates of one method within one run.
struct MethodRecord {
    double var = 0.0;
    Vector contributions;         // normalized, per asset
    Vector sector_contributions;  // within-sector sums
    Vector sector_var;            // stand-alone sector VaR
    double additivity_ratio = 0.0;
    double diversification_assets = 0.0;
    double diversification_sectors = 0.0;
    Vector marginal_assets;
    Vector marginal_sectors;
};

struct RunRecord {
    std::uint64_t seed = 0;
    Vector shift;  // mean shift estimated from the real-world batch
    std::optional<MethodRecord> standard;
    std::optional<MethodRecord> importance;
    // Shifted loss distribution.
    double shifted_mean = 0.0;
    double shifted_stddev = 0.0;
    double shifted_positive_fraction = 0.0;
    // Additional bandwidth multipliers under importance sampling.
    std::vector<double> multipliers;
    std::vector<Vector> multiplier_contributions;
    std::vector<double> multiplier_ratios;
};

/// Quantities computed without simulation.
struct AnalyticSummary {
    PortfolioMoments moments;
    Vector asset_el;
    Vector asset_var;  // stand-alone VaR of each obligor
    Vector sector_el;
};

inline AnalyticSummary analytic_summary(const Portfolio& portfolio, double alpha) {
    AnalyticSummary a;
    a.moments = conditional_loss_stats(portfolio);
    const auto n = static_cast<Eigen::Index>(portfolio.size());
    a.asset_el.resize(n);
    a.asset_var.resize(n);
    a.sector_el = Vector::Zero(portfolio.factor_count());
    for (Eigen::Index i = 0; i < n; ++i) {
        const AssetSpec& asset = portfolio.asset(static_cast<std::size_t>(i));
        a.asset_el(i) = asset.expected_loss();
        a.asset_var(i) = standalone_var(asset, alpha);
        a.sector_el(asset.sector) += a.asset_el(i);
    }
    return a;
}

namespace detail {

inline Vector sector_sums(const Portfolio& portfolio, const Vector& per_asset) {
    Vector sums = Vector::Zero(portfolio.factor_count());
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
        sums(portfolio.asset(i).sector) += per_asset(static_cast<Eigen::Index>(i));
    }
    return sums;
}

inline Vector sector_totals(const Portfolio& portfolio, const ScenarioBatch& batch, int sector) {
    Vector totals = Vector::Zero(batch.totals.size());
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
        if (portfolio.asset(i).sector == sector) totals += batch.asset_losses.col(static_cast<Eigen::Index>(i));
    }
    return totals;
}

inline void fill_indices(MethodRecord& m, const AnalyticSummary& a) {
    const double el = a.moments.expected_loss;
    m.diversification_assets =
        diversification_index(m.var, el, as_span(a.asset_var), as_span(a.asset_el));
    m.diversification_sectors =
        diversification_index(m.var, el, as_span(m.sector_var), as_span(a.sector_el));
    m.marginal_assets.resize(m.contributions.size());
    for (Eigen::Index i = 0; i < m.contributions.size(); ++i) {
        m.marginal_assets(i) = marginal_diversification_index(m.contributions(i), a.asset_el(i), a.asset_var(i));
    }
    m.marginal_sectors.resize(m.sector_var.size());
    for (Eigen::Index s = 0; s < m.sector_var.size(); ++s) {
        m.marginal_sectors(s) =
            marginal_diversification_index(m.sector_contributions(s), a.sector_el(s), m.sector_var(s));
    }
}

inline std::string run_context(std::size_t run, const std::exception& e) {
    return "run " + std::to_string(run + 1) + ": " + e.what();
}

}  // namespace detail

/// One run: a real-world batch serves standard Monte Carlo and the pilot of
/// importance sampling; the shifted batch serves every bandwidth multiplier.
inline RunRecord run_once(const Portfolio& portfolio, const ExperimentSettings& settings,
                          const AnalyticSummary& analytic, std::uint64_t seed) {
    RunRecord record;
    record.seed = seed;
    const double alpha = settings.alpha;
    const int k = portfolio.factor_count();
    const double primary = settings.primary_multiplier();

    const ScenarioBatch batch = simulate(portfolio, settings.scenarios, seed, std::nullopt, settings.workers);

    AllocationOptions pilot_options;
    if (settings.bandwidth_mode == BandwidthMode::analytic) pilot_options.analytic = analytic.moments;

    const ShiftEstimate estimate = estimate_shift(batch, alpha, pilot_options);
    record.shift = estimate.shift.mu;

    if (settings.standard) {
        AllocationOptions options = pilot_options;
        options.multiplier = primary;
        const AllocationResult result = allocate_standard(batch, alpha, options);
        MethodRecord m;
        m.var = result.var_estimate;
        m.contributions = result.normalized_contributions;
        m.additivity_ratio = result.additivity_ratio;
        m.sector_contributions = detail::sector_sums(portfolio, m.contributions);
        m.sector_var.resize(k);
        for (int s = 0; s < k; ++s) {
            const Vector totals = detail::sector_totals(portfolio, batch, s);
            m.sector_var(s) = var_empirical(detail::as_span(totals), alpha);
        }
        detail::fill_indices(m, analytic);
        record.standard = std::move(m);
    }

    if (settings.importance) {
        const ScenarioBatch shifted =
            settings.reuse_sample
                ? reshift(batch, estimate.shift, portfolio, settings.workers)
                : simulate(portfolio, settings.scenarios, detail::fresh_sample_seed(seed), estimate.shift,
                           settings.workers);
        record.shifted_mean = shifted.totals.mean();
        record.shifted_stddev = sample_stddev(detail::as_span(shifted.totals));
        record.shifted_positive_fraction =
            static_cast<double>(shifted.positive_count()) / static_cast<double>(shifted.count());

        const double var = settings.refined_var ? var_weighted(shifted, alpha).value : estimate.pilot_var;
        AllocationOptions options;
        if (settings.bandwidth_mode == BandwidthMode::analytic) {
            options.analytic = conditional_loss_stats(portfolio, estimate.shift);
        }

        std::vector<double> multipliers = settings.multipliers;
        if (std::find(multipliers.begin(), multipliers.end(), primary) == multipliers.end()) {
            multipliers.insert(multipliers.begin(), primary);
        }
        for (double multiplier : multipliers) {
            options.multiplier = multiplier;
            const AllocationResult result = allocate_weighted(shifted, var, options);
            if (multiplier == primary) {
                MethodRecord m;
                m.var = result.var_estimate;
                m.contributions = result.normalized_contributions;
                m.additivity_ratio = result.additivity_ratio;
                m.sector_contributions = detail::sector_sums(portfolio, m.contributions);
                m.sector_var.resize(k);
                for (int s = 0; s < k; ++s) {
                    const Vector totals = detail::sector_totals(portfolio, shifted, s);
                    m.sector_var(s) =
                        var_weighted(detail::as_span(totals), detail::as_span(shifted.ratios), alpha).value;
                }
                detail::fill_indices(m, analytic);
                record.importance = std::move(m);
            } else {
                record.multipliers.push_back(multiplier);
                record.multiplier_contributions.push_back(result.normalized_contributions);
                record.multiplier_ratios.push_back(result.additivity_ratio);
            }
        }
    }
    return record;
}

/// A report row: optional sector / asset keys (1-based), a statistic label
/// and its value in every run.
struct ReportRow {
    std::optional<int> sector;
    std::optional<int> asset;
    std::string statistic;
    std::vector<double> values;

    StatSummary summary() const { return summarize(values); }
};

struct ReportTable {
    std::string name;
    bool sector_key = false;
    bool asset_key = false;
    std::vector<ReportRow> rows;

    const ReportRow* find(const std::string& statistic, std::optional<int> sector = std::nullopt,
                          std::optional<int> asset = std::nullopt) const {
        for (const ReportRow& row : rows) {
            if (row.statistic == statistic && row.sector == sector && row.asset == asset) return &row;
        }
        return nullptr;
    }
};

struct CovPair {
    int sector = 0;
    int asset = 0;
    std::optional<double> standard;
    std::optional<double> importance;
};

struct ExperimentReport {
    double alpha = 0.0;
    std::size_t scenarios = 0;
    AnalyticSummary analytic;
    std::vector<RunRecord> runs;
    std::vector<ReportTable> tables;
    std::vector<CovPair> cov_pairs;

    const ReportTable& table(const std::string& name) const {
        for (const ReportTable& t : tables) {
            if (t.name == name) return t;
        }
        throw ValidationError("no report table named " + name);
    }
};

namespace detail {

inline ReportTable make_table(std::string name, bool sector_key = false, bool asset_key = false) {
    ReportTable table;
    table.name = std::move(name);
    table.sector_key = sector_key;
    table.asset_key = asset_key;
    return table;
}

inline std::string multiplier_label(double m) {
    std::ostringstream out;
    out << "importance_x" << m;
    return out.str();
}

template <class Get>
std::vector<double> collect(const std::vector<RunRecord>& runs, Get get) {
    std::vector<double> values;
    values.reserve(runs.size());
    for (const RunRecord& r : runs) values.push_back(get(r));
    return values;
}

inline void build_tables(ExperimentReport& report, const Portfolio& portfolio, const ExperimentSettings& settings) {
    const auto& runs = report.runs;
    const int k = portfolio.factor_count();
    const auto n = static_cast<Eigen::Index>(portfolio.size());
    struct Method {
        const char* label;
        std::optional<MethodRecord> RunRecord::*member;
    };
    std::vector<Method> methods;
    if (settings.standard) methods.push_back({"standard", &RunRecord::standard});
    if (settings.importance) methods.push_back({"importance", &RunRecord::importance});

    const auto asset_keys = [&](Eigen::Index i) {
        const auto ui = static_cast<std::size_t>(i);
        return std::make_pair(portfolio.asset(ui).sector + 1, portfolio.position_in_sector(ui));
    };

    ReportTable t02 = make_table("table02_portfolio_var");
    for (const Method& m : methods) {
        t02.rows.push_back({{}, {}, m.label, collect(runs, [&](const RunRecord& r) { return (r.*m.member)->var; })});
    }

    ReportTable t03 = make_table("table03_factor_shift");
    for (int j = 0; j < k; ++j) {
        t03.rows.push_back({{}, {}, "factor_" + std::to_string(j + 1),
                            collect(runs, [&](const RunRecord& r) { return r.shift(j); })});
    }

    ReportTable t04 = make_table("table04_loss_distribution");
    const auto repeated = [&](double v) { return std::vector<double>(runs.size(), v); };
    t04.rows.push_back({{}, {}, "original_expected_loss", repeated(report.analytic.moments.expected_loss)});
    t04.rows.push_back({{}, {}, "original_stddev_loss", repeated(report.analytic.moments.loss_stddev)});
    t04.rows.push_back({{}, {}, "original_prob_positive_loss", repeated(report.analytic.moments.prob_positive_loss)});
    if (settings.importance) {
        t04.rows.push_back({{}, {}, "importance_expected_loss",
                            collect(runs, [](const RunRecord& r) { return r.shifted_mean; })});
        t04.rows.push_back({{}, {}, "importance_stddev_loss",
                            collect(runs, [](const RunRecord& r) { return r.shifted_stddev; })});
        t04.rows.push_back({{}, {}, "importance_prob_positive_loss",
                            collect(runs, [](const RunRecord& r) { return r.shifted_positive_fraction; })});
    }

    ReportTable t05 = make_table("table05_sector_standalone_var", true);
    ReportTable t09 = make_table("table09_sector_contributions", true);
    ReportTable t12 = make_table("table12_sector_marginal_diversification", true);
    for (int s = 0; s < k; ++s) {
        for (const Method& m : methods) {
            t05.rows.push_back({s + 1, {}, m.label,
                                collect(runs, [&](const RunRecord& r) { return (r.*m.member)->sector_var(s); })});
            t09.rows.push_back({s + 1, {}, m.label, collect(runs, [&](const RunRecord& r) {
                                    return (r.*m.member)->sector_contributions(s);
                                })});
            t12.rows.push_back({s + 1, {}, m.label, collect(runs, [&](const RunRecord& r) {
                                    return (r.*m.member)->marginal_sectors(s);
                                })});
        }
    }

    ReportTable t06 = make_table("table06_additivity_ratio");
    for (const Method& m : methods) {
        t06.rows.push_back({{}, {}, m.label,
                            collect(runs, [&](const RunRecord& r) { return (r.*m.member)->additivity_ratio; })});
    }
    const std::vector<double>& extra = runs.front().multipliers;
    for (std::size_t j = 0; j < extra.size(); ++j) {
        t06.rows.push_back({{}, {}, multiplier_label(extra[j]),
                            collect(runs, [&](const RunRecord& r) { return r.multiplier_ratios[j]; })});
    }

    ReportTable t07 = make_table("table07_asset_contributions", true, true);
    ReportTable t08 = make_table("table08_asset_contributions_bandwidth", true, true);
    ReportTable t11 = make_table("table11_asset_marginal_diversification", true, true);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto [sector, asset] = asset_keys(i);
        for (const Method& m : methods) {
            t07.rows.push_back({sector, asset, m.label,
                                collect(runs, [&](const RunRecord& r) { return (r.*m.member)->contributions(i); })});
            t11.rows.push_back({sector, asset, m.label, collect(runs, [&](const RunRecord& r) {
                                    return (r.*m.member)->marginal_assets(i);
                                })});
        }
        for (std::size_t j = 0; j < extra.size(); ++j) {
            t08.rows.push_back({sector, asset, multiplier_label(extra[j]), collect(runs, [&](const RunRecord& r) {
                                    return r.multiplier_contributions[j](i);
                                })});
        }
    }

    ReportTable t10 = make_table("table10_diversification_index");
    for (const Method& m : methods) {
        t10.rows.push_back({{}, {}, std::string("assets_") + m.label, collect(runs, [&](const RunRecord& r) {
                                return (r.*m.member)->diversification_assets;
                            })});
    }
    for (const Method& m : methods) {
        t10.rows.push_back({{}, {}, std::string("sectors_") + m.label, collect(runs, [&](const RunRecord& r) {
                                return (r.*m.member)->diversification_sectors;
                            })});
    }

    report.tables = {t02, t03, t04, t05, t06, t07, t08, t09, t10, t11, t12};

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto [sector, asset] = asset_keys(i);
        CovPair pair{sector, asset, std::nullopt, std::nullopt};
        if (const ReportRow* row = t07.find("standard", sector, asset)) pair.standard = row->summary().coef_of_variation;
        if (const ReportRow* row = t07.find("importance", sector, asset)) {
            pair.importance = row->summary().coef_of_variation;
        }
        report.cov_pairs.push_back(pair);
    }
}

}  // namespace detail

/// Runs every requested method once per seed and summarizes the results.
/// Runs execute one after another; each run parallelizes its simulation and
/// kernel sums internally, so the output does not depend on the worker count.
inline ExperimentReport run_experiment(const Portfolio& portfolio, const ExperimentSettings& settings,
                                       const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ValidationError("run_experiment: at least one run is required");
    if (!settings.standard && !settings.importance) throw ValidationError("run_experiment: no method selected");
    for (double m : settings.multipliers) {
        if (!(m > 0.0)) throw ValidationError("run_experiment: bandwidth multipliers must be positive");
    }
    ExperimentReport report;
    report.alpha = settings.alpha;
    report.scenarios = settings.scenarios;
    report.analytic = analytic_summary(portfolio, settings.alpha);
    report.runs.reserve(seeds.size());
    for (std::size_t r = 0; r < seeds.size(); ++r) {
        try {
            report.runs.push_back(run_once(portfolio, settings, report.analytic, seeds[r]));
        } catch (const ValidationError& e) {
            throw ValidationError(detail::run_context(r, e));
        } catch (const NumericalError& e) {
            throw NumericalError(detail::run_context(r, e));
        }
    }
    detail::build_tables(report, portfolio, settings);
    return report;
}

inline ExperimentReport run_experiment(const Portfolio& portfolio, const ExperimentSettings& settings,
                                       std::size_t runs, std::uint64_t master_seed) {
    return run_experiment(portfolio, settings, run_seeds(master_seed, runs));
}

}  // namespace varcontrib

// Acceptance checks for the benchmark portfolio at desk scale
// (10 runs of 50,000 scenarios). Prints one line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "varcontrib/varcontrib.hpp"

using namespace varcontrib;

namespace {

constexpr std::uint64_t kMasterSeed = 20080101;
constexpr std::size_t kRuns = 10;
constexpr std::size_t kScenarios = 50000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Criterion {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

std::vector<Criterion> results;

void record(int id, std::string name, bool pass, std::string detail) {
    std::printf("[%s] criterion %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    results.push_back({id, std::move(name), pass, std::move(detail)});
}

std::string fmt(const char* format, auto... args) {
    char buffer[512];
    std::snprintf(buffer, sizeof buffer, format, args...);
    return buffer;
}

double mean_of(const ReportTable& table, const std::string& statistic, std::optional<int> sector = std::nullopt,
               std::optional<int> asset = std::nullopt) {
    const ReportRow* row = table.find(statistic, sector, asset);
    if (!row) throw ValidationError("missing row " + statistic + " in " + table.name);
    return row->summary().mean;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string report_text(const ExperimentReport& report) {
    std::ostringstream out;
    for (const ReportTable& t : report.tables) write_table_csv(t, out);
    write_cov_pairs_csv(report.cov_pairs, out);
    return out.str();
}

void analytic_exactness() {
    const auto start = Clock::now();
    const Portfolio p = benchmark_portfolio();
    const std::vector<double> table1{24.846, 24.846, 19.778, 19.778, 4.969,  4.969,  3.956, 3.956,
                                     0.994,  0.994,  0.791,  0.791,  22.613, 22.613, 16.51, 16.51,
                                     4.523,  4.523,  3.302,  3.302,  0.905,  0.905,  0.66,  0.66};
    const double el = expected_loss(p);
    double worst_var = 0.0;
    for (std::size_t i = 0; i < table1.size(); ++i) {
        worst_var = std::max(worst_var, std::abs(standalone_var(p.asset(i), 0.999) - table1[i]));
    }
    const double sd = loss_stddev(p);
    const double ppos = prob_positive_loss(p);
    const double elapsed = seconds_since(start);
    const bool pass = el == 6.2 && worst_var <= 5e-3 && std::abs(sd - 10.359) <= 2e-3 &&
                      std::abs(ppos - 0.59411) <= 5e-4 && elapsed < 5.0;
    record(1, "analytic exactness", pass,
           fmt("EL=%.15g (== 6.2: %s); max |VaR_i - table| = %.2e (<= 5e-3); stddev=%.6f (10.359 +/- 2e-3); "
               "P[L>0]=%.6f (0.59411 +/- 5e-4); %.2fs (< 5s)",
               el, el == 6.2 ? "yes" : "no", worst_var, sd, ppos, elapsed));
}

void var_reproduction(const ExperimentReport& r) {
    const ReportTable& t = r.table("table02_portfolio_var");
    const double standard = mean_of(t, "standard");
    const double importance = mean_of(t, "importance");
    const bool pass = standard >= 66.0 && standard <= 72.5 && importance >= 65.5 && importance <= 71.5;
    record(2, "VaR reproduction", pass,
           fmt("standard mean %.3f in [66, 72.5]; importance mean %.3f in [65.5, 71.5]", standard, importance));
}

void mean_shift(const ExperimentReport& r) {
    const ReportTable& t = r.table("table03_factor_shift");
    double mu[4];
    bool pass = true;
    for (int j = 0; j < 4; ++j) {
        mu[j] = mean_of(t, "factor_" + std::to_string(j + 1));
        const double centre = j < 2 ? -1.45 : -0.86;
        const double width = j < 2 ? 0.25 : 0.35;
        pass = pass && std::abs(mu[j] - centre) <= width;
    }
    record(3, "mean-shift estimates", pass,
           fmt("mu = (%.3f, %.3f, %.3f, %.3f); factors 1-2 in -1.45 +/- 0.25, factors 3-4 in -0.86 +/- 0.35", mu[0],
               mu[1], mu[2], mu[3]));
}

void shifted_distribution(const ExperimentReport& r) {
    const ReportTable& t = r.table("table04_loss_distribution");
    const double fraction = mean_of(t, "importance_prob_positive_loss");
    const double mean = mean_of(t, "importance_expected_loss");
    const bool pass = fraction >= 0.995 && mean >= 60.0 && mean <= 88.0;
    record(4, "importance-sampling distribution shape", pass,
           fmt("positive fraction %.5f (>= 0.995); mean of totals %.3f in [60, 88]", fraction, mean));
}

void variance_reduction(const ExperimentReport& r) {
    std::vector<double> ratios;
    std::size_t better = 0;
    for (const CovPair& pair : r.cov_pairs) {
        if (pair.sector != 1 && pair.sector != 3) continue;
        if (!pair.standard || !pair.importance || *pair.standard <= 0.0) continue;
        ratios.push_back(*pair.importance / *pair.standard);
        if (*pair.importance < *pair.standard) ++better;
    }
    const double share = ratios.empty() ? 0.0 : static_cast<double>(better) / ratios.size();
    const double med = ratios.empty() ? INFINITY : median(ratios);
    const bool pass = ratios.size() == 48 && share >= 0.9 && med < 0.6;
    record(5, "variance reduction", pass,
           fmt("%zu/%zu assets with lower CoV under importance sampling (%.1f%%, >= 90%%); median CoV ratio %.3f "
               "(< 0.6)",
               better, ratios.size(), 100.0 * share, med));
}

void additivity_ordering(const ExperimentReport& r) {
    const ReportTable& t = r.table("table06_additivity_ratio");
    const double half = mean_of(t, "importance_x0.5");
    const double one = mean_of(t, "importance");
    const double two = mean_of(t, "importance_x2");
    const bool pass = half > one && one > two && two >= 0.80 && two <= 0.90;
    record(6, "additivity-ratio ordering", pass,
           fmt("x0.5 %.4f > x1 %.4f > x2 %.4f; x2 in [0.80, 0.90]", half, one, two));
}

void diversification(const ExperimentReport& r) {
    const ReportTable& t = r.table("table10_diversification_index");
    const double assets = mean_of(t, "assets_importance");
    const double sectors = mean_of(t, "sectors_importance");
    const bool pass = std::abs(assets - 0.0764) <= 0.004 && std::abs(sectors - 0.395) <= 0.02;
    record(7, "diversification indices", pass,
           fmt("asset context %.4f (0.0764 +/- 0.004); sector context %.4f (0.395 +/- 0.02); standard MC %.4f / %.4f",
               assets, sectors, mean_of(t, "assets_standard"), mean_of(t, "sectors_standard")));
}

void property_suite() {
    const auto start = Clock::now();
    std::vector<std::string> failed;
    const auto check = [&](bool ok, const char* what) {
        if (!ok) failed.emplace_back(what);
    };

    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal;
    std::gamma_distribution<double> gamma(2.0, 3.0);

    std::vector<double> xs(500);
    for (double& x : xs) x = gamma(rng);
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double integral = integrate_adaptive([&](double x) { return kde(xs, 0.7, x); }, *lo - 28.0, *hi + 28.0,
                                               1e-10, 60);
    check(std::abs(integral - 1.0) <= 1e-6, "kde integral");

    std::vector<double> ys(xs.size(), 3.7);
    check(nw_estimate(xs, ys, 0.5, 6.0) == 3.7, "constant response");
    for (std::size_t t = 0; t < xs.size(); ++t) ys[t] = std::sin(xs[t]) + normal(rng);
    check(nw_estimate(xs, ys, std::vector<double>(xs.size(), 0.37), 0.5, 6.0) == nw_estimate(xs, ys, 0.5, 6.0),
          "constant weights");

    const Portfolio p = benchmark_portfolio();
    Vector mu(4);
    mu << -1.4, -1.4, -0.9, -0.9;
    const ScenarioBatch q = simulate(p, 100000, 99, MeanShift{mu});
    const double lr_mean = q.ratios.mean();
    const double lr_se = std::sqrt((q.ratios.array() - lr_mean).square().sum() / (q.count() - 1.0) / q.count());
    check(std::abs(lr_mean - 1.0) <= 4.0 * lr_se, "likelihood ratio mean");

    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    const std::vector<double> ones(xs.size(), 1.0);
    for (double alpha : {0.5, 0.9, 0.99, 0.999}) {
        const auto a = std::lower_bound(sorted.begin(), sorted.end(), var_weighted(xs, ones, alpha).value);
        const auto b = std::lower_bound(sorted.begin(), sorted.end(), var_empirical(xs, alpha));
        check(std::abs(a - b) <= 1, "var_weighted with unit ratios");
    }

    const ScenarioBatch batch = simulate(p, 20000, 5);
    const AllocationResult alloc = allocate_standard(batch, 0.999);
    check(std::abs(alloc.normalized_contributions.sum() - alloc.var_estimate) <= 1e-10 * alloc.var_estimate,
          "normalized contributions sum");

    ExperimentSettings settings;
    settings.scenarios = 5000;
    settings.multipliers = {1.0, 0.5, 2.0};
    settings.workers = 1;
    const std::string serial = report_text(run_experiment(p, settings, 2, 17));
    const std::string again = report_text(run_experiment(p, settings, 2, 17));
    settings.workers = std::max(4u, worker_count());
    const std::string parallel = report_text(run_experiment(p, settings, 2, 17));
    check(serial == again, "byte-identical rerun");
    check(serial == parallel, "worker-count invariance");

    const double elapsed = seconds_since(start);
    std::string detail = failed.empty() ? "all property checks hold" : "failed:";
    for (const std::string& f : failed) detail += " " + f + ";";
    detail += fmt(" %.2fs (< 10s)", elapsed);
    record(8, "property suite", failed.empty() && elapsed < 10.0, detail);
}

void oracle_equivalence() {
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal;
    double worst_lr = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + trial % 6;
        const Matrix sigma = oracle::random_correlation(rng, k);
        Vector mu(k), s(k);
        for (int j = 0; j < k; ++j) {
            mu(j) = 1.5 * normal(rng);
            s(j) = normal(rng) + mu(j);
        }
        const double expected = oracle::density_quotient(s, mu, sigma);
        worst_lr = std::max(worst_lr, std::abs(likelihood_ratio(s, MeanShift{mu}, sigma) / expected - 1.0));
    }
    double worst_cdf = 0.0;
    for (int i = -9; i <= 9; ++i) {
        const double rho = 0.1 * i;
        for (const auto& [x, y] : std::vector<std::pair<double, double>>{{-2.0537, -2.5758}, {0.3, -1.0}, {1.5, 2.0}}) {
            worst_cdf =
                std::max(worst_cdf, std::abs(bivariate_normal_cdf(x, y, rho) - oracle::bivariate_cdf_brute_force(x, y, rho)));
        }
    }
    record(9, "oracle equivalence", worst_lr <= 1e-12 && worst_cdf <= 1e-8,
           fmt("likelihood ratio max relative error %.2e (<= 1e-12); bivariate CDF max error %.2e (<= 1e-8)", worst_lr,
               worst_cdf));
}

void nw_consistency() {
    std::vector<double> medians;
    for (std::size_t size : {1000u, 10000u, 100000u}) {
        std::vector<double> errors;
        for (int seed = 0; seed < 20; ++seed) {
            std::mt19937_64 rng(1000 + seed);
            std::uniform_real_distribution<double> uniform;
            std::normal_distribution<double> normal;
            std::vector<double> xs(size), ys(size);
            for (std::size_t t = 0; t < size; ++t) {
                xs[t] = uniform(rng);
                ys[t] = 2.0 * xs[t] + normal(rng);
            }
            const double h = silverman_bandwidth(sample_stddev(xs), size).value;
            errors.push_back(std::abs(nw_estimate(xs, ys, h, 0.5) - 1.0));
        }
        medians.push_back(median(errors));
    }
    record(10, "NW consistency", medians[0] > medians[1] && medians[1] > medians[2],
           fmt("median |error| %.5f > %.5f > %.5f for T = 1e3, 1e4, 1e5", medians[0], medians[1], medians[2]));
}

}  // namespace

int main() {
    const auto start = Clock::now();
    try {
        analytic_exactness();

        ExperimentSettings settings;
        settings.scenarios = kScenarios;
        settings.multipliers = {1.0, 0.5, 2.0};
        const auto sim_start = Clock::now();
        const ExperimentReport report = run_experiment(benchmark_portfolio(), settings, kRuns, kMasterSeed);
        std::printf("simulation study: %zu runs x %zu scenarios in %.1fs\n", kRuns, kScenarios,
                    seconds_since(sim_start));

        var_reproduction(report);
        mean_shift(report);
        shifted_distribution(report);
        variance_reduction(report);
        additivity_ordering(report);
        diversification(report);
        property_suite();
        oracle_equivalence();
        nw_consistency();
    } catch (const std::exception& e) {
        std::printf("[FAIL] acceptance aborted: %s\n", e.what());
        return 2;
    }
    const auto passed = std::count_if(results.begin(), results.end(), [](const Criterion& c) { return c.pass; });
    std::printf("%td/%zu criteria passed in %.1fs\n", passed, results.size(), seconds_since(start));
    return passed == static_cast<std::ptrdiff_t>(results.size()) ? 0 : 1;
}

#pragma once

// VaR estimators and the kernel-based allocation of VaR to obligors, by
// plain Monte Carlo and by importance sampling with shifted factor means.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varcontrib/error.hpp"
#include "varcontrib/kernel.hpp"
#include "varcontrib/linalg.hpp"
#include "varcontrib/model.hpp"
#include "varcontrib/moments.hpp"
#include "varcontrib/scenario.hpp"

namespace varcontrib {

enum class AllocationMethod { standard, importance };

inline const char* to_string(AllocationMethod method) {
    return method == AllocationMethod::standard ? "standard" : "importance";
}

struct AllocationResult {
    double var_estimate = 0.0;
    Vector raw_contributions;
    Vector normalized_contributions;
    double additivity_ratio = 0.0;
    BandwidthSpec bandwidth;
    std::size_t subsample_size = 0;
    AllocationMethod method = AllocationMethod::standard;
    bool var_degenerate = false;  // weighted VaR fell back to the largest loss
};

namespace detail {

inline std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

inline void require_alpha(double alpha, const char* who) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ValidationError(std::string(who) + ": alpha must lie in (0,1)");
    }
}

// Scenario indices ordered by loss, largest first; ties keep scenario order.
inline std::vector<std::size_t> descending_order(std::span<const double> totals) {
    std::vector<std::size_t> order(totals.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return totals[a] > totals[b]; });
    return order;
}

}  // namespace detail

/// Empirical alpha-quantile: the ceil(alpha T)-th order statistic. A product
/// alpha T within rounding of an integer is taken as that integer.
inline double var_empirical(std::span<const double> totals, double alpha) {
    if (totals.empty()) throw ValidationError("var_empirical: sample is empty");
    detail::require_alpha(alpha, "var_empirical");
    const double size = static_cast<double>(totals.size());
    const double position = alpha * size;
    const double nearest = std::round(position);
    double rank = std::abs(position - nearest) <= 1e-9 * size ? nearest : std::ceil(position);
    rank = std::clamp(rank, 1.0, size);
    std::vector<double> sorted(totals.begin(), totals.end());
    const auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(rank) - 1;
    std::nth_element(sorted.begin(), nth, sorted.end());
    return *nth;
}

struct WeightedVar {
    double value = 0.0;
    bool degenerate = false;
};

/// Likelihood-ratio weighted quantile. Pairs (L, R) are ordered by loss,
/// largest first, and carry tail weight R/T; the estimate is the loss of the
/// last pair whose cumulative weight stays within 1 - alpha. When the first
/// pair already exceeds it the largest loss is returned and flagged.
inline WeightedVar var_weighted(std::span<const double> totals, std::span<const double> ratios, double alpha) {
    if (totals.empty()) throw ValidationError("var_weighted: sample is empty");
    if (ratios.size() != totals.size()) throw ValidationError("var_weighted: totals and ratios differ in length");
    detail::require_alpha(alpha, "var_weighted");
    for (double r : ratios) {
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("var_weighted: ratios must be positive");
    }
    const std::vector<std::size_t> order = detail::descending_order(totals);
    const double size = static_cast<double>(totals.size());
    const double budget = (1.0 - alpha) * (1.0 + 1e-12);
    double cumulative = 0.0;
    std::optional<std::size_t> last;
    for (std::size_t t : order) {
        cumulative += ratios[t] / size;
        if (cumulative > budget) break;
        last = t;
    }
    if (!last) return {totals[order.front()], true};
    return {totals[*last], false};
}

inline WeightedVar var_weighted(const ScenarioBatch& batch, double alpha) {
    return var_weighted(detail::as_span(batch.totals), detail::as_span(batch.ratios), alpha);
}

enum class BandwidthMode { sample, analytic };

inline const char* to_string(BandwidthMode mode) { return mode == BandwidthMode::sample ? "sample" : "analytic"; }

struct AllocationOptions {
    double multiplier = 1.0;
    /// Exact moments of the positive losses; when set, the bandwidth uses
    /// their standard deviation and the expected sub-sample size T p+.
    std::optional<PortfolioMoments> analytic;
};

namespace detail {

struct PositiveSubsample {
    std::vector<double> losses;
    std::vector<double> ratios;
    RowMatrix assets;
    RowMatrix factors;
};

inline PositiveSubsample positive_subsample(const ScenarioBatch& batch, bool with_assets, bool with_factors) {
    PositiveSubsample sub;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index t = 0; t < batch.totals.size(); ++t) {
        if (batch.totals(t) > 0.0) rows.push_back(t);
    }
    sub.losses.reserve(rows.size());
    sub.ratios.reserve(rows.size());
    for (Eigen::Index t : rows) {
        sub.losses.push_back(batch.totals(t));
        sub.ratios.push_back(batch.ratios(t));
    }
    const auto m = static_cast<Eigen::Index>(rows.size());
    if (with_assets) {
        sub.assets.resize(m, batch.asset_losses.cols());
        for (Eigen::Index j = 0; j < m; ++j) sub.assets.row(j) = batch.asset_losses.row(rows[static_cast<std::size_t>(j)]);
    }
    if (with_factors) {
        sub.factors.resize(m, batch.factor_draws.cols());
        for (Eigen::Index j = 0; j < m; ++j) sub.factors.row(j) = batch.factor_draws.row(rows[static_cast<std::size_t>(j)]);
    }
    return sub;
}

inline void require_subsample(const PositiveSubsample& sub) {
    if (sub.losses.size() < 2) {
        throw NumericalError("fewer than 2 scenarios with a positive loss (" + std::to_string(sub.losses.size()) + ")");
    }
}

inline void require_positive_var(double var) {
    if (!(var > 0.0)) throw NumericalError("estimated VaR is zero; the confidence level lies in the no-loss atom");
}

inline BandwidthSpec choose_bandwidth(const PositiveSubsample& sub, std::size_t batch_size,
                                      const AllocationOptions& options) {
    if (options.analytic) {
        const double expected = std::round(static_cast<double>(batch_size) * options.analytic->prob_positive_loss);
        return silverman_bandwidth(options.analytic->conditional_stddev,
                                   static_cast<std::size_t>(std::max(1.0, expected)), options.multiplier);
    }
    const double sigma = sample_stddev(sub.losses);
    if (!(sigma > 0.0)) throw NumericalError("positive losses have zero spread; bandwidth undefined");
    return silverman_bandwidth(sigma, sub.losses.size(), options.multiplier);
}

inline AllocationResult finish_allocation(AllocationResult result) {
    const double total = result.raw_contributions.sum();
    if (!(total > 0.0)) throw NumericalError("raw contributions sum to zero; cannot normalize");
    result.additivity_ratio = total / result.var_estimate;
    result.normalized_contributions = result.raw_contributions * (result.var_estimate / total);
    return result;
}

}  // namespace detail

/// Kernel estimates of E[L_i | L = VaR] from a real-world batch: empirical
/// VaR on the whole sample, Nadaraya-Watson on the positive losses, then
/// multiplicative rescaling so the contributions add up to VaR.
inline AllocationResult allocate_standard(const ScenarioBatch& batch, double alpha,
                                          const AllocationOptions& options = {}) {
    if (batch.measure != Measure::real_world) {
        throw ValidationError("allocate_standard: batch must be generated under the real-world measure");
    }
    AllocationResult result;
    result.method = AllocationMethod::standard;
    result.var_estimate = var_empirical(detail::as_span(batch.totals), alpha);
    detail::require_positive_var(result.var_estimate);
    const detail::PositiveSubsample sub = detail::positive_subsample(batch, true, false);
    detail::require_subsample(sub);
    result.subsample_size = sub.losses.size();
    result.bandwidth = detail::choose_bandwidth(sub, batch.count(), options);
    result.raw_contributions = nw_estimate_batch(sub.losses, sub.assets, {}, result.bandwidth.value,
                                                 result.var_estimate);
    return detail::finish_allocation(std::move(result));
}

struct ShiftEstimate {
    MeanShift shift;
    double pilot_var = 0.0;
    BandwidthSpec bandwidth;
    std::size_t subsample_size = 0;
};

/// mu_k = E[S_k | L = VaR] by Nadaraya-Watson over the positive losses of a
/// real-world pilot batch, one bandwidth shared by all factors.
inline ShiftEstimate estimate_shift(const ScenarioBatch& pilot, double alpha, const AllocationOptions& options = {}) {
    if (pilot.measure != Measure::real_world) {
        throw ValidationError("estimate_shift: pilot batch must be generated under the real-world measure");
    }
    ShiftEstimate estimate;
    estimate.pilot_var = var_empirical(detail::as_span(pilot.totals), alpha);
    detail::require_positive_var(estimate.pilot_var);
    const detail::PositiveSubsample sub = detail::positive_subsample(pilot, false, true);
    detail::require_subsample(sub);
    estimate.subsample_size = sub.losses.size();
    estimate.bandwidth = detail::choose_bandwidth(sub, pilot.count(), options);
    estimate.shift.mu = nw_estimate_batch(sub.losses, sub.factors, {}, estimate.bandwidth.value, estimate.pilot_var);
    return estimate;
}

/// Likelihood-ratio weighted contributions from an importance-sampling batch
/// at the given VaR estimate.
inline AllocationResult allocate_weighted(const ScenarioBatch& batch, double var_estimate,
                                          const AllocationOptions& options = {}) {
    detail::require_positive_var(var_estimate);
    AllocationResult result;
    result.method = AllocationMethod::importance;
    result.var_estimate = var_estimate;
    const detail::PositiveSubsample sub = detail::positive_subsample(batch, true, false);
    detail::require_subsample(sub);
    result.subsample_size = sub.losses.size();
    result.bandwidth = detail::choose_bandwidth(sub, batch.count(), options);
    result.raw_contributions = nw_estimate_batch(sub.losses, sub.assets, sub.ratios, result.bandwidth.value,
                                                 var_estimate);
    return detail::finish_allocation(std::move(result));
}

struct ImportanceOptions {
    double multiplier = 1.0;
    bool reuse_sample = true;  // shifted batch shares the pilot's random numbers
    bool refined_var = true;   // VaR re-estimated from the shifted batch
    BandwidthMode mode = BandwidthMode::sample;
    std::optional<MeanShift> forced_shift;
    unsigned workers = worker_count();
};

struct ImportanceResult {
    AllocationResult allocation;
    MeanShift shift;
    double pilot_var = 0.0;
    std::optional<double> refined_var;
    ScenarioBatch shifted;
};

namespace detail {

inline std::uint64_t fresh_sample_seed(std::uint64_t seed) { return splitmix64(seed ^ 0xa0761d6478bd642fULL); }

}  // namespace detail

/// Importance-sampling allocation from an existing real-world pilot batch.
inline ImportanceResult allocate_importance(const Portfolio& portfolio, const ScenarioBatch& pilot, double alpha,
                                            std::size_t shifted_count, const ImportanceOptions& options = {}) {
    AllocationOptions pilot_options;
    if (options.mode == BandwidthMode::analytic) pilot_options.analytic = conditional_loss_stats(portfolio);

    ImportanceResult out;
    if (options.forced_shift) {
        out.pilot_var = var_empirical(detail::as_span(pilot.totals), alpha);
        detail::require_positive_var(out.pilot_var);
        out.shift = *options.forced_shift;
    } else {
        const ShiftEstimate estimate = estimate_shift(pilot, alpha, pilot_options);
        out.pilot_var = estimate.pilot_var;
        out.shift = estimate.shift;
    }

    out.shifted = options.reuse_sample
                      ? reshift(pilot, out.shift, portfolio, options.workers)
                      : simulate(portfolio, shifted_count, detail::fresh_sample_seed(pilot.seed), out.shift,
                                 options.workers);

    double var = out.pilot_var;
    bool degenerate = false;
    if (options.refined_var) {
        const WeightedVar refined = var_weighted(out.shifted, alpha);
        out.refined_var = refined.value;
        var = refined.value;
        degenerate = refined.degenerate;
    }

    AllocationOptions shifted_options{options.multiplier, std::nullopt};
    if (options.mode == BandwidthMode::analytic) shifted_options.analytic = conditional_loss_stats(portfolio, out.shift);
    out.allocation = allocate_weighted(out.shifted, var, shifted_options);
    out.allocation.var_degenerate = degenerate;
    return out;
}

/// Full importance-sampling run: pilot of T1 real-world scenarios, then T2
/// shifted scenarios (T2 = T1 when the pilot's random numbers are reused).
inline ImportanceResult allocate_importance(const Portfolio& portfolio, double alpha, std::size_t pilot_count,
                                            std::size_t shifted_count, std::uint64_t seed,
                                            const ImportanceOptions& options = {}) {
    const ScenarioBatch pilot = simulate(portfolio, pilot_count, seed, std::nullopt, options.workers);
    return allocate_importance(portfolio, pilot, alpha, shifted_count, options);
}

/// Sum of raw contributions over the VaR estimate.
inline double additivity_ratio(const AllocationResult& result) {
    if (!(result.var_estimate > 0.0)) throw ValidationError("additivity_ratio: VaR estimate must be positive");
    return result.raw_contributions.sum() / result.var_estimate;
}

/// Expected Shortfall contributions (1 - alpha)^-1 E[L_i ; tail] with
/// scenario weights R/T. The tail holds the largest losses up to weight
/// 1 - alpha; the boundary loss level enters with the fraction that fills it.
inline Vector es_contributions(const ScenarioBatch& batch, double alpha) {
    if (batch.count() == 0) throw ValidationError("es_contributions: batch is empty");
    detail::require_alpha(alpha, "es_contributions");
    const std::span<const double> totals = detail::as_span(batch.totals);
    const std::vector<std::size_t> order = detail::descending_order(totals);
    const double size = static_cast<double>(batch.count());
    const double target = 1.0 - alpha;
    const Eigen::Index n = batch.asset_losses.cols();

    Vector tail = Vector::Zero(n);
    double cumulative = 0.0;
    std::size_t pos = 0;
    while (pos < order.size()) {
        const double level = totals[order[pos]];
        double weight = 0.0;
        Vector group = Vector::Zero(n);
        for (; pos < order.size() && totals[order[pos]] == level; ++pos) {
            const auto t = static_cast<Eigen::Index>(order[pos]);
            const double w = batch.ratios(t) / size;
            weight += w;
            group.noalias() += w * batch.asset_losses.row(t).transpose();
        }
        if (cumulative + weight >= target * (1.0 - 1e-12)) {
            const double fraction = weight > 0.0 ? std::clamp((target - cumulative) / weight, 0.0, 1.0) : 0.0;
            tail += fraction * group;
            cumulative = target;
            break;
        }
        tail += group;
        cumulative += weight;
    }
    if (!(cumulative > 0.0)) throw NumericalError("es_contributions: tail carries no weight");
    return tail / target;
}

}  // namespace varcontrib

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>

#include "varcontrib/error.hpp"
#include "varcontrib/linalg.hpp"
#include "varcontrib/model.hpp"
#include "varcontrib/parallel.hpp"

namespace varcontrib {

/// Means of the systematic factors under the importance-sampling measure.
struct MeanShift {
    Vector mu;

    int size() const noexcept { return static_cast<int>(mu.size()); }
    bool is_zero() const { return (mu.array() == 0.0).all(); }
};

enum class Measure { real_world, importance };

/// Likelihood ratio of N(0, Sigma) against N(mu, Sigma), evaluated at the
/// realized factor vector s: exp(-mu' Sigma^-1 s + mu' Sigma^-1 mu / 2).
/// Precomputes Sigma^-1 mu once so each evaluation is O(k).
class ShiftLikelihoodRatio {
public:
    ShiftLikelihoodRatio(const MeanShift& shift, const Matrix& correlation)
        : ShiftLikelihoodRatio(shift, correlation, cholesky(correlation)) {}

    ShiftLikelihoodRatio(const MeanShift& shift, const Matrix& correlation, const Matrix& chol) {
        if (shift.size() != correlation.rows()) {
            throw ValidationError("likelihood ratio: shift length " + std::to_string(shift.size()) +
                                  " does not match factor count " + std::to_string(correlation.rows()));
        }
        if (!shift.mu.allFinite()) throw ValidationError("likelihood ratio: shift has non-finite entries");
        precision_mu_ = cholesky_solve(chol, shift.mu);
        half_quadratic_ = 0.5 * shift.mu.dot(precision_mu_);
    }

    template <class Derived>
    double log_ratio(const Eigen::MatrixBase<Derived>& s) const {
        return -precision_mu_.dot(s) + half_quadratic_;
    }

    template <class Derived>
    double operator()(const Eigen::MatrixBase<Derived>& s) const {
        return std::exp(log_ratio(s));
    }

private:
    Vector precision_mu_;
    double half_quadratic_ = 0.0;
};

inline double likelihood_ratio(const Vector& s, const MeanShift& shift, const Matrix& correlation) {
    if (s.size() != correlation.rows()) throw ValidationError("likelihood_ratio: s has wrong length");
    return ShiftLikelihoodRatio(shift, correlation)(s);
}

/// One Monte Carlo run: realized factors, per-asset losses, portfolio totals
/// and likelihood ratios (all 1 under the real-world measure).
struct ScenarioBatch {
    RowMatrix factor_draws;  // T x k
    RowMatrix asset_losses;  // T x n
    Vector totals;           // T
    Vector ratios;           // T
    Measure measure = Measure::real_world;
    std::optional<MeanShift> shift;
    std::uint64_t seed = 0;

    std::size_t count() const noexcept { return static_cast<std::size_t>(totals.size()); }
    std::size_t asset_count() const noexcept { return static_cast<std::size_t>(asset_losses.cols()); }

    std::size_t positive_count() const {
        return static_cast<std::size_t>((totals.array() > 0.0).count());
    }
};

/// Scenarios per RNG substream. Fixed, so results do not depend on the
/// number of workers.
inline constexpr std::size_t kScenarioChunk = 1024;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t chunk) {
    return splitmix64(splitmix64(master) ^ splitmix64(chunk + 0x632be59bd9b4e019ULL));
}

}  // namespace detail

/// Simulates `count` scenarios. Without a shift the factors are standard
/// normal with the portfolio's correlation; with a shift mu every factor
/// vector is moved to S + mu and the likelihood ratio is recorded. The random
/// numbers consumed per scenario do not depend on the shift, so batches with
/// the same seed and different shifts use common random numbers.
inline ScenarioBatch simulate(const Portfolio& portfolio, std::size_t count, std::uint64_t seed,
                              const std::optional<MeanShift>& shift = std::nullopt,
                              unsigned workers = worker_count()) {
    if (count < 1) throw ValidationError("simulate: scenario count must be at least 1");
    const int k = portfolio.factor_count();
    const auto n = static_cast<Eigen::Index>(portfolio.size());
    const FactorModel& factors = portfolio.factors();

    std::optional<ShiftLikelihoodRatio> ratio;
    if (shift) ratio.emplace(*shift, factors.correlation(), factors.chol());

    ScenarioBatch batch;
    batch.factor_draws.resize(static_cast<Eigen::Index>(count), k);
    batch.asset_losses.resize(static_cast<Eigen::Index>(count), n);
    batch.totals.resize(static_cast<Eigen::Index>(count));
    batch.ratios.resize(static_cast<Eigen::Index>(count));
    batch.measure = shift ? Measure::importance : Measure::real_world;
    batch.shift = shift;
    batch.seed = seed;

    const double systematic = std::sqrt(factors.loading());
    const double idiosyncratic = std::sqrt(1.0 - factors.loading());
    std::vector<int> sector(static_cast<std::size_t>(n));
    std::vector<double> threshold(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        sector[static_cast<std::size_t>(i)] = portfolio.asset(static_cast<std::size_t>(i)).sector;
        threshold[static_cast<std::size_t>(i)] = portfolio.threshold(static_cast<std::size_t>(i));
    }

    const std::size_t chunks = (count + kScenarioChunk - 1) / kScenarioChunk;
    parallel_for(
        chunks,
        [&](std::size_t chunk) {
            std::mt19937_64 engine(detail::substream_seed(seed, chunk));
            std::normal_distribution<double> normal;
            std::uniform_real_distribution<double> uniform;
            Vector z(k);
            Vector s(k);
            const std::size_t begin = chunk * kScenarioChunk;
            const std::size_t end = std::min(count, begin + kScenarioChunk);
            for (std::size_t t = begin; t < end; ++t) {
                const auto row = static_cast<Eigen::Index>(t);
                for (int j = 0; j < k; ++j) z(j) = normal(engine);
                s.noalias() = factors.chol().triangularView<Eigen::Lower>() * z;
                if (shift) s += shift->mu;
                batch.factor_draws.row(row) = s.transpose();

                double total = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const auto ui = static_cast<std::size_t>(i);
                    const double xi = normal(engine);
                    const double u = uniform(engine);
                    const double latent = systematic * s(sector[ui]) + idiosyncratic * xi;
                    double loss = 0.0;
                    if (latent <= threshold[ui]) {
                        loss = portfolio.asset(ui).exposure * portfolio.severity(ui).quantile(u);
                    }
                    batch.asset_losses(row, i) = loss;
                    total += loss;
                }
                batch.totals(row) = total;
                batch.ratios(row) = ratio ? (*ratio)(s) : 1.0;
            }
        },
        workers);
    return batch;
}

/// Re-evaluates a real-world batch under the shifted factors S + mu with the
/// same underlying random numbers (T2 = T1). The batch stores its seed and
/// the scenario stream is regenerated, so no draws are kept in memory.
inline ScenarioBatch reshift(const ScenarioBatch& batch, const MeanShift& shift, const Portfolio& portfolio,
                             unsigned workers = worker_count()) {
    if (batch.measure != Measure::real_world) {
        throw ValidationError("reshift: batch was not generated under the real-world measure");
    }
    if (batch.asset_count() != portfolio.size() ||
        batch.factor_draws.cols() != portfolio.factor_count()) {
        throw ValidationError("reshift: batch dimensions do not match the portfolio");
    }
    return simulate(portfolio, batch.count(), batch.seed, shift, workers);
}

/// Delimited-text dump: scenario index, k factors, total loss, ratio, and the
/// per-asset losses when `verbose` is set.
inline void write_batch_csv(const ScenarioBatch& batch, std::ostream& out, bool verbose = false) {
    const auto k = batch.factor_draws.cols();
    out << "scenario";
    for (Eigen::Index j = 0; j < k; ++j) out << ",factor_" << j + 1;
    out << ",total,ratio";
    if (verbose) {
        for (Eigen::Index i = 0; i < batch.asset_losses.cols(); ++i) out << ",asset_" << i + 1;
    }
    out << '\n';
    const auto precision = out.precision(std::numeric_limits<double>::max_digits10);
    for (Eigen::Index t = 0; t < batch.totals.size(); ++t) {
        out << t;
        for (Eigen::Index j = 0; j < k; ++j) out << ',' << batch.factor_draws(t, j);
        out << ',' << batch.totals(t) << ',' << batch.ratios(t);
        if (verbose) {
            for (Eigen::Index i = 0; i < batch.asset_losses.cols(); ++i) out << ',' << batch.asset_losses(t, i);
        }
        out << '\n';
    }
    out.precision(precision);
}

}  // namespace varcontrib

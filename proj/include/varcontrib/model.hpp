#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "varcontrib/error.hpp"
#include "varcontrib/linalg.hpp"
#include "varcontrib/special_functions.hpp"

namespace varcontrib {

/// Risk parameters of one obligor. `sector` is 0-based and selects the
/// systematic factor driving the obligor's default.
struct AssetSpec {
    int id = 0;
    int sector = 0;
    double pd = 0.0;
    double exposure = 0.0;
    double lgd_mean = 0.0;
    double lgd_variance = 0.0;

    double expected_loss() const noexcept { return pd * exposure * lgd_mean; }

    friend bool operator==(const AssetSpec&, const AssetSpec&) = default;
};

/// Shape parameters of a beta severity distribution.
struct BetaParams {
    double alpha = 1.0;
    double beta = 1.0;

    double mean() const noexcept { return alpha / (alpha + beta); }
    double variance() const noexcept {
        const double s = alpha + beta;
        return alpha * beta / (s * s * (s + 1.0));
    }
    /// Inverse distribution function.
    double quantile(double p) const { return beta_quantile(p, alpha, beta); }

    friend bool operator==(const BetaParams&, const BetaParams&) = default;
};

/// Method-of-moments beta parameters. Requires 0 < mean < 1 and
/// 0 < variance < mean (1 - mean).
inline BetaParams beta_from_moments(double mean, double variance) {
    if (!(mean > 0.0 && mean < 1.0)) {
        throw ValidationError("beta_from_moments: mean must lie in (0,1), got " + std::to_string(mean));
    }
    const double bound = mean * (1.0 - mean);
    if (!(variance > 0.0)) {
        throw ValidationError("beta_from_moments: variance must be positive, got " +
                              std::to_string(variance));
    }
    if (!(variance < bound)) {
        throw ValidationError("beta_from_moments: variance " + std::to_string(variance) +
                              " must be below mean*(1-mean) = " + std::to_string(bound));
    }
    const double common = bound / variance - 1.0;
    return {mean * common, (1.0 - mean) * common};
}

/// Latent-variable default threshold Phi^{-1}(pd).
inline double default_threshold(double pd) {
    if (!(pd > 0.0 && pd < 1.0)) {
        throw ValidationError("default_threshold: pd must lie in (0,1), got " + std::to_string(pd));
    }
    return inverse_normal_cdf(pd);
}

/// Stand-alone VaR of a single obligor's loss v * B * 1{default}. The loss
/// distribution has an atom of mass 1 - pd at zero, so the quantile is zero
/// up to that level and a rescaled beta quantile above it.
inline double standalone_var(const AssetSpec& asset, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ValidationError("standalone_var: alpha must lie in (0,1)");
    }
    const double survival = 1.0 - asset.pd;
    if (alpha <= survival) return 0.0;
    const BetaParams severity = beta_from_moments(asset.lgd_mean, asset.lgd_variance);
    return asset.exposure * severity.quantile((alpha - survival) / asset.pd);
}

/// Correlated standard normal systematic factors and the common loading r.
/// Immutable; the Cholesky factor is computed once at construction.
class FactorModel {
public:
    FactorModel(Matrix correlation, double loading)
        : correlation_(std::move(correlation)), loading_(loading) {
        if (!(loading_ >= 0.0 && loading_ < 1.0)) {
            throw ValidationError("factor loading must lie in [0,1), got " + std::to_string(loading_));
        }
        chol_ = cholesky(correlation_);
    }

    const Matrix& correlation() const noexcept { return correlation_; }
    const Matrix& chol() const noexcept { return chol_; }
    double loading() const noexcept { return loading_; }
    int factor_count() const noexcept { return static_cast<int>(correlation_.rows()); }

    /// Correlation of the latent variables of two obligors in the given sectors.
    double latent_correlation(int sector_a, int sector_b) const {
        return sector_a == sector_b ? loading_ : loading_ * correlation_(sector_a, sector_b);
    }

private:
    Matrix correlation_;
    Matrix chol_;
    double loading_;
};

/// Human-readable list of violated invariants; empty when the data is valid.
using ValidationReport = std::vector<std::string>;

inline ValidationReport validate_portfolio(std::span<const AssetSpec> assets, const FactorModel& factors) {
    ValidationReport report;
    const int k = factors.factor_count();
    std::vector<int> members(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < assets.size(); ++i) {
        const AssetSpec& a = assets[i];
        const auto where = [&] {
            std::ostringstream out;
            out << "asset " << a.id << " (row " << i + 1 << "): ";
            return out.str();
        };
        if (a.sector < 0 || a.sector >= k) {
            report.push_back(where() + "sector index " + std::to_string(a.sector) +
                             " outside [0," + std::to_string(k) + ")");
        } else {
            ++members[static_cast<std::size_t>(a.sector)];
        }
        if (!(a.pd > 0.0 && a.pd <= 1.0)) report.push_back(where() + "pd must lie in (0,1]");
        if (!(a.exposure > 0.0)) report.push_back(where() + "exposure must be positive");
        if (!(a.lgd_mean > 0.0 && a.lgd_mean < 1.0)) {
            report.push_back(where() + "lgd_mean must lie in (0,1)");
        } else if (!(a.lgd_variance > 0.0)) {
            report.push_back(where() + "lgd_variance must be positive");
        } else if (!(a.lgd_variance < a.lgd_mean * (1.0 - a.lgd_mean))) {
            report.push_back(where() + "lgd_variance exceeds beta bound lgd_mean*(1-lgd_mean) = " +
                             std::to_string(a.lgd_mean * (1.0 - a.lgd_mean)));
        }
    }
    for (int s = 0; s < k; ++s) {
        if (members[static_cast<std::size_t>(s)] == 0) {
            report.push_back("sector " + std::to_string(s) + " has no assets");
        }
    }
    return report;
}

/// A validated credit portfolio with per-asset derived quantities.
class Portfolio {
public:
    Portfolio(std::vector<AssetSpec> assets, FactorModel factors)
        : assets_(std::move(assets)), factors_(std::move(factors)) {
        const ValidationReport report = validate_portfolio(assets_, factors_);
        if (!report.empty()) {
            std::string message = "invalid portfolio:";
            for (const auto& line : report) message += "\n  " + line;
            throw ValidationError(message);
        }
        severities_.reserve(assets_.size());
        thresholds_.reserve(assets_.size());
        for (const AssetSpec& a : assets_) {
            severities_.push_back(beta_from_moments(a.lgd_mean, a.lgd_variance));
            // pd = 1 is a certain default.
            thresholds_.push_back(a.pd == 1.0 ? std::numeric_limits<double>::infinity()
                                              : default_threshold(a.pd));
        }
    }

    std::span<const AssetSpec> assets() const noexcept { return assets_; }
    const AssetSpec& asset(std::size_t i) const { return assets_.at(i); }
    std::size_t size() const noexcept { return assets_.size(); }
    const FactorModel& factors() const noexcept { return factors_; }
    int factor_count() const noexcept { return factors_.factor_count(); }

    const BetaParams& severity(std::size_t i) const { return severities_.at(i); }
    double threshold(std::size_t i) const { return thresholds_.at(i); }

    /// 1-based position of asset i among the assets of its sector.
    int position_in_sector(std::size_t i) const {
        int pos = 0;
        for (std::size_t j = 0; j <= i; ++j) {
            if (assets_[j].sector == assets_[i].sector) ++pos;
        }
        return pos;
    }

private:
    std::vector<AssetSpec> assets_;
    FactorModel factors_;
    std::vector<BetaParams> severities_;
    std::vector<double> thresholds_;
};

inline ValidationReport validate_portfolio(const Portfolio& portfolio) {
    return validate_portfolio(portfolio.assets(), portfolio.factors());
}

/// The 24 obligor profiles of the benchmark study, repeated in each sector.
/// Columns: pd, exposure, lgd mean, lgd variance.
inline std::vector<AssetSpec> benchmark_sector_profile() {
    std::vector<AssetSpec> rows;
    for (double pd : {0.02, 0.005}) {
        for (double exposure : {25.0, 5.0, 1.0}) {
            for (double variance : {0.125, 0.03125}) {
                for (int copy = 0; copy < 2; ++copy) {
                    rows.push_back({0, 0, pd, exposure, 0.5, variance});
                }
            }
        }
    }
    return rows;
}

inline Matrix benchmark_correlation() {
    Matrix c(4, 4);
    c << 1.0, 0.75, 0.05, 0.05,
         0.75, 1.0, 0.05, 0.05,
         0.05, 0.05, 1.0, 0.25,
         0.05, 0.05, 0.25, 1.0;
    return c;
}

/// 96-asset, 4-factor benchmark portfolio with loading r = 0.18.
inline Portfolio benchmark_portfolio() {
    std::vector<AssetSpec> assets;
    const auto profile = benchmark_sector_profile();
    int id = 1;
    for (int sector = 0; sector < 4; ++sector) {
        for (AssetSpec a : profile) {
            a.id = id++;
            a.sector = sector;
            assets.push_back(a);
        }
    }
    return Portfolio(std::move(assets), FactorModel(benchmark_correlation(), 0.18));
}

}  // namespace varcontrib

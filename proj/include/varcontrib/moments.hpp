#pragma once

// Analytic characteristics of the portfolio loss distribution under the
// factor model, optionally with the factors' means moved by a shift mu
// (the importance-sampling measure).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "varcontrib/error.hpp"
#include "varcontrib/model.hpp"
#include "varcontrib/scenario.hpp"
#include "varcontrib/special_functions.hpp"

namespace varcontrib {

struct PortfolioMoments {
    double expected_loss = 0.0;
    double loss_stddev = 0.0;
    double prob_positive_loss = 0.0;
    double conditional_mean = 0.0;    // E[L | L > 0]
    double conditional_stddev = 0.0;  // sd(L | L > 0)
};

namespace detail {

inline double shifted_threshold(const Portfolio& portfolio, std::size_t i, const std::optional<MeanShift>& shift) {
    const double c = portfolio.threshold(i);
    if (!shift) return c;
    const int sector = portfolio.asset(i).sector;
    return c - std::sqrt(portfolio.factors().loading()) * shift->mu(sector);
}

inline void check_shift(const Portfolio& portfolio, const std::optional<MeanShift>& shift) {
    if (shift && shift->size() != portfolio.factor_count()) {
        throw ValidationError("shift length does not match the factor count");
    }
}

}  // namespace detail

inline double expected_loss(std::span<const AssetSpec> assets) {
    double el = 0.0;
    for (const AssetSpec& a : assets) el += a.expected_loss();
    return el;
}

/// E[L]; under a shift the marginal default probabilities move to
/// Phi(Phi^{-1}(pd) - sqrt(r) mu_k).
inline double expected_loss(const Portfolio& portfolio, const std::optional<MeanShift>& shift = std::nullopt) {
    if (!shift) return expected_loss(portfolio.assets());
    detail::check_shift(portfolio, shift);
    double el = 0.0;
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
        const AssetSpec& a = portfolio.asset(i);
        el += normal_cdf(detail::shifted_threshold(portfolio, i, shift)) * a.exposure * a.lgd_mean;
    }
    return el;
}

/// Var(L) = sum_i Var(L_i) + sum_{i != j} v_i v_j lgd_i lgd_j (P[D_i D_j] - p_i p_j)
/// with joint default probabilities from the bivariate normal distribution
/// of the latent variables.
inline double loss_variance(const Portfolio& portfolio, const std::optional<MeanShift>& shift = std::nullopt) {
    detail::check_shift(portfolio, shift);
    const std::size_t n = portfolio.size();
    std::vector<double> c(n);
    std::vector<double> p(n);
    std::vector<double> scale(n);
    double variance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const AssetSpec& a = portfolio.asset(i);
        c[i] = detail::shifted_threshold(portfolio, i, shift);
        p[i] = shift ? normal_cdf(c[i]) : a.pd;
        scale[i] = a.exposure * a.lgd_mean;
        const double second_moment = a.lgd_variance + a.lgd_mean * a.lgd_mean;
        variance += a.exposure * a.exposure * (p[i] * second_moment - p[i] * p[i] * a.lgd_mean * a.lgd_mean);
    }

    std::map<std::tuple<double, double, double>, double> joint_cache;
    const FactorModel& factors = portfolio.factors();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double rho = factors.latent_correlation(portfolio.asset(i).sector, portfolio.asset(j).sector);
            if (rho == 0.0) continue;
            const auto key = c[i] <= c[j] ? std::make_tuple(c[i], c[j], rho) : std::make_tuple(c[j], c[i], rho);
            auto it = joint_cache.find(key);
            if (it == joint_cache.end()) {
                it = joint_cache.emplace(key, bivariate_normal_cdf(c[i], c[j], rho)).first;
            }
            variance += 2.0 * scale[i] * scale[j] * (it->second - p[i] * p[j]);
        }
    }
    return variance;
}

inline double loss_stddev(const Portfolio& portfolio, const std::optional<MeanShift>& shift = std::nullopt) {
    return std::sqrt(std::max(0.0, loss_variance(portfolio, shift)));
}

namespace detail {

// E[prod_i (1 - p_i(S))] by a tensor Gauss-Hermite rule. S = C Z (+ mu) with
// C lower triangular, so S_d depends on Z_1..Z_d only and the per-sector
// factors of the product can be accumulated dimension by dimension.
inline double no_loss_probability(const Portfolio& portfolio, const std::optional<MeanShift>& shift,
                                  const GaussHermiteRule& rule) {
    const int k = portfolio.factor_count();
    const double r = portfolio.factors().loading();
    const double sqrt_r = std::sqrt(r);
    const double sqrt_1mr = std::sqrt(1.0 - r);

    // Assets grouped by (sector, threshold): survival^count per group.
    struct Group {
        double threshold;
        double count;
    };
    std::vector<std::vector<Group>> groups(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
        auto& g = groups[static_cast<std::size_t>(portfolio.asset(i).sector)];
        const double c = portfolio.threshold(i);
        bool found = false;
        for (Group& existing : g) {
            if (existing.threshold == c) {
                existing.count += 1.0;
                found = true;
                break;
            }
        }
        if (!found) g.push_back({c, 1.0});
    }

    const auto sector_survival = [&](int d, double s) {
        double prod = 1.0;
        for (const Group& g : groups[static_cast<std::size_t>(d)]) {
            const double pd = std::isinf(g.threshold) ? 1.0 : normal_cdf((g.threshold - sqrt_r * s) / sqrt_1mr);
            prod *= std::pow(1.0 - pd, g.count);
        }
        return prod;
    };

    const Matrix& chol = portfolio.factors().chol();
    const std::size_t m = rule.nodes.size();
    std::vector<double> z(static_cast<std::size_t>(k));
    std::function<double(int, double)> recurse = [&](int d, double partial) -> double {
        if (d == k) return partial;
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            z[static_cast<std::size_t>(d)] = rule.nodes[j];
            double s = shift ? shift->mu(d) : 0.0;
            for (int q = 0; q <= d; ++q) s += chol(d, q) * z[static_cast<std::size_t>(q)];
            const double factor = sector_survival(d, s);
            if (factor == 0.0) continue;
            sum += rule.weights[j] * recurse(d + 1, partial * factor);
        }
        return sum;
    };
    return recurse(0, 1.0);
}

}  // namespace detail

/// Nodes per dimension of the first quadrature pass; the check pass doubles it.
inline constexpr int kHermiteNodes = 20;
/// Maximum disagreement between the two quadrature passes.
inline constexpr double kQuadratureTolerance = 1e-6;

/// P[L > 0] = 1 - E[prod_i (1 - p_i(S))] with
/// p_i(s) = Phi((Phi^{-1}(pd_i) - sqrt(r) s_k(i)) / sqrt(1 - r)).
inline double prob_positive_loss(const Portfolio& portfolio, const std::optional<MeanShift>& shift = std::nullopt) {
    detail::check_shift(portfolio, shift);
    const int k = portfolio.factor_count();
    if (std::pow(2.0 * kHermiteNodes, k) > 2e8) {
        throw NumericalError("prob_positive_loss: too many factors for tensor quadrature");
    }
    const double coarse = detail::no_loss_probability(portfolio, shift, gauss_hermite_rule(kHermiteNodes));
    const double fine = detail::no_loss_probability(portfolio, shift, gauss_hermite_rule(2 * kHermiteNodes));
    if (std::abs(coarse - fine) > kQuadratureTolerance) {
        throw NumericalError("prob_positive_loss: quadrature did not converge (" + std::to_string(coarse) +
                             " vs " + std::to_string(fine) + ")");
    }
    return std::clamp(1.0 - fine, 0.0, 1.0);
}

/// Exact moments of L conditional on L > 0; L vanishes on {L = 0}, so
/// E[L^m | L > 0] = E[L^m] / P[L > 0].
inline PortfolioMoments conditional_loss_stats(const Portfolio& portfolio,
                                               const std::optional<MeanShift>& shift = std::nullopt) {
    PortfolioMoments m;
    m.expected_loss = expected_loss(portfolio, shift);
    const double variance = loss_variance(portfolio, shift);
    m.loss_stddev = std::sqrt(std::max(0.0, variance));
    m.prob_positive_loss = prob_positive_loss(portfolio, shift);
    // Below the quadrature's resolution the probability is indistinguishable from zero.
    if (!(m.prob_positive_loss > 1e-12)) {
        throw NumericalError("conditional_loss_stats: probability of a positive loss is zero");
    }
    m.conditional_mean = m.expected_loss / m.prob_positive_loss;
    const double second = (variance + m.expected_loss * m.expected_loss) / m.prob_positive_loss;
    m.conditional_stddev = std::sqrt(std::max(0.0, second - m.conditional_mean * m.conditional_mean));
    return m;
}

/// EC = VaR - E[L]. A negative value marks an inconsistent input pair.
inline double economic_capital(double var, double el) { return var - el; }

/// (VaR - E[L]) / sum_i (VaR_i - E[L_i]) on the unexpected-loss basis.
inline double diversification_index(double portfolio_var, double portfolio_el, std::span<const double> component_vars,
                                    std::span<const double> component_els) {
    if (component_vars.size() != component_els.size()) {
        throw ValidationError("diversification_index: component vectors differ in length");
    }
    double denominator = 0.0;
    for (std::size_t i = 0; i < component_vars.size(); ++i) denominator += component_vars[i] - component_els[i];
    if (!(denominator > 0.0)) {
        throw ValidationError("diversification_index: stand-alone unexpected losses must sum to a positive value");
    }
    return (portfolio_var - portfolio_el) / denominator;
}

/// (contribution - E[L_i]) / (VaR_i - E[L_i]).
inline double marginal_diversification_index(double contribution, double component_el, double standalone_var) {
    const double denominator = standalone_var - component_el;
    if (!(denominator > 0.0)) {
        throw ValidationError("marginal_diversification_index: stand-alone VaR must exceed expected loss");
    }
    return (contribution - component_el) / denominator;
}

}  // namespace varcontrib

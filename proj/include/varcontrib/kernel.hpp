#pragma once

// Gaussian-kernel estimators: Rosenblatt-Parzen density, Nadaraya-Watson
// conditional expectation (optionally likelihood-ratio weighted) and
// Silverman's rule-of-thumb bandwidth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varcontrib/error.hpp"
#include "varcontrib/linalg.hpp"
#include "varcontrib/parallel.hpp"
#include "varcontrib/special_functions.hpp"

namespace varcontrib {

/// Kernel arguments beyond this magnitude contribute exactly zero.
inline constexpr double kKernelCutoff = 38.0;
/// Denominators below this are reported as an empty neighborhood.
inline constexpr double kMinKernelMass = 1e-300;

struct BandwidthSpec {
    double base_sigma = 0.0;
    std::size_t sample_size = 0;
    double multiplier = 1.0;
    double value = 0.0;
};

/// h = multiplier * 1.06 * sigma * T^(-1/5).
inline BandwidthSpec silverman_bandwidth(double sigma, std::size_t sample_size, double multiplier = 1.0) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ValidationError("silverman_bandwidth: sigma must be positive, got " + std::to_string(sigma));
    }
    if (sample_size < 1) throw ValidationError("silverman_bandwidth: sample size must be at least 1");
    if (!(multiplier > 0.0)) throw ValidationError("silverman_bandwidth: multiplier must be positive");
    const double h = multiplier * 1.06 * sigma * std::pow(static_cast<double>(sample_size), -0.2);
    return {sigma, sample_size, multiplier, h};
}

/// Sample standard deviation with the n-1 denominator (0 for one point).
inline double sample_stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Standard normal kernel with the underflow cutoff applied.
inline double gaussian_kernel(double u) noexcept {
    return std::abs(u) > kKernelCutoff ? 0.0 : normal_pdf(u);
}

namespace detail {

inline void require_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("kernel: bandwidth must be positive");
}

}  // namespace detail

/// Rosenblatt-Parzen density estimate at x: the density of X* + h xi with X*
/// drawn from the sample and xi standard normal.
inline double kde(std::span<const double> sample, double h, double x) {
    if (sample.empty()) throw ValidationError("kde: sample is empty");
    detail::require_bandwidth(h);
    double sum = 0.0;
    for (double xt : sample) sum += gaussian_kernel((x - xt) / h);
    return sum / (h * static_cast<double>(sample.size()));
}

/// Kernel weights w_t * phi((x - x_t)/h), the shared part of every
/// Nadaraya-Watson quotient at x. The w_t are divided by their maximum
/// first, which leaves every quotient unchanged and makes constant weights
/// reproduce the unweighted weights bit for bit.
inline std::vector<double> kernel_weights(std::span<const double> xs, std::span<const double> weights,
                                          double h, double x) {
    detail::require_bandwidth(h);
    if (!weights.empty() && weights.size() != xs.size()) {
        throw ValidationError("nw_estimate: weights and xs differ in length");
    }
    double scale = 1.0;
    if (!weights.empty()) {
        scale = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw ValidationError("nw_estimate: weights must be finite and non-negative");
            }
            scale = std::max(scale, w);
        }
    }
    std::vector<double> k(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        k[t] = gaussian_kernel((x - xs[t]) / h);
        if (!weights.empty()) k[t] *= scale > 0.0 ? weights[t] / scale : 0.0;
    }
    return k;
}

/// Nadaraya-Watson estimate of E[Y | X = x]:
///   sum_t w_t y_t phi((x - x_t)/h) / sum_t w_t phi((x - x_t)/h).
/// With w_t the likelihood ratios this is the importance-sampling quotient
/// E_Q[R Y | X = x] / E_Q[R | X = x]; the kernel-density denominators cancel.
/// Throws EmptyNeighborhoodError when the weighted kernel mass vanishes.
inline double nw_estimate(std::span<const double> xs, std::span<const double> ys,
                          std::span<const double> weights, double h, double x) {
    if (xs.empty()) throw ValidationError("nw_estimate: sample is empty");
    if (ys.size() != xs.size()) throw ValidationError("nw_estimate: xs and ys differ in length");
    const std::vector<double> k = kernel_weights(xs, weights, h, x);
    // Centered on the first response, so a constant response is returned exactly.
    const double reference = ys[0];
    double numerator = 0.0;
    double denominator = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        numerator += k[t] * (ys[t] - reference);
        denominator += k[t];
    }
    if (!(denominator >= kMinKernelMass)) throw EmptyNeighborhoodError(x);
    return reference + numerator / denominator;
}

inline double nw_estimate(std::span<const double> xs, std::span<const double> ys, double h, double x) {
    return nw_estimate(xs, ys, {}, h, x);
}

/// Column-wise Nadaraya-Watson estimates for a T x n response matrix sharing
/// the regressor xs, weights, bandwidth and evaluation point. The kernel
/// weights are computed once; blocks of columns are summed on separate
/// workers, each in scenario order, so the result does not depend on the
/// worker count.
inline Vector nw_estimate_batch(std::span<const double> xs, const RowMatrix& ys,
                                std::span<const double> weights, double h, double x,
                                unsigned workers = worker_count()) {
    if (xs.empty()) throw ValidationError("nw_estimate_batch: sample is empty");
    if (static_cast<std::size_t>(ys.rows()) != xs.size()) {
        throw ValidationError("nw_estimate_batch: response rows differ from xs length");
    }
    const std::vector<double> k = kernel_weights(xs, weights, h, x);
    double denominator = 0.0;
    std::vector<Eigen::Index> active;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        if (k[t] == 0.0) continue;
        denominator += k[t];
        active.push_back(static_cast<Eigen::Index>(t));
    }
    if (!(denominator >= kMinKernelMass)) throw EmptyNeighborhoodError(x);

    const Eigen::Index n = ys.cols();
    constexpr Eigen::Index block = 16;
    const auto blocks = static_cast<std::size_t>((n + block - 1) / block);
    Vector estimate(n);
    parallel_for(
        blocks,
        [&](std::size_t b) {
            const Eigen::Index begin = static_cast<Eigen::Index>(b) * block;
            const Eigen::Index width = std::min(block, n - begin);
            const Vector reference = ys.block(0, begin, 1, width).transpose();
            Vector numerator = Vector::Zero(width);
            for (Eigen::Index t : active) {
                numerator.noalias() += k[static_cast<std::size_t>(t)] *
                                       (ys.block(t, begin, 1, width).transpose() - reference);
            }
            estimate.segment(begin, width) = reference + numerator / denominator;
        },
        workers);
    return estimate;
}

inline Vector nw_estimate_batch(std::span<const double> xs, const RowMatrix& ys, double h, double x) {
    return nw_estimate_batch(xs, ys, {}, h, x);
}

}  // namespace varcontrib

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <boost/math/quadrature/gauss.hpp>

#include "varcontrib/linalg.hpp"

namespace oracle {

using varcontrib::Matrix;
using varcontrib::Vector;

// Brute-force P[X <= x, Y <= y] by composite 10-point Gauss-Legendre over
// the truncated rectangle [-9, x] x [-9, y].
inline double bivariate_cdf_brute_force(double x, double y, double rho) {
    using Rule = boost::math::quadrature::gauss<double, 10>;
    const auto nodes = [](double lo, double hi) {
        std::vector<std::pair<double, double>> pts;
        const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.1)));
        const double width = (hi - lo) / panels;
        const auto& abscissa = Rule::abscissa();
        const auto& weights = Rule::weights();
        for (int p = 0; p < panels; ++p) {
            const double mid = lo + (p + 0.5) * width;
            for (std::size_t j = 0; j < abscissa.size(); ++j) {
                const double w = weights[j] * 0.5 * width;
                if (abscissa[j] == 0.0) {
                    pts.emplace_back(mid, w);
                } else {
                    pts.emplace_back(mid - 0.5 * width * abscissa[j], w);
                    pts.emplace_back(mid + 0.5 * width * abscissa[j], w);
                }
            }
        }
        return pts;
    };
    const double lo = -9.0;
    if (x <= lo || y <= lo) return 0.0;
    const auto us = nodes(lo, x);
    const auto vs = nodes(lo, y);
    const double det = 1.0 - rho * rho;
    const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
    double sum = 0.0;
    for (const auto& [u, wu] : us) {
        double inner = 0.0;
        for (const auto& [v, wv] : vs) {
            inner += wv * std::exp(-(u * u - 2.0 * rho * u * v + v * v) / (2.0 * det));
        }
        sum += wu * inner;
    }
    return norm * sum;
}

// f_P(s) / f_Q(s) from the two Gaussian densities, through Eigen's LLT.
inline double density_quotient(const Vector& s, const Vector& mu, const Matrix& sigma) {
    const Eigen::LLT<Matrix> llt(sigma);
    const Vector centered = s - mu;
    const double log_p = -0.5 * s.dot(llt.solve(s));
    const double log_q = -0.5 * centered.dot(llt.solve(centered));
    return std::exp(log_p - log_q);
}

// Random full-rank correlation matrix of size k.
inline Matrix random_correlation(std::mt19937_64& rng, int k) {
    std::normal_distribution<double> normal;
    Matrix a(k, 3 * k);
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) a(i, j) = normal(rng);
    }
    Matrix cov = a * a.transpose();
    const Vector d = cov.diagonal().cwiseSqrt().cwiseInverse();
    Matrix corr = d.asDiagonal() * cov * d.asDiagonal();
    corr.diagonal().setOnes();
    corr = 0.7 * corr + 0.3 * Matrix::Identity(k, k);
    return 0.5 * (corr + corr.transpose());
}

}  // namespace oracle

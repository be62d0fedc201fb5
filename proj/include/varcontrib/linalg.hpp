#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "varcontrib/error.hpp"

namespace varcontrib {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Scenario-major storage: one row per scenario.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Lower-triangular L with L * L^T = correlation. The input must be square,
/// symmetric and carry a unit diagonal; a non-positive pivot raises
/// DecompositionError with the 0-based pivot index.
inline Matrix cholesky(const Matrix& correlation) {
    const Eigen::Index k = correlation.rows();
    if (correlation.cols() != k) throw ValidationError("cholesky: matrix is not square");
    for (Eigen::Index i = 0; i < k; ++i) {
        if (std::abs(correlation(i, i) - 1.0) > 1e-12) {
            throw ValidationError("cholesky: diagonal entry " + std::to_string(i) + " is not 1");
        }
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::abs(correlation(i, j) - correlation(j, i)) > 1e-12) {
                throw ValidationError("cholesky: matrix is not symmetric at (" + std::to_string(i) +
                                      "," + std::to_string(j) + ")");
            }
        }
    }

    Matrix lower = Matrix::Zero(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        double pivot = correlation(j, j);
        for (Eigen::Index m = 0; m < j; ++m) pivot -= lower(j, m) * lower(j, m);
        if (!(pivot > 0.0)) throw DecompositionError(static_cast<std::size_t>(j), pivot);
        const double diag = std::sqrt(pivot);
        lower(j, j) = diag;
        for (Eigen::Index i = j + 1; i < k; ++i) {
            double sum = correlation(i, j);
            for (Eigen::Index m = 0; m < j; ++m) sum -= lower(i, m) * lower(j, m);
            lower(i, j) = sum / diag;
        }
    }
    return lower;
}

/// Solves (L L^T) x = rhs given the lower Cholesky factor L.
inline Vector cholesky_solve(const Matrix& lower, const Vector& rhs) {
    const Eigen::Index k = lower.rows();
    Vector y(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        double sum = rhs(i);
        for (Eigen::Index m = 0; m < i; ++m) sum -= lower(i, m) * y(m);
        y(i) = sum / lower(i, i);
    }
    Vector x(k);
    for (Eigen::Index i = k - 1; i >= 0; --i) {
        double sum = y(i);
        for (Eigen::Index m = i + 1; m < k; ++m) sum -= lower(m, i) * x(m);
        x(i) = sum / lower(i, i);
    }
    return x;
}

}  // namespace varcontrib

#pragma once

#include <Eigen/Dense>

#include "itin/errors.hpp"
#include "itin/rng.hpp"

namespace itin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative singular-value cutoff used for rank decisions and pseudoinverses.
inline constexpr double kDefaultRankTolerance = 1e-10;

/// Result of fitting targets ~ inputs * theta + bias by least squares.
/// Points sit in matrix rows, so theta right-multiplies a row vector.
struct AffineFit {
    Matrix theta;                    // D_in x D_out
    Vector bias;                     // D_out
    double residual_rms = 0.0;       // sqrt(SSE / (M * D_out)) on the training data
    Eigen::Index effective_rank = 0; // singular values above the rank cutoff

    /// Apply to one point (column vector holding a row-convention point).
    Vector apply(const Vector& x) const { return theta.transpose() * x + bias; }

    /// Apply to every row of a sample matrix.
    Matrix apply_rows(const Matrix& xs) const {
        return (xs * theta).rowwise() + bias.transpose();
    }
};

/// Minimizes sum_i ||inputs_i * theta + bias - targets_i||^2 + ridge * ||theta||_F^2.
///
/// Solved via SVD of the centered input matrix rather than normal equations,
/// so rank-deficient sample sets (collapsed variance) degrade gracefully: with
/// ridge = 0 the minimum-norm solution theta = (X - Xbar)^+ (T - Tbar) is
/// returned. The bias is never regularized; it is always the target mean minus
/// the input mean mapped through theta.
inline AffineFit affine_least_squares(const Matrix& inputs, const Matrix& targets,
                                      double ridge,
                                      double rank_tolerance = kDefaultRankTolerance) {
    const Eigen::Index m = inputs.rows();
    if (m == 0) throw EmptyData("affine_least_squares: no samples");
    if (targets.rows() != m)
        throw InvalidInput("affine_least_squares: inputs/targets row mismatch");
    if (inputs.cols() < 1 || targets.cols() < 1)
        throw InvalidInput("affine_least_squares: zero-dimensional data");
    if (!inputs.allFinite() || !targets.allFinite())
        throw InvalidInput("affine_least_squares: non-finite entries");
    if (!(ridge >= 0.0) || !std::isfinite(ridge))
        throw InvalidInput("affine_least_squares: ridge must be finite and >= 0");

    const Eigen::RowVectorXd x_mean = inputs.colwise().mean();
    const Eigen::RowVectorXd t_mean = targets.colwise().mean();
    const Matrix xc = inputs.rowwise() - x_mean;
    const Matrix tc = targets.rowwise() - t_mean;

    Eigen::BDCSVD<Matrix> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double s_max = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff = rank_tolerance * s_max;

    Vector gain = Vector::Zero(sv.size());
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff && sv(i) > 0.0) ++rank;
        if (ridge > 0.0) {
            gain(i) = sv(i) / (sv(i) * sv(i) + ridge);
        } else if (sv(i) > cutoff && sv(i) > 0.0) {
            gain(i) = 1.0 / sv(i);
        }
    }

    AffineFit fit;
    fit.theta = svd.matrixV() * gain.asDiagonal() * (svd.matrixU().transpose() * tc);
    fit.bias = (t_mean - x_mean * fit.theta).transpose();
    fit.effective_rank = rank;

    const Matrix residual = fit.apply_rows(inputs) - targets;
    fit.residual_rms = std::sqrt(residual.squaredNorm() /
                                 static_cast<double>(m * targets.cols()));
    return fit;
}

/// Moore-Penrose pseudoinverse via SVD. Singular values at or below
/// rank_tolerance * sigma_max are treated as zero, so the zero matrix maps to
/// the (transposed-shape) zero matrix.
inline Matrix pseudo_inverse(const Matrix& m, double rank_tolerance = kDefaultRankTolerance) {
    if (!m.allFinite()) throw InvalidInput("pseudo_inverse: non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double s_max = sv.size() > 0 ? sv(0) : 0.0;
    const double cutoff = rank_tolerance * s_max;
    Vector inv = Vector::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Induced 2-norm (largest singular value).
inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

/// Smallest singular value.
inline double min_singular_value(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    return sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
}

/// Condition number sigma_max / sigma_min; +inf for rank-deficient input.
inline double condition_number(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0)
        return std::numeric_limits<double>::infinity();
    return sv(0) / (sv(sv.size() - 1));
}

}  // namespace itin

#pragma once

#include <cmath>
#include <random>
#include <utility>

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "bfpca/errors.hpp"
#include "bfpca/rng.hpp"

namespace bfpca {

/// Max-entry deviation of MᵀM from the identity.
inline double orthonormality_deviation(const Eigen::MatrixXd& m) {
    const Eigen::Index k = m.cols();
    return (m.transpose() * m - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
}

/// A Q x K matrix with orthonormal columns.  The constraint is checked at
/// construction, so every instance in circulation satisfies it.
class StiefelPoint {
public:
    static constexpr double default_tolerance = 1e-10;

    /// Wraps the matrix iff ‖mᵀm − I‖_max <= tol.
    static StiefelPoint from_matrix(Eigen::MatrixXd m, double tol = default_tolerance) {
        if (m.rows() < m.cols())
            throw shape_error("StiefelPoint: need at least as many rows as columns");
        const double deviation = orthonormality_deviation(m);
        if (!(deviation <= tol))
            throw constraint_violation_error("StiefelPoint: columns are not orthonormal",
                                             deviation);
        return StiefelPoint(std::move(m));
    }

    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    Eigen::Index ambient_dim() const noexcept { return matrix_.rows(); }   // Q
    Eigen::Index num_columns() const noexcept { return matrix_.cols(); }   // K
    Eigen::VectorXd column(Eigen::Index k) const { return matrix_.col(k); }

private:
    explicit StiefelPoint(Eigen::MatrixXd m) : matrix_(std::move(m)) {}
    Eigen::MatrixXd matrix_;
};

/// Uniform (rotation-invariant) draw: thin QR of a standard Gaussian matrix
/// with the R-diagonal signs fixed positive.  Without the sign fix the QR
/// map does not give the uniform law.
inline StiefelPoint sample_uniform(int ambient_dim, int num_columns, std::mt19937_64& rng) {
    if (num_columns > ambient_dim)
        throw invalid_config_error("sample_uniform: more columns than rows");
    if (num_columns < 1 || ambient_dim < 1)
        throw invalid_config_error("sample_uniform: dimensions must be positive");
    for (;;) {
        const Eigen::MatrixXd g = gaussian_matrix(ambient_dim, num_columns, rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        Eigen::MatrixXd thin_q = qr.householderQ() *
                                 Eigen::MatrixXd::Identity(ambient_dim, num_columns);
        const Eigen::MatrixXd r =
            qr.matrixQR().topLeftCorner(num_columns, num_columns).triangularView<Eigen::Upper>();
        bool degenerate = false;
        for (int k = 0; k < num_columns; ++k) {
            if (std::abs(r(k, k)) < 1e-13) {
                degenerate = true;  // probability-zero event; draw again
                break;
            }
            if (r(k, k) < 0.0) thin_q.col(k) = -thin_q.col(k);
        }
        if (!degenerate) return StiefelPoint::from_matrix(std::move(thin_q));
    }
}

/// Polar retraction m (mᵀm)^{-1/2}: the orthonormal frame closest to m in
/// Frobenius norm, computed from the thin SVD as U Vᵀ.
inline StiefelPoint retract(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    if (sigma.size() == 0 || sigma[sigma.size() - 1] < 1e-13 * std::max(1.0, sigma[0]))
        throw numerical_degeneracy_error("retract: input matrix is rank deficient");
    return StiefelPoint::from_matrix(svd.matrixU() * svd.matrixV().transpose());
}

/// Volume of the manifold of Q x K orthonormal frames, held in log space so
/// extreme dimensions neither overflow nor underflow.
struct ManifoldVolume {
    double log_value = 0.0;
    bool representable = true;  // exp(log_value) neither overflows nor underflows

    double value() const noexcept { return std::exp(log_value); }
};

/// vol = prod_{j=0}^{K-1} 2 pi^{(Q-j)/2} / Gamma((Q-j)/2); for K = 1 this is
/// the surface area of the unit (Q-1)-sphere.
inline ManifoldVolume stiefel_volume(int ambient_dim, int num_columns) {
    if (num_columns < 1 || num_columns > ambient_dim)
        throw invalid_config_error("stiefel_volume: need 1 <= K <= Q");
    double log_vol = 0.0;
    for (int j = 0; j < num_columns; ++j) {
        const double half_dim = 0.5 * (ambient_dim - j);
        log_vol += std::log(2.0) + half_dim * std::log(M_PI) - std::lgamma(half_dim);
    }
    ManifoldVolume vol;
    vol.log_value = log_vol;
    vol.representable = log_vol > -708.0 && log_vol < 708.0;
    return vol;
}

inline double stiefel_log_volume(int ambient_dim, int num_columns) {
    return stiefel_volume(ambient_dim, num_columns).log_value;
}

}  // namespace bfpca

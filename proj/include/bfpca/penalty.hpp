#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "bfpca/basis.hpp"
#include "bfpca/errors.hpp"

namespace bfpca {

/// Roughness penalty matrix with entries ∫₀¹ B_p''(t) B_q''(t) dt, its
/// spectrum and numerical rank.  Positive semi-definite; coefficient vectors
/// of constant and linear functions lie in its null space, so the rank is
/// generally below the basis dimension.
struct PenaltyMatrix {
    Eigen::MatrixXd matrix;       // Q x Q, symmetric PSD
    Eigen::VectorXd eigenvalues;  // descending, clamped to >= 0
    int rank = 0;
    double rank_tolerance = 1e-10;

    int size() const noexcept { return static_cast<int>(matrix.rows()); }
    double eigenvalue_max() const noexcept {
        return eigenvalues.size() > 0 ? eigenvalues[0] : 0.0;
    }
    double eigenvalue_min() const noexcept {
        return eigenvalues.size() > 0 ? eigenvalues[eigenvalues.size() - 1] : 0.0;
    }

    /// Wrap an existing symmetric PSD matrix (zeroth step for tests and for
    /// the degenerate degree < 2 case).
    static PenaltyMatrix from_matrix(Eigen::MatrixXd m, double rank_tolerance = 1e-10);
};

/// Count of eigenvalues above tol * lambda_max; 0 for the zero matrix.
inline int numerical_rank(const PenaltyMatrix& penalty, double tol) {
    if (!(tol > 0.0)) throw invalid_config_error("numerical_rank: tolerance must be positive");
    const double lambda_max = penalty.eigenvalue_max();
    if (lambda_max <= 0.0) return 0;
    const double cutoff = tol * lambda_max;
    int rank = 0;
    for (Eigen::Index i = 0; i < penalty.eigenvalues.size(); ++i)
        if (penalty.eigenvalues[i] > cutoff) ++rank;
    return rank;
}

inline PenaltyMatrix PenaltyMatrix::from_matrix(Eigen::MatrixXd m, double rank_tolerance) {
    if (m.rows() != m.cols()) throw shape_error("PenaltyMatrix: matrix must be square");
    const double asymmetry = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asymmetry > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw invalid_config_error("PenaltyMatrix: matrix is not symmetric");

    PenaltyMatrix penalty;
    penalty.matrix = 0.5 * (m + m.transpose());
    penalty.rank_tolerance = rank_tolerance;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalty.matrix, Eigen::EigenvaluesOnly);
    Eigen::VectorXd values = eig.eigenvalues().reverse();  // descending
    const double lambda_max = values.size() > 0 ? std::max(values[0], 0.0) : 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] < -1e-10 * std::max(lambda_max, 1.0))
            throw numerical_degeneracy_error(
                "PenaltyMatrix: matrix has a significantly negative eigenvalue");
        values[i] = std::max(values[i], 0.0);  // clamp round-off negatives
    }
    penalty.eigenvalues = std::move(values);
    penalty.rank = numerical_rank(penalty, rank_tolerance);
    return penalty;
}

/// Assemble the second-derivative penalty of an orthonormal basis by
/// quadrature: P = (B'')^T W (B'').  Degree < 2 gives the zero matrix with
/// rank 0.
inline PenaltyMatrix build_penalty(const OrthonormalBasis& basis, const QuadratureRule& quad,
                                   double rank_tolerance = 1e-10) {
    if (basis.degree() < 2)
        return PenaltyMatrix::from_matrix(Eigen::MatrixXd::Zero(basis.size(), basis.size()),
                                          rank_tolerance);
    const Eigen::MatrixXd curvature = basis.second_derivatives(quad.nodes);
    Eigen::MatrixXd p = curvature.transpose() * quad.weights.asDiagonal() * curvature;
    p = 0.5 * (p + p.transpose()).eval();
    return PenaltyMatrix::from_matrix(std::move(p), rank_tolerance);
}

/// Quadratic form ψᵀ P ψ, the integrated squared curvature of the function
/// with coefficient vector ψ.  Non-negative up to round-off (clamped).
inline double quadratic_form(const PenaltyMatrix& penalty, const Eigen::VectorXd& coeffs) {
    if (coeffs.size() != penalty.matrix.rows())
        throw shape_error("quadratic_form: coefficient vector has length " +
                          std::to_string(coeffs.size()) + ", expected " +
                          std::to_string(penalty.matrix.rows()));
    const double value = coeffs.dot(penalty.matrix * coeffs);
    return std::max(value, 0.0);
}

}  // namespace bfpca

#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "bfpca/bspline.hpp"
#include "bfpca/errors.hpp"
#include "bfpca/quadrature.hpp"

namespace bfpca {

/// Numerical cutoffs for basis construction, overridable in one place.
struct BasisTolerances {
    double gram_identity = 1e-8;          // max |G - I| allowed after orthonormalization
    double min_reciprocal_condition = 1e-12;  // Gram matrices worse than this are degenerate
};

/// Quadrature that integrates products of basis functions (and of their
/// second derivatives) exactly: one subinterval per knot span, degree + 2
/// points each.  Interior knots are equally spaced, so spans and equal
/// subintervals coincide.
inline QuadratureRule default_quadrature(const RawBasis& basis) {
    return gauss_legendre_rule(basis.degree + 2, basis.num_spans());
}

/// Symmetric inverse square root M^{-1/2} of a symmetric positive-definite
/// matrix, via eigendecomposition.
inline Eigen::MatrixXd symmetric_inverse_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success)
        throw numerical_degeneracy_error("symmetric_inverse_sqrt: eigendecomposition failed");
    const Eigen::VectorXd& values = eig.eigenvalues();
    if (values.minCoeff() <= 0.0)
        throw numerical_degeneracy_error("symmetric_inverse_sqrt: matrix is not positive-definite");
    return eig.eigenvectors() * values.cwiseSqrt().cwiseInverse().asDiagonal() *
           eig.eigenvectors().transpose();
}

/// Gram matrix G_pq = ∫₀¹ B_p(t) B_q(t) dt of the raw basis, assembled by
/// quadrature.  The rule must be exact for the pairwise products.
inline Eigen::MatrixXd gram_matrix(const RawBasis& basis, const QuadratureRule& quad) {
    const Eigen::MatrixXd values = evaluate_raw(basis, quad.nodes, 0);
    Eigen::MatrixXd gram = values.transpose() * quad.weights.asDiagonal() * values;
    gram = 0.5 * (gram + gram.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() <= 0.0)
        throw numerical_degeneracy_error("gram_matrix: basis is numerically degenerate");
    return gram;
}

/// A spline system with an identity Gram matrix: row vector of functions
/// B(t) = B_raw(t) * transform.
class OrthonormalBasis {
public:
    OrthonormalBasis(RawBasis raw, Eigen::MatrixXd transform)
        : raw_(std::move(raw)), transform_(std::move(transform)) {
        if (transform_.rows() != raw_.size || transform_.cols() != raw_.size)
            throw shape_error("OrthonormalBasis: transform must be Q x Q");
        if (!transform_.allFinite())
            throw numerical_degeneracy_error("OrthonormalBasis: transform has non-finite entries");
    }

    int size() const noexcept { return raw_.size; }
    int degree() const noexcept { return raw_.degree; }
    const RawBasis& raw() const noexcept { return raw_; }
    const Eigen::MatrixXd& transform() const noexcept { return transform_; }

    /// M x Q matrix with row m = B(t_m).  Points must lie in [0,1].
    Eigen::MatrixXd evaluate(const Eigen::VectorXd& points) const {
        return evaluate_raw(raw_, points, 0) * transform_;
    }

    /// M x Q matrix of second derivatives B''(t_m), from the analytic
    /// B-spline derivative recursion.  All zero when degree < 2.
    Eigen::MatrixXd second_derivatives(const Eigen::VectorXd& points) const {
        if (raw_.degree < 2) {
            for (Eigen::Index m = 0; m < points.size(); ++m)
                if (points[m] < 0.0 || points[m] > 1.0)
                    throw domain_error("second_derivatives: point outside [0,1]");
            return Eigen::MatrixXd::Zero(points.size(), raw_.size);
        }
        return evaluate_raw(raw_, points, 2) * transform_;
    }

private:
    RawBasis raw_;
    Eigen::MatrixXd transform_;
};

/// Gram matrix of an orthonormal basis under the given rule; identity up to
/// quadrature and round-off error.
inline Eigen::MatrixXd gram_matrix(const OrthonormalBasis& basis, const QuadratureRule& quad) {
    const Eigen::MatrixXd values = basis.evaluate(quad.nodes);
    Eigen::MatrixXd gram = values.transpose() * quad.weights.asDiagonal() * values;
    return 0.5 * (gram + gram.transpose()).eval();
}

inline double max_gram_deviation(const OrthonormalBasis& basis, const QuadratureRule& quad) {
    const Eigen::MatrixXd gram = gram_matrix(basis, quad);
    return (gram - Eigen::MatrixXd::Identity(basis.size(), basis.size())).cwiseAbs().maxCoeff();
}

/// Orthonormalize a raw basis with the symmetric inverse square root of its
/// Gram matrix: transform T = G^{-1/2}.  Symmetric, basis-order invariant.
inline OrthonormalBasis orthonormalize(const RawBasis& basis, const QuadratureRule& quad,
                                       const BasisTolerances& tol = {}) {
    const Eigen::MatrixXd gram = gram_matrix(basis, quad);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
        throw numerical_degeneracy_error("orthonormalize: eigendecomposition failed");
    const double lambda_min = eig.eigenvalues().minCoeff();
    const double lambda_max = eig.eigenvalues().maxCoeff();
    if (lambda_min <= 0.0 || lambda_min < tol.min_reciprocal_condition * lambda_max)
        throw numerical_degeneracy_error(
            "orthonormalize: Gram matrix condition number exceeds cutoff");

    const Eigen::MatrixXd transform = eig.eigenvectors() *
                                      eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                                      eig.eigenvectors().transpose();
    OrthonormalBasis result(basis, transform);
    const double deviation = max_gram_deviation(result, quad);
    if (deviation > tol.gram_identity)
        throw numerical_degeneracy_error(
            "orthonormalize: Gram deviation " + std::to_string(deviation) +
            " exceeds tolerance");
    return result;
}

/// Convenience: orthonormalized B-spline basis with its exact quadrature.
inline OrthonormalBasis make_orthonormal_bspline_basis(int degree, int size,
                                                       const BasisTolerances& tol = {}) {
    const RawBasis raw = build_bspline_basis(degree, size);
    return orthonormalize(raw, default_quadrature(raw), tol);
}

}  // namespace bfpca

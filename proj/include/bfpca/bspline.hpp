#pragma once

#include <vector>

#include <Eigen/Core>

#include "bfpca/errors.hpp"

namespace bfpca {

/// Clamped B-spline basis on [0,1], before orthonormalization.
///
/// The knot vector has boundary knots of multiplicity degree+1 and
/// size - degree - 1 equally spaced interior knots, so that
/// size = (#interior knots) + degree + 1.
struct RawBasis {
    int degree = 0;
    std::vector<double> knots;
    int size = 0;

    int num_spans() const noexcept { return size - degree; }
};

/// B-spline basis of the given degree with `size` functions and equally
/// spaced interior knots on [0,1].
inline RawBasis build_bspline_basis(int degree, int size) {
    if (degree < 0) throw invalid_config_error("build_bspline_basis: degree must be >= 0");
    if (size < degree + 1)
        throw invalid_config_error(
            "build_bspline_basis: size " + std::to_string(size) +
            " too small for degree " + std::to_string(degree) +
            " (need size >= degree + 1)");

    const int interior = size - degree - 1;
    RawBasis basis;
    basis.degree = degree;
    basis.size = size;
    basis.knots.reserve(static_cast<std::size_t>(size + degree + 1));
    for (int i = 0; i <= degree; ++i) basis.knots.push_back(0.0);
    for (int i = 1; i <= interior; ++i)
        basis.knots.push_back(static_cast<double>(i) / (interior + 1));
    for (int i = 0; i <= degree; ++i) basis.knots.push_back(1.0);
    return basis;
}

namespace detail {

/// Index i of the half-open knot span [t_i, t_{i+1}) containing x, with the
/// convention that x = 1 belongs to the last nonempty span.
inline int find_span(const RawBasis& basis, double x) {
    const int hi = basis.size - 1;
    if (x >= 1.0) return hi;
    int lo = basis.degree;
    int high = hi;
    while (lo < high) {
        const int mid = (lo + high + 1) / 2;
        if (basis.knots[static_cast<std::size_t>(mid)] <= x)
            lo = mid;
        else
            high = mid - 1;
    }
    return lo;
}

/// Values and derivatives of the degree+1 basis functions that are nonzero
/// on the span of x.  ders[d][j] holds the d-th derivative of function
/// span - degree + j; the Cox–de Boor triangle and the derivative triangle
/// follow the standard knot-difference algorithm.
inline void ders_basis_funs(const RawBasis& basis, int span, double x, int max_deriv,
                            std::vector<std::vector<double>>& ders) {
    const int p = basis.degree;
    const auto& knots = basis.knots;
    const int n = std::min(max_deriv, p);

    std::vector<std::vector<double>> ndu(p + 1, std::vector<double>(p + 1, 0.0));
    std::vector<double> left(p + 1, 0.0), right(p + 1, 0.0);

    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots[static_cast<std::size_t>(span + 1 - j)];
        right[j] = knots[static_cast<std::size_t>(span + j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    ders.assign(static_cast<std::size_t>(max_deriv + 1), std::vector<double>(p + 1, 0.0));
    for (int j = 0; j <= p; ++j) ders[0][j] = ndu[j][p];

    std::vector<std::vector<double>> a(2, std::vector<double>(p + 1, 0.0));
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a[0].assign(static_cast<std::size_t>(p + 1), 0.0);
        a[1].assign(static_cast<std::size_t>(p + 1), 0.0);
        a[0][0] = 1.0;
        for (int k = 1; k <= n; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[static_cast<std::size_t>(k)][r] = d;
            std::swap(s1, s2);
        }
    }

    double factor = p;
    for (int k = 1; k <= n; ++k) {
        for (int j = 0; j <= p; ++j) ders[static_cast<std::size_t>(k)][j] *= factor;
        factor *= (p - k);
    }
    // Derivatives of order above the degree are identically zero and were
    // zero-initialized above.
}

}  // namespace detail

/// M x size matrix of order-`deriv` derivatives of the raw basis at
/// `points` (deriv = 0 gives values).  Points must lie in [0,1].
inline Eigen::MatrixXd evaluate_raw(const RawBasis& basis, const Eigen::VectorXd& points,
                                    int deriv = 0) {
    if (deriv < 0) throw invalid_config_error("evaluate_raw: derivative order must be >= 0");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(points.size(), basis.size);
    std::vector<std::vector<double>> ders;
    for (Eigen::Index m = 0; m < points.size(); ++m) {
        const double x = points[m];
        if (x < 0.0 || x > 1.0)
            throw domain_error("evaluate_raw: point " + std::to_string(x) + " outside [0,1]");
        const int span = detail::find_span(basis, x);
        detail::ders_basis_funs(basis, span, x, deriv, ders);
        for (int j = 0; j <= basis.degree; ++j)
            out(m, span - basis.degree + j) = ders[static_cast<std::size_t>(deriv)][j];
    }
    return out;
}

}  // namespace bfpca

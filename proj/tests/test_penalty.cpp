#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "bfpca/basis.hpp"
#include "bfpca/penalty.hpp"

#include "oracles.hpp"

using namespace bfpca;

namespace {

PenaltyMatrix cubic_penalty(int q) {
    const OrthonormalBasis basis = make_orthonormal_bspline_basis(3, q);
    return build_penalty(basis, default_quadrature(basis.raw()));
}

Eigen::VectorXd project_function(const OrthonormalBasis& basis, double (*f)(double)) {
    const QuadratureRule quad = default_quadrature(basis.raw());
    const Eigen::MatrixXd values = basis.evaluate(quad.nodes);
    Eigen::VectorXd coeffs(basis.size());
    for (int p = 0; p < basis.size(); ++p) {
        double sum = 0.0;
        for (Eigen::Index m = 0; m < quad.size(); ++m)
            sum += quad.weights[m] * values(m, p) * f(quad.nodes[m]);
        coeffs[p] = sum;
    }
    return coeffs;
}

}  // namespace

TEST_CASE("degenerate penalties", "[penalty]") {
    SECTION("degree-1 basis has zero penalty and rank 0") {
        const OrthonormalBasis basis = make_orthonormal_bspline_basis(1, 6);
        const PenaltyMatrix penalty = build_penalty(basis, default_quadrature(basis.raw()));
        CHECK(penalty.matrix.cwiseAbs().maxCoeff() == 0.0);
        CHECK(penalty.rank == 0);
    }
    SECTION("numerical rank of zero and identity matrices") {
        const PenaltyMatrix zero = PenaltyMatrix::from_matrix(Eigen::MatrixXd::Zero(4, 4));
        CHECK(numerical_rank(zero, 1e-10) == 0);
        const PenaltyMatrix identity =
            PenaltyMatrix::from_matrix(Eigen::MatrixXd::Identity(5, 5));
        CHECK(numerical_rank(identity, 1e-10) == 5);
        CHECK_THROWS_AS(numerical_rank(identity, 0.0), invalid_config_error);
    }
}

TEST_CASE("cubic penalty structure", "[penalty]") {
    const PenaltyMatrix penalty = cubic_penalty(10);

    SECTION("symmetric positive semi-definite with clamped spectrum") {
        CHECK((penalty.matrix - penalty.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(penalty.eigenvalue_min() >= 0.0);
        for (Eigen::Index i = 1; i < penalty.eigenvalues.size(); ++i)
            CHECK(penalty.eigenvalues[i] <= penalty.eigenvalues[i - 1]);
    }
    SECTION("rank is Q - 2: constants and linears are unpenalized") {
        CHECK(penalty.rank == 8);
        const OrthonormalBasis basis = make_orthonormal_bspline_basis(3, 10);
        const Eigen::VectorXd constant =
            project_function(basis, [](double) { return 1.0; });
        const Eigen::VectorXd linear = project_function(basis, [](double t) { return t; });
        CHECK((penalty.matrix * constant).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((penalty.matrix * linear).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(quadratic_form(penalty, constant.normalized()) < 1e-10);
        CHECK(quadratic_form(penalty, linear.normalized()) < 1e-10);
    }
    SECTION("rank matches an independent Jacobi eigensolver") {
        for (int q : {6, 9, 12}) {
            const PenaltyMatrix pm = cubic_penalty(q);
            const std::vector<double> spectrum = oracle::jacobi_eigenvalues(pm.matrix);
            int oracle_rank = 0;
            for (double v : spectrum)
                if (v > 1e-10 * spectrum.front()) ++oracle_rank;
            CHECK(pm.rank == oracle_rank);
            CHECK(pm.rank == q - 2);
        }
    }
}

TEST_CASE("quadratic form against direct quadrature", "[penalty]") {
    const OrthonormalBasis basis = make_orthonormal_bspline_basis(3, 9);
    const QuadratureRule quad = default_quadrature(basis.raw());
    const PenaltyMatrix penalty = build_penalty(basis, quad);
    const Eigen::MatrixXd curvature = basis.second_derivatives(quad.nodes);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd coeffs(9);
        for (int p = 0; p < 9; ++p) coeffs[p] = normal(rng);
        const double direct =
            ((curvature * coeffs).array().square() * quad.weights.array()).sum();
        const double form = quadratic_form(penalty, coeffs);
        CHECK(std::abs(form - direct) <= 1e-8 * std::max(1.0, std::abs(direct)));
    }
    CHECK_THROWS_AS(quadratic_form(penalty, Eigen::VectorXd::Ones(4)), shape_error);
}

TEST_CASE("Rayleigh quotient bounds", "[penalty]") {
    const PenaltyMatrix penalty = cubic_penalty(8);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal;
    const double slack = 1e-9 * penalty.eigenvalue_max();
    for (int rep = 0; rep < 10000; ++rep) {
        Eigen::VectorXd unit(8);
        for (int p = 0; p < 8; ++p) unit[p] = normal(rng);
        unit.normalize();
        const double value = quadratic_form(penalty, unit);
        CHECK(value >= penalty.eigenvalue_min() - slack);
        CHECK(value <= penalty.eigenvalue_max() + slack);
    }

    SECTION("scaling the matrix scales its spectrum") {
        const double scale = 1.0 / (2.0 * 0.7);
        const PenaltyMatrix scaled = PenaltyMatrix::from_matrix(scale * penalty.matrix);
        for (Eigen::Index i = 0; i < penalty.eigenvalues.size(); ++i)
            CHECK(scaled.eigenvalues[i] ==
                  Approx(scale * penalty.eigenvalues[i]).margin(1e-10));
    }
}

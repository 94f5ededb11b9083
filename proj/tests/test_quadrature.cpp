#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "bfpca/quadrature.hpp"

using bfpca::gauss_legendre_rule;
using bfpca::QuadratureRule;

TEST_CASE("order-1 single-interval rule is the midpoint rule", "[quadrature]") {
    const QuadratureRule rule = gauss_legendre_rule(1, 1);
    REQUIRE(rule.size() == 1);
    CHECK(rule.nodes[0] == Approx(0.5).margin(1e-15));
    CHECK(rule.weights[0] == Approx(1.0).margin(1e-15));
}

TEST_CASE("polynomial exactness on [0,1]", "[quadrature]") {
    SECTION("t^2 with a 2-point rule, exactly 1/3") {
        const QuadratureRule rule = gauss_legendre_rule(2, 1);
        const double integral = rule.integrate([](double t) { return t * t; });
        CHECK(integral == Approx(1.0 / 3.0).epsilon(1e-15));
    }
    SECTION("t^6 with a 4-point rule, 1/7 within 1e-14") {
        const QuadratureRule rule = gauss_legendre_rule(4, 1);
        const double integral = rule.integrate([](double t) { return std::pow(t, 6); });
        CHECK(std::abs(integral - 1.0 / 7.0) < 1e-14);
    }
    SECTION("random degree-7 polynomial with a 4-point rule") {
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> unif(-2.0, 2.0);
        for (int rep = 0; rep < 20; ++rep) {
            double coeff[8];
            for (double& c : coeff) c = unif(rng);
            const QuadratureRule rule = gauss_legendre_rule(4, 3);
            const double integral = rule.integrate([&](double t) {
                double value = 0.0, power = 1.0;
                for (double c : coeff) {
                    value += c * power;
                    power *= t;
                }
                return value;
            });
            double exact = 0.0;
            for (int d = 0; d < 8; ++d) exact += coeff[d] / (d + 1);
            CHECK(integral == Approx(exact).margin(1e-13));
        }
    }
}

TEST_CASE("composite rules keep the [0,1] measure", "[quadrature]") {
    for (const auto& [order, subs] : {std::pair{3, 7}, std::pair{5, 2}, std::pair{1, 10}}) {
        const QuadratureRule rule = gauss_legendre_rule(order, subs);
        CHECK(std::abs(rule.weights.sum() - 1.0) < 1e-12);
        CHECK(rule.nodes.minCoeff() > 0.0);
        CHECK(rule.nodes.maxCoeff() < 1.0);
        for (Eigen::Index i = 1; i < rule.size(); ++i) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
    }
}

TEST_CASE("invalid quadrature configurations are rejected", "[quadrature]") {
    CHECK_THROWS_AS(gauss_legendre_rule(0, 1), bfpca::invalid_config_error);
    CHECK_THROWS_AS(gauss_legendre_rule(2, 0), bfpca::invalid_config_error);

    Eigen::VectorXd nodes(2), weights(2);
    nodes << 0.2, 0.1;  // not increasing
    weights << 0.5, 0.5;
    CHECK_THROWS_AS(QuadratureRule(nodes, weights), bfpca::invalid_config_error);
    nodes << 0.1, 0.2;
    weights << 0.5, 0.6;  // does not sum to 1
    CHECK_THROWS_AS(QuadratureRule(nodes, weights), bfpca::invalid_config_error);
}

#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Core>

#include "bfpca/errors.hpp"

namespace bfpca {

/// Nodes and weights for integration over [0,1].  Weights are positive and
/// sum to one (the measure of the unit interval); nodes are strictly
/// increasing and lie inside [0,1].
struct QuadratureRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;

    QuadratureRule(Eigen::VectorXd nodes_in, Eigen::VectorXd weights_in)
        : nodes(std::move(nodes_in)), weights(std::move(weights_in)) {
        validate();
    }

    Eigen::Index size() const noexcept { return nodes.size(); }

    /// ∫₀¹ f(t) dt with f sampled at the nodes.
    template <class F>
    double integrate(F&& f) const {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < nodes.size(); ++i) sum += weights[i] * f(nodes[i]);
        return sum;
    }

private:
    void validate() const {
        if (nodes.size() != weights.size() || nodes.size() == 0)
            throw invalid_config_error("quadrature rule needs matching, non-empty nodes and weights");
        double sum = 0.0;
        for (Eigen::Index i = 0; i < nodes.size(); ++i) {
            if (!(weights[i] > 0.0))
                throw invalid_config_error("quadrature weights must be positive");
            if (nodes[i] < 0.0 || nodes[i] > 1.0)
                throw domain_error("quadrature nodes must lie in [0,1]");
            if (i > 0 && !(nodes[i] > nodes[i - 1]))
                throw invalid_config_error("quadrature nodes must be strictly increasing");
            sum += weights[i];
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw invalid_config_error("quadrature weights must sum to 1");
    }
};

namespace detail {

/// Legendre P_n(x) and P_n'(x) via the three-term recurrence, |x| < 1.
inline std::pair<double, double> legendre_with_derivative(int n, double x) {
    double prev = 1.0;
    double curr = x;
    for (int k = 2; k <= n; ++k) {
        const double next = ((2.0 * k - 1.0) * x * curr - (k - 1.0) * prev) / k;
        prev = curr;
        curr = next;
    }
    const double deriv = n * (x * curr - prev) / (x * x - 1.0);
    return {curr, deriv};
}

}  // namespace detail

/// Composite Gauss–Legendre rule on [0,1]: `order` points on each of
/// `num_subintervals` equal pieces.  Exact for polynomials of degree
/// <= 2*order - 1 on each piece.
inline QuadratureRule gauss_legendre_rule(int order, int num_subintervals) {
    if (order < 1) throw invalid_config_error("gauss_legendre_rule: order must be >= 1");
    if (num_subintervals < 1)
        throw invalid_config_error("gauss_legendre_rule: need at least one subinterval");

    // Roots of P_n on (-1,1), by Newton from the Chebyshev-like initial guess.
    Eigen::VectorXd ref_nodes(order), ref_weights(order);
    for (int i = 0; i < order; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
        if (order == 1) x = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            const auto [p, dp] = detail::legendre_with_derivative(order, x);
            const double step = p / dp;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        const auto [p, dp] = detail::legendre_with_derivative(order, x);
        (void)p;
        ref_nodes[order - 1 - i] = x;  // initial guesses descend; store ascending
        ref_weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }

    const int total = order * num_subintervals;
    Eigen::VectorXd nodes(total), weights(total);
    const double width = 1.0 / num_subintervals;
    for (int s = 0; s < num_subintervals; ++s) {
        const double left = s * width;
        for (int i = 0; i < order; ++i) {
            nodes[s * order + i] = left + 0.5 * width * (ref_nodes[i] + 1.0);
            weights[s * order + i] = 0.5 * width * ref_weights[i];
        }
    }
    return QuadratureRule(std::move(nodes), std::move(weights));
}

}  // namespace bfpca

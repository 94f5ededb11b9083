#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Core>

#include "bfpca/errors.hpp"
#include "bfpca/penalty.hpp"
#include "bfpca/stiefel.hpp"

namespace bfpca {

/// Gamma(shape, rate) hyperprior placed on each smoothing precision.
struct SmoothingHyperprior {
    double shape;
    double rate;

    SmoothingHyperprior(double shape_in, double rate_in) : shape(shape_in), rate(rate_in) {
        if (!(shape > 0.0) || !std::isfinite(shape) || !(rate > 0.0) || !std::isfinite(rate))
            throw domain_error("SmoothingHyperprior: shape and rate must be positive and finite");
    }
};

/// Shape/rate pair of a Gamma distribution (a conditional posterior here).
struct GammaParams {
    double shape;
    double rate;

    double mean() const noexcept { return shape / rate; }
};

/// One positive smoothing precision per component.  Larger values force the
/// corresponding eigenfunction to be smoother.
struct SmoothingParams {
    Eigen::VectorXd values;

    explicit SmoothingParams(Eigen::VectorXd v) : values(std::move(v)) {
        for (Eigen::Index k = 0; k < values.size(); ++k)
            if (!(values[k] > 0.0) || !std::isfinite(values[k]))
                throw domain_error("SmoothingParams: entries must be positive and finite");
    }

    Eigen::Index size() const noexcept { return values.size(); }
    double operator[](Eigen::Index k) const { return values[k]; }
};

/// log of the Gamma(shape, rate) density at x > 0, fully normalized.
inline double log_gamma_density(double x, double shape, double rate) {
    if (!(x > 0.0)) throw domain_error("log_gamma_density: argument must be positive");
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

namespace detail {

inline void check_prior_shapes(const StiefelPoint& coeffs, const PenaltyMatrix& penalty,
                               Eigen::Index num_smoothing) {
    if (coeffs.ambient_dim() != penalty.size())
        throw shape_error("prior: coefficient rows do not match penalty dimension");
    if (num_smoothing != coeffs.num_columns())
        throw shape_error("prior: one smoothing parameter per component required");
}

}  // namespace detail

/// Log conditional prior of the coefficient matrix given the smoothing
/// precisions, up to an additive constant:
///   sum_k [ (R/2) log h_k - h_k psi_k' P psi_k / 2 ].
/// The manifold indicator is satisfied by construction of StiefelPoint.
inline double log_conditional_prior(const StiefelPoint& coeffs, const SmoothingParams& smoothing,
                                    const PenaltyMatrix& penalty) {
    detail::check_prior_shapes(coeffs, penalty, smoothing.size());
    const double half_rank = 0.5 * penalty.rank;
    double total = 0.0;
    for (Eigen::Index k = 0; k < coeffs.num_columns(); ++k) {
        const double raw_quad = quadratic_form(penalty, coeffs.column(k));
        total += half_rank * std::log(smoothing[k]) - 0.5 * smoothing[k] * raw_quad;
    }
    return total;
}

/// Log joint prior of (coefficients, smoothing), up to the same additive
/// constant: conditional prior plus fully normalized Gamma terms.
inline double log_joint_prior(const StiefelPoint& coeffs, const SmoothingParams& smoothing,
                              const PenaltyMatrix& penalty, const SmoothingHyperprior& hyper) {
    double total = log_conditional_prior(coeffs, smoothing, penalty);
    for (Eigen::Index k = 0; k < smoothing.size(); ++k)
        total += log_gamma_density(smoothing[k], hyper.shape, hyper.rate);
    return total;
}

/// Conditional posterior of one smoothing precision given everything else:
///   Gamma(shape + R/2, rate + psi_k' P psi_k / 2).
/// The coefficient vector must have unit norm (it is a manifold column).
inline GammaParams smoothing_conditional(const Eigen::VectorXd& coeff_column,
                                         const PenaltyMatrix& penalty,
                                         const SmoothingHyperprior& hyper) {
    const double norm_dev = std::abs(coeff_column.norm() - 1.0);
    if (norm_dev > 1e-8)
        throw constraint_violation_error("smoothing_conditional: coefficient vector not unit norm",
                                         norm_dev);
    return GammaParams{hyper.shape + 0.5 * penalty.rank,
                       hyper.rate + 0.5 * quadratic_form(penalty, coeff_column)};
}

/// Log contribution of one component to the smoothing-integrated prior:
///   log { [rate^shape / Gamma(shape)] * Gamma(shape + R/2)
///         / (rate + q/2)^(shape + R/2) },   q = psi' P psi.
inline double log_component_integrated_mass(double quad_form, int penalty_rank,
                                            const SmoothingHyperprior& hyper) {
    const double post_shape = hyper.shape + 0.5 * penalty_rank;
    return hyper.shape * std::log(hyper.rate) - std::lgamma(hyper.shape) +
           std::lgamma(post_shape) - post_shape * std::log(hyper.rate + 0.5 * quad_form);
}

/// Log of the component bound Gamma(shape + R/2) / (Gamma(shape) rate^{R/2}):
/// the integrated mass with the quadratic form replaced by its infimum 0.
inline double log_component_mass_bound(int penalty_rank, const SmoothingHyperprior& hyper) {
    return std::lgamma(hyper.shape + 0.5 * penalty_rank) - std::lgamma(hyper.shape) -
           0.5 * penalty_rank * std::log(hyper.rate);
}

/// Log ratio of a component's integrated mass to its bound:
///   -(shape + R/2) log(1 + q / (2 rate))  <= 0.
/// Always finite for positive hyperparameters; the linear-scale ratio may
/// underflow to zero, which is benign.
inline double log_integrated_mass_ratio(double quad_form, int penalty_rank,
                                        const SmoothingHyperprior& hyper) {
    const double post_shape = hyper.shape + 0.5 * penalty_rank;
    return -post_shape * std::log1p(0.5 * quad_form / hyper.rate);
}

/// (1 + q / (2 rate))^{-(shape + R/2)}  <= 1.
inline double integrated_mass_ratio(double quad_form, int penalty_rank,
                                    const SmoothingHyperprior& hyper) {
    return std::exp(log_integrated_mass_ratio(quad_form, penalty_rank, hyper));
}

/// Log of the prior with the smoothing precisions integrated out
/// analytically, evaluated at a manifold point:
///   sum_k log_component_integrated_mass(psi_k' P psi_k).
inline double log_smoothing_integrated_prior(const StiefelPoint& coeffs,
                                             const PenaltyMatrix& penalty,
                                             const SmoothingHyperprior& hyper) {
    detail::check_prior_shapes(coeffs, penalty, coeffs.num_columns());
    double total = 0.0;
    for (Eigen::Index k = 0; k < coeffs.num_columns(); ++k)
        total += log_component_integrated_mass(quadratic_form(penalty, coeffs.column(k)),
                                               penalty.rank, hyper);
    return total;
}

/// Log of the closed-form upper bound on the total prior mass:
///   K * log_component_mass_bound + log vol(V_{K,Q}).
/// Finite for every positive (shape, rate), which is what makes the prior
/// proper with no further conditions.
inline double log_prior_mass_bound(const SmoothingHyperprior& hyper, int penalty_rank,
                                   int num_components, int ambient_dim) {
    if (num_components > ambient_dim)
        throw invalid_config_error("log_prior_mass_bound: need K <= Q");
    if (penalty_rank > ambient_dim)
        throw invalid_config_error("log_prior_mass_bound: need R <= Q");
    return num_components * log_component_mass_bound(penalty_rank, hyper) +
           stiefel_log_volume(ambient_dim, num_components);
}

}  // namespace bfpca

#pragma once

#include <cmath>
#include <random>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "bfpca/basis.hpp"
#include "bfpca/errors.hpp"
#include "bfpca/penalty.hpp"
#include "bfpca/prior.hpp"
#include "bfpca/rng.hpp"
#include "bfpca/stiefel.hpp"

namespace bfpca {

/// N observed curves sampled on a common grid in [0,1].  N = 0 (no curves)
/// is allowed; prior-recovery runs use it.
struct FunctionalDataset {
    Eigen::VectorXd grid;    // M strictly increasing points in [0,1]
    Eigen::MatrixXd curves;  // N x M observed values

    FunctionalDataset(Eigen::VectorXd grid_in, Eigen::MatrixXd curves_in)
        : grid(std::move(grid_in)), curves(std::move(curves_in)) {
        if (grid.size() < 1) throw invalid_config_error("FunctionalDataset: empty grid");
        for (Eigen::Index m = 0; m < grid.size(); ++m) {
            if (grid[m] < 0.0 || grid[m] > 1.0)
                throw domain_error("FunctionalDataset: grid point outside [0,1]");
            if (m > 0 && !(grid[m] > grid[m - 1]))
                throw invalid_config_error("FunctionalDataset: grid must be strictly increasing");
        }
        if (curves.cols() != grid.size())
            throw shape_error("FunctionalDataset: curves must have one column per grid point");
        if (!curves.allFinite())
            throw domain_error("FunctionalDataset: non-finite observation");
    }

    Eigen::Index num_curves() const noexcept { return curves.rows(); }
    Eigen::Index num_points() const noexcept { return grid.size(); }
};

/// Generating model for simulation: basis, coefficient frame, score
/// variances (descending) and noise variance.  Zero variances are legal
/// here; the degenerate cases are useful fixtures.
struct TrueModel {
    OrthonormalBasis basis;
    StiefelPoint coefficients;        // Q x K
    Eigen::VectorXd score_variances;  // K, descending, >= 0
    double noise_variance;            // >= 0

    TrueModel(OrthonormalBasis basis_in, StiefelPoint coefficients_in,
              Eigen::VectorXd score_variances_in, double noise_variance_in)
        : basis(std::move(basis_in)),
          coefficients(std::move(coefficients_in)),
          score_variances(std::move(score_variances_in)),
          noise_variance(noise_variance_in) {
        if (coefficients.ambient_dim() != basis.size())
            throw shape_error("TrueModel: coefficient rows must match basis dimension");
        if (score_variances.size() != coefficients.num_columns())
            throw shape_error("TrueModel: one score variance per component");
        for (Eigen::Index k = 0; k < score_variances.size(); ++k) {
            if (!(score_variances[k] >= 0.0) || !std::isfinite(score_variances[k]))
                throw domain_error("TrueModel: score variances must be >= 0 and finite");
            if (k > 0 && score_variances[k] > score_variances[k - 1])
                throw invalid_config_error("TrueModel: score variances must be descending");
        }
        if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
            throw domain_error("TrueModel: noise variance must be >= 0 and finite");
    }

    Eigen::Index num_components() const noexcept { return coefficients.num_columns(); }

    /// M x K matrix of eigenfunction values at the given points.
    Eigen::MatrixXd eigenfunctions(const Eigen::VectorXd& points) const {
        return basis.evaluate(points) * coefficients.matrix();
    }
};

/// Full parameter state visited by the sampler.  All variance components
/// strictly positive; the coefficient frame carries its own constraint.
struct ModelState {
    StiefelPoint coefficients;        // Q x K
    SmoothingParams smoothing;        // K precisions
    Eigen::MatrixXd scores;           // N x K
    Eigen::VectorXd score_variances;  // K, > 0
    double noise_variance;            // > 0

    ModelState(StiefelPoint coefficients_in, SmoothingParams smoothing_in,
               Eigen::MatrixXd scores_in, Eigen::VectorXd score_variances_in,
               double noise_variance_in)
        : coefficients(std::move(coefficients_in)),
          smoothing(std::move(smoothing_in)),
          scores(std::move(scores_in)),
          score_variances(std::move(score_variances_in)),
          noise_variance(noise_variance_in) {
        const Eigen::Index k = coefficients.num_columns();
        if (smoothing.size() != k || scores.cols() != k || score_variances.size() != k)
            throw shape_error("ModelState: per-component fields must agree on K");
        for (Eigen::Index j = 0; j < k; ++j)
            if (!(score_variances[j] > 0.0) || !std::isfinite(score_variances[j]))
                throw domain_error("ModelState: score variances must be positive and finite");
        if (!(noise_variance > 0.0) || !std::isfinite(noise_variance))
            throw domain_error("ModelState: noise variance must be positive and finite");
        if (!scores.allFinite()) throw domain_error("ModelState: non-finite score");
    }

    Eigen::Index num_components() const noexcept { return coefficients.num_columns(); }
};

/// Draw N curves W_i(t_m) = sum_k xi_ik phi_k(t_m) + eps_im with
/// xi_ik ~ N(0, lambda_k) and eps ~ N(0, sigma2), all independent.  Scores
/// are drawn first (subject-major), then the noise field; the drawn scores
/// come back alongside the data for truth files.
inline std::pair<FunctionalDataset, Eigen::MatrixXd> simulate_with_scores(
    const TrueModel& model, Eigen::Index num_curves, const Eigen::VectorXd& grid,
    std::mt19937_64& rng) {
    if (num_curves < 1) throw invalid_config_error("simulate: need at least one curve");
    const Eigen::MatrixXd phi = model.eigenfunctions(grid);  // M x K
    const Eigen::Index num_components = model.num_components();

    std::normal_distribution<double> normal;
    Eigen::MatrixXd scores(num_curves, num_components);
    for (Eigen::Index i = 0; i < num_curves; ++i)
        for (Eigen::Index k = 0; k < num_components; ++k)
            scores(i, k) = std::sqrt(model.score_variances[k]) * normal(rng);

    Eigen::MatrixXd observed = scores * phi.transpose();
    if (model.noise_variance > 0.0) {
        const double sd = std::sqrt(model.noise_variance);
        for (Eigen::Index i = 0; i < num_curves; ++i)
            for (Eigen::Index m = 0; m < grid.size(); ++m) observed(i, m) += sd * normal(rng);
    }
    return {FunctionalDataset(grid, std::move(observed)), std::move(scores)};
}

inline FunctionalDataset simulate(const TrueModel& model, Eigen::Index num_curves,
                                  const Eigen::VectorXd& grid, std::mt19937_64& rng) {
    return simulate_with_scores(model, num_curves, grid, rng).first;
}

/// Residual sum of squares of the state against the data.
inline double model_rss(const ModelState& state, const FunctionalDataset& data,
                        const OrthonormalBasis& basis) {
    if (state.scores.rows() != data.num_curves())
        throw shape_error("model_rss: scores must have one row per curve");
    if (state.coefficients.ambient_dim() != basis.size())
        throw shape_error("model_rss: coefficient rows must match basis dimension");
    if (data.num_curves() == 0) return 0.0;
    const Eigen::MatrixXd phi = basis.evaluate(data.grid) * state.coefficients.matrix();
    return (data.curves - state.scores * phi.transpose()).squaredNorm();
}

/// Gaussian log-likelihood conditional on the scores:
///   sum_{i,m} log N(W_i(t_m) | sum_k xi_ik phi_k(t_m), sigma2).
inline double log_likelihood(const ModelState& state, const FunctionalDataset& data,
                             const OrthonormalBasis& basis) {
    const double rss = model_rss(state, data, basis);
    const double n_obs = static_cast<double>(data.num_curves() * data.num_points());
    return -0.5 * n_obs * std::log(2.0 * M_PI * state.noise_variance) -
           0.5 * rss / state.noise_variance;
}

/// Remove the per-grid-point mean across curves.  Returns the centered
/// dataset and the removed mean curve.
inline std::pair<FunctionalDataset, Eigen::VectorXd> demean(const FunctionalDataset& data) {
    if (data.num_curves() == 0) return {data, Eigen::VectorXd::Zero(data.num_points())};
    const Eigen::VectorXd mean = data.curves.colwise().mean().transpose();
    Eigen::MatrixXd centered = data.curves.rowwise() - mean.transpose();
    return {FunctionalDataset(data.grid, std::move(centered)), mean};
}

/// Classical moment-based starting point: least-squares projection of the
/// curves onto the basis, eigendecomposition of the coefficient covariance,
/// top-K eigenvectors retracted onto the manifold.  Falls back to a uniform
/// draw when the covariance is degenerate.
inline ModelState empirical_fpca_init(const FunctionalDataset& data,
                                      const OrthonormalBasis& basis,
                                      const PenaltyMatrix& penalty,
                                      const SmoothingHyperprior& hyper, int num_components,
                                      std::mt19937_64& rng) {
    const Eigen::Index n = data.num_curves();
    const Eigen::Index dim = basis.size();
    if (num_components < 1 || num_components > dim || num_components > n)
        throw invalid_config_error("empirical_fpca_init: need 1 <= K <= min(Q, N)");

    const Eigen::MatrixXd values = basis.evaluate(data.grid);  // M x Q
    const Eigen::MatrixXd normal_matrix = values.transpose() * values;

    bool degenerate = false;
    Eigen::MatrixXd coeffs;  // Q x N
    Eigen::LLT<Eigen::MatrixXd> llt(normal_matrix);
    if (llt.info() != Eigen::Success) {
        degenerate = true;
    } else {
        coeffs = llt.solve(values.transpose() * data.curves.transpose());
        if (!coeffs.allFinite()) degenerate = true;
    }

    Eigen::MatrixXd frame;
    Eigen::VectorXd variances = Eigen::VectorXd::Ones(num_components);
    double noise = 1.0;
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, num_components);

    if (!degenerate) {
        const Eigen::VectorXd coeff_mean = coeffs.rowwise().mean();
        const Eigen::MatrixXd centered = coeffs.colwise() - coeff_mean;
        const Eigen::MatrixXd covariance =
            centered * centered.transpose() / static_cast<double>(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
        if (eig.info() != Eigen::Success || !(eig.eigenvalues().maxCoeff() > 0.0)) {
            degenerate = true;
        } else {
            frame.resize(dim, num_components);
            for (int k = 0; k < num_components; ++k) {
                // Eigen sorts ascending; take the top-K from the back.
                frame.col(k) = eig.eigenvectors().col(dim - 1 - k);
                variances[k] = std::max(eig.eigenvalues()[dim - 1 - k], 1e-8);
            }
            const Eigen::MatrixXd residual = data.curves.transpose() - values * coeffs;
            noise = std::max(residual.squaredNorm() /
                                 static_cast<double>(n * data.num_points()),
                             1e-8);
            scores = centered.transpose() * frame;
        }
    }

    if (degenerate) {
        frame = sample_uniform(static_cast<int>(dim), num_components, rng).matrix();
        for (int k = 0; k < num_components; ++k) variances[k] = 1.0 / (k + 1.0);
        noise = 1.0;
        scores.setZero();
    }

    const StiefelPoint psi = retract(frame);
    Eigen::VectorXd smoothing(num_components);
    for (int k = 0; k < num_components; ++k)
        smoothing[k] = smoothing_conditional(psi.column(k), penalty, hyper).mean();

    return ModelState(psi, SmoothingParams(std::move(smoothing)), std::move(scores),
                      std::move(variances), noise);
}

}  // namespace bfpca

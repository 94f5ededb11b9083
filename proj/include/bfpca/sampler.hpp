#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "bfpca/errors.hpp"
#include "bfpca/model.hpp"
#include "bfpca/penalty.hpp"
#include "bfpca/prior.hpp"
#include "bfpca/rng.hpp"
#include "bfpca/stiefel.hpp"

namespace bfpca {

/// How the coefficient-frame proposal moves on the manifold.
///
/// retraction_walk: ambient Gaussian step followed by the polar retraction.
/// The retraction makes the kernel slightly asymmetric; the Metropolis ratio
/// treats it as symmetric, which biases results at O(step^2) — small at
/// desk-scale steps but not exact.
///
/// rotation_walk: left-multiplication by exp(A) with A skew-symmetric
/// Gaussian.  A and -A are equally likely and exp(-A) undoes the move, so
/// this kernel is exactly symmetric; use it for validation runs.
enum class ProposalMode { retraction_walk, rotation_walk };

enum class InitMode { empirical, random };

struct SamplerConfig {
    std::int64_t n_iterations = 2000;
    std::int64_t n_burnin = 500;
    int thin = 1;
    std::optional<double> proposal_step;  // unset selects 0.2 / sqrt(Q)
    std::uint64_t seed = 0;
    int num_components = 1;
    SmoothingHyperprior smoothing_hyperprior{1e-3, 1e-3};
    double variance_prior_shape = 1e-3;  // inverse-gamma prior on lambda_k, sigma2
    double variance_prior_rate = 1e-3;
    ProposalMode proposal_mode = ProposalMode::retraction_walk;
    InitMode init = InitMode::empirical;
    bool adapt_step = false;  // burn-in only, frozen afterwards
    bool random_scan = false;
    bool store_scores = false;

    void validate() const {
        if (n_iterations < 1 || n_burnin < 0 || n_burnin >= n_iterations)
            throw invalid_config_error("SamplerConfig: need 0 <= n_burnin < n_iterations");
        if (thin < 1) throw invalid_config_error("SamplerConfig: thin must be >= 1");
        if (proposal_step && !(*proposal_step > 0.0))
            throw invalid_config_error("SamplerConfig: proposal_step must be positive");
        if (num_components < 1)
            throw invalid_config_error("SamplerConfig: need at least one component");
        if (!(variance_prior_shape > 0.0) || !(variance_prior_rate > 0.0))
            throw invalid_config_error("SamplerConfig: variance prior must be positive");
    }
};

/// One stored (thinned) state.
struct StateRecord {
    std::int64_t iteration = 0;
    Eigen::VectorXd score_variances;
    double noise_variance = 0.0;
    Eigen::VectorXd smoothing;
    Eigen::MatrixXd coefficients;             // Q x K
    std::optional<Eigen::MatrixXd> scores;    // N x K when stored
};

struct ChainDiagnostics {
    Eigen::VectorXd ess_score_variances;
    Eigen::VectorXd ess_smoothing;
    double ess_noise_variance = 0.0;
};

struct ChainOutput {
    std::vector<StateRecord> records;
    double acceptance_rate = 0.0;
    std::int64_t proposal_failures = 0;
    double proposal_step_used = 0.0;
    ChainDiagnostics diagnostics;
};

/// Redraw every smoothing precision from its exact Gamma conditional,
/// leaving all other fields untouched.
inline ModelState update_smoothing(const ModelState& state, const PenaltyMatrix& penalty,
                                   const SmoothingHyperprior& hyper, std::mt19937_64& rng) {
    Eigen::VectorXd smoothing(state.num_components());
    for (Eigen::Index k = 0; k < smoothing.size(); ++k) {
        const GammaParams cond = smoothing_conditional(state.coefficients.column(k), penalty, hyper);
        smoothing[k] = draw_gamma(cond.shape, cond.rate, rng);
    }
    return ModelState(state.coefficients, SmoothingParams(std::move(smoothing)), state.scores,
                      state.score_variances, state.noise_variance);
}

/// Gaussian conditional of the score rows: common K x K precision
/// diag(1/lambda) + Phi'Phi / sigma2 and one mean column per curve,
/// precision^{-1} Phi' w_i / sigma2.
struct ScoreConditional {
    Eigen::MatrixXd precision;  // K x K
    Eigen::MatrixXd means;      // K x N
};

inline ScoreConditional score_conditional(const ModelState& state, const FunctionalDataset& data,
                                          const OrthonormalBasis& basis) {
    const Eigen::MatrixXd phi = basis.evaluate(data.grid) * state.coefficients.matrix();
    ScoreConditional cond;
    cond.precision = phi.transpose() * phi / state.noise_variance;
    cond.precision += state.score_variances.cwiseInverse().asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(cond.precision);
    if (llt.info() != Eigen::Success)
        throw numerical_degeneracy_error(
            "score_conditional: conditional precision not positive-definite");
    cond.means = llt.solve(phi.transpose() * data.curves.transpose() / state.noise_variance);
    return cond;
}

/// Redraw the score rows from their Gaussian conditionals.
inline ModelState update_scores(const ModelState& state, const FunctionalDataset& data,
                                const OrthonormalBasis& basis, std::mt19937_64& rng) {
    const Eigen::Index n = data.num_curves();
    if (n == 0) return state;
    if (state.scores.rows() != n)
        throw shape_error("update_scores: scores must have one row per curve");

    const Eigen::Index k = state.num_components();
    const ScoreConditional cond = score_conditional(state, data, basis);
    Eigen::LLT<Eigen::MatrixXd> llt(cond.precision);

    Eigen::MatrixXd scores(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd z = gaussian_vector(k, rng);
        scores.row(i) = (cond.means.col(i) + llt.matrixU().solve(z)).transpose();
    }
    return ModelState(state.coefficients, state.smoothing, std::move(scores),
                      state.score_variances, state.noise_variance);
}

struct InverseGammaParams {
    double shape;
    double scale;

    double mean() const noexcept { return scale / (shape - 1.0); }  // shape > 1
};

inline InverseGammaParams score_variance_conditional(const ModelState& state, Eigen::Index k,
                                                     double prior_shape, double prior_rate) {
    return {prior_shape + 0.5 * static_cast<double>(state.scores.rows()),
            prior_rate + 0.5 * state.scores.col(k).squaredNorm()};
}

inline InverseGammaParams noise_variance_conditional(const ModelState& state,
                                                     const FunctionalDataset& data,
                                                     const OrthonormalBasis& basis,
                                                     double prior_shape, double prior_rate) {
    const double n_obs = static_cast<double>(data.num_curves() * data.num_points());
    return {prior_shape + 0.5 * n_obs, prior_rate + 0.5 * model_rss(state, data, basis)};
}

/// Conjugate inverse-gamma redraws of the score variances and the noise
/// variance.  With no curves both reduce to prior draws.
inline ModelState update_variances(const ModelState& state, const FunctionalDataset& data,
                                   const OrthonormalBasis& basis, double prior_shape,
                                   double prior_rate, std::mt19937_64& rng) {
    Eigen::VectorXd variances(state.num_components());
    for (Eigen::Index k = 0; k < variances.size(); ++k) {
        const InverseGammaParams cond =
            score_variance_conditional(state, k, prior_shape, prior_rate);
        variances[k] = draw_inverse_gamma(cond.shape, cond.scale, rng);
    }
    const InverseGammaParams noise_cond =
        noise_variance_conditional(state, data, basis, prior_shape, prior_rate);
    const double noise = draw_inverse_gamma(noise_cond.shape, noise_cond.scale, rng);
    return ModelState(state.coefficients, state.smoothing, state.scores, std::move(variances),
                      noise);
}

struct EigenfunctionUpdate {
    ModelState state;
    bool accepted = false;
    bool proposal_failed = false;
};

/// Metropolis update of the coefficient frame.  Target: Gaussian likelihood
/// times the conditional smoothing prior.  step = 0 is the identity move.
inline EigenfunctionUpdate update_eigenfunctions(const ModelState& state,
                                                 const FunctionalDataset& data,
                                                 const OrthonormalBasis& basis,
                                                 const PenaltyMatrix& penalty,
                                                 std::mt19937_64& rng, double step,
                                                 ProposalMode mode = ProposalMode::retraction_walk) {
    if (step == 0.0) return {state, true, false};
    if (!(step > 0.0)) throw invalid_config_error("update_eigenfunctions: step must be >= 0");

    const Eigen::Index dim = state.coefficients.ambient_dim();
    const Eigen::Index k = state.num_components();

    StiefelPoint proposal = state.coefficients;
    try {
        if (mode == ProposalMode::retraction_walk) {
            const Eigen::MatrixXd noise = gaussian_matrix(dim, k, rng);
            proposal = retract(state.coefficients.matrix() + step * noise);
        } else {
            const Eigen::MatrixXd g = gaussian_matrix(dim, dim, rng);
            const Eigen::MatrixXd skew = 0.5 * step * (g - g.transpose());
            proposal = retract(skew.exp() * state.coefficients.matrix());
        }
    } catch (const numerical_degeneracy_error&) {
        return {state, false, true};
    }

    ModelState moved(proposal, state.smoothing, state.scores, state.score_variances,
                     state.noise_variance);

    double log_ratio = log_conditional_prior(proposal, state.smoothing, penalty) -
                       log_conditional_prior(state.coefficients, state.smoothing, penalty);
    if (data.num_curves() > 0)
        log_ratio -= 0.5 *
                     (model_rss(moved, data, basis) - model_rss(state, data, basis)) /
                     state.noise_variance;

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const bool accept = std::log(unif(rng)) < log_ratio;
    if (accept) return {std::move(moved), true, false};
    return {state, false, false};
}

/// Effective sample size by the initial-positive-sequence rule on the
/// autocorrelation of a scalar series.
inline double effective_sample_size(const std::vector<double>& series) {
    const std::size_t n = series.size();
    if (n < 4) return static_cast<double>(n);
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
    auto autocov = [&](std::size_t lag) {
        double sum = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i)
            sum += (series[i] - mean) * (series[i + lag] - mean);
        return sum / n;
    };
    const double var = autocov(0);
    if (!(var > 0.0)) return static_cast<double>(n);

    double tau = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
        double pair = (autocov(2 * m) + autocov(2 * m + 1)) / var;
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);  // enforce monotone decay
        tau += pair;
        prev_pair = pair;
    }
    const double integrated = std::max(2.0 * tau - 1.0, 1e-12);
    return static_cast<double>(n) / integrated;
}

namespace detail {

inline ModelState initial_state(const FunctionalDataset& data, const OrthonormalBasis& basis,
                                const PenaltyMatrix& penalty, const SamplerConfig& config,
                                std::mt19937_64& rng) {
    const int k = config.num_components;
    if (config.init == InitMode::empirical && data.num_curves() >= k)
        return empirical_fpca_init(data, basis, penalty, config.smoothing_hyperprior, k, rng);

    const StiefelPoint psi = sample_uniform(basis.size(), k, rng);
    Eigen::VectorXd variances(k);
    for (int j = 0; j < k; ++j) variances[j] = 1.0 / (j + 1.0);
    Eigen::VectorXd smoothing(k);
    for (int j = 0; j < k; ++j)
        smoothing[j] =
            smoothing_conditional(psi.column(j), penalty, config.smoothing_hyperprior).mean();
    return ModelState(psi, SmoothingParams(std::move(smoothing)),
                      Eigen::MatrixXd::Zero(data.num_curves(), k), std::move(variances), 1.0);
}

}  // namespace detail

/// Systematic-scan Gibbs chain: scores, variances, smoothing, coefficient
/// frame.  Deterministic given the seed; burn-in discarded, thinned states
/// recorded.
inline ChainOutput run_chain(const FunctionalDataset& data, const OrthonormalBasis& basis,
                             const PenaltyMatrix& penalty, const SamplerConfig& config) {
    config.validate();
    const int k = config.num_components;
    if (k > basis.size())
        throw invalid_config_error("run_chain: more components than basis functions");
    if (data.num_points() < k)
        throw invalid_config_error("run_chain: grid is too coarse (need M >= K)");
    if (penalty.size() != basis.size())
        throw shape_error("run_chain: penalty dimension does not match basis");

    RngStream stream(config.seed);
    auto rng = stream.engine();
    double step = config.proposal_step.value_or(0.2 / std::sqrt(static_cast<double>(basis.size())));

    ModelState state = detail::initial_state(data, basis, penalty, config, rng);

    ChainOutput output;
    std::int64_t accepted = 0, attempts = 0;
    std::int64_t window_accepted = 0, window_attempts = 0;
    std::uniform_int_distribution<int> pick_move(0, 3);

    for (std::int64_t it = 1; it <= config.n_iterations; ++it) {
        try {
            const int only = config.random_scan ? pick_move(rng) : -1;
            if (only < 0 || only == 0) state = update_scores(state, data, basis, rng);
            if (only < 0 || only == 1)
                state = update_variances(state, data, basis, config.variance_prior_shape,
                                         config.variance_prior_rate, rng);
            if (only < 0 || only == 2)
                state = update_smoothing(state, penalty, config.smoothing_hyperprior, rng);
            if (only < 0 || only == 3) {
                EigenfunctionUpdate result = update_eigenfunctions(
                    state, data, basis, penalty, rng, step, config.proposal_mode);
                ++attempts;
                ++window_attempts;
                if (result.accepted) {
                    ++accepted;
                    ++window_accepted;
                }
                output.proposal_failures += result.proposal_failed ? 1 : 0;
                state = std::move(result.state);
            }
        } catch (const bfpca::domain_error& e) {
            throw chain_divergence_error(std::string("run_chain: ") + e.what(), it);
        }

        if (config.adapt_step && it <= config.n_burnin && window_attempts >= 50) {
            const double rate = static_cast<double>(window_accepted) / window_attempts;
            if (rate < 0.25) step *= 0.8;
            if (rate > 0.40) step *= 1.25;
            window_accepted = window_attempts = 0;
        }

        if (it > config.n_burnin && (it - config.n_burnin - 1) % config.thin == 0) {
            StateRecord record;
            record.iteration = it;
            record.score_variances = state.score_variances;
            record.noise_variance = state.noise_variance;
            record.smoothing = state.smoothing.values;
            record.coefficients = state.coefficients.matrix();
            if (config.store_scores) record.scores = state.scores;
            output.records.push_back(std::move(record));
        }
    }

    output.acceptance_rate =
        attempts > 0 ? static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
    output.proposal_step_used = step;

    const std::size_t stored = output.records.size();
    output.diagnostics.ess_score_variances.resize(k);
    output.diagnostics.ess_smoothing.resize(k);
    std::vector<double> series(stored);
    for (int j = 0; j < k; ++j) {
        for (std::size_t t = 0; t < stored; ++t) series[t] = output.records[t].score_variances[j];
        output.diagnostics.ess_score_variances[j] = effective_sample_size(series);
        for (std::size_t t = 0; t < stored; ++t) series[t] = output.records[t].smoothing[j];
        output.diagnostics.ess_smoothing[j] = effective_sample_size(series);
    }
    for (std::size_t t = 0; t < stored; ++t) series[t] = output.records[t].noise_variance;
    output.diagnostics.ess_noise_variance = effective_sample_size(series);

    return output;
}

/// Resolve the sign and order ambiguity of the stored draws: per-component
/// signs are fixed against a canonicalized first draw (largest-magnitude
/// entry made positive, so re-running on a globally flipped chain restores
/// the original), and components are reordered by descending posterior-mean
/// score variance.
inline ChainOutput postprocess_chain(const ChainOutput& chain) {
    if (chain.records.empty())
        throw invalid_config_error("postprocess_chain: chain has no stored draws");
    ChainOutput out = chain;
    const Eigen::Index k = out.records.front().coefficients.cols();

    Eigen::MatrixXd reference = out.records.front().coefficients;
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index peak;
        reference.col(j).cwiseAbs().maxCoeff(&peak);
        if (reference(peak, j) < 0.0) reference.col(j) *= -1.0;
    }

    for (StateRecord& record : out.records) {
        for (Eigen::Index j = 0; j < k; ++j) {
            if (record.coefficients.col(j).dot(reference.col(j)) < 0.0) {
                record.coefficients.col(j) *= -1.0;
                if (record.scores) record.scores->col(j) *= -1.0;
            }
        }
    }

    Eigen::VectorXd mean_variance = Eigen::VectorXd::Zero(k);
    for (const StateRecord& record : out.records) mean_variance += record.score_variances;
    mean_variance /= static_cast<double>(out.records.size());

    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return mean_variance[a] > mean_variance[b];
    });

    const bool identity =
        std::is_sorted(order.begin(), order.end());
    if (!identity) {
        for (StateRecord& record : out.records) {
            StateRecord permuted = record;
            for (Eigen::Index j = 0; j < k; ++j) {
                permuted.score_variances[j] = record.score_variances[order[j]];
                permuted.smoothing[j] = record.smoothing[order[j]];
                permuted.coefficients.col(j) = record.coefficients.col(order[j]);
                if (record.scores) permuted.scores->col(j) = record.scores->col(order[j]);
            }
            record = std::move(permuted);
        }
        ChainDiagnostics reordered = out.diagnostics;
        for (Eigen::Index j = 0; j < k; ++j) {
            reordered.ess_score_variances[j] = out.diagnostics.ess_score_variances[order[j]];
            reordered.ess_smoothing[j] = out.diagnostics.ess_smoothing[order[j]];
        }
        out.diagnostics = reordered;
    }
    return out;
}

}  // namespace bfpca

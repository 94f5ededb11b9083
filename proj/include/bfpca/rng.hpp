#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace bfpca {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// A deterministic ancestor for random streams: a base seed plus cheap
/// derivation of independent substreams by index.  Per-index substreams are
/// what make sharded Monte Carlo loops reduce to the same result no matter
/// how the indices are split across workers.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Engine for substream `index`.  Equal (seed, index) give equal streams.
    std::mt19937_64 fork(std::uint64_t index) const {
        return std::mt19937_64(detail::splitmix64(seed_ ^ detail::splitmix64(index)));
    }

    std::mt19937_64 engine() const { return fork(0); }

    /// Stream for a derived task (a chain, a shard family).
    RngStream substream(std::uint64_t index) const {
        return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(~index)));
    }

private:
    std::uint64_t seed_;
};

/// Matrix of iid standard normal draws, filled column-major so the draw
/// order is part of the contract.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                       std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

/// Gamma(shape, rate) draw.
inline double draw_gamma(double shape, double rate, std::mt19937_64& rng) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(rng);
}

/// Inverse-gamma(shape, scale) draw: reciprocal of a Gamma(shape, scale) draw.
inline double draw_inverse_gamma(double shape, double scale, std::mt19937_64& rng) {
    return 1.0 / draw_gamma(shape, scale, rng);
}

}  // namespace bfpca

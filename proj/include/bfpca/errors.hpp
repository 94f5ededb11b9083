#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bfpca {

/// Base class for all library failures.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested configuration cannot be built (bad sizes, bad flags).
class invalid_config_error : public error {
public:
    using error::error;
};

/// Numerical breakdown: singular Gram matrix, rank-deficient retraction
/// input, non-positive-definite conditional precision.
class numerical_degeneracy_error : public error {
public:
    using error::error;
};

/// Argument dimensions do not agree.
class shape_error : public error {
public:
    using error::error;
};

/// Evaluation point or parameter outside its domain.
class domain_error : public error {
public:
    using error::error;
};

/// An orthonormality (or similar) constraint was violated; carries the
/// observed max deviation.
class constraint_violation_error : public error {
public:
    constraint_violation_error(const std::string& what, double deviation)
        : error(what + " (deviation " + std::to_string(deviation) + ")"),
          deviation_(deviation) {}

    double deviation() const noexcept { return deviation_; }

private:
    double deviation_;
};

/// Non-finite log-posterior encountered while sampling; carries the
/// iteration at which the chain diverged.
class chain_divergence_error : public error {
public:
    chain_divergence_error(const std::string& what, std::int64_t iteration)
        : error(what + " at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}

    std::int64_t iteration() const noexcept { return iteration_; }

private:
    std::int64_t iteration_;
};

}  // namespace bfpca

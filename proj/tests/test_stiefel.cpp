#include <catch2/catch.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "bfpca/rng.hpp"
#include "bfpca/stiefel.hpp"

#include "oracles.hpp"

using namespace bfpca;

TEST_CASE("manifold membership checks", "[stiefel]") {
    SECTION("leading columns of the identity are a valid frame") {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(5, 2);
        const StiefelPoint point = StiefelPoint::from_matrix(m);
        CHECK(orthonormality_deviation(point.matrix()) <= 1e-15);
    }
    SECTION("a column of norm 2 is rejected with its deviation") {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(5, 2);
        m.col(0) *= 2.0;
        try {
            StiefelPoint::from_matrix(m);
            FAIL("expected constraint violation");
        } catch (const constraint_violation_error& e) {
            CHECK(e.deviation() == Approx(3.0).margin(1e-12));
        }
    }
    SECTION("QR factor of a Gaussian matrix is a valid frame") {
        std::mt19937_64 rng(3);
        const Eigen::MatrixXd g = gaussian_matrix(7, 3, rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        const Eigen::MatrixXd thin_q = qr.householderQ() * Eigen::MatrixXd::Identity(7, 3);
        CHECK_NOTHROW(StiefelPoint::from_matrix(thin_q));
    }
    SECTION("wide matrices are rejected") {
        CHECK_THROWS_AS(StiefelPoint::from_matrix(Eigen::MatrixXd::Identity(2, 3)), shape_error);
    }
}

TEST_CASE("uniform sampling distribution", "[stiefel]") {
    SECTION("every draw satisfies the constraint at 1e-10") {
        std::mt19937_64 rng(19);
        for (int rep = 0; rep < 100; ++rep) {
            const int q = 2 + static_cast<int>(rep % 9);
            const int k = 1 + static_cast<int>(rep % q);
            const StiefelPoint point = sample_uniform(q, k, rng);
            CHECK(orthonormality_deviation(point.matrix()) <= 1e-10);
        }
    }
    SECTION("K=1, Q=2 draws cover the circle uniformly") {
        std::mt19937_64 rng(101);
        const int bins = 36;
        std::vector<int> counts(bins, 0);
        const int n = 100000;
        for (int i = 0; i < n; ++i) {
            const StiefelPoint point = sample_uniform(2, 1, rng);
            const double angle = std::atan2(point.matrix()(1, 0), point.matrix()(0, 0));
            const int bin = std::min(
                bins - 1, static_cast<int>((angle + M_PI) / (2.0 * M_PI) * bins));
            ++counts[static_cast<std::size_t>(bin)];
        }
        const double expected = static_cast<double>(n) / bins;
        double stat = 0.0;
        for (int c : counts) stat += (c - expected) * (c - expected) / expected;
        CHECK(oracle::chi_square_pvalue(stat, bins - 1) > 0.01);
    }
    SECTION("E[frame frame^T] = (K/Q) I within 3 standard errors") {
        std::mt19937_64 rng(202);
        const int q = 5, k = 2, n = 100000;
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(q, q);
        Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(q, q);
        for (int i = 0; i < n; ++i) {
            const StiefelPoint point = sample_uniform(q, k, rng);
            const Eigen::MatrixXd outer = point.matrix() * point.matrix().transpose();
            sum += outer;
            sum_sq += outer.cwiseProduct(outer);
        }
        const Eigen::MatrixXd mean = sum / n;
        const Eigen::MatrixXd target =
            (static_cast<double>(k) / q) * Eigen::MatrixXd::Identity(q, q);
        for (int i = 0; i < q; ++i) {
            for (int j = 0; j < q; ++j) {
                const double var = sum_sq(i, j) / n - mean(i, j) * mean(i, j);
                const double se = std::sqrt(std::max(var, 1e-30) / n);
                CHECK(std::abs(mean(i, j) - target(i, j)) <= 3.5 * se);
            }
        }
    }
    SECTION("rotation invariance of trace statistics (two-sample KS)") {
        std::mt19937_64 rng(1000);
        const int q = 4, k = 2, n = 10000;
        const Eigen::MatrixXd a = gaussian_matrix(q, q, rng);
        const StiefelPoint rotation_frame = sample_uniform(q, q, rng);
        const Eigen::MatrixXd rotation = rotation_frame.matrix();
        std::vector<double> plain, rotated;
        plain.reserve(n);
        rotated.reserve(n);
        for (int i = 0; i < n; ++i) {
            const Eigen::MatrixXd m = sample_uniform(q, k, rng).matrix();
            plain.push_back((a * m * m.transpose()).trace());
            const Eigen::MatrixXd rm = rotation * sample_uniform(q, k, rng).matrix();
            rotated.push_back((a * rm * rm.transpose()).trace());
        }
        const auto [stat, pvalue] = oracle::ks_two_sample(plain, rotated);
        (void)stat;
        CHECK(pvalue > 0.01);
    }
}

TEST_CASE("polar retraction", "[stiefel]") {
    std::mt19937_64 rng(404);
    const StiefelPoint frame = sample_uniform(6, 3, rng);

    SECTION("orthonormal input is a fixed point") {
        const StiefelPoint again = retract(frame.matrix());
        CHECK((again.matrix() - frame.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("positive scaling is removed") {
        const StiefelPoint scaled = retract(2.0 * frame.matrix());
        CHECK((scaled.matrix() - frame.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("retraction of a small perturbation stays first-order close") {
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            const Eigen::MatrixXd noise = eps * gaussian_matrix(6, 3, rng);
            const StiefelPoint moved = retract(frame.matrix() + noise);
            const double dist = (moved.matrix() - frame.matrix()).norm();
            CHECK(dist <= noise.norm() + 20.0 * eps * eps);
        }
    }
    SECTION("rank-deficient input is an error") {
        CHECK_THROWS_AS(retract(Eigen::MatrixXd::Zero(4, 2)), numerical_degeneracy_error);
    }
}

TEST_CASE("manifold volumes", "[stiefel]") {
    SECTION("circle and sphere") {
        CHECK(stiefel_volume(2, 1).value() == Approx(2.0 * M_PI).epsilon(1e-14));
        CHECK(stiefel_volume(3, 1).value() == Approx(4.0 * M_PI).epsilon(1e-14));
    }
    SECTION("two-frame in three dimensions: 8 pi^2") {
        CHECK(stiefel_volume(3, 2).value() == Approx(8.0 * M_PI * M_PI).epsilon(1e-13));
    }
    SECTION("K = 1 reproduces the sphere surface area for Q up to 10") {
        for (int q = 2; q <= 10; ++q) {
            const double area = 2.0 * std::pow(M_PI, 0.5 * q) / std::tgamma(0.5 * q);
            CHECK(stiefel_volume(q, 1).value() == Approx(area).epsilon(1e-12));
        }
    }
    SECTION("large dimensions overflow the linear scale but keep a finite log") {
        const ManifoldVolume vol = stiefel_volume(300, 200);
        CHECK(std::isfinite(vol.log_value));
        CHECK_FALSE(vol.representable);
    }
    SECTION("bad dimensions are rejected") {
        CHECK_THROWS_AS(stiefel_volume(3, 4), invalid_config_error);
        CHECK_THROWS_AS(stiefel_volume(3, 0), invalid_config_error);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "fixtures.hpp"
#include "smjls/errors.hpp"
#include "smjls/expectation.hpp"

using namespace smjls;

namespace {

// single-mode wrapper: self-loop with the given dwell law and jump mixture
SemiMarkovModel single_mode(const Eigen::MatrixXd& A, DwellLaw law, JumpMixture jump) {
    Eigen::MatrixXd P(1, 1);
    P << 1.0;
    std::map<SemiMarkovModel::EdgeKey, DwellLaw> dwell;
    dwell.emplace(SemiMarkovModel::EdgeKey{0, 0}, std::move(law));
    std::map<SemiMarkovModel::EdgeKey, JumpMixture> jumps;
    jumps.emplace(SemiMarkovModel::EdgeKey{0, 0}, std::move(jump));
    return SemiMarkovModel({A}, P, std::move(dwell), std::move(jumps));
}

} // namespace

TEST_CASE("gauss-legendre rule integrates polynomials exactly") {
    const GaussLegendreRule rule(15);
    // order-15 rule is exact through degree 29
    for (int degree : {0, 1, 5, 14, 29}) {
        double acc = 0.0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k)
            acc += rule.weights[k] * std::pow(rule.nodes[k], degree);
        const double exact = degree % 2 == 1 ? 0.0 : 2.0 / (degree + 1);
        CHECK(acc == doctest::Approx(exact).epsilon(1e-13));
    }
}

TEST_CASE("matrix exponential basics") {
    CHECK(matrix_exponential(Eigen::MatrixXd::Zero(3, 3), 1.0)
              .isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-15));

    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(2, 2);
    D(0, 0) = -2.0;
    D(1, 1) = 1.0;
    const Eigen::MatrixXd E = matrix_exponential(D, 1.0);
    CHECK(E(0, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    CHECK(E(1, 1) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(E(0, 1) == 0.0);
}

TEST_CASE("matrix exponential semigroup property on Metzler matrices") {
    RandomStream rng(23);
    for (int rep = 0; rep < 25; ++rep) {
        const Eigen::MatrixXd A = fixtures::random_metzler(3, rng, 1.0);
        const double s = 0.3 + rng.next_double();
        const double t = 0.2 + rng.next_double();
        const Eigen::MatrixXd lhs = matrix_exponential(A, s + t);
        const Eigen::MatrixXd rhs = matrix_exponential(A, s) * matrix_exponential(A, t);
        CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, lhs.norm()));
        CHECK(is_nonnegative(lhs));
    }
}

TEST_CASE("point-mass dwell gives the exact lifted flow") {
    Eigen::MatrixXd A(2, 2);
    A << -1.0, 0.4, 0.3, -0.7;
    const SemiMarkovModel model = single_mode(A, DwellLaw::deterministic(0.8), JumpMixture::identity(2));
    for (int m : {1, 2, 3}) {
        const MultiIndexBasis basis(2, m);
        const Eigen::MatrixXd expected = lift_matrix_power(matrix_exponential(A, 0.8), basis);
        const Eigen::MatrixXd got = expected_lifted_transition(model, 0, 0, m);
        CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("zero dynamics give the identity under any law") {
    for (DwellLaw law : {DwellLaw::uniform(1.0, 3.0), DwellLaw::truncated_weibull(10.0, 3.0, 0.1),
                         DwellLaw::truncated_exponential(1.0, 10.0)}) {
        const SemiMarkovModel model =
            single_mode(Eigen::MatrixXd::Zero(2, 2), std::move(law), JumpMixture::identity(2));
        const Eigen::MatrixXd got = expected_lifted_transition(model, 0, 0, 2);
        CHECK((got - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("uniform dwell against the closed-form integral") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
    A(0, 0) = -1.0;
    A(1, 1) = -2.0;
    const SemiMarkovModel model = single_mode(A, DwellLaw::uniform(1.0, 3.0), JumpMixture::identity(2));
    const Eigen::MatrixXd got = expected_lifted_transition(model, 0, 0, 1);
    const double expected00 = 0.5 * (std::exp(-1.0) - std::exp(-3.0));
    const double expected11 = 0.25 * (std::exp(-2.0) - std::exp(-6.0));
    CHECK(std::abs(got(0, 0) - expected00) < 1e-10);
    CHECK(std::abs(got(1, 1) - expected11) < 1e-10);
    CHECK(got(0, 1) == 0.0);
}

TEST_CASE("nontrivial jump mixtures factor through the lifted mean") {
    Eigen::MatrixXd A(2, 2);
    A << -0.5, 0.2, 0.1, -0.9;
    Eigen::MatrixXd J1(2, 2), J2(2, 2);
    J1 << 0.5, 0.0, 0.1, 0.4;
    J2 << 1.2, 0.3, 0.0, 0.8;
    const JumpMixture mix({{0.3, J1}, {0.7, J2}});
    const SemiMarkovModel model = single_mode(A, DwellLaw::uniform(0.5, 1.5), mix);
    const int m = 2;
    const MultiIndexBasis basis(2, m);

    const Eigen::MatrixXd got = expected_lifted_transition(model, 0, 0, m);
    const SemiMarkovModel plain = single_mode(A, DwellLaw::uniform(0.5, 1.5), JumpMixture::identity(2));
    const Eigen::MatrixXd raw = expected_lifted_transition(plain, 0, 0, m);
    const Eigen::MatrixXd expected = mix.lifted_mean(basis) * raw;
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("brute force agrees with the adaptive integral") {
    const SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    for (int m : {1, 2}) {
        for (auto [to, from] : {std::pair{0, 1}, std::pair{1, 0}}) {
            const Eigen::MatrixXd adaptive = expected_lifted_transition(model, to, from, m);
            const Eigen::MatrixXd brute = brute_force_expectation(model, to, from, m, 100000);
            // scaled by the block magnitude: the 1e5-point midpoint rule has
            // absolute error near 2e-5 on the mean-square block, whose
            // entries reach 5e4
            const double scale = std::max(1.0, brute.cwiseAbs().maxCoeff());
            CHECK((adaptive - brute).cwiseAbs().maxCoeff() <= 1e-6 * scale);
        }
    }
}

TEST_CASE("brute force is exact for atomic laws") {
    Eigen::MatrixXd A(2, 2);
    A << -1.0, 0.4, 0.3, -0.7;
    const SemiMarkovModel model =
        single_mode(A, DwellLaw::empirical({0.3, 0.9, 1.4}), JumpMixture::identity(2));
    const Eigen::MatrixXd adaptive = expected_lifted_transition(model, 0, 0, 2);
    const Eigen::MatrixXd brute = brute_force_expectation(model, 0, 0, 2, 10);
    CHECK((adaptive - brute).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("expectation blocks stay nonnegative") {
    const SemiMarkovModel model = fixtures::controller_failure_model(0.9);
    for (int m : {1, 2, 3}) {
        CHECK(is_nonnegative(expected_lifted_transition(model, 0, 1, m)));
        CHECK(is_nonnegative(expected_lifted_transition(model, 1, 0, m)));
    }
}

TEST_CASE("diagonal shift strictly inflates positive entries") {
    const SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    const SemiMarkovModel shifted = model.shifted(0.1);
    for (int m : {1, 2}) {
        for (auto [to, from] : {std::pair{0, 1}, std::pair{1, 0}}) {
            const Eigen::MatrixXd base = expected_lifted_transition(model, to, from, m);
            const Eigen::MatrixXd inflated = expected_lifted_transition(shifted, to, from, m);
            for (Eigen::Index r = 0; r < base.rows(); ++r)
                for (Eigen::Index c = 0; c < base.cols(); ++c)
                    if (base(r, c) > 1e-12) CHECK(inflated(r, c) > base(r, c));
        }
    }
}

TEST_CASE("exhausted subdivision budget raises AccuracyError with the best estimate") {
    Eigen::MatrixXd A(2, 2);
    A << -1.0, 0.4, 0.3, -0.7;
    const SemiMarkovModel model = single_mode(A, DwellLaw::uniform(0.1, 9.0), JumpMixture::identity(2));
    QuadratureConfig cfg;
    cfg.abs_tol = 1e-16;
    cfg.rel_tol = 1e-16;
    cfg.max_subdivisions = 2;
    try {
        expected_lifted_transition(model, 0, 0, 2, cfg);
        FAIL("expected AccuracyError");
    } catch (const AccuracyError& e) {
        CHECK(e.best_estimate.rows() == 3);
        CHECK(e.error_bound > 0.0);
        // the best estimate is still close; only the certificate is missing
        const Eigen::MatrixXd reference = expected_lifted_transition(model, 0, 0, 2);
        CHECK((e.best_estimate - reference).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("mode index bounds are enforced") {
    const SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    CHECK_THROWS_AS(expected_lifted_transition(model, 0, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(brute_force_expectation(model, 0, 1, 1, 5), std::invalid_argument);
}

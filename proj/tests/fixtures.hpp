#pragma once

#include <Eigen/Core>
#include <map>

#include "smjls/model.hpp"
#include "smjls/rng.hpp"
#include "smjls/stabilizer.hpp"

namespace smjls::fixtures {

/// Two-mode system with a stable controlled mode and an unstable open one.
/// The 2->1 repair time is Uniform(a, 3a); the 1->2 failure time is Weibull
/// (shape 10, scale 3) censored at its 90th percentile, atom mass 0.1.
inline SemiMarkovModel controller_failure_model(double a) {
    Eigen::MatrixXd A1(2, 2), A2(2, 2), P(2, 2);
    A1 << -2.0, 0.2, 0.1, -2.3;
    A2 << 2.1, 0.9, 0.2, 0.3;
    P << 0.0, 1.0, 1.0, 0.0;
    std::map<SemiMarkovModel::EdgeKey, DwellLaw> dwell;
    dwell.emplace(SemiMarkovModel::EdgeKey{0, 1}, DwellLaw::truncated_weibull(10.0, 3.0, 0.1));
    dwell.emplace(SemiMarkovModel::EdgeKey{1, 0}, DwellLaw::uniform(a, 3.0 * a));
    std::map<SemiMarkovModel::EdgeKey, JumpMixture> jumps;
    jumps.emplace(SemiMarkovModel::EdgeKey{0, 1}, JumpMixture::identity(2));
    jumps.emplace(SemiMarkovModel::EdgeKey{1, 0}, JumpMixture::identity(2));
    return SemiMarkovModel({A1, A2}, P, std::move(dwell), std::move(jumps));
}

/// The two-mode output-feedback design problem used across the synthesis
/// tests.
inline SynthesisProblem two_mode_synthesis() {
    SynthesisProblem problem;
    Eigen::MatrixXd A1(2, 2), B1(2, 1), C1(1, 2), A2(2, 2), B2(2, 1), C2(1, 2);
    A1 << 0.0, 0.2, 0.9, 0.9;
    B1 << 0.6, 0.3;
    C1 << 0.3, 0.1;
    A2 << 0.1, 0.4, 0.6, -0.3;
    B2 << 0.2, 0.8;
    C2 << -0.8, 1.0;
    problem.A = {A1, A2};
    problem.B = {B1, B2};
    problem.C = {C1, C2};
    return problem;
}

/// Random Metzler matrix with entries of moderate size.
inline Eigen::MatrixXd random_metzler(int n, RandomStream& rng, double diag_shift = 0.0) {
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            A(i, j) = i == j ? rng.next_gaussian() - diag_shift : std::abs(rng.next_gaussian());
    return A;
}

inline Eigen::MatrixXd random_nonnegative(int n, RandomStream& rng) {
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = std::abs(rng.next_gaussian());
    return A;
}

inline Eigen::MatrixXd random_matrix(int n, RandomStream& rng) {
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = rng.next_gaussian();
    return A;
}

} // namespace smjls::fixtures

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "smjls/execution.hpp"
#include "smjls/model.hpp"

namespace smjls {

/// State entries beyond this magnitude flag the path as diverged and
/// truncate it; unstable regimes are legitimate study targets, so this is a
/// flag rather than an error.
inline constexpr double kDivergenceThreshold = 1e300;

struct SamplePath {
    std::uint64_t seed = 0;
    std::vector<double> switch_times;        // t_0 = 0, strictly increasing
    std::vector<int> modes;                  // mode on [t_k, t_{k+1})
    std::vector<Eigen::MatrixXd> jumps;      // J_k applied at t_{k+1}
    std::vector<Eigen::VectorXd> discrete;   // x_d(k) = x(t_k)
    std::vector<double> grid;                // dense output times
    std::vector<Eigen::VectorXd> states;     // x at grid times
    bool diverged = false;
};

/// One seeded path of the switched system. Inter-switch flow is the exact
/// matrix exponential (segments are LTI), resets apply the sampled jump to
/// the left limit. Identical (model, arguments, seed) give bit-identical
/// paths.
SamplePath simulate_path(const SemiMarkovModel& model, const Eigen::VectorXd& x0, int mode0,
                         double horizon, double output_dt, std::uint64_t seed);

/// Which vector norm the ensemble statistics use; stability is norm
/// independent, but exact cross-checks against the moment flow want the
/// 1-norm, which is linear on the positive orthant.
enum class StatNorm { One, Two };

struct EnsembleStats {
    int path_count = 0;
    int diverged = 0;
    StatNorm norm = StatNorm::Two;
    std::vector<double> grid;
    std::vector<double> mean;     // E ||x(t)||^m per grid point
    std::vector<double> se;       // standard error of the mean
    std::vector<double> disc_mean; // E ||x_d(k)||^m, k = 0..k_max
    std::vector<double> disc_se;
};

/// Monte-Carlo estimate of E||x(t)||^m over an ensemble. Per-path seeds are
/// derived from base_seed; accumulation uses fixed path blocks reduced
/// pairwise, so the result is identical for any thread count. Diverged paths
/// are excluded from the statistics and counted.
EnsembleStats estimate_mean_norm(const SemiMarkovModel& model, const Eigen::VectorXd& x0, int mode0,
                                 int m, double horizon, double output_dt, int paths,
                                 std::uint64_t base_seed, int discrete_k_max = 20,
                                 Execution exec = Execution::Parallel, StatNorm norm = StatNorm::Two);

struct LiftedMomentStats {
    int path_count = 0;
    int diverged = 0;
    std::vector<Eigen::VectorXd> mean; // E[e_{sigma_k} kron x_d(k)^[m]], k = 0..k_max
    std::vector<Eigen::VectorXd> se;   // componentwise standard errors
};

/// Monte-Carlo estimate of the lifted discrete moment sequence, the sampled
/// counterpart of the exact recursion v_{k+1} = F v_k.
LiftedMomentStats estimate_lifted_moment(const SemiMarkovModel& model, const Eigen::VectorXd& x0,
                                         int mode0, int m, int k_max, int paths,
                                         std::uint64_t base_seed, Execution exec = Execution::Parallel);

} // namespace smjls

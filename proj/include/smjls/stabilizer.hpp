#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "smjls/execution.hpp"
#include "smjls/model.hpp"

namespace smjls {

/// Distance from the set of Metzler matrices: sum of the negative parts of
/// the off-diagonal entries. Zero iff the matrix is Metzler.
double metzler_distance(const Eigen::MatrixXd& A);

/// Output-feedback synthesis data: mode triples (A_i, B_i, C_i) with Metzler
/// A_i; the gains K_i and the generator off-diagonals are the free
/// parameters. The penalty weight gamma scales the positivity and rate
/// violations; q_bar, when set, additionally caps the off-diagonal rates.
struct SynthesisProblem {
    std::vector<Eigen::MatrixXd> A;
    std::vector<Eigen::MatrixXd> B;
    std::vector<Eigen::MatrixXd> C;
    double gamma = 1e5;
    std::optional<double> q_bar;
    int budget = 20000; // objective evaluations per optimizer run
    std::optional<Eigen::VectorXd> initial_guess;

    int mode_count() const { return static_cast<int>(A.size()); }
    int state_dim() const { return static_cast<int>(A.front().rows()); }
    int input_dim() const { return static_cast<int>(B.front().cols()); }
    int output_dim() const { return static_cast<int>(C.front().rows()); }
    /// gains first (column-major per mode), then off-diagonal rates row by row
    int parameter_count() const;
    void check() const; // throws ModelError on dimension problems
};

struct PenaltyBreakdown {
    double metzler = 0.0;    // sum of d(A_{K,i}, Metzler set)
    double q_negative = 0.0; // sum of negative parts of off-diagonal rates
    double q_cap = 0.0;      // sum of cap excesses (0 when q_bar unset)
    double total() const { return metzler + q_negative + q_cap; }
    /// All penalties below 1e-9: the closed loop is positive and Q is a
    /// valid (possibly capped) generator.
    bool feasible() const { return metzler < 1e-9 && q_negative < 1e-9 && q_cap < 1e-9; }
};

struct ObjectiveValue {
    double value = 0.0;            // eta + gamma * penalties
    double eta = 0.0;              // spectral abscissa term alone
    PenaltyBreakdown penalties;
    Eigen::VectorXd gradient;
    bool gradient_reliable = true; // false near a multiple rightmost eigenvalue
};

/// The penalized objective of the synthesis problem for m = 1. The
/// eta-gradient comes from eigenpair sensitivity of the rightmost simple
/// eigenvalue; penalty subgradients are piecewise constant.
class SynthesisObjective {
public:
    explicit SynthesisObjective(const SynthesisProblem& problem);

    ObjectiveValue operator()(const Eigen::VectorXd& x) const;

    Eigen::VectorXd pack(const std::vector<Eigen::MatrixXd>& K, const Eigen::MatrixXd& Q) const;
    void unpack(const Eigen::VectorXd& x, std::vector<Eigen::MatrixXd>& K, Eigen::MatrixXd& Q) const;

    const SynthesisProblem& problem() const { return problem_; }

private:
    SynthesisProblem problem_;
};

/// Generic objective for the gradient-sampling minimizer: value, gradient,
/// whether the gradient is trustworthy, and whether the point counts as
/// feasible for best-iterate tracking.
struct SampledValue {
    double value = 0.0;
    Eigen::VectorXd gradient;
    bool gradient_reliable = true;
    bool feasible = true;
};
using SampledObjective = std::function<SampledValue(const Eigen::VectorXd&)>;

struct GradientSamplingOptions {
    int budget = 20000;       // objective evaluations
    double eps0 = 1.0;        // initial sampling radius
    double nu0 = 1e-3;        // initial stationarity target
    double eps_min = 1e-6;    // stop once the radius shrinks below this
    double armijo_c = 1e-4;
    int max_backtracks = 40;
    double fd_step = 1e-7;    // finite-difference fallback step
    std::uint64_t seed = 0;
};

struct GradientSamplingResult {
    Eigen::VectorXd x;          // best feasible iterate if any, else best overall
    double value = 0.0;
    bool feasible = false;
    bool stalled = false;       // no descent found at the minimum radius
    int evaluations = 0;
    std::vector<double> trace;  // best-so-far objective per accepted iterate
};

/// Gradient sampling: at each iterate, gradients at the point and at d
/// uniform draws in the eps-ball feed a min-norm-element QP over their convex
/// hull; an Armijo backtracking step follows the negative of that element,
/// and eps, nu halve whenever the min-norm drops below nu.
GradientSamplingResult gradient_sampling_minimize(const SampledObjective& objective,
                                                  const Eigen::VectorXd& x0,
                                                  const GradientSamplingOptions& options);

/// Minimum-norm element of the convex hull of the columns of G, by projected
/// gradient on the simplex. Columns count is small (parameter count + 1).
Eigen::VectorXd min_norm_element(const Eigen::MatrixXd& G, double tol = 1e-10);

struct SynthesisResult {
    std::vector<Eigen::MatrixXd> K;
    Eigen::MatrixXd Q;
    double eta = 0.0;
    PenaltyBreakdown penalties;
    bool feasible = false;
    bool stalled = false;
    int evaluations = 0;
    int winning_run = -1;
    std::vector<double> trace; // winning run, best-so-far objective values
};

/// Multistart gradient sampling on the synthesis objective. Runs are seeded
/// deterministically from base_seed and executed in parallel; the reduction
/// prefers feasible results, then smaller eta.
SynthesisResult solve_problem1(const SynthesisProblem& problem, int multistart,
                               std::uint64_t base_seed, Execution exec = Execution::Parallel);

} // namespace smjls

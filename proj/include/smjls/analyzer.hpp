#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "smjls/execution.hpp"
#include "smjls/expectation.hpp"
#include "smjls/model.hpp"

namespace smjls {

enum class StabilityCriterion { SemiMarkovSchur, DiscreteSchur, MarkovHurwitz };
enum class Verdict { Stable, Unstable, Marginal };

std::string to_string(StabilityCriterion c);
std::string to_string(Verdict v);

/// Verdicts within this distance of the stability boundary are reported
/// marginal instead of guessed; the stability characterizations are strict
/// inequalities.
inline constexpr double kMarginalTol = 1e-6;

struct StabilityReport {
    StabilityCriterion criterion;
    int degree = 1;
    Eigen::MatrixXd lifted_matrix;
    double indicator = 0.0; // spectral radius (Schur) or abscissa (Hurwitz)
    double margin = 0.0;    // 1 - rho, or -eta
    Verdict verdict = Verdict::Marginal;
    double residual = 0.0;  // eigensolver residual of the achieving pair
};

struct SpectralPoint {
    double value;
    double residual;
};

/// Largest eigenvalue modulus via dense eigendecomposition. For nonnegative
/// input, checks that the radius is attained by a (numerically) real
/// eigenvalue, as Perron-Frobenius requires.
SpectralPoint spectral_radius(const Eigen::MatrixXd& M);

/// Largest eigenvalue real part via dense eigendecomposition.
SpectralPoint spectral_abscissa(const Eigen::MatrixXd& M);

/// Lifted stability matrix of the semi-Markov system: block (i, j) equals
/// p_{ji} * expected_lifted_transition(to=i, from=j); the column block is the
/// source mode. Blocks with p_{ji} = 0 stay zero.
Eigen::MatrixXd build_A_matrix(const SemiMarkovModel& model, int m, const QuadratureConfig& cfg = {});

/// Discrete counterpart: block (i, j) = p_{ji} sum_c w_c F_c^[m].
Eigen::MatrixXd build_F_matrix(const DiscreteModel& model, int m);

/// Markov counterpart: Q^T kron I + blockdiag of infinitesimal lifts.
Eigen::MatrixXd build_T_matrix(const MarkovModel& model, int m);

StabilityReport analyze_semi_markov(const SemiMarkovModel& model, int m, const QuadratureConfig& cfg = {});
StabilityReport analyze_discrete(const DiscreteModel& model, int m);
StabilityReport analyze_markov(const MarkovModel& model, int m);

/// Exact discretization x_d(k+1) = J_k exp(A h_k) x_d(k) of a semi-Markov
/// model whose dwell laws are purely atomic. Throws ModelError if any law
/// has a continuous part.
DiscreteModel discretize(const SemiMarkovModel& model);

/// Exact moment recursion v_{k+1} = F v_k from v_0 = e_{mode0} kron x0^[m].
std::vector<Eigen::VectorXd> propagate_discrete_moments(const Eigen::MatrixXd& F, int mode0,
                                                        const Eigen::VectorXd& x0, int m, int k_max);

/// Moment flow exp(T t) (e_{mode0} kron x0^[m]) on an ascending time grid
/// starting at 0.
std::vector<Eigen::VectorXd> propagate_continuous_moments(const Eigen::MatrixXd& T, int mode0,
                                                          const Eigen::VectorXd& x0, int m,
                                                          const std::vector<double>& t_grid);

struct SweepGrid {
    double lo;
    double hi;
    double step;
    std::vector<double> values() const;
};

struct SweepPoint {
    double value = 0.0;
    double indicator = 0.0;
    Verdict verdict = Verdict::Marginal;
    std::string error; // empty on success
    bool ok() const { return error.empty(); }
};

struct CrossingBracket {
    double lo;
    double hi;
};

struct SweepResult {
    int degree = 1;
    std::vector<SweepPoint> points;
    std::vector<CrossingBracket> crossings; // refined to width <= 1e-3
};

using ModelFactory = std::function<SemiMarkovModel(double)>;

/// Evaluates rho of the lifted matrix over the grid (points in parallel under
/// Execution::Parallel), records per-point failures without aborting, and
/// bisects each sign change of rho - 1 down to a bracket of width 1e-3.
SweepResult sweep(const ModelFactory& factory, const SweepGrid& grid, int m,
                  const QuadratureConfig& cfg = {}, Execution exec = Execution::Parallel);

} // namespace smjls

#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "smjls/model.hpp"

namespace smjls {

struct QuadratureConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-9;
    int max_subdivisions = 2048;
    int rule_order = 15; // Gauss-Legendre panel order
};

/// Nodes and weights of the order-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre polynomial.
struct GaussLegendreRule {
    explicit GaussLegendreRule(int order);
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// exp(A t) by Pade scaling-and-squaring. For Metzler A and t >= 0 the result
/// is nonnegative in exact arithmetic; roundoff negatives of magnitude up to
/// 1e-13 are clipped to 0, anything larger raises NumericalError.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A, double t = 1.0);

/// Adaptive composite Gauss-Legendre integration of a matrix-valued function
/// with entrywise max-norm error control. Panels are bisected until the local
/// estimate meets the tolerance share of the subinterval; throws AccuracyError
/// (carrying the best estimate and its bound) if max_subdivisions panels do
/// not suffice.
Eigen::MatrixXd integrate_matrix(const std::function<void(double, Eigen::MatrixXd&)>& f, int rows,
                                 int cols, double lo, double hi, const QuadratureConfig& cfg,
                                 double* error_bound = nullptr);

/// E[(J exp(A_from h))^[m] | transition from -> to]: the expectation factor of
/// the lifted stability matrix block, without the transition-probability
/// multiplier. Continuous dwell mass is integrated adaptively, atoms are added
/// exactly, and the jump mixture enters through its lifted mean.
Eigen::MatrixXd expected_lifted_transition(const SemiMarkovModel& model, int to_mode, int from_mode,
                                           int m, const QuadratureConfig& cfg = {});

/// Midpoint-rule oracle for expected_lifted_transition on a uniform grid of
/// grid_points per continuous interval, plus exact atoms. Test use only.
Eigen::MatrixXd brute_force_expectation(const SemiMarkovModel& model, int to_mode, int from_mode,
                                        int m, int grid_points);

} // namespace smjls

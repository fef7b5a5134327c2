#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace smjls {

/// Malformed or inconsistent model/problem input.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric computation failed (eigensolver breakdown, non-finite result, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An adaptive computation ran out of budget before reaching its tolerance.
/// Carries the best estimate obtained and the associated error bound.
class AccuracyError : public NumericalError {
public:
    AccuracyError(const std::string& what, Eigen::MatrixXd best, double bound)
        : NumericalError(what), best_estimate(std::move(best)), error_bound(bound) {}

    Eigen::MatrixXd best_estimate;
    double error_bound;
};

} // namespace smjls

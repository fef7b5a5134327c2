#pragma once

#include <Eigen/Core>
#include <map>
#include <vector>

namespace smjls {

/// Ordered basis of the degree-m monomials in n variables, with positive
/// weights w_alpha = sqrt(m!/prod_i alpha_i!) chosen so that the lifted
/// vector satisfies ||lift(x)||_2 = ||x||_2^m. Multi-indices are listed in
/// lexicographically descending order, so x_1^m sits at position 0.
///
/// Immutable after construction; safe to share across threads.
class MultiIndexBasis {
public:
    /// Throws std::invalid_argument if n < 1 or m < 1, or if the lift
    /// dimension binom(n+m-1, m) overflows or exceeds kMaxLiftSize.
    MultiIndexBasis(int n, int m);

    static constexpr long long kMaxLiftSize = 10000;

    /// binom(n+m-1, m) with overflow checking; throws on overflow.
    static long long lift_size(int n, int m);

    int dimension() const { return n_; }
    int degree() const { return m_; }
    int size() const { return static_cast<int>(indices_.size()); }

    const std::vector<int>& index(int k) const { return indices_[k]; }
    double weight(int k) const { return weights_[k]; }

    /// Position of a multi-index in the ordering; throws if |alpha| != m.
    int position(const std::vector<int>& alpha) const;

private:
    int n_;
    int m_;
    std::vector<std::vector<int>> indices_;
    std::vector<double> weights_;
    std::map<std::vector<int>, int> position_;
};

/// Weighted monomial lift: entry alpha equals w_alpha * prod_i x_i^alpha_i.
Eigen::VectorXd lift_vector(const Eigen::VectorXd& x, const MultiIndexBasis& basis);

/// The unique matrix P with lift(A x) = P lift(x) for all x, built by exact
/// polynomial expansion of prod_i ((Ax)_i)^alpha_i in the weighted basis.
Eigen::MatrixXd lift_matrix_power(const Eigen::MatrixXd& A, const MultiIndexBasis& basis);

/// The unique matrix L with d/dt lift(x) = L lift(x) along dx/dt = A x.
/// For m = 1 this is A itself; Metzler A gives Metzler L.
Eigen::MatrixXd lift_matrix_infinitesimal(const Eigen::MatrixXd& A, const MultiIndexBasis& basis);

/// Reusable expansion tables for lift_matrix_power. Building the tables
/// costs O(m n n_m); apply() then runs without position lookups, which
/// matters inside quadrature loops that lift one matrix per node.
class PowerLifter {
public:
    explicit PowerLifter(const MultiIndexBasis& basis);

    const MultiIndexBasis& basis() const { return basis_; }

    /// out must be n_m x n_m; writes lift_matrix_power(A) into it.
    void apply(const Eigen::MatrixXd& A, Eigen::MatrixXd& out) const;

private:
    MultiIndexBasis basis_;
    // bases of degree 0..m-1 and, for each, the position of index+e_j in
    // the next-degree basis
    std::vector<std::vector<std::vector<int>>> raise_;  // [d][k][j] -> position
    std::vector<int> level_size_;                       // |basis of degree d|
};

} // namespace smjls

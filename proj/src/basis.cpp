#include "smjls/basis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace smjls {

namespace {

// multi-indices of total degree m in n variables, lexicographically descending
void enumerate_indices(int n, int m, std::vector<std::vector<int>>& out) {
    std::vector<int> current(static_cast<std::size_t>(n), 0);
    // recursive descent: position p gets exponents m..0, remainder to the right
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == n - 1) {
            current[static_cast<std::size_t>(pos)] = remaining;
            out.push_back(current);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            current[static_cast<std::size_t>(pos)] = k;
            self(self, pos + 1, remaining - k);
        }
    };
    rec(rec, 0, m);
}

double multinomial(const std::vector<int>& alpha) {
    // (sum alpha)! / prod alpha_i!  as a running product of binomials; exact
    // for the sizes admitted by kMaxLiftSize
    double result = 1.0;
    int consumed = 0;
    for (int a : alpha) {
        for (int t = 1; t <= a; ++t) {
            result *= static_cast<double>(consumed + t) / static_cast<double>(t);
        }
        consumed += a;
    }
    return std::round(result);
}

} // namespace

long long MultiIndexBasis::lift_size(int n, int m) {
    if (n < 1 || m < 1) throw std::invalid_argument("basis requires n >= 1 and m >= 1");
    // binom(n+m-1, m) built incrementally with overflow guard
    long long result = 1;
    for (int k = 1; k <= m; ++k) {
        const long long numer = n - 1 + k;
        if (result > std::numeric_limits<long long>::max() / numer) {
            throw std::invalid_argument("lift dimension overflows: n=" + std::to_string(n) +
                                        " m=" + std::to_string(m));
        }
        result = result * numer / k;
    }
    return result;
}

MultiIndexBasis::MultiIndexBasis(int n, int m) : n_(n), m_(m) {
    const long long nm = lift_size(n, m);
    if (nm > kMaxLiftSize) {
        throw std::invalid_argument("lift dimension " + std::to_string(nm) + " exceeds limit " +
                                    std::to_string(kMaxLiftSize));
    }
    indices_.reserve(static_cast<std::size_t>(nm));
    enumerate_indices(n, m, indices_);
    weights_.reserve(indices_.size());
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        weights_.push_back(std::sqrt(multinomial(indices_[k])));
        position_.emplace(indices_[k], static_cast<int>(k));
    }
}

int MultiIndexBasis::position(const std::vector<int>& alpha) const {
    const auto it = position_.find(alpha);
    if (it == position_.end()) throw std::invalid_argument("multi-index not in basis");
    return it->second;
}

Eigen::VectorXd lift_vector(const Eigen::VectorXd& x, const MultiIndexBasis& basis) {
    if (x.size() != basis.dimension()) throw std::invalid_argument("lift_vector: dimension mismatch");
    Eigen::VectorXd out(basis.size());
    for (int k = 0; k < basis.size(); ++k) {
        double monomial = 1.0;
        const auto& alpha = basis.index(k);
        for (int i = 0; i < basis.dimension(); ++i) {
            for (int t = 0; t < alpha[static_cast<std::size_t>(i)]; ++t) monomial *= x(i);
        }
        out(k) = basis.weight(k) * monomial;
    }
    return out;
}

PowerLifter::PowerLifter(const MultiIndexBasis& basis) : basis_(basis) {
    const int n = basis_.dimension();
    const int m = basis_.degree();
    // degree-d enumerations share the ordering used by MultiIndexBasis;
    // degree 0 is the single empty monomial
    std::vector<std::vector<std::vector<int>>> levels(static_cast<std::size_t>(m) + 1);
    levels[0].push_back(std::vector<int>(static_cast<std::size_t>(n), 0));
    for (int d = 1; d <= m; ++d) enumerate_indices(n, d, levels[static_cast<std::size_t>(d)]);

    level_size_.resize(static_cast<std::size_t>(m) + 1);
    for (int d = 0; d <= m; ++d) level_size_[static_cast<std::size_t>(d)] =
        static_cast<int>(levels[static_cast<std::size_t>(d)].size());

    raise_.resize(static_cast<std::size_t>(m));
    for (int d = 0; d < m; ++d) {
        std::map<std::vector<int>, int> next_pos;
        const auto& next = levels[static_cast<std::size_t>(d) + 1];
        for (std::size_t k = 0; k < next.size(); ++k) next_pos.emplace(next[k], static_cast<int>(k));
        auto& table = raise_[static_cast<std::size_t>(d)];
        table.resize(levels[static_cast<std::size_t>(d)].size());
        for (std::size_t k = 0; k < levels[static_cast<std::size_t>(d)].size(); ++k) {
            table[k].resize(static_cast<std::size_t>(n));
            std::vector<int> bumped = levels[static_cast<std::size_t>(d)][k];
            for (int j = 0; j < n; ++j) {
                bumped[static_cast<std::size_t>(j)] += 1;
                table[k][static_cast<std::size_t>(j)] = next_pos.at(bumped);
                bumped[static_cast<std::size_t>(j)] -= 1;
            }
        }
    }
}

void PowerLifter::apply(const Eigen::MatrixXd& A, Eigen::MatrixXd& out) const {
    const int n = basis_.dimension();
    const int nm = basis_.size();
    if (A.rows() != n || A.cols() != n) throw std::invalid_argument("lift_matrix_power: dimension mismatch");
    if (out.rows() != nm || out.cols() != nm) throw std::invalid_argument("lift_matrix_power: bad output shape");

    std::vector<double> poly(static_cast<std::size_t>(nm));
    std::vector<double> next(static_cast<std::size_t>(nm));
    for (int row = 0; row < nm; ++row) {
        // expand prod_i ((A x)_i)^{beta_i} over the degree-m monomials
        poly.assign(poly.size(), 0.0);
        poly[0] = 1.0;
        int degree = 0;
        const auto& beta = basis_.index(row);
        for (int i = 0; i < n; ++i) {
            for (int rep = 0; rep < beta[static_cast<std::size_t>(i)]; ++rep) {
                const auto& table = raise_[static_cast<std::size_t>(degree)];
                std::fill(next.begin(), next.begin() + level_size_[static_cast<std::size_t>(degree) + 1], 0.0);
                for (int k = 0; k < level_size_[static_cast<std::size_t>(degree)]; ++k) {
                    const double c = poly[static_cast<std::size_t>(k)];
                    if (c == 0.0) continue;
                    for (int j = 0; j < n; ++j) {
                        next[static_cast<std::size_t>(table[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)])] +=
                            c * A(i, j);
                    }
                }
                std::swap(poly, next);
                ++degree;
            }
        }
        for (int col = 0; col < nm; ++col) {
            out(row, col) = basis_.weight(row) * poly[static_cast<std::size_t>(col)] / basis_.weight(col);
        }
    }
}

Eigen::MatrixXd lift_matrix_power(const Eigen::MatrixXd& A, const MultiIndexBasis& basis) {
    PowerLifter lifter(basis);
    Eigen::MatrixXd out(basis.size(), basis.size());
    lifter.apply(A, out);
    return out;
}

Eigen::MatrixXd lift_matrix_infinitesimal(const Eigen::MatrixXd& A, const MultiIndexBasis& basis) {
    const int n = basis.dimension();
    if (A.rows() != n || A.cols() != n)
        throw std::invalid_argument("lift_matrix_infinitesimal: dimension mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(basis.size(), basis.size());
    std::vector<int> alpha(static_cast<std::size_t>(n));
    for (int row = 0; row < basis.size(); ++row) {
        const auto& beta = basis.index(row);
        for (int i = 0; i < n; ++i) {
            if (beta[static_cast<std::size_t>(i)] == 0) continue;
            for (int j = 0; j < n; ++j) {
                if (A(i, j) == 0.0) continue;
                alpha = beta;
                alpha[static_cast<std::size_t>(i)] -= 1;
                alpha[static_cast<std::size_t>(j)] += 1;
                const int col = basis.position(alpha);
                out(row, col) += basis.weight(row) / basis.weight(col) *
                                 static_cast<double>(beta[static_cast<std::size_t>(i)]) * A(i, j);
            }
        }
    }
    return out;
}

} // namespace smjls

#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "smjls/basis.hpp"
#include "smjls/rng.hpp"

namespace smjls {

struct Atom {
    double time;
    double mass;
};

struct Interval {
    double lo;
    double hi;
};

struct UniformLaw {
    double lo;
    double hi;
};

/// Weibull density on (0, t_cut) with an atom of mass tail_mass at
/// t_cut = scale * (-log(tail_mass))^(1/shape), the point where the Weibull
/// CDF reaches 1 - tail_mass.
struct TruncatedWeibullLaw {
    double shape;
    double scale;
    double tail_mass;
    double t_cut() const;
};

struct DeterministicLaw {
    double value;
};

/// Exponential density on (0, cap) with the censored tail mass exp(-rate*cap)
/// as an atom at cap. Lets Markov dynamics be approximated inside the
/// bounded-dwell framework.
struct TruncatedExponentialLaw {
    double rate;
    double cap;
};

/// Purely atomic law putting mass 1/k on each of k stored samples.
struct EmpiricalLaw {
    std::vector<double> samples;
};

/// Mixed continuous+atomic probability law for inter-switch times,
/// supported on (0, support_max]. Immutable after construction.
class DwellLaw {
public:
    using Spec = std::variant<UniformLaw, TruncatedWeibullLaw, DeterministicLaw,
                              TruncatedExponentialLaw, EmpiricalLaw>;

    explicit DwellLaw(Spec spec);

    static DwellLaw uniform(double lo, double hi) { return DwellLaw(UniformLaw{lo, hi}); }
    static DwellLaw truncated_weibull(double shape, double scale, double tail_mass) {
        return DwellLaw(TruncatedWeibullLaw{shape, scale, tail_mass});
    }
    static DwellLaw deterministic(double value) { return DwellLaw(DeterministicLaw{value}); }
    static DwellLaw truncated_exponential(double rate, double cap) {
        return DwellLaw(TruncatedExponentialLaw{rate, cap});
    }
    static DwellLaw empirical(std::vector<double> samples) {
        return DwellLaw(EmpiricalLaw{std::move(samples)});
    }

    const Spec& spec() const { return spec_; }

    double support_max() const { return support_max_; }

    /// Right-continuous CDF including atom masses.
    double cdf(double t) const;

    /// Density of the continuous part (0 outside the continuous intervals).
    double density(double t) const;

    double continuous_mass() const { return continuous_mass_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::vector<Interval>& continuous_intervals() const { return intervals_; }
    bool is_atomic() const { return intervals_.empty(); }

    /// Inversion sampling of the continuous part; direct mass selection for
    /// atoms. Samples always lie in (0, support_max].
    double sample(RandomStream& rng) const;

private:
    Spec spec_;
    double support_max_ = 0.0;
    double continuous_mass_ = 0.0;
    std::vector<Atom> atoms_;
    std::vector<Interval> intervals_;
};

/// Finite mixture of reset matrices applied at switching instants.
struct JumpComponent {
    double weight;
    Eigen::MatrixXd matrix;
};

class JumpMixture {
public:
    explicit JumpMixture(std::vector<JumpComponent> components);

    static JumpMixture identity(int n);

    const std::vector<JumpComponent>& components() const { return components_; }

    /// Largest spectral norm over components (the stored bound R).
    double norm_bound() const { return norm_bound_; }

    bool is_identity() const;

    /// Direct mass selection.
    const Eigen::MatrixXd& sample(RandomStream& rng) const;

    /// sum_c w_c lift_matrix_power(J_c).
    Eigen::MatrixXd lifted_mean(const MultiIndexBasis& basis) const;

private:
    std::vector<JumpComponent> components_;
    double norm_bound_ = 0.0;
};

struct ValidationIssue {
    std::string location;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    std::string to_string() const;
};

/// Continuous-time positive semi-Markovian jump linear system: Metzler mode
/// matrices, an embedded mode chain with transition matrix P, and per-edge
/// dwell-time laws and jump mixtures. The Markov renewal kernel is stored in
/// factored form P(next | mode) x Law(dwell | edge) x Mixture(jump | edge),
/// with the jump independent of the dwell time given the edge; this covers
/// the worked examples and keeps expectation integrals one-dimensional.
class SemiMarkovModel {
public:
    using EdgeKey = std::pair<int, int>; // (from, to), 0-based

    SemiMarkovModel(std::vector<Eigen::MatrixXd> modes, Eigen::MatrixXd transition,
                    std::map<EdgeKey, DwellLaw> dwell, std::map<EdgeKey, JumpMixture> jumps);

    int state_dim() const { return n_; }
    int mode_count() const { return static_cast<int>(modes_.size()); }
    const Eigen::MatrixXd& mode(int i) const { return modes_[static_cast<std::size_t>(i)]; }
    const std::vector<Eigen::MatrixXd>& modes() const { return modes_; }
    const Eigen::MatrixXd& transition_matrix() const { return transition_; }

    bool has_edge(int from, int to) const;
    const DwellLaw& dwell(int from, int to) const;
    const JumpMixture& jump(int from, int to) const;
    const std::map<EdgeKey, DwellLaw>& dwell_laws() const { return dwell_; }
    const std::map<EdgeKey, JumpMixture>& jump_mixtures() const { return jumps_; }

    ValidationReport validate() const;

    /// Largest dwell support over edges (the bound T).
    double dwell_cap() const;

    /// Largest jump-norm bound over edges (the bound R).
    double jump_norm_bound() const;

    /// The system with every mode matrix shifted to A_i + alpha I; shares
    /// the switching law, so paths scale by exp(alpha t) pathwise.
    SemiMarkovModel shifted(double alpha) const;

    int sample_next_mode(int from, RandomStream& rng) const;

private:
    int n_;
    std::vector<Eigen::MatrixXd> modes_;
    Eigen::MatrixXd transition_;
    std::map<EdgeKey, DwellLaw> dwell_;
    std::map<EdgeKey, JumpMixture> jumps_;
};

/// Continuous-time positive Markovian jump linear system: Metzler modes and
/// a generator matrix Q (off-diagonals >= 0, zero row sums).
class MarkovModel {
public:
    MarkovModel(std::vector<Eigen::MatrixXd> modes, Eigen::MatrixXd generator);

    int state_dim() const { return n_; }
    int mode_count() const { return static_cast<int>(modes_.size()); }
    const Eigen::MatrixXd& mode(int i) const { return modes_[static_cast<std::size_t>(i)]; }
    const std::vector<Eigen::MatrixXd>& modes() const { return modes_; }
    const Eigen::MatrixXd& generator() const { return generator_; }

    ValidationReport validate() const;

    /// Embedded-chain representation with censored exponential dwells; the
    /// per-mode cap is cap_multiplier / rate, leaving an atom of mass
    /// exp(-cap_multiplier) at the cap. Modes with zero exit rate become
    /// identity self-loops with a deterministic dwell.
    SemiMarkovModel to_semi_markov(double cap_multiplier = 50.0) const;

private:
    int n_;
    std::vector<Eigen::MatrixXd> modes_;
    Eigen::MatrixXd generator_;
};

/// Discrete-time jump linear system x(k+1) = F_k x(k): an embedded mode
/// chain P plus a finite matrix mixture on each edge.
class DiscreteModel {
public:
    using EdgeKey = std::pair<int, int>;

    DiscreteModel(int state_dim, Eigen::MatrixXd transition, std::map<EdgeKey, JumpMixture> mixtures);

    int state_dim() const { return n_; }
    int mode_count() const { return static_cast<int>(transition_.rows()); }
    const Eigen::MatrixXd& transition_matrix() const { return transition_; }
    bool has_edge(int from, int to) const;
    const JumpMixture& mixture(int from, int to) const;
    const std::map<EdgeKey, JumpMixture>& mixtures() const { return mixtures_; }

    ValidationReport validate() const;

private:
    int n_;
    Eigen::MatrixXd transition_;
    std::map<EdgeKey, JumpMixture> mixtures_;
};

/// CDF convenience mirroring DwellLaw::cdf.
inline double dwell_cdf(const DwellLaw& law, double t) { return law.cdf(t); }

bool is_metzler(const Eigen::MatrixXd& A, double tol = 0.0);
bool is_nonnegative(const Eigen::MatrixXd& A, double tol = 0.0);

} // namespace smjls

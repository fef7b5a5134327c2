#include "smjls/model.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "smjls/errors.hpp"

namespace smjls {

namespace {

constexpr double kMassTol = 1e-12;

std::string edge_name(int from, int to) {
    // 1-based in diagnostics
    return "edge (" + std::to_string(from + 1) + " -> " + std::to_string(to + 1) + ")";
}

} // namespace

bool is_metzler(const Eigen::MatrixXd& A, double tol) {
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            if (i != j && A(i, j) < -tol) return false;
    return true;
}

bool is_nonnegative(const Eigen::MatrixXd& A, double tol) {
    return (A.array() >= -tol).all();
}

// ---------------------------------------------------------------------------
// DwellLaw
// ---------------------------------------------------------------------------

double TruncatedWeibullLaw::t_cut() const {
    return scale * std::pow(-std::log(tail_mass), 1.0 / shape);
}

DwellLaw::DwellLaw(Spec spec) : spec_(std::move(spec)) {
    struct Build {
        DwellLaw& law;
        void operator()(const UniformLaw& u) {
            if (!(u.lo >= 0.0) || !(u.hi > u.lo))
                throw ModelError("uniform dwell law requires 0 <= lo < hi");
            law.support_max_ = u.hi;
            law.continuous_mass_ = 1.0;
            law.intervals_.push_back({u.lo, u.hi});
        }
        void operator()(const TruncatedWeibullLaw& w) {
            if (!(w.shape > 0.0) || !(w.scale > 0.0) || !(w.tail_mass > 0.0) || !(w.tail_mass < 1.0))
                throw ModelError("truncated Weibull dwell law requires shape > 0, scale > 0, 0 < tail_mass < 1");
            const double cut = w.t_cut();
            law.support_max_ = cut;
            law.continuous_mass_ = 1.0 - w.tail_mass;
            law.intervals_.push_back({0.0, cut});
            law.atoms_.push_back({cut, w.tail_mass});
        }
        void operator()(const DeterministicLaw& d) {
            if (!(d.value > 0.0)) throw ModelError("deterministic dwell law requires value > 0");
            law.support_max_ = d.value;
            law.atoms_.push_back({d.value, 1.0});
        }
        void operator()(const TruncatedExponentialLaw& e) {
            if (!(e.rate > 0.0) || !(e.cap > 0.0))
                throw ModelError("truncated exponential dwell law requires rate > 0 and cap > 0");
            law.support_max_ = e.cap;
            const double tail = std::exp(-e.rate * e.cap);
            law.continuous_mass_ = 1.0 - tail;
            law.intervals_.push_back({0.0, e.cap});
            law.atoms_.push_back({e.cap, tail});
        }
        void operator()(const EmpiricalLaw& emp) {
            if (emp.samples.empty()) throw ModelError("empirical dwell law requires samples");
            std::vector<double> sorted = emp.samples;
            std::sort(sorted.begin(), sorted.end());
            if (!(sorted.front() > 0.0)) throw ModelError("empirical dwell samples must be positive");
            const double unit = 1.0 / static_cast<double>(sorted.size());
            for (std::size_t k = 0; k < sorted.size(); ++k) {
                if (!law.atoms_.empty() && law.atoms_.back().time == sorted[k])
                    law.atoms_.back().mass += unit;
                else
                    law.atoms_.push_back({sorted[k], unit});
            }
            law.support_max_ = sorted.back();
        }
    };
    std::visit(Build{*this}, spec_);

    double mass = continuous_mass_;
    for (const Atom& a : atoms_) mass += a.mass;
    if (std::abs(mass - 1.0) > kMassTol) throw ModelError("dwell law mass differs from 1");
}

double DwellLaw::cdf(double t) const {
    struct Cdf {
        double t;
        const DwellLaw& law;
        double operator()(const UniformLaw& u) const {
            if (t < u.lo) return 0.0;
            if (t >= u.hi) return 1.0;
            return (t - u.lo) / (u.hi - u.lo);
        }
        double operator()(const TruncatedWeibullLaw& w) const {
            if (t < 0.0) return 0.0;
            if (t >= w.t_cut()) return 1.0;
            return 1.0 - std::exp(-std::pow(t / w.scale, w.shape));
        }
        double operator()(const DeterministicLaw& d) const { return t >= d.value ? 1.0 : 0.0; }
        double operator()(const TruncatedExponentialLaw& e) const {
            if (t < 0.0) return 0.0;
            if (t >= e.cap) return 1.0;
            return 1.0 - std::exp(-e.rate * t);
        }
        double operator()(const EmpiricalLaw&) const {
            double acc = 0.0;
            for (const Atom& a : law.atoms_)
                if (a.time <= t) acc += a.mass;
            return acc;
        }
    };
    return std::visit(Cdf{t, *this}, spec_);
}

double DwellLaw::density(double t) const {
    struct Density {
        double t;
        double operator()(const UniformLaw& u) const {
            return (t >= u.lo && t <= u.hi) ? 1.0 / (u.hi - u.lo) : 0.0;
        }
        double operator()(const TruncatedWeibullLaw& w) const {
            if (t <= 0.0 || t >= w.t_cut()) return 0.0;
            const double z = t / w.scale;
            return w.shape / w.scale * std::pow(z, w.shape - 1.0) * std::exp(-std::pow(z, w.shape));
        }
        double operator()(const DeterministicLaw&) const { return 0.0; }
        double operator()(const TruncatedExponentialLaw& e) const {
            return (t > 0.0 && t < e.cap) ? e.rate * std::exp(-e.rate * t) : 0.0;
        }
        double operator()(const EmpiricalLaw&) const { return 0.0; }
    };
    return std::visit(Density{t}, spec_);
}

double DwellLaw::sample(RandomStream& rng) const {
    struct Sample {
        RandomStream& rng;
        const DwellLaw& law;
        double operator()(const UniformLaw& u) const {
            return u.lo + (u.hi - u.lo) * rng.next_unit_open();
        }
        double operator()(const TruncatedWeibullLaw& w) const {
            const double u = rng.next_unit_open();
            if (u < 1.0 - w.tail_mass)
                return w.scale * std::pow(-std::log1p(-u), 1.0 / w.shape);
            return w.t_cut();
        }
        double operator()(const DeterministicLaw& d) const {
            (void)rng;
            return d.value;
        }
        double operator()(const TruncatedExponentialLaw& e) const {
            const double u = rng.next_unit_open();
            if (u < 1.0 - std::exp(-e.rate * e.cap)) return -std::log1p(-u) / e.rate;
            return e.cap;
        }
        double operator()(const EmpiricalLaw&) const {
            const double u = rng.next_double();
            double acc = 0.0;
            for (const Atom& a : law.atoms_) {
                acc += a.mass;
                if (u < acc) return a.time;
            }
            return law.atoms_.back().time;
        }
    };
    return std::visit(Sample{rng, *this}, spec_);
}

// ---------------------------------------------------------------------------
// JumpMixture
// ---------------------------------------------------------------------------

JumpMixture::JumpMixture(std::vector<JumpComponent> components) : components_(std::move(components)) {
    if (components_.empty()) throw ModelError("jump mixture requires at least one component");
    const Eigen::Index n = components_.front().matrix.rows();
    double total = 0.0;
    for (const JumpComponent& c : components_) {
        if (c.weight < 0.0) throw ModelError("jump mixture weights must be nonnegative");
        if (c.matrix.rows() != n || c.matrix.cols() != n)
            throw ModelError("jump mixture components must be square with equal dimensions");
        total += c.weight;
        norm_bound_ = std::max(norm_bound_, c.matrix.jacobiSvd().singularValues()(0));
    }
    if (std::abs(total - 1.0) > kMassTol) throw ModelError("jump mixture weights must sum to 1");
}

JumpMixture JumpMixture::identity(int n) {
    return JumpMixture({JumpComponent{1.0, Eigen::MatrixXd::Identity(n, n)}});
}

bool JumpMixture::is_identity() const {
    return components_.size() == 1 &&
           components_.front().matrix.isIdentity(0.0);
}

const Eigen::MatrixXd& JumpMixture::sample(RandomStream& rng) const {
    if (components_.size() == 1) return components_.front().matrix;
    const double u = rng.next_double();
    double acc = 0.0;
    for (const JumpComponent& c : components_) {
        acc += c.weight;
        if (u < acc) return c.matrix;
    }
    return components_.back().matrix;
}

Eigen::MatrixXd JumpMixture::lifted_mean(const MultiIndexBasis& basis) const {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(basis.size(), basis.size());
    for (const JumpComponent& c : components_) acc += c.weight * lift_matrix_power(c.matrix, basis);
    return acc;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::string ValidationReport::to_string() const {
    if (ok()) return "valid";
    std::ostringstream os;
    for (const ValidationIssue& issue : issues) os << issue.location << ": " << issue.message << "\n";
    return os.str();
}

namespace {

void check_stochastic(const Eigen::MatrixXd& P, ValidationReport& report) {
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            if (P(i, j) < 0.0 || P(i, j) > 1.0)
                report.issues.push_back({"transition matrix",
                                         "entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                                             ") outside [0,1]"});
            row += P(i, j);
        }
        if (std::abs(row - 1.0) > 1e-9)
            report.issues.push_back({"transition matrix", "row " + std::to_string(i + 1) + " not stochastic"});
    }
}

} // namespace

// ---------------------------------------------------------------------------
// SemiMarkovModel
// ---------------------------------------------------------------------------

SemiMarkovModel::SemiMarkovModel(std::vector<Eigen::MatrixXd> modes, Eigen::MatrixXd transition,
                                 std::map<EdgeKey, DwellLaw> dwell, std::map<EdgeKey, JumpMixture> jumps)
    : modes_(std::move(modes)), transition_(std::move(transition)), dwell_(std::move(dwell)),
      jumps_(std::move(jumps)) {
    if (modes_.empty()) throw ModelError("model requires at least one mode");
    n_ = static_cast<int>(modes_.front().rows());
    for (const Eigen::MatrixXd& A : modes_)
        if (A.rows() != n_ || A.cols() != n_) throw ModelError("mode matrices must be square with equal dimensions");
    const int N = mode_count();
    if (transition_.rows() != N || transition_.cols() != N)
        throw ModelError("transition matrix dimension must equal the mode count");
}

bool SemiMarkovModel::has_edge(int from, int to) const { return transition_(from, to) > 0.0; }

const DwellLaw& SemiMarkovModel::dwell(int from, int to) const {
    const auto it = dwell_.find({from, to});
    if (it == dwell_.end()) throw ModelError("missing dwell law for " + edge_name(from, to));
    return it->second;
}

const JumpMixture& SemiMarkovModel::jump(int from, int to) const {
    const auto it = jumps_.find({from, to});
    if (it == jumps_.end()) throw ModelError("missing jump mixture for " + edge_name(from, to));
    return it->second;
}

ValidationReport SemiMarkovModel::validate() const {
    ValidationReport report;
    for (int i = 0; i < mode_count(); ++i) {
        if (!is_metzler(mode(i)))
            report.issues.push_back({"modes", "mode " + std::to_string(i + 1) + " not Metzler"});
        if (!mode(i).allFinite())
            report.issues.push_back({"modes", "mode " + std::to_string(i + 1) + " has non-finite entries"});
    }
    check_stochastic(transition_, report);
    for (int i = 0; i < mode_count(); ++i) {
        for (int j = 0; j < mode_count(); ++j) {
            if (!has_edge(i, j)) continue;
            if (dwell_.find({i, j}) == dwell_.end())
                report.issues.push_back({edge_name(i, j), "missing dwell law"});
            const auto jt = jumps_.find({i, j});
            if (jt == jumps_.end()) {
                report.issues.push_back({edge_name(i, j), "missing jump mixture"});
            } else {
                for (std::size_t c = 0; c < jt->second.components().size(); ++c) {
                    if (!is_nonnegative(jt->second.components()[c].matrix))
                        report.issues.push_back(
                            {edge_name(i, j), "jump component " + std::to_string(c + 1) + " has negative entries"});
                }
            }
        }
    }
    return report;
}

double SemiMarkovModel::dwell_cap() const {
    double cap = 0.0;
    for (const auto& [key, law] : dwell_) cap = std::max(cap, law.support_max());
    return cap;
}

double SemiMarkovModel::jump_norm_bound() const {
    double bound = 0.0;
    for (const auto& [key, mix] : jumps_) bound = std::max(bound, mix.norm_bound());
    return bound;
}

SemiMarkovModel SemiMarkovModel::shifted(double alpha) const {
    std::vector<Eigen::MatrixXd> shifted_modes;
    shifted_modes.reserve(modes_.size());
    for (const Eigen::MatrixXd& A : modes_)
        shifted_modes.push_back(A + alpha * Eigen::MatrixXd::Identity(n_, n_));
    return SemiMarkovModel(std::move(shifted_modes), transition_, dwell_, jumps_);
}

int SemiMarkovModel::sample_next_mode(int from, RandomStream& rng) const {
    const double u = rng.next_double();
    double acc = 0.0;
    int last = 0;
    for (int j = 0; j < mode_count(); ++j) {
        if (transition_(from, j) <= 0.0) continue;
        acc += transition_(from, j);
        last = j;
        if (u < acc) return j;
    }
    return last;
}

// ---------------------------------------------------------------------------
// MarkovModel
// ---------------------------------------------------------------------------

MarkovModel::MarkovModel(std::vector<Eigen::MatrixXd> modes, Eigen::MatrixXd generator)
    : modes_(std::move(modes)), generator_(std::move(generator)) {
    if (modes_.empty()) throw ModelError("model requires at least one mode");
    n_ = static_cast<int>(modes_.front().rows());
    for (const Eigen::MatrixXd& A : modes_)
        if (A.rows() != n_ || A.cols() != n_) throw ModelError("mode matrices must be square with equal dimensions");
    const int N = mode_count();
    if (generator_.rows() != N || generator_.cols() != N)
        throw ModelError("generator dimension must equal the mode count");
}

ValidationReport MarkovModel::validate() const {
    ValidationReport report;
    for (int i = 0; i < mode_count(); ++i)
        if (!is_metzler(mode(i)))
            report.issues.push_back({"modes", "mode " + std::to_string(i + 1) + " not Metzler"});
    for (int i = 0; i < mode_count(); ++i) {
        double row = 0.0;
        for (int j = 0; j < mode_count(); ++j) {
            if (i != j && generator_(i, j) < 0.0)
                report.issues.push_back({"generator", "negative off-diagonal entry (" + std::to_string(i + 1) +
                                                          "," + std::to_string(j + 1) + ")"});
            row += generator_(i, j);
        }
        if (std::abs(row) > 1e-12 * std::max(1.0, generator_.cwiseAbs().maxCoeff()))
            report.issues.push_back({"generator", "row " + std::to_string(i + 1) + " does not sum to zero"});
    }
    return report;
}

SemiMarkovModel MarkovModel::to_semi_markov(double cap_multiplier) const {
    const int N = mode_count();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
    std::map<SemiMarkovModel::EdgeKey, DwellLaw> dwell;
    std::map<SemiMarkovModel::EdgeKey, JumpMixture> jumps;
    double max_rate = 0.0;
    for (int i = 0; i < N; ++i) max_rate = std::max(max_rate, -generator_(i, i));
    const double fallback_dwell = max_rate > 0.0 ? cap_multiplier / max_rate : 1.0;
    for (int i = 0; i < N; ++i) {
        const double rate = -generator_(i, i);
        if (rate <= 0.0) {
            // absorbing mode: identity self-loop keeps the flow linear
            P(i, i) = 1.0;
            dwell.emplace(SemiMarkovModel::EdgeKey{i, i}, DwellLaw::deterministic(fallback_dwell));
            jumps.emplace(SemiMarkovModel::EdgeKey{i, i}, JumpMixture::identity(n_));
            continue;
        }
        for (int j = 0; j < N; ++j) {
            if (i == j || generator_(i, j) <= 0.0) continue;
            P(i, j) = generator_(i, j) / rate;
            dwell.emplace(SemiMarkovModel::EdgeKey{i, j},
                          DwellLaw::truncated_exponential(rate, cap_multiplier / rate));
            jumps.emplace(SemiMarkovModel::EdgeKey{i, j}, JumpMixture::identity(n_));
        }
    }
    return SemiMarkovModel(modes_, std::move(P), std::move(dwell), std::move(jumps));
}

// ---------------------------------------------------------------------------
// DiscreteModel
// ---------------------------------------------------------------------------

DiscreteModel::DiscreteModel(int state_dim, Eigen::MatrixXd transition,
                             std::map<EdgeKey, JumpMixture> mixtures)
    : n_(state_dim), transition_(std::move(transition)), mixtures_(std::move(mixtures)) {
    if (n_ < 1) throw ModelError("state dimension must be positive");
    if (transition_.rows() != transition_.cols()) throw ModelError("transition matrix must be square");
}

bool DiscreteModel::has_edge(int from, int to) const { return transition_(from, to) > 0.0; }

const JumpMixture& DiscreteModel::mixture(int from, int to) const {
    const auto it = mixtures_.find({from, to});
    if (it == mixtures_.end()) throw ModelError("missing mixture for " + edge_name(from, to));
    return it->second;
}

ValidationReport DiscreteModel::validate() const {
    ValidationReport report;
    check_stochastic(transition_, report);
    for (int i = 0; i < mode_count(); ++i) {
        for (int j = 0; j < mode_count(); ++j) {
            if (!has_edge(i, j)) continue;
            const auto it = mixtures_.find({i, j});
            if (it == mixtures_.end()) {
                report.issues.push_back({edge_name(i, j), "missing mixture"});
                continue;
            }
            for (std::size_t c = 0; c < it->second.components().size(); ++c)
                if (!is_nonnegative(it->second.components()[c].matrix))
                    report.issues.push_back(
                        {edge_name(i, j), "component " + std::to_string(c + 1) + " has negative entries"});
        }
    }
    return report;
}

} // namespace smjls

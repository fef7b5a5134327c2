#include "smjls/analyzer.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "smjls/errors.hpp"

namespace smjls {

std::string to_string(StabilityCriterion c) {
    switch (c) {
    case StabilityCriterion::SemiMarkovSchur: return "semi-markov-schur";
    case StabilityCriterion::DiscreteSchur: return "discrete-schur";
    case StabilityCriterion::MarkovHurwitz: return "markov-hurwitz";
    }
    return "?";
}

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    case Verdict::Marginal: return "marginal";
    }
    return "?";
}

namespace {

struct EigenData {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;
};

EigenData full_spectrum(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("spectrum: matrix must be square");
    if (!M.allFinite()) throw NumericalError("spectrum: non-finite matrix");
    Eigen::EigenSolver<Eigen::MatrixXd> solver(M, true);
    if (solver.info() != Eigen::Success) throw NumericalError("eigen solver failed to converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

double pair_residual(const Eigen::MatrixXd& M, const EigenData& ed, Eigen::Index k) {
    const Eigen::VectorXcd v = ed.vectors.col(k);
    return (M * v - ed.values(k) * v).norm() / v.norm();
}

Verdict classify(double margin) {
    if (std::abs(margin) < kMarginalTol) return Verdict::Marginal;
    return margin > 0.0 ? Verdict::Stable : Verdict::Unstable;
}

} // namespace

SpectralPoint spectral_radius(const Eigen::MatrixXd& M) {
    const EigenData ed = full_spectrum(M);
    double rho = 0.0;
    for (Eigen::Index k = 0; k < ed.values.size(); ++k) rho = std::max(rho, std::abs(ed.values(k)));
    const double tol = 1e-9 * std::max(1.0, rho);
    Eigen::Index best = -1;
    double best_imag = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < ed.values.size(); ++k) {
        if (std::abs(ed.values(k)) >= rho - tol && std::abs(ed.values(k).imag()) < best_imag) {
            best_imag = std::abs(ed.values(k).imag());
            best = k;
        }
    }
    if (is_nonnegative(M) && best_imag > tol)
        throw NumericalError("Perron root of a nonnegative matrix was not attained by a real eigenvalue");
    return {rho, pair_residual(M, ed, best)};
}

SpectralPoint spectral_abscissa(const Eigen::MatrixXd& M) {
    const EigenData ed = full_spectrum(M);
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < ed.values.size(); ++k)
        if (ed.values(k).real() > ed.values(best).real()) best = k;
    return {ed.values(best).real(), pair_residual(M, ed, best)};
}

Eigen::MatrixXd build_A_matrix(const SemiMarkovModel& model, int m, const QuadratureConfig& cfg) {
    const int N = model.mode_count();
    const int nm = static_cast<int>(MultiIndexBasis::lift_size(model.state_dim(), m));
    const Eigen::MatrixXd& P = model.transition_matrix();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nm * N, nm * N);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            if (P(j, i) <= 0.0) continue; // column block j is the source mode
            A.block(i * nm, j * nm, nm, nm) = P(j, i) * expected_lifted_transition(model, i, j, m, cfg);
        }
    }
    return A;
}

Eigen::MatrixXd build_F_matrix(const DiscreteModel& model, int m) {
    const int N = model.mode_count();
    const MultiIndexBasis basis(model.state_dim(), m);
    const int nm = basis.size();
    const Eigen::MatrixXd& P = model.transition_matrix();
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(nm * N, nm * N);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            if (P(j, i) <= 0.0) continue;
            F.block(i * nm, j * nm, nm, nm) = P(j, i) * model.mixture(j, i).lifted_mean(basis);
        }
    }
    return F;
}

Eigen::MatrixXd build_T_matrix(const MarkovModel& model, int m) {
    const int N = model.mode_count();
    const MultiIndexBasis basis(model.state_dim(), m);
    const int nm = basis.size();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(nm * N, nm * N);
    const Eigen::MatrixXd& Q = model.generator();
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            T.block(i * nm, j * nm, nm, nm) = Q(j, i) * Eigen::MatrixXd::Identity(nm, nm);
    for (int i = 0; i < N; ++i)
        T.block(i * nm, i * nm, nm, nm) += lift_matrix_infinitesimal(model.mode(i), basis);
    return T;
}

DiscreteModel discretize(const SemiMarkovModel& model) {
    std::map<DiscreteModel::EdgeKey, JumpMixture> mixtures;
    for (int i = 0; i < model.mode_count(); ++i) {
        for (int j = 0; j < model.mode_count(); ++j) {
            if (!model.has_edge(i, j)) continue;
            const DwellLaw& law = model.dwell(i, j);
            if (!law.is_atomic())
                throw ModelError("discretize requires purely atomic dwell laws");
            std::vector<JumpComponent> components;
            for (const Atom& atom : law.atoms()) {
                const Eigen::MatrixXd flow = matrix_exponential(model.mode(i), atom.time);
                for (const JumpComponent& c : model.jump(i, j).components())
                    components.push_back({atom.mass * c.weight, c.matrix * flow});
            }
            mixtures.emplace(DiscreteModel::EdgeKey{i, j}, JumpMixture(std::move(components)));
        }
    }
    return DiscreteModel(model.state_dim(), model.transition_matrix(), std::move(mixtures));
}

namespace {

StabilityReport make_schur_report(StabilityCriterion criterion, int m, Eigen::MatrixXd lifted) {
    const SpectralPoint sp = spectral_radius(lifted);
    StabilityReport report;
    report.criterion = criterion;
    report.degree = m;
    report.lifted_matrix = std::move(lifted);
    report.indicator = sp.value;
    report.margin = 1.0 - sp.value;
    report.verdict = classify(report.margin);
    report.residual = sp.residual;
    return report;
}

} // namespace

StabilityReport analyze_semi_markov(const SemiMarkovModel& model, int m, const QuadratureConfig& cfg) {
    return make_schur_report(StabilityCriterion::SemiMarkovSchur, m, build_A_matrix(model, m, cfg));
}

StabilityReport analyze_discrete(const DiscreteModel& model, int m) {
    return make_schur_report(StabilityCriterion::DiscreteSchur, m, build_F_matrix(model, m));
}

StabilityReport analyze_markov(const MarkovModel& model, int m) {
    Eigen::MatrixXd T = build_T_matrix(model, m);
    const SpectralPoint sp = spectral_abscissa(T);
    StabilityReport report;
    report.criterion = StabilityCriterion::MarkovHurwitz;
    report.degree = m;
    report.lifted_matrix = std::move(T);
    report.indicator = sp.value;
    report.margin = -sp.value;
    report.verdict = classify(report.margin);
    report.residual = sp.residual;
    return report;
}

namespace {

Eigen::VectorXd initial_moment(int mode0, const Eigen::VectorXd& x0, int m, Eigen::Index total_dim) {
    const MultiIndexBasis basis(static_cast<int>(x0.size()), m);
    if (total_dim % basis.size() != 0)
        throw std::invalid_argument("moment propagation: matrix dimension not a multiple of the lift size");
    const Eigen::Index N = total_dim / basis.size();
    if (mode0 < 0 || mode0 >= N) throw std::invalid_argument("moment propagation: mode index out of range");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(total_dim);
    v.segment(mode0 * basis.size(), basis.size()) = lift_vector(x0, basis);
    return v;
}

} // namespace

std::vector<Eigen::VectorXd> propagate_discrete_moments(const Eigen::MatrixXd& F, int mode0,
                                                        const Eigen::VectorXd& x0, int m, int k_max) {
    if ((x0.array() < 0.0).any()) throw std::invalid_argument("moment propagation requires x0 >= 0");
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(k_max) + 1);
    out.push_back(initial_moment(mode0, x0, m, F.rows()));
    for (int k = 0; k < k_max; ++k) out.push_back(F * out.back());
    return out;
}

std::vector<Eigen::VectorXd> propagate_continuous_moments(const Eigen::MatrixXd& T, int mode0,
                                                          const Eigen::VectorXd& x0, int m,
                                                          const std::vector<double>& t_grid) {
    if ((x0.array() < 0.0).any()) throw std::invalid_argument("moment propagation requires x0 >= 0");
    if (t_grid.empty() || t_grid.front() != 0.0)
        throw std::invalid_argument("moment propagation: time grid must start at 0");
    std::vector<Eigen::VectorXd> out;
    out.reserve(t_grid.size());
    out.push_back(initial_moment(mode0, x0, m, T.rows()));
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        const double dt = t_grid[k] - t_grid[k - 1];
        if (!(dt > 0.0)) throw std::invalid_argument("moment propagation: time grid must be ascending");
        out.push_back(matrix_exponential(T, dt) * out.back());
    }
    return out;
}

std::vector<double> SweepGrid::values() const {
    if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("sweep grid requires lo <= hi and step > 0");
    std::vector<double> out;
    const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) out.push_back(lo + k * step);
    return out;
}

SweepResult sweep(const ModelFactory& factory, const SweepGrid& grid, int m,
                  const QuadratureConfig& cfg, Execution exec) {
    SweepResult result;
    result.degree = m;
    const std::vector<double> values = grid.values();
    result.points.resize(values.size());

    const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::size_t k = 0; k < values.size(); ++k) {
        SweepPoint& point = result.points[k];
        point.value = values[k];
        try {
            const StabilityReport report = analyze_semi_markov(factory(values[k]), m, cfg);
            point.indicator = report.indicator;
            point.verdict = report.verdict;
        } catch (const std::exception& e) {
            point.error = e.what();
        }
    }

    // bisect each sign change of (rho - 1) between adjacent valid points
    auto indicator_at = [&](double value) {
        return analyze_semi_markov(factory(value), m, cfg).indicator;
    };
    for (std::size_t k = 0; k + 1 < result.points.size(); ++k) {
        const SweepPoint& a = result.points[k];
        const SweepPoint& b = result.points[k + 1];
        if (!a.ok() || !b.ok()) continue;
        const double fa = a.indicator - 1.0;
        const double fb = b.indicator - 1.0;
        if (fa == 0.0 || fa * fb >= 0.0) continue;
        double lo = a.value, hi = b.value;
        double flo = fa;
        try {
            while (hi - lo > 1e-3) {
                const double mid = 0.5 * (lo + hi);
                const double fmid = indicator_at(mid) - 1.0;
                if (flo * fmid <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fmid;
                }
            }
            result.crossings.push_back({lo, hi});
        } catch (const std::exception&) {
            result.crossings.push_back({a.value, b.value}); // unrefined
        }
    }
    return result;
}

} // namespace smjls

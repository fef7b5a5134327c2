// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Tolerances are fixed here, not configurable.

#include <unsupported/Eigen/MatrixFunctions>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <vector>

#include "fixtures.hpp"
#include "smjls/analyzer.hpp"
#include "smjls/simulator.hpp"
#include "smjls/stabilizer.hpp"

using namespace smjls;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, const std::string& label, bool pass, const std::string& detail,
            double seconds) {
    std::printf("%-4s criterion %2d: %s (%s; %.1f s)\n", pass ? "PASS" : "FAIL", criterion,
                label.c_str(), detail.c_str(), seconds);
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt17(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

// --- criterion 1: lift identities on random matrices ------------------------

void criterion_1() {
    const auto start = Clock::now();
    RandomStream rng(1001);
    double worst_norm = 0.0, worst_mult = 0.0, worst_semi = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 3);
        const int m = 1 + static_cast<int>(rng.next_u64() % 3);
        const MultiIndexBasis basis(n, m);

        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = rng.next_gaussian();
        const double norm_ref = std::pow(x.norm(), m);
        worst_norm = std::max(worst_norm,
                              std::abs(lift_vector(x, basis).norm() - norm_ref) / std::max(1e-30, norm_ref));

        const Eigen::MatrixXd A = fixtures::random_matrix(n, rng);
        const Eigen::MatrixXd B = fixtures::random_matrix(n, rng);
        const Eigen::MatrixXd prod = lift_matrix_power(A, basis) * lift_matrix_power(B, basis);
        const Eigen::MatrixXd direct = lift_matrix_power(A * B, basis);
        worst_mult = std::max(worst_mult, (prod - direct).norm() / std::max(1e-30, direct.norm()));

        const Eigen::MatrixXd M = fixtures::random_metzler(n, rng, 1.0);
        const double t = 0.1 + rng.next_double();
        const Eigen::MatrixXd semi_lhs = (lift_matrix_infinitesimal(M, basis) * t).exp();
        const Eigen::MatrixXd semi_rhs = lift_matrix_power(Eigen::MatrixXd((M * t).exp()), basis);
        worst_semi = std::max(worst_semi, (semi_lhs - semi_rhs).norm() / std::max(1e-30, semi_rhs.norm()));
    }
    const double elapsed = seconds_since(start);
    const bool pass =
        worst_norm <= 1e-13 && worst_mult <= 1e-11 && worst_semi <= 1e-8 && elapsed < 10.0;
    std::ostringstream detail;
    detail << "norm rel " << worst_norm << ", mult rel " << worst_mult << ", semigroup rel "
           << worst_semi;
    report(1, "lift identities on 200 random matrices", pass, detail.str(), elapsed);
}

// --- criterion 2: stability boundaries of the worked example ----------------

void criterion_2() {
    const auto start = Clock::now();
    const ModelFactory factory = [](double a) { return fixtures::controller_failure_model(a); };
    const SweepGrid grid{0.8, 1.2, 0.01};

    const SweepResult first = sweep(factory, grid, 1);
    const SweepResult second = sweep(factory, grid, 2);
    const double elapsed = seconds_since(start);

    bool pass = first.crossings.size() == 1 && second.crossings.size() == 1 && elapsed < 30.0;
    std::ostringstream detail;
    if (first.crossings.size() == 1 && second.crossings.size() == 1) {
        const CrossingBracket b1 = first.crossings.front();
        const CrossingBracket b2 = second.crossings.front();
        pass = pass && b1.lo >= 1.030 && b1.hi <= 1.040 && b2.lo >= 0.903 && b2.hi <= 0.913;
        detail << "m=1 boundary in [" << b1.lo << ", " << b1.hi << "], m=2 in [" << b2.lo << ", "
               << b2.hi << "]";
    } else {
        detail << "expected exactly one crossing per degree";
    }
    report(2, "first-mean and mean-square stability boundaries", pass, detail.str(), elapsed);
}

// --- criterion 3: adaptive expectation vs midpoint oracle -------------------

void criterion_3() {
    const auto start = Clock::now();
    const SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    double worst = 0.0;
    for (int m : {1, 2}) {
        for (auto [to, from] : {std::pair{0, 1}, std::pair{1, 0}}) {
            const Eigen::MatrixXd adaptive = expected_lifted_transition(model, to, from, m);
            const Eigen::MatrixXd brute = brute_force_expectation(model, to, from, m, 100000);
            const double scale = std::max(1.0, brute.cwiseAbs().maxCoeff());
            worst = std::max(worst, (adaptive - brute).cwiseAbs().maxCoeff() / scale);
        }
    }
    const double elapsed = seconds_since(start);
    const bool pass = worst <= 1e-6;
    report(3, "expectation blocks vs 1e5-point midpoint oracle", pass,
           "worst scaled deviation " + fmt17(worst), elapsed);
}

// --- criterion 4: reported spectral abscissas of the synthesis designs ------

void criterion_4() {
    const auto start = Clock::now();
    const SynthesisProblem problem = fixtures::two_mode_synthesis();
    auto closed = [&](double k1, double k2) {
        return std::vector<Eigen::MatrixXd>{problem.A[0] + problem.B[0] * k1 * problem.C[0],
                                            problem.A[1] + problem.B[1] * k2 * problem.C[1]};
    };
    Eigen::MatrixXd Q1(2, 2), Q2(2, 2);
    Q1 << -2068.3, 2068.3, 3123.1, -3123.1;
    Q2 << -1.9997, 1.9997, 1.9817, -1.9817;
    const std::vector<Eigen::MatrixXd> loop1 = closed(-3.3333, -2.0000);
    const std::vector<Eigen::MatrixXd> loop2 = closed(-3.3308, -1.9998);
    bool metzler = true;
    for (const Eigen::MatrixXd& A : loop1) metzler = metzler && is_metzler(A);
    for (const Eigen::MatrixXd& A : loop2) metzler = metzler && is_metzler(A);
    const double eta1 = analyze_markov(MarkovModel(loop1, Q1), 1).indicator;
    const double eta2 = analyze_markov(MarkovModel(loop2, Q2), 1).indicator;
    const double elapsed = seconds_since(start);
    const bool pass = metzler && std::abs(eta1 - (-0.1936)) <= 2e-3 &&
                      std::abs(eta2 - (-0.02251)) <= 2e-3 && elapsed < 1.0;
    std::ostringstream detail;
    detail << "eta1 " << eta1 << ", eta2 " << eta2 << (metzler ? ", closed loops Metzler" : ", NOT Metzler");
    report(4, "spectral abscissas of the two reported designs", pass, detail.str(), elapsed);
}

// --- criterion 5 + determinism artifacts -------------------------------------

std::string lifted_moment_artifact(const LiftedMomentStats& stats) {
    std::ostringstream csv;
    csv << "k,component,mean,stderr\n";
    for (std::size_t k = 0; k < stats.mean.size(); ++k)
        for (Eigen::Index c = 0; c < stats.mean[k].size(); ++c)
            csv << k << "," << c << "," << fmt17(stats.mean[k](c)) << "," << fmt17(stats.se[k](c))
                << "\n";
    return csv.str();
}

LiftedMomentStats criterion_5_run(Execution exec) {
    const SemiMarkovModel model = fixtures::controller_failure_model(0.85);
    return estimate_lifted_moment(model, Eigen::VectorXd::Ones(2), 0, 1, 10, 100000, 20250501, exec);
}

void criterion_5(std::string& artifact) {
    const auto start = Clock::now();
    const SemiMarkovModel model = fixtures::controller_failure_model(0.85);
    const Eigen::MatrixXd A1 = build_A_matrix(model, 1);
    const auto exact = propagate_discrete_moments(A1, 0, Eigen::VectorXd::Ones(2), 1, 10);
    const LiftedMomentStats stats = criterion_5_run(Execution::Parallel);
    artifact = lifted_moment_artifact(stats);

    double worst_z = 0.0;
    bool pass = true;
    for (int k = 0; k <= 10; ++k) {
        const Eigen::VectorXd& mean = stats.mean[static_cast<std::size_t>(k)];
        const Eigen::VectorXd& se = stats.se[static_cast<std::size_t>(k)];
        const Eigen::VectorXd& ref = exact[static_cast<std::size_t>(k)];
        for (Eigen::Index c = 0; c < mean.size(); ++c) {
            if (se(c) > 0.0)
                worst_z = std::max(worst_z, std::abs(mean(c) - ref(c)) / se(c));
            else if (std::abs(mean(c) - ref(c)) > 1e-12)
                pass = false;
        }
    }
    const double elapsed = seconds_since(start);
    pass = pass && worst_z <= 4.0 && elapsed < 60.0;
    report(5, "monte-carlo lifted moments vs exact recursion (1e5 paths)", pass,
           "worst |z| = " + fmt17(worst_z), elapsed);
}

// --- criterion 6 + determinism artifacts -------------------------------------

std::string ensemble_artifact(const EnsembleStats& stats) {
    std::ostringstream csv;
    csv << "t,mean,stderr\n";
    for (std::size_t k = 0; k < stats.grid.size(); ++k)
        csv << fmt17(stats.grid[k]) << "," << fmt17(stats.mean[k]) << "," << fmt17(stats.se[k]) << "\n";
    return csv.str();
}

MarkovModel criterion_6_model() {
    Eigen::MatrixXd A1(2, 2), A2(2, 2), Q(2, 2);
    A1 << -2.0, 0.2, 0.1, -2.3;
    A2 << 0.4, 0.3, 0.2, -0.5;
    Q << -1.2, 1.2, 2.0, -2.0;
    return MarkovModel({A1, A2}, Q);
}

EnsembleStats criterion_6_run(Execution exec) {
    const SemiMarkovModel semi = criterion_6_model().to_semi_markov();
    // grid of 10 points: t = 0, 0.3, ..., 2.7
    return estimate_mean_norm(semi, Eigen::VectorXd::Ones(2), 0, 1, 2.7, 0.3, 100000, 60606, 0, exec,
                              StatNorm::One);
}

void criterion_6(std::string& artifact) {
    const auto start = Clock::now();
    const EnsembleStats stats = criterion_6_run(Execution::Parallel);
    artifact = ensemble_artifact(stats);
    const Eigen::MatrixXd T = build_T_matrix(criterion_6_model(), 1);
    const auto flow = propagate_continuous_moments(T, 0, Eigen::VectorXd::Ones(2), 1, stats.grid);
    double worst_z = 0.0;
    bool pass = stats.grid.size() == 10;
    for (std::size_t k = 1; k < stats.grid.size(); ++k) {
        const double expected = flow[k].lpNorm<1>();
        if (stats.se[k] > 0.0)
            worst_z = std::max(worst_z, std::abs(stats.mean[k] - expected) / stats.se[k]);
        else if (std::abs(stats.mean[k] - expected) > 1e-12)
            pass = false;
    }
    const double elapsed = seconds_since(start);
    pass = pass && worst_z <= 3.0;
    report(6, "markov ensemble mean vs moment flow (1e5 paths)", pass,
           "worst |z| = " + fmt17(worst_z) + " over 10 grid points", elapsed);
}

// --- criterion 7: decay iff Schur, random discrete models -------------------

void criterion_7() {
    const auto start = Clock::now();
    RandomStream rng(7007);
    int checked = 0;
    bool pass = true;
    while (checked < 20) {
        const int N = 2 + static_cast<int>(rng.next_u64() % 2);
        const int n = 2;
        const int m = 1 + static_cast<int>(rng.next_u64() % 2);
        const double scale = 0.25 + 1.3 * rng.next_double();
        Eigen::MatrixXd P(N, N);
        for (int i = 0; i < N; ++i) {
            double row = 0.0;
            for (int j = 0; j < N; ++j) {
                P(i, j) = 0.1 + rng.next_double();
                row += P(i, j);
            }
            P.row(i) /= row;
        }
        std::map<DiscreteModel::EdgeKey, JumpMixture> mixtures;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                Eigen::MatrixXd F(n, n);
                for (int r = 0; r < n; ++r)
                    for (int c = 0; c < n; ++c) F(r, c) = scale * (0.05 + rng.next_double());
                mixtures.emplace(DiscreteModel::EdgeKey{i, j}, JumpMixture({{1.0, F}}));
            }
        const DiscreteModel model(n, P, std::move(mixtures));
        const Eigen::MatrixXd F = build_F_matrix(model, m);
        const double rho = spectral_radius(F).value;
        if (std::abs(rho - 1.0) < 0.02) continue;
        ++checked;
        const auto moments = propagate_discrete_moments(F, 0, Eigen::VectorXd::Ones(n), m, 200);
        const double rate =
            (std::log(moments[200].lpNorm<1>()) - std::log(moments[50].lpNorm<1>())) / 150.0;
        if ((rate < 0.0) != (rho < 1.0)) pass = false;
    }
    report(7, "moment decay iff Schur radius < 1 on 20 random discrete models", pass,
           pass ? "all verdicts agree" : "verdict mismatch", seconds_since(start));
}

// --- criterion 8: strict monotonicity under diagonal shifts ------------------

void criterion_8() {
    const auto start = Clock::now();
    const SemiMarkovModel model = fixtures::controller_failure_model(1.0);
    const double rho = analyze_semi_markov(model, 1).indicator;
    const double rho_shift = analyze_semi_markov(model.shifted(0.1), 1).indicator;
    const bool pass = rho_shift - rho >= 1e-4;
    report(8, "radius strictly grows under a +0.1 diagonal shift", pass,
           "rho " + fmt17(rho) + " -> " + fmt17(rho_shift), seconds_since(start));
}

// --- criterion 9 + artifacts --------------------------------------------------

std::string synthesis_artifact(const SynthesisResult& result) {
    std::ostringstream out;
    out << "eta=" << fmt17(result.eta) << "\nfeasible=" << result.feasible
        << "\nwinning_run=" << result.winning_run << "\n";
    for (const Eigen::MatrixXd& K : result.K)
        for (Eigen::Index r = 0; r < K.rows(); ++r)
            for (Eigen::Index c = 0; c < K.cols(); ++c) out << "K," << fmt17(K(r, c)) << "\n";
    for (Eigen::Index r = 0; r < result.Q.rows(); ++r)
        for (Eigen::Index c = 0; c < result.Q.cols(); ++c) out << "Q," << fmt17(result.Q(r, c)) << "\n";
    return out.str();
}

SynthesisResult criterion_9_run(bool capped) {
    SynthesisProblem problem = fixtures::two_mode_synthesis();
    problem.budget = 12000;
    if (capped) problem.q_bar = 2.0;
    return solve_problem1(problem, 20, 90901);
}

void criterion_9(std::string& artifact) {
    const auto start = Clock::now();
    const SynthesisResult unconstrained = criterion_9_run(false);
    const SynthesisResult capped = criterion_9_run(true);
    artifact = synthesis_artifact(unconstrained) + synthesis_artifact(capped);
    const double elapsed = seconds_since(start);

    double max_q = 0.0;
    for (Eigen::Index r = 0; r < capped.Q.rows(); ++r)
        for (Eigen::Index c = 0; c < capped.Q.cols(); ++c)
            if (r != c) max_q = std::max(max_q, capped.Q(r, c));

    const bool pass = unconstrained.feasible && unconstrained.eta <= -0.15 && capped.feasible &&
                      capped.eta < 0.0 && max_q <= 2.0 + 1e-9 && elapsed < 300.0;
    std::ostringstream detail;
    detail << "eta " << unconstrained.eta << " (unconstrained), " << capped.eta
           << " (capped, max rate " << max_q << ")";
    report(9, "multistart synthesis: feasible designs at both settings", pass, detail.str(), elapsed);
}

// --- criterion 10: determinism ------------------------------------------------

void criterion_10(const std::string& art5, const std::string& art6, const std::string& art9) {
    const auto start = Clock::now();
    const std::string rerun5 = lifted_moment_artifact(criterion_5_run(Execution::Parallel));
    const std::string serial5 = lifted_moment_artifact(criterion_5_run(Execution::Serial));
    const std::string rerun6 = ensemble_artifact(criterion_6_run(Execution::Parallel));
    const std::string serial6 = ensemble_artifact(criterion_6_run(Execution::Serial));
    const std::string rerun9 =
        synthesis_artifact(criterion_9_run(false)) + synthesis_artifact(criterion_9_run(true));
    const bool pass = art5 == rerun5 && art5 == serial5 && art6 == rerun6 && art6 == serial6 &&
                      art9 == rerun9;
    std::ostringstream detail;
    detail << "rerun" << (art5 == rerun5 && art6 == rerun6 && art9 == rerun9 ? " identical" : " DIFFERS")
           << ", serial vs parallel" << (art5 == serial5 && art6 == serial6 ? " identical" : " DIFFERS");
    report(10, "fixed seeds reproduce identical artifacts", pass, detail.str(), seconds_since(start));
}

} // namespace

int main() {
    std::string art5, art6, art9;
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5(art5);
    criterion_6(art6);
    criterion_7();
    criterion_8();
    criterion_9(art9);
    criterion_10(art5, art6, art9);
    if (failures != 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}

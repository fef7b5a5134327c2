#include "smjls/stabilizer.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "smjls/errors.hpp"
#include "smjls/rng.hpp"

namespace smjls {

double metzler_distance(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("metzler_distance: matrix must be square");
    double d = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            if (i != j && A(i, j) < 0.0) d -= A(i, j);
    return d;
}

int SynthesisProblem::parameter_count() const {
    const int N = mode_count();
    return N * input_dim() * output_dim() + N * (N - 1);
}

void SynthesisProblem::check() const {
    if (A.empty() || B.size() != A.size() || C.size() != A.size())
        throw ModelError("synthesis problem requires matching A, B, C triples");
    const int n = state_dim(), nu = input_dim(), ny = output_dim();
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (A[i].rows() != n || A[i].cols() != n || B[i].rows() != n || B[i].cols() != nu ||
            C[i].rows() != ny || C[i].cols() != n)
            throw ModelError("synthesis problem: inconsistent dimensions in triple " + std::to_string(i + 1));
        if (!is_metzler(A[i]))
            throw ModelError("synthesis problem: A matrix " + std::to_string(i + 1) + " is not Metzler");
    }
    if (!(gamma > 0.0)) throw ModelError("synthesis problem: gamma must be positive");
    if (q_bar && !(*q_bar > 0.0)) throw ModelError("synthesis problem: q_bar must be positive");
    if (initial_guess && initial_guess->size() != parameter_count())
        throw ModelError("synthesis problem: initial guess has wrong length");
}

SynthesisObjective::SynthesisObjective(const SynthesisProblem& problem) : problem_(problem) {
    problem_.check();
}

Eigen::VectorXd SynthesisObjective::pack(const std::vector<Eigen::MatrixXd>& K,
                                         const Eigen::MatrixXd& Q) const {
    const int N = problem_.mode_count();
    Eigen::VectorXd x(problem_.parameter_count());
    Eigen::Index at = 0;
    for (int i = 0; i < N; ++i)
        for (Eigen::Index c = 0; c < K[static_cast<std::size_t>(i)].cols(); ++c)
            for (Eigen::Index r = 0; r < K[static_cast<std::size_t>(i)].rows(); ++r)
                x(at++) = K[static_cast<std::size_t>(i)](r, c);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (i != j) x(at++) = Q(i, j);
    return x;
}

void SynthesisObjective::unpack(const Eigen::VectorXd& x, std::vector<Eigen::MatrixXd>& K,
                                Eigen::MatrixXd& Q) const {
    const int N = problem_.mode_count();
    const int nu = problem_.input_dim(), ny = problem_.output_dim();
    K.assign(static_cast<std::size_t>(N), Eigen::MatrixXd(nu, ny));
    Eigen::Index at = 0;
    for (int i = 0; i < N; ++i)
        for (int c = 0; c < ny; ++c)
            for (int r = 0; r < nu; ++r) K[static_cast<std::size_t>(i)](r, c) = x(at++);
    // diagonal closed by row sums, so Q is a generator whenever the
    // off-diagonals are nonnegative
    Q = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) {
        double row = 0.0;
        for (int j = 0; j < N; ++j) {
            if (i == j) continue;
            Q(i, j) = x(at++);
            row += Q(i, j);
        }
        Q(i, i) = -row;
    }
}

namespace {

struct RightmostPair {
    std::complex<double> lambda;
    Eigen::VectorXcd right;
    Eigen::VectorXcd left;
    bool simple; // treat a complex-conjugate pair as simple
};

RightmostPair rightmost_eigenpair(const Eigen::MatrixXd& T) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(T, true);
    if (solver.info() != Eigen::Success) throw NumericalError("eigen solver failed to converge");
    const Eigen::VectorXcd values = solver.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < values.size(); ++k)
        if (values(k).real() > values(best).real()) best = k;

    // The rightmost eigenvalue counts as multiple when any eigenvalue other
    // than its complex conjugate has real part within 1e-6. A conjugate pair
    // moves jointly under real perturbations, so it stays differentiable.
    bool simple = true;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (k == best) continue;
        const bool conjugate_partner =
            std::abs(values(best).imag()) > 0.0 &&
            std::abs(values(k).imag() + values(best).imag()) <=
                1e-9 * std::max(1.0, std::abs(values(best).imag()));
        if (values(best).real() - values(k).real() < 1e-6 && !conjugate_partner) simple = false;
    }

    Eigen::EigenSolver<Eigen::MatrixXd> adjoint_solver(T.transpose(), true);
    if (adjoint_solver.info() != Eigen::Success) throw NumericalError("eigen solver failed to converge");
    const Eigen::VectorXcd left_values = adjoint_solver.eigenvalues();
    Eigen::Index match = 0;
    const std::complex<double> target = std::conj(values(best));
    for (Eigen::Index k = 1; k < left_values.size(); ++k)
        if (std::abs(left_values(k) - target) < std::abs(left_values(match) - target)) match = k;

    RightmostPair pair;
    pair.lambda = values(best);
    pair.right = solver.eigenvectors().col(best);
    pair.left = adjoint_solver.eigenvectors().col(match);
    const std::complex<double> uv = pair.left.dot(pair.right);
    // a vanishing left-right overlap signals a defective eigenvalue
    pair.simple = simple && std::abs(uv) >= 1e-10 * pair.left.norm() * pair.right.norm();
    return pair;
}

} // namespace

ObjectiveValue SynthesisObjective::operator()(const Eigen::VectorXd& x) const {
    const int N = problem_.mode_count();
    const int n = problem_.state_dim();
    const int nu = problem_.input_dim(), ny = problem_.output_dim();

    std::vector<Eigen::MatrixXd> K;
    Eigen::MatrixXd Q;
    unpack(x, K, Q);

    std::vector<Eigen::MatrixXd> closed(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i)
        closed[static_cast<std::size_t>(i)] =
            problem_.A[static_cast<std::size_t>(i)] +
            problem_.B[static_cast<std::size_t>(i)] * K[static_cast<std::size_t>(i)] * problem_.C[static_cast<std::size_t>(i)];

    // T_1 = Q^T kron I_n + blockdiag(A_{K,i})
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n * N, n * N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            T.block(i * n, j * n, n, n) = Q(j, i) * Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < N; ++i) T.block(i * n, i * n, n, n) += closed[static_cast<std::size_t>(i)];

    const RightmostPair pair = rightmost_eigenpair(T);

    ObjectiveValue out;
    out.eta = pair.lambda.real();
    out.gradient_reliable = pair.simple;

    for (int i = 0; i < N; ++i) out.penalties.metzler += metzler_distance(closed[static_cast<std::size_t>(i)]);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (i != j) {
                out.penalties.q_negative += std::max(-Q(i, j), 0.0);
                if (problem_.q_bar) out.penalties.q_cap += std::max(Q(i, j) - *problem_.q_bar, 0.0);
            }
    out.value = out.eta + problem_.gamma * out.penalties.total();

    // eta gradient by eigenpair sensitivity: d lambda = u^H dT v / (u^H v)
    out.gradient = Eigen::VectorXd::Zero(x.size());
    const std::complex<double> uv = pair.left.dot(pair.right);
    Eigen::Index at = 0;
    for (int i = 0; i < N; ++i) {
        const Eigen::VectorXcd ui = pair.left.segment(i * n, n);
        const Eigen::VectorXcd vi = pair.right.segment(i * n, n);
        const Eigen::VectorXcd bu = problem_.B[static_cast<std::size_t>(i)].transpose() * ui.conjugate();
        const Eigen::VectorXcd cv = problem_.C[static_cast<std::size_t>(i)] * vi;
        for (int c = 0; c < ny; ++c)
            for (int r = 0; r < nu; ++r) out.gradient(at++) = (bu(r) * cv(c) / uv).real();
    }
    for (int i = 0; i < N; ++i) {
        const Eigen::VectorXcd ui = pair.left.segment(i * n, n);
        for (int j = 0; j < N; ++j) {
            if (i == j) continue;
            // q_{ij} enters through blocks (j,i) and (i,i) of Q^T kron I
            const Eigen::VectorXcd uj = pair.left.segment(j * n, n);
            const Eigen::VectorXcd vi = pair.right.segment(i * n, n);
            const std::complex<double> d = uj.dot(vi) - ui.dot(vi);
            out.gradient(at++) = (d / uv).real();
        }
    }

    // penalty subgradients chained through A_{K,i} = A_i + B_i K_i C_i
    at = 0;
    for (int i = 0; i < N; ++i) {
        const Eigen::MatrixXd& Bi = problem_.B[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd& Ci = problem_.C[static_cast<std::size_t>(i)];
        const Eigen::MatrixXd& Ai = closed[static_cast<std::size_t>(i)];
        for (int c = 0; c < ny; ++c) {
            for (int r = 0; r < nu; ++r) {
                double g = 0.0;
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b)
                        if (a != b && Ai(a, b) < 0.0) g -= Bi(a, r) * Ci(c, b);
                out.gradient(at++) += problem_.gamma * g;
            }
        }
    }
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            if (i == j) continue;
            double g = 0.0;
            if (Q(i, j) < 0.0) g -= 1.0;
            if (problem_.q_bar && Q(i, j) > *problem_.q_bar) g += 1.0;
            out.gradient(at++) += problem_.gamma * g;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// min-norm element over the convex hull
// ---------------------------------------------------------------------------

namespace {

// Euclidean projection onto the probability simplex
Eigen::VectorXd project_simplex(const Eigen::VectorXd& y) {
    const Eigen::Index s = y.size();
    std::vector<double> u(y.data(), y.data() + s);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    for (Eigen::Index k = 0; k < s; ++k) {
        css += u[static_cast<std::size_t>(k)];
        const double candidate = (css - 1.0) / static_cast<double>(k + 1);
        if (u[static_cast<std::size_t>(k)] - candidate > 0.0) theta = candidate;
    }
    return (y.array() - theta).cwiseMax(0.0);
}

} // namespace

Eigen::VectorXd min_norm_element(const Eigen::MatrixXd& G, double tol) {
    const Eigen::Index s = G.cols();
    if (s == 0) throw std::invalid_argument("min_norm_element: no gradients");
    Eigen::VectorXd lambda = Eigen::VectorXd::Constant(s, 1.0 / static_cast<double>(s));
    const Eigen::MatrixXd gram = G.transpose() * G;
    const double lipschitz = std::max(gram.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff(), 1e-300);
    const double step = 1.0 / lipschitz;
    for (int it = 0; it < 20000; ++it) {
        const Eigen::VectorXd next = project_simplex(lambda - step * (gram * lambda));
        const double move = (next - lambda).norm();
        lambda = next;
        if (move < tol) break;
    }
    return G * lambda;
}

// ---------------------------------------------------------------------------
// gradient sampling
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd fd_gradient(const SampledObjective& objective, const Eigen::VectorXd& x, double f0,
                            double step, int& evaluations) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        probe(k) = x(k) + step;
        g(k) = (objective(probe).value - f0) / step;
        ++evaluations;
        probe(k) = x(k);
    }
    return g;
}

} // namespace

GradientSamplingResult gradient_sampling_minimize(const SampledObjective& objective,
                                                  const Eigen::VectorXd& x0,
                                                  const GradientSamplingOptions& options) {
    const Eigen::Index d = x0.size();
    RandomStream rng(options.seed);

    GradientSamplingResult result;
    result.x = x0;

    auto evaluate = [&](const Eigen::VectorXd& x) {
        SampledValue v = objective(x);
        ++result.evaluations;
        if (!v.gradient_reliable)
            v.gradient = fd_gradient(objective, x, v.value, options.fd_step, result.evaluations);
        return v;
    };

    Eigen::VectorXd x = x0;
    SampledValue current = evaluate(x);

    Eigen::VectorXd best_x = x;
    double best_value = current.value;
    bool best_feasible = current.feasible;
    Eigen::VectorXd best_feasible_x = x;
    double best_feasible_value = current.feasible ? current.value : std::numeric_limits<double>::infinity();

    result.trace.push_back(current.value);

    double eps = options.eps0;
    double nu = options.nu0;
    bool stalled = false;

    Eigen::MatrixXd gradients(d, d + 1);
    while (result.evaluations < options.budget && eps >= options.eps_min) {
        gradients.col(0) = current.gradient;
        for (Eigen::Index s = 1; s <= d; ++s) {
            // uniform draw in the eps-ball around x
            Eigen::VectorXd direction(d);
            for (Eigen::Index k = 0; k < d; ++k) direction(k) = rng.next_gaussian();
            const double norm = direction.norm();
            if (norm > 0.0) direction /= norm;
            const double radius = eps * std::pow(rng.next_double(), 1.0 / static_cast<double>(d));
            if (result.evaluations >= options.budget) break;
            gradients.col(s) = evaluate(x + radius * direction).gradient;
        }
        if (result.evaluations >= options.budget) break;

        const Eigen::VectorXd g = min_norm_element(gradients);
        const double gnorm = g.norm();
        if (gnorm <= nu) {
            eps *= 0.5;
            nu *= 0.5;
            continue;
        }

        // Armijo backtracking along -g, with greedy doubling once t = 1 works
        const Eigen::VectorXd direction = -g;
        double t = 1.0;
        bool accepted = false;
        SampledValue trial;
        const double slope = options.armijo_c * gnorm * gnorm;
        for (int back = 0; back < options.max_backtracks && result.evaluations < options.budget; ++back) {
            trial = evaluate(x + t * direction);
            if (trial.value <= current.value - t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (accepted) {
            while (result.evaluations < options.budget) {
                const double t2 = 2.0 * t;
                const SampledValue wide = evaluate(x + t2 * direction);
                if (wide.value <= current.value - t2 * slope && wide.value < trial.value) {
                    trial = wide;
                    t = t2;
                } else {
                    break;
                }
            }
            x += t * direction;
            current = trial;
            result.trace.push_back(std::min(result.trace.back(), current.value));
            if (current.value < best_value) {
                best_value = current.value;
                best_x = x;
                best_feasible = current.feasible;
            }
            if (current.feasible && current.value < best_feasible_value) {
                best_feasible_value = current.value;
                best_feasible_x = x;
            }
        } else {
            if (eps * 0.5 < options.eps_min) {
                stalled = true;
                break;
            }
            eps *= 0.5;
            nu *= 0.5;
        }
    }

    result.stalled = stalled;
    if (best_feasible_value < std::numeric_limits<double>::infinity()) {
        result.x = best_feasible_x;
        result.value = best_feasible_value;
        result.feasible = true;
    } else {
        result.x = best_x;
        result.value = best_value;
        result.feasible = best_feasible;
    }
    return result;
}

// ---------------------------------------------------------------------------
// multistart driver
// ---------------------------------------------------------------------------

SynthesisResult solve_problem1(const SynthesisProblem& problem, int multistart,
                               std::uint64_t base_seed, Execution exec) {
    if (multistart < 1) throw std::invalid_argument("solve_problem1: multistart must be >= 1");
    const SynthesisObjective objective(problem);
    const int N = problem.mode_count();
    const int gain_params = N * problem.input_dim() * problem.output_dim();
    const int d = problem.parameter_count();

    const double q_scale = problem.q_bar ? 0.5 * *problem.q_bar : 20.0;

    struct RunOutcome {
        GradientSamplingResult gs;
        bool valid = false;
    };
    std::vector<RunOutcome> runs(static_cast<std::size_t>(multistart));
    std::exception_ptr failure;

    const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int r = 0; r < multistart; ++r) {
        try {
            RandomStream rng(derive_seed(base_seed, static_cast<std::uint64_t>(r)));
            Eigen::VectorXd x0(d);
            if (r == 0 && problem.initial_guess) {
                x0 = *problem.initial_guess;
            } else {
                for (int k = 0; k < gain_params; ++k) x0(k) = 2.0 * rng.next_gaussian();
                for (int k = gain_params; k < d; ++k) x0(k) = q_scale * std::abs(rng.next_gaussian());
            }
            GradientSamplingOptions options;
            options.budget = problem.budget;
            options.seed = derive_seed(base_seed, 0x5eed0000ULL + static_cast<std::uint64_t>(r));
            SampledObjective wrapped = [&objective](const Eigen::VectorXd& x) {
                const ObjectiveValue v = objective(x);
                SampledValue s;
                s.value = v.value;
                s.gradient = v.gradient;
                s.gradient_reliable = v.gradient_reliable;
                s.feasible = v.penalties.feasible();
                return s;
            };
            runs[static_cast<std::size_t>(r)].gs = gradient_sampling_minimize(wrapped, x0, options);
            runs[static_cast<std::size_t>(r)].valid = true;
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    // lexicographic reduction: feasible first, then smaller value, then run index
    int winner = -1;
    for (int r = 0; r < multistart; ++r) {
        const RunOutcome& run = runs[static_cast<std::size_t>(r)];
        if (!run.valid) continue;
        if (winner < 0) {
            winner = r;
            continue;
        }
        const RunOutcome& incumbent = runs[static_cast<std::size_t>(winner)];
        if (run.gs.feasible != incumbent.gs.feasible) {
            if (run.gs.feasible) winner = r;
        } else if (run.gs.value < incumbent.gs.value) {
            winner = r;
        }
    }
    if (winner < 0) throw NumericalError("solve_problem1: every start failed");

    const GradientSamplingResult& best = runs[static_cast<std::size_t>(winner)].gs;
    const ObjectiveValue at_best = objective(best.x);

    SynthesisResult result;
    objective.unpack(best.x, result.K, result.Q);
    result.eta = at_best.eta;
    result.penalties = at_best.penalties;
    result.feasible = at_best.penalties.feasible();
    result.stalled = best.stalled;
    result.winning_run = winner;
    result.trace = best.trace;
    for (const RunOutcome& run : runs)
        if (run.valid) result.evaluations += run.gs.evaluations;
    return result;
}

} // namespace smjls

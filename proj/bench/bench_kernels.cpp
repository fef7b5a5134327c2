// Benchmark of the OpenMP kernels against their serial reference paths:
// ensemble simulation, lifted-moment estimation, parameter sweeps, and
// multistart synthesis. Prints wall times and speedups; results are
// asserted bit-identical across the two policies before timing is reported.

#include <omp.h>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "../tests/fixtures.hpp"
#include "smjls/analyzer.hpp"
#include "smjls/simulator.hpp"
#include "smjls/stabilizer.hpp"

using namespace smjls;

namespace {

double time_of(const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void row(const std::string& name, double serial, double parallel, bool identical) {
    std::printf("%-28s %9.3f s %9.3f s %6.2fx   %s\n", name.c_str(), serial, parallel,
                serial / parallel, identical ? "identical" : "MISMATCH");
}

} // namespace

int main() {
    std::printf("threads available: %d\n", omp_get_max_threads());
    std::printf("%-28s %11s %11s %8s\n", "kernel", "serial", "parallel", "speedup");

    const SemiMarkovModel model = fixtures::controller_failure_model(0.9);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(2);

    {
        EnsembleStats serial_stats, parallel_stats;
        const double ts = time_of([&] {
            serial_stats = estimate_mean_norm(model, x0, 0, 1, 20.0, 0.5, 40000, 1, 10, Execution::Serial);
        });
        const double tp = time_of([&] {
            parallel_stats =
                estimate_mean_norm(model, x0, 0, 1, 20.0, 0.5, 40000, 1, 10, Execution::Parallel);
        });
        row("ensemble mean norm", ts, tp, serial_stats.mean == parallel_stats.mean);
    }

    {
        LiftedMomentStats serial_stats, parallel_stats;
        const double ts = time_of([&] {
            serial_stats = estimate_lifted_moment(model, x0, 0, 2, 10, 40000, 2, Execution::Serial);
        });
        const double tp = time_of([&] {
            parallel_stats = estimate_lifted_moment(model, x0, 0, 2, 10, 40000, 2, Execution::Parallel);
        });
        bool identical = true;
        for (std::size_t k = 0; k < serial_stats.mean.size(); ++k)
            identical = identical && serial_stats.mean[k] == parallel_stats.mean[k];
        row("lifted moment estimate", ts, tp, identical);
    }

    {
        const ModelFactory factory = [](double a) { return fixtures::controller_failure_model(a); };
        const SweepGrid grid{0.8, 1.2, 0.002};
        SweepResult serial_result, parallel_result;
        const double ts = time_of([&] { serial_result = sweep(factory, grid, 2, {}, Execution::Serial); });
        const double tp =
            time_of([&] { parallel_result = sweep(factory, grid, 2, {}, Execution::Parallel); });
        bool identical = serial_result.points.size() == parallel_result.points.size();
        for (std::size_t k = 0; identical && k < serial_result.points.size(); ++k)
            identical = serial_result.points[k].indicator == parallel_result.points[k].indicator;
        row("stability sweep (201 pts)", ts, tp, identical);
    }

    {
        SynthesisProblem problem = fixtures::two_mode_synthesis();
        problem.budget = 4000;
        SynthesisResult serial_result, parallel_result;
        const double ts =
            time_of([&] { serial_result = solve_problem1(problem, 8, 3, Execution::Serial); });
        const double tp =
            time_of([&] { parallel_result = solve_problem1(problem, 8, 3, Execution::Parallel); });
        row("multistart synthesis (8)", ts, tp, serial_result.eta == parallel_result.eta);
    }

    return 0;
}

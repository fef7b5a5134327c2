#include "smjls/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "smjls/errors.hpp"
#include "smjls/expectation.hpp"
#include "smjls/rng.hpp"

namespace smjls {

namespace {

struct Switch {
    int next_mode;
    double dwell;
    const Eigen::MatrixXd* jump;
};

// kernel factorization: next mode from the embedded chain, then dwell and
// jump conditioned on the edge
Switch sample_switch(const SemiMarkovModel& model, int mode, RandomStream& rng) {
    const int next = model.sample_next_mode(mode, rng);
    const double h = model.dwell(mode, next).sample(rng);
    const Eigen::MatrixXd& J = model.jump(mode, next).sample(rng);
    return {next, h, &J};
}

bool overflowed(const Eigen::VectorXd& x) {
    return !(x.cwiseAbs().maxCoeff() < kDivergenceThreshold) || !x.allFinite();
}

// Walks one path, reporting each segment (state at segment start, mode,
// dwell) and each post-jump state. Callbacks return false to stop early.
// Returns true if the path diverged.
template <class SegmentFn, class SwitchFn>
bool walk_path(const SemiMarkovModel& model, const Eigen::VectorXd& x0, int mode0,
               RandomStream& rng, SegmentFn&& on_segment, SwitchFn&& on_switch) {
    double t = 0.0;
    int mode = mode0;
    Eigen::VectorXd x = x0;
    for (;;) {
        const Switch sw = sample_switch(model, mode, rng);
        Eigen::MatrixXd flow;
        try {
            flow = matrix_exponential(model.mode(mode), sw.dwell);
        } catch (const NumericalError&) {
            return true; // exp overflow on one segment: the path has diverged
        }
        if (!on_segment(t, x, mode, sw.dwell)) return false;
        Eigen::VectorXd next = *sw.jump * (flow * x);
        if (overflowed(next)) return true;
        t += sw.dwell;
        mode = sw.next_mode;
        x = std::move(next);
        if (!on_switch(t, x, mode, *sw.jump)) return false;
    }
}

} // namespace

SamplePath simulate_path(const SemiMarkovModel& model, const Eigen::VectorXd& x0, int mode0,
                         double horizon, double output_dt, std::uint64_t seed) {
    if (x0.size() != model.state_dim()) throw std::invalid_argument("simulate_path: x0 dimension mismatch");
    if (mode0 < 0 || mode0 >= model.mode_count())
        throw std::invalid_argument("simulate_path: mode index out of range");
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_path: horizon must be positive");
    if (!(output_dt > 0.0)) throw std::invalid_argument("simulate_path: output_dt must be positive");

    SamplePath path;
    path.seed = seed;
    path.switch_times.push_back(0.0);
    path.modes.push_back(mode0);
    path.discrete.push_back(x0);
    const int grid_count = static_cast<int>(std::floor(horizon / output_dt + 1e-9)) + 1;
    path.grid.reserve(static_cast<std::size_t>(grid_count));
    path.states.reserve(static_cast<std::size_t>(grid_count));

    RandomStream rng(seed);
    int next_grid = 0;
    path.diverged = walk_path(
        model, x0, mode0, rng,
        [&](double t, const Eigen::VectorXd& x, int mode, double h) {
            while (next_grid < grid_count) {
                const double tg = next_grid * output_dt;
                if (tg >= t + h) break;
                path.grid.push_back(tg);
                path.states.push_back(matrix_exponential(model.mode(mode), tg - t) * x);
                ++next_grid;
            }
            return t + h <= horizon || next_grid < grid_count;
        },
        [&](double t, const Eigen::VectorXd& x, int mode, const Eigen::MatrixXd& J) {
            if (t <= horizon) {
                path.switch_times.push_back(t);
                path.modes.push_back(mode);
                path.jumps.push_back(J);
                path.discrete.push_back(x);
            }
            return t <= horizon || next_grid < grid_count;
        });
    return path;
}

namespace {

// fixed-size path blocks make the reduction independent of thread count
constexpr int kBlockSize = 64;

struct BlockAccumulator {
    Eigen::ArrayXd sum;
    Eigen::ArrayXd sumsq;
    int diverged = 0;

    explicit BlockAccumulator(Eigen::Index dim)
        : sum(Eigen::ArrayXd::Zero(dim)), sumsq(Eigen::ArrayXd::Zero(dim)) {}

    void add(const Eigen::ArrayXd& values) {
        sum += values;
        sumsq += values.square();
    }
};

// pairwise tree reduction in fixed order
BlockAccumulator reduce_blocks(std::vector<BlockAccumulator>& blocks) {
    std::size_t count = blocks.size();
    while (count > 1) {
        const std::size_t half = (count + 1) / 2;
        for (std::size_t k = 0; k + half < count; ++k) {
            blocks[k].sum += blocks[k + half].sum;
            blocks[k].sumsq += blocks[k + half].sumsq;
            blocks[k].diverged += blocks[k + half].diverged;
        }
        count = half;
    }
    return std::move(blocks.front());
}

void finalize_stats(const BlockAccumulator& total, int paths, std::vector<double>& mean,
                    std::vector<double>& se) {
    const int effective = paths - total.diverged;
    mean.resize(static_cast<std::size_t>(total.sum.size()));
    se.resize(static_cast<std::size_t>(total.sum.size()));
    for (Eigen::Index k = 0; k < total.sum.size(); ++k) {
        if (effective < 1) {
            mean[static_cast<std::size_t>(k)] = std::nan("");
            se[static_cast<std::size_t>(k)] = std::nan("");
            continue;
        }
        const double mu = total.sum(k) / effective;
        mean[static_cast<std::size_t>(k)] = mu;
        if (effective < 2) {
            se[static_cast<std::size_t>(k)] = std::nan("");
        } else {
            const double var = std::max(0.0, total.sumsq(k) / effective - mu * mu);
            se[static_cast<std::size_t>(k)] = std::sqrt(var / (effective - 1));
        }
    }
}

} // namespace

namespace {

void check_ensemble_arguments(const SemiMarkovModel& model, const Eigen::VectorXd& x0, int mode0,
                              int m, int paths, const char* where) {
    const std::string name(where);
    if (paths < 100) throw std::invalid_argument(name + ": at least 100 paths required");
    if (m < 1) throw std::invalid_argument(name + ": m >= 1 required");
    if (x0.size() != model.state_dim()) throw std::invalid_argument(name + ": x0 dimension mismatch");
    if (mode0 < 0 || mode0 >= model.mode_count())
        throw std::invalid_argument(name + ": mode index out of range");
}

} // namespace

EnsembleStats estimate_mean_norm(const SemiMarkovModel& model, const Eigen::VectorXd& x0, int mode0,
                                 int m, double horizon, double output_dt, int paths,
                                 std::uint64_t base_seed, int discrete_k_max, Execution exec,
                                 StatNorm norm) {
    check_ensemble_arguments(model, x0, mode0, m, paths, "estimate_mean_norm");
    if (!(horizon > 0.0) || !(output_dt > 0.0))
        throw std::invalid_argument("estimate_mean_norm: horizon and output_dt must be positive");
    if (discrete_k_max < 0) throw std::invalid_argument("estimate_mean_norm: discrete_k_max >= 0 required");
    const auto norm_of = [norm](const Eigen::VectorXd& v) {
        return norm == StatNorm::One ? v.lpNorm<1>() : v.norm();
    };

    EnsembleStats stats;
    stats.path_count = paths;
    stats.norm = norm;
    const int grid_count = static_cast<int>(std::floor(horizon / output_dt + 1e-9)) + 1;
    stats.grid.resize(static_cast<std::size_t>(grid_count));
    for (int k = 0; k < grid_count; ++k) stats.grid[static_cast<std::size_t>(k)] = k * output_dt;

    const Eigen::Index dim = grid_count + discrete_k_max + 1; // grid stats then discrete stats
    const int block_count = (paths + kBlockSize - 1) / kBlockSize;
    std::vector<BlockAccumulator> blocks(static_cast<std::size_t>(block_count), BlockAccumulator(dim));
    std::exception_ptr failure;

    const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int b = 0; b < block_count; ++b) {
        try {
        BlockAccumulator& acc = blocks[static_cast<std::size_t>(b)];
        Eigen::ArrayXd values(dim);
        for (int p = b * kBlockSize; p < std::min(paths, (b + 1) * kBlockSize); ++p) {
            values.setZero();
            RandomStream rng(derive_seed(base_seed, static_cast<std::uint64_t>(p)));
            int next_grid = 0;
            int k_index = 0;
            values(grid_count + 0) = std::pow(norm_of(x0), m);
            const bool diverged = walk_path(
                model, x0, mode0, rng,
                [&](double t, const Eigen::VectorXd& x, int mode, double h) {
                    while (next_grid < grid_count) {
                        const double tg = next_grid * output_dt;
                        if (tg >= t + h) break;
                        const Eigen::VectorXd xt = matrix_exponential(model.mode(mode), tg - t) * x;
                        values(next_grid) = std::pow(norm_of(xt), m);
                        ++next_grid;
                    }
                    return next_grid < grid_count || k_index < discrete_k_max;
                },
                [&](double, const Eigen::VectorXd& x, int, const Eigen::MatrixXd&) {
                    if (k_index < discrete_k_max) {
                        ++k_index;
                        values(grid_count + k_index) = std::pow(norm_of(x), m);
                    }
                    return next_grid < grid_count || k_index < discrete_k_max;
                });
            if (diverged) {
                ++acc.diverged;
            } else {
                acc.add(values);
            }
        }
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    const BlockAccumulator total = reduce_blocks(blocks);
    stats.diverged = total.diverged;
    std::vector<double> mean, se;
    finalize_stats(total, paths, mean, se);
    stats.mean.assign(mean.begin(), mean.begin() + grid_count);
    stats.se.assign(se.begin(), se.begin() + grid_count);
    stats.disc_mean.assign(mean.begin() + grid_count, mean.end());
    stats.disc_se.assign(se.begin() + grid_count, se.end());
    return stats;
}

LiftedMomentStats estimate_lifted_moment(const SemiMarkovModel& model, const Eigen::VectorXd& x0,
                                         int mode0, int m, int k_max, int paths,
                                         std::uint64_t base_seed, Execution exec) {
    check_ensemble_arguments(model, x0, mode0, m, paths, "estimate_lifted_moment");
    if (k_max < 0) throw std::invalid_argument("estimate_lifted_moment: k_max >= 0 required");
    const MultiIndexBasis basis(model.state_dim(), m);
    const int nm = basis.size();
    const int N = model.mode_count();
    const Eigen::Index dim = static_cast<Eigen::Index>(nm) * N * (k_max + 1);

    const int block_count = (paths + kBlockSize - 1) / kBlockSize;
    std::vector<BlockAccumulator> blocks(static_cast<std::size_t>(block_count), BlockAccumulator(dim));
    std::exception_ptr failure;

    const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int b = 0; b < block_count; ++b) {
        try {
        BlockAccumulator& acc = blocks[static_cast<std::size_t>(b)];
        Eigen::ArrayXd values(dim);
        for (int p = b * kBlockSize; p < std::min(paths, (b + 1) * kBlockSize); ++p) {
            values.setZero();
            RandomStream rng(derive_seed(base_seed, static_cast<std::uint64_t>(p)));
            int k_index = 0;
            values.segment(static_cast<Eigen::Index>(mode0) * nm, nm) = lift_vector(x0, basis).array();
            const bool diverged = walk_path(
                model, x0, mode0, rng,
                [&](double, const Eigen::VectorXd&, int, double) { return k_index < k_max; },
                [&](double, const Eigen::VectorXd& x, int mode, const Eigen::MatrixXd&) {
                    ++k_index;
                    if (k_index > k_max) return false;
                    values.segment(static_cast<Eigen::Index>(k_index) * nm * N +
                                       static_cast<Eigen::Index>(mode) * nm,
                                   nm) = lift_vector(x, basis).array();
                    return k_index < k_max;
                });
            if (diverged) {
                ++acc.diverged;
            } else {
                acc.add(values);
            }
        }
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    const BlockAccumulator total = reduce_blocks(blocks);
    LiftedMomentStats stats;
    stats.path_count = paths;
    stats.diverged = total.diverged;
    std::vector<double> mean, se;
    finalize_stats(total, paths, mean, se);
    stats.mean.reserve(static_cast<std::size_t>(k_max) + 1);
    stats.se.reserve(static_cast<std::size_t>(k_max) + 1);
    for (int k = 0; k <= k_max; ++k) {
        const std::size_t offset = static_cast<std::size_t>(k) * static_cast<std::size_t>(nm) * N;
        Eigen::VectorXd mk(static_cast<Eigen::Index>(nm) * N), sk(static_cast<Eigen::Index>(nm) * N);
        for (Eigen::Index c = 0; c < mk.size(); ++c) {
            mk(c) = mean[offset + static_cast<std::size_t>(c)];
            sk(c) = se[offset + static_cast<std::size_t>(c)];
        }
        stats.mean.push_back(std::move(mk));
        stats.se.push_back(std::move(sk));
    }
    return stats;
}

} // namespace smjls

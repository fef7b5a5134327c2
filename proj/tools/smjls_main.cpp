// Command-line frontend: binds model files to the analyzer, simulator, and
// stabilizer, and emits CSV/JSON artifacts for external plotting.
//
// Exit codes: 0 success (verdict "stable" where applicable), 1 verdict
// "unstable"/"marginal" (or infeasible synthesis), 2 input or validation
// error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "smjls/analyzer.hpp"
#include "smjls/errors.hpp"
#include "smjls/model_io.hpp"
#include "smjls/simulator.hpp"
#include "smjls/stabilizer.hpp"

namespace {

using namespace smjls;

constexpr int kExitStable = 0;
constexpr int kExitNotStable = 1;
constexpr int kExitInputError = 2;
constexpr int kExitNumericalError = 3;

// 17 significant digits guarantee binary round trips of doubles
std::string fmt17(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ModelError("cannot open output file: " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

void emit(const std::optional<std::string>& out_path, const std::string& content) {
    if (out_path)
        write_atomic(*out_path, content);
    else
        std::cout << content;
}

struct ParamOption {
    std::string name;
    double value = 0.0;
    bool is_grid = false;
    SweepGrid grid{0.0, 0.0, 1.0};
};

// "name=value" or "name=grid(lo,hi,step)"
ParamOption parse_param(const std::string& text) {
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ModelError("--param expects name=value or name=grid(lo,hi,step): " + text);
    ParamOption option;
    option.name = text.substr(0, eq);
    const std::string rhs = text.substr(eq + 1);
    if (rhs.rfind("grid(", 0) == 0 && rhs.back() == ')') {
        option.is_grid = true;
        const std::string body = rhs.substr(5, rhs.size() - 6);
        std::istringstream in(body);
        char c1 = 0, c2 = 0;
        if (!(in >> option.grid.lo >> c1 >> option.grid.hi >> c2 >> option.grid.step) || c1 != ',' ||
            c2 != ',')
            throw ModelError("malformed grid spec: " + rhs);
    } else {
        option.value = eval_expression(rhs, {});
    }
    return option;
}

ParamMap overrides_of(const std::vector<std::string>& params, std::string* sweep_name,
                      SweepGrid* sweep_grid) {
    ParamMap overrides;
    for (const std::string& text : params) {
        const ParamOption option = parse_param(text);
        if (option.is_grid) {
            if (sweep_name == nullptr) throw ModelError("grid parameters are only valid for sweep");
            if (!sweep_name->empty()) throw ModelError("only one grid parameter per sweep");
            *sweep_name = option.name;
            *sweep_grid = option.grid;
        } else {
            overrides[option.name] = option.value;
        }
    }
    return overrides;
}

Eigen::VectorXd parse_vector(const std::string& text) {
    Eigen::VectorXd out;
    std::vector<double> values;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) values.push_back(std::stod(item));
    out.resize(static_cast<Eigen::Index>(values.size()));
    for (std::size_t k = 0; k < values.size(); ++k) out(static_cast<Eigen::Index>(k)) = values[k];
    return out;
}

Json report_to_json(const StabilityReport& report) {
    Json doc;
    doc["criterion"] = to_string(report.criterion);
    doc["degree"] = report.degree;
    doc["indicator"] = report.indicator;
    doc["margin"] = report.margin;
    doc["verdict"] = to_string(report.verdict);
    doc["residual"] = report.residual;
    doc["dimension"] = report.lifted_matrix.rows();
    if (report.lifted_matrix.rows() <= 200) {
        Json rows = Json::array();
        for (Eigen::Index i = 0; i < report.lifted_matrix.rows(); ++i) {
            Json row = Json::array();
            for (Eigen::Index j = 0; j < report.lifted_matrix.cols(); ++j)
                row.push_back(report.lifted_matrix(i, j));
            rows.push_back(std::move(row));
        }
        doc["lifted_matrix"] = std::move(rows);
    }
    return doc;
}

int verdict_exit(Verdict verdict) {
    return verdict == Verdict::Stable ? kExitStable : kExitNotStable;
}

int run_validate(const std::string& model_path, const std::vector<std::string>& params) {
    const Json doc = load_json_file(model_path);
    const ParamMap overrides = overrides_of(params, nullptr, nullptr);
    ValidationReport report;
    switch (classify_model(doc)) {
    case ModelKind::SemiMarkov: report = load_semi_markov(doc, overrides).validate(); break;
    case ModelKind::Markov: report = load_markov(doc, overrides).validate(); break;
    case ModelKind::Discrete: report = load_discrete(doc, overrides).validate(); break;
    case ModelKind::Synthesis:
        load_synthesis(doc, overrides); // check() runs inside
        std::cout << "valid\n";
        return kExitStable;
    }
    std::cout << report.to_string() << (report.ok() ? "\n" : "");
    return report.ok() ? kExitStable : kExitInputError;
}

int run_analyze(const std::string& model_path, int degree, const std::vector<std::string>& params,
                const std::optional<std::string>& out_path, bool markov_expected) {
    const Json doc = load_json_file(model_path);
    const ParamMap overrides = overrides_of(params, nullptr, nullptr);
    StabilityReport report;
    const ModelKind kind = classify_model(doc);
    if (markov_expected && kind != ModelKind::Markov)
        throw ModelError("analyze-markov expects a markov model file");
    switch (kind) {
    case ModelKind::SemiMarkov: {
        const SemiMarkovModel model = load_semi_markov(doc, overrides);
        const ValidationReport validation = model.validate();
        if (!validation.ok()) throw ModelError(validation.to_string());
        report = analyze_semi_markov(model, degree);
        break;
    }
    case ModelKind::Markov: {
        const MarkovModel model = load_markov(doc, overrides);
        const ValidationReport validation = model.validate();
        if (!validation.ok()) throw ModelError(validation.to_string());
        report = analyze_markov(model, degree);
        break;
    }
    case ModelKind::Discrete: {
        const DiscreteModel model = load_discrete(doc, overrides);
        const ValidationReport validation = model.validate();
        if (!validation.ok()) throw ModelError(validation.to_string());
        report = analyze_discrete(model, degree);
        break;
    }
    case ModelKind::Synthesis: throw ModelError("analyze expects a model file, not a synthesis file");
    }
    emit(out_path, report_to_json(report).dump(2) + "\n");
    std::cerr << to_string(report.criterion) << ": indicator " << fmt17(report.indicator) << ", verdict "
              << to_string(report.verdict) << "\n";
    return verdict_exit(report.verdict);
}

int run_sweep(const std::string& model_path, int degree, const std::vector<std::string>& params,
              const std::optional<std::string>& out_path, bool serial) {
    const Json doc = load_json_file(model_path);
    if (classify_model(doc) != ModelKind::SemiMarkov)
        throw ModelError("sweep expects a semi_markov model file");
    std::string sweep_name;
    SweepGrid grid{0.0, 0.0, 1.0};
    const ParamMap overrides = overrides_of(params, &sweep_name, &grid);
    if (sweep_name.empty()) throw ModelError("sweep needs --param name=grid(lo,hi,step)");

    const ModelFactory factory = [&](double value) {
        ParamMap merged = overrides;
        merged[sweep_name] = value;
        return load_semi_markov(doc, merged);
    };
    const SweepResult result =
        sweep(factory, grid, degree, {}, serial ? Execution::Serial : Execution::Parallel);

    std::ostringstream csv;
    csv << "parameter,indicator,indicator_mth_root,verdict,error\n";
    for (const SweepPoint& p : result.points) {
        csv << fmt17(p.value) << ",";
        if (p.ok())
            csv << fmt17(p.indicator) << "," << fmt17(std::pow(p.indicator, 1.0 / degree)) << ","
                << to_string(p.verdict) << ",";
        else
            csv << ",,," << p.error;
        csv << "\n";
    }
    for (const CrossingBracket& bracket : result.crossings)
        csv << "# boundary crossing in [" << fmt17(bracket.lo) << ", " << fmt17(bracket.hi) << "]\n";
    emit(out_path, csv.str());
    std::cerr << "sweep of " << sweep_name << ": " << result.points.size() << " points, "
              << result.crossings.size() << " crossing(s)\n";
    bool any_unstable = false, any_failed = false;
    for (const SweepPoint& p : result.points) {
        any_unstable = any_unstable || (p.ok() && p.verdict != Verdict::Stable);
        any_failed = any_failed || !p.ok();
    }
    if (any_failed) return kExitNumericalError;
    return any_unstable ? kExitNotStable : kExitStable;
}

int run_moments(const std::string& model_path, int degree, const std::vector<std::string>& params,
                const std::string& x0_text, int mode0, int steps, double horizon, double dt,
                const std::optional<std::string>& out_path) {
    const Json doc = load_json_file(model_path);
    const ParamMap overrides = overrides_of(params, nullptr, nullptr);
    const Eigen::VectorXd x0 = parse_vector(x0_text);
    std::ostringstream csv;
    switch (classify_model(doc)) {
    case ModelKind::Markov: {
        const MarkovModel model = load_markov(doc, overrides);
        const Eigen::MatrixXd T = build_T_matrix(model, degree);
        std::vector<double> grid;
        for (double t = 0.0; t <= horizon + 1e-12; t += dt) grid.push_back(t);
        const auto flow = propagate_continuous_moments(T, mode0 - 1, x0, degree, grid);
        csv << "t";
        for (Eigen::Index c = 0; c < flow.front().size(); ++c) csv << ",v" << c + 1;
        csv << ",l1_norm\n";
        for (std::size_t k = 0; k < grid.size(); ++k) {
            csv << fmt17(grid[k]);
            for (Eigen::Index c = 0; c < flow[k].size(); ++c) csv << "," << fmt17(flow[k](c));
            csv << "," << fmt17(flow[k].lpNorm<1>()) << "\n";
        }
        break;
    }
    case ModelKind::SemiMarkov:
    case ModelKind::Discrete: {
        Eigen::MatrixXd F;
        if (classify_model(doc) == ModelKind::SemiMarkov)
            F = build_A_matrix(load_semi_markov(doc, overrides), degree);
        else
            F = build_F_matrix(load_discrete(doc, overrides), degree);
        const auto seq = propagate_discrete_moments(F, mode0 - 1, x0, degree, steps);
        csv << "k";
        for (Eigen::Index c = 0; c < seq.front().size(); ++c) csv << ",v" << c + 1;
        csv << ",l1_norm\n";
        for (std::size_t k = 0; k < seq.size(); ++k) {
            csv << k;
            for (Eigen::Index c = 0; c < seq[k].size(); ++c) csv << "," << fmt17(seq[k](c));
            csv << "," << fmt17(seq[k].lpNorm<1>()) << "\n";
        }
        break;
    }
    case ModelKind::Synthesis: throw ModelError("moments expects a model file");
    }
    emit(out_path, csv.str());
    return kExitStable;
}

int run_simulate(const std::string& model_path, const std::vector<std::string>& params,
                 const std::string& x0_text, int mode0, double horizon, double dt, int paths,
                 std::uint64_t seed, int degree, const std::optional<std::string>& out_path,
                 bool serial, bool norm_l1) {
    const Json doc = load_json_file(model_path);
    const ParamMap overrides = overrides_of(params, nullptr, nullptr);
    SemiMarkovModel model = [&] {
        switch (classify_model(doc)) {
        case ModelKind::SemiMarkov: return load_semi_markov(doc, overrides);
        case ModelKind::Markov: {
            const MarkovModel markov = load_markov(doc, overrides);
            const ValidationReport validation = markov.validate();
            if (!validation.ok()) throw ModelError(validation.to_string());
            return markov.to_semi_markov();
        }
        default: throw ModelError("simulate expects a semi_markov or markov model file");
        }
    }();
    const ValidationReport validation = model.validate();
    if (!validation.ok()) throw ModelError(validation.to_string());
    const Eigen::VectorXd x0 = parse_vector(x0_text);

    std::ostringstream csv;
    if (paths <= 1) {
        const SamplePath path = simulate_path(model, x0, mode0 - 1, horizon, dt, seed);
        csv << "t";
        for (int c = 0; c < model.state_dim(); ++c) csv << ",x" << c + 1;
        csv << ",mode\n";
        std::size_t seg = 0;
        for (std::size_t k = 0; k < path.grid.size(); ++k) {
            while (seg + 1 < path.switch_times.size() && path.switch_times[seg + 1] <= path.grid[k]) ++seg;
            csv << fmt17(path.grid[k]);
            for (Eigen::Index c = 0; c < path.states[k].size(); ++c) csv << "," << fmt17(path.states[k](c));
            csv << "," << path.modes[seg] + 1 << "\n";
        }
        if (path.diverged) std::cerr << "warning: path diverged and was truncated\n";
        emit(out_path, csv.str());
        return kExitStable;
    }

    const EnsembleStats stats =
        estimate_mean_norm(model, x0, mode0 - 1, degree, horizon, dt, paths, seed, 20,
                           serial ? Execution::Serial : Execution::Parallel,
                           norm_l1 ? StatNorm::One : StatNorm::Two);
    csv << "t,mean_norm_m,stderr\n";
    for (std::size_t k = 0; k < stats.grid.size(); ++k)
        csv << fmt17(stats.grid[k]) << "," << fmt17(stats.mean[k]) << "," << fmt17(stats.se[k]) << "\n";
    csv << "# discrete index statistics\n";
    csv << "k,mean_norm_m,stderr\n";
    for (std::size_t k = 0; k < stats.disc_mean.size(); ++k)
        csv << k << "," << fmt17(stats.disc_mean[k]) << "," << fmt17(stats.disc_se[k]) << "\n";
    emit(out_path, csv.str());
    if (stats.diverged * 100 >= stats.path_count)
        std::cerr << "warning: " << stats.diverged << " of " << stats.path_count
                  << " paths diverged (>= 1%)\n";
    return kExitStable;
}

int run_stabilize(const std::string& problem_path, const std::vector<std::string>& params,
                  int multistart, std::uint64_t seed, std::optional<double> q_bar,
                  std::optional<double> gamma, std::optional<int> budget,
                  const std::optional<std::string>& out_path, bool serial) {
    const Json doc = load_json_file(problem_path);
    if (classify_model(doc) != ModelKind::Synthesis)
        throw ModelError("stabilize expects a synthesis problem file");
    SynthesisProblem problem = load_synthesis(doc, overrides_of(params, nullptr, nullptr));
    if (q_bar) problem.q_bar = *q_bar;
    if (gamma) problem.gamma = *gamma;
    if (budget) problem.budget = *budget;

    const SynthesisResult result =
        solve_problem1(problem, multistart, seed, serial ? Execution::Serial : Execution::Parallel);

    Json doc_out;
    doc_out["eta"] = result.eta;
    doc_out["feasible"] = result.feasible;
    doc_out["stalled"] = result.stalled;
    doc_out["penalties"] = {{"metzler", result.penalties.metzler},
                            {"q_negative", result.penalties.q_negative},
                            {"q_cap", result.penalties.q_cap}};
    doc_out["gains"] = Json::array();
    for (const Eigen::MatrixXd& K : result.K) {
        Json rows = Json::array();
        for (Eigen::Index r = 0; r < K.rows(); ++r) {
            Json row = Json::array();
            for (Eigen::Index c = 0; c < K.cols(); ++c) row.push_back(K(r, c));
            rows.push_back(std::move(row));
        }
        doc_out["gains"].push_back(std::move(rows));
    }
    Json q_rows = Json::array();
    for (Eigen::Index r = 0; r < result.Q.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < result.Q.cols(); ++c) row.push_back(result.Q(r, c));
        q_rows.push_back(std::move(row));
    }
    doc_out["generator"] = std::move(q_rows);
    doc_out["evaluations"] = result.evaluations;
    doc_out["winning_run"] = result.winning_run;
    doc_out["trace_tail"] = Json::array();
    const std::size_t tail = result.trace.size() > 20 ? result.trace.size() - 20 : 0;
    for (std::size_t k = tail; k < result.trace.size(); ++k)
        doc_out["trace_tail"].push_back(result.trace[k]);

    emit(out_path, doc_out.dump(2) + "\n");
    std::cerr << "synthesis: eta " << fmt17(result.eta) << (result.feasible ? " (feasible)" : " (infeasible)")
              << "\n";
    return result.feasible ? kExitStable : kExitNotStable;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-stability analysis and stabilization of positive jump linear systems"};
    app.require_subcommand(1);

    std::string model_path, problem_path;
    std::vector<std::string> params;
    std::string x0_text = "1,1";
    std::optional<std::string> out_path;
    int degree = 1;
    int mode0 = 1;
    int steps = 20;
    int paths = 1;
    int multistart = 20;
    double horizon = 10.0;
    double dt = 0.1;
    std::uint64_t seed = 0;
    std::optional<double> q_bar, gamma;
    std::optional<int> budget;
    bool serial = false;
    bool norm_l1 = false;

    auto add_common = [&](CLI::App* cmd, bool with_model = true) {
        if (with_model) cmd->add_option("--model", model_path, "model file (JSON)")->required();
        cmd->add_option("--param", params, "parameter override name=value (repeatable)");
        cmd->add_option("--out", out_path, "output artifact path (atomic write; stdout otherwise)");
    };

    CLI::App* validate = app.add_subcommand("validate", "check a model file against its invariants");
    add_common(validate);

    CLI::App* analyze = app.add_subcommand("analyze", "stability verdict of a semi-markov or discrete model");
    add_common(analyze);
    analyze->add_option("--degree", degree, "moment degree m")->check(CLI::PositiveNumber);

    CLI::App* analyze_markov = app.add_subcommand("analyze-markov", "stability verdict of a markov model");
    add_common(analyze_markov);
    analyze_markov->add_option("--degree", degree, "moment degree m")->check(CLI::PositiveNumber);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "indicator across a parameter grid");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--degree", degree, "moment degree m")->check(CLI::PositiveNumber);
    sweep_cmd->add_flag("--serial", serial, "disable parallel evaluation");

    CLI::App* moments = app.add_subcommand("moments", "exact moment propagation");
    add_common(moments);
    moments->add_option("--degree", degree, "moment degree m")->check(CLI::PositiveNumber);
    moments->add_option("--x0", x0_text, "initial state, comma separated");
    moments->add_option("--mode", mode0, "initial mode (1-based)");
    moments->add_option("--steps", steps, "discrete steps");
    moments->add_option("--horizon", horizon, "time horizon (markov models)");
    moments->add_option("--dt", dt, "output grid step (markov models)");

    CLI::App* simulate = app.add_subcommand("simulate", "sample paths / ensemble statistics");
    add_common(simulate);
    simulate->add_option("--degree", degree, "norm power m for ensemble statistics");
    simulate->add_option("--x0", x0_text, "initial state, comma separated");
    simulate->add_option("--mode", mode0, "initial mode (1-based)");
    simulate->add_option("--horizon", horizon, "simulation horizon");
    simulate->add_option("--dt", dt, "dense output step");
    simulate->add_option("--paths", paths, "ensemble size (1 = single path export)");
    simulate->add_option("--seed", seed, "base seed");
    simulate->add_flag("--serial", serial, "disable parallel evaluation");
    simulate->add_flag("--l1", norm_l1, "use the 1-norm for ensemble statistics");

    CLI::App* stabilize = app.add_subcommand("stabilize", "output-feedback synthesis");
    stabilize->add_option("--problem", problem_path, "synthesis problem file (JSON)")->required();
    stabilize->add_option("--param", params, "parameter override name=value (repeatable)");
    stabilize->add_option("--out", out_path, "output artifact path");
    stabilize->add_option("--multistart", multistart, "number of optimizer starts");
    stabilize->add_option("--seed", seed, "base seed");
    stabilize->add_option("--qbar", q_bar, "cap on off-diagonal transition rates");
    stabilize->add_option("--gamma", gamma, "penalty weight");
    stabilize->add_option("--budget", budget, "objective evaluations per start");
    stabilize->add_flag("--serial", serial, "disable parallel evaluation");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return run_validate(model_path, params);
        if (analyze->parsed()) return run_analyze(model_path, degree, params, out_path, false);
        if (analyze_markov->parsed()) return run_analyze(model_path, degree, params, out_path, true);
        if (sweep_cmd->parsed()) return run_sweep(model_path, degree, params, out_path, serial);
        if (moments->parsed())
            return run_moments(model_path, degree, params, x0_text, mode0, steps, horizon, dt, out_path);
        if (simulate->parsed())
            return run_simulate(model_path, params, x0_text, mode0, horizon, dt, paths, seed, degree,
                                out_path, serial, norm_l1);
        if (stabilize->parsed())
            return run_stabilize(problem_path, params, multistart, seed, q_bar, gamma, budget, out_path,
                                 serial);
    } catch (const AccuracyError& e) {
        std::cerr << "numerical failure: " << e.what() << " (error bound " << fmt17(e.error_bound) << ")\n";
        return kExitNumericalError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumericalError;
    } catch (const ModelError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const Json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalError;
    }
    return kExitInputError;
}

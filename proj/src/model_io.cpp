#include "smjls/model_io.hpp"

#include <cctype>
#include <fstream>

#include "smjls/errors.hpp"

namespace smjls {

// ---------------------------------------------------------------------------
// expression evaluation
// ---------------------------------------------------------------------------

namespace {

class ExpressionParser {
public:
    ExpressionParser(const std::string& text, const ParamMap& params) : text_(text), params_(params) {}

    double parse() {
        const double value = expression();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing characters");
        return value;
    }

private:
    double expression() {
        double value = term();
        for (;;) {
            skip_space();
            if (consume('+')) value += term();
            else if (consume('-')) value -= term();
            else return value;
        }
    }

    double term() {
        double value = factor();
        for (;;) {
            skip_space();
            if (consume('*')) value *= factor();
            else if (consume('/')) value /= factor();
            else return value;
        }
    }

    double factor() {
        skip_space();
        if (consume('-')) return -factor();
        if (consume('(')) {
            const double value = expression();
            skip_space();
            if (!consume(')')) fail("missing closing parenthesis");
            return value;
        }
        if (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
            std::size_t used = 0;
            const double value = std::stod(text_.substr(pos_), &used);
            pos_ += used;
            return value;
        }
        if (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            const std::string name = text_.substr(start, pos_ - start);
            const auto it = params_.find(name);
            if (it == params_.end()) fail("unknown parameter '" + name + "'");
            return it->second;
        }
        fail("expected a number, parameter, or parenthesis");
        return 0.0;
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& message) const {
        throw ModelError("in expression \"" + text_ + "\": " + message);
    }

    const std::string& text_;
    const ParamMap& params_;
    std::size_t pos_ = 0;
};

} // namespace

double eval_expression(const std::string& text, const ParamMap& params) {
    return ExpressionParser(text, params).parse();
}

double eval_number(const Json& leaf, const ParamMap& params) {
    if (leaf.is_number()) return leaf.get<double>();
    if (leaf.is_string()) return eval_expression(leaf.get<std::string>(), params);
    throw ModelError("expected a number or parameter expression, got " + std::string(leaf.type_name()));
}

// ---------------------------------------------------------------------------
// loading
// ---------------------------------------------------------------------------

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open file: " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ModelError("parse error in " + path + ": " + e.what());
    }
}

ModelKind classify_model(const Json& doc) {
    const std::string type = doc.value("type", "");
    if (type == "semi_markov") return ModelKind::SemiMarkov;
    if (type == "markov") return ModelKind::Markov;
    if (type == "discrete") return ModelKind::Discrete;
    if (type == "synthesis") return ModelKind::Synthesis;
    throw ModelError("field \"type\" must be one of semi_markov, markov, discrete, synthesis");
}

ParamMap merge_parameters(const Json& doc, const ParamMap& overrides) {
    ParamMap params;
    if (doc.contains("parameters")) {
        if (!doc["parameters"].is_object()) throw ModelError("\"parameters\" must be an object");
        for (const auto& [name, value] : doc["parameters"].items()) {
            if (!value.is_number()) throw ModelError("parameter \"" + name + "\" must be a number");
            params[name] = value.get<double>();
        }
    }
    for (const auto& [name, value] : overrides) params[name] = value;
    return params;
}

namespace {

Eigen::MatrixXd load_matrix(const Json& node, const ParamMap& params, const std::string& where) {
    if (!node.is_array() || node.empty() || !node[0].is_array())
        throw ModelError(where + ": expected a nested array (row-major matrix)");
    const Eigen::Index rows = static_cast<Eigen::Index>(node.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(node[0].size());
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (!node[static_cast<std::size_t>(i)].is_array() ||
            static_cast<Eigen::Index>(node[static_cast<std::size_t>(i)].size()) != cols)
            throw ModelError(where + ": ragged matrix rows");
        for (Eigen::Index j = 0; j < cols; ++j)
            M(i, j) = eval_number(node[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], params);
    }
    return M;
}

DwellLaw load_dwell(const Json& node, const ParamMap& params, const std::string& where) {
    if (!node.is_object() || !node.contains("type")) throw ModelError(where + ": dwell law needs a \"type\"");
    const std::string type = node["type"].get<std::string>();
    auto num = [&](const char* field) {
        if (!node.contains(field))
            throw ModelError(where + ": dwell law \"" + type + "\" needs field \"" + field + "\"");
        return eval_number(node[field], params);
    };
    if (type == "uniform") return DwellLaw::uniform(num("lo"), num("hi"));
    if (type == "truncated_weibull")
        return DwellLaw::truncated_weibull(num("shape"), num("scale"), num("tail_mass"));
    if (type == "deterministic") return DwellLaw::deterministic(num("value"));
    if (type == "truncated_exponential") return DwellLaw::truncated_exponential(num("rate"), num("cap"));
    if (type == "empirical") {
        if (!node.contains("samples") || !node["samples"].is_array())
            throw ModelError(where + ": empirical dwell law needs a \"samples\" array");
        std::vector<double> samples;
        for (const Json& s : node["samples"]) samples.push_back(eval_number(s, params));
        return DwellLaw::empirical(std::move(samples));
    }
    throw ModelError(where + ": unknown dwell law type \"" + type + "\"");
}

JumpMixture load_mixture(const Json& node, const ParamMap& params, const std::string& where) {
    if (!node.is_object() || !node.contains("components"))
        throw ModelError(where + ": mixture needs a \"components\" array");
    std::vector<JumpComponent> components;
    for (const Json& c : node["components"]) {
        if (!c.contains("weight") || !c.contains("matrix"))
            throw ModelError(where + ": mixture component needs \"weight\" and \"matrix\"");
        components.push_back({eval_number(c["weight"], params), load_matrix(c["matrix"], params, where)});
    }
    return JumpMixture(std::move(components));
}

int load_mode_index(const Json& node, int mode_count, const std::string& where) {
    if (!node.is_number_integer()) throw ModelError(where + ": mode index must be an integer");
    const int index = node.get<int>();
    if (index < 1 || index > mode_count)
        throw ModelError(where + ": mode index " + std::to_string(index) + " outside 1.." +
                         std::to_string(mode_count));
    return index - 1;
}

std::vector<Eigen::MatrixXd> load_modes(const Json& doc, const ParamMap& params) {
    if (!doc.contains("modes") || !doc["modes"].is_array() || doc["modes"].empty())
        throw ModelError("model needs a nonempty \"modes\" array");
    std::vector<Eigen::MatrixXd> modes;
    for (std::size_t i = 0; i < doc["modes"].size(); ++i)
        modes.push_back(load_matrix(doc["modes"][i], params, "modes[" + std::to_string(i + 1) + "]"));
    return modes;
}

} // namespace

SemiMarkovModel load_semi_markov(const Json& doc, const ParamMap& overrides) {
    const ParamMap params = merge_parameters(doc, overrides);
    std::vector<Eigen::MatrixXd> modes = load_modes(doc, params);
    const int N = static_cast<int>(modes.size());
    const int n = static_cast<int>(modes.front().rows());
    if (!doc.contains("transition_matrix")) throw ModelError("semi_markov model needs \"transition_matrix\"");
    Eigen::MatrixXd P = load_matrix(doc["transition_matrix"], params, "transition_matrix");

    std::map<SemiMarkovModel::EdgeKey, DwellLaw> dwell;
    std::map<SemiMarkovModel::EdgeKey, JumpMixture> jumps;
    if (!doc.contains("edges") || !doc["edges"].is_array())
        throw ModelError("semi_markov model needs an \"edges\" array");
    for (std::size_t e = 0; e < doc["edges"].size(); ++e) {
        const Json& edge = doc["edges"][e];
        const std::string where = "edges[" + std::to_string(e + 1) + "]";
        if (!edge.contains("from") || !edge.contains("to") || !edge.contains("dwell"))
            throw ModelError(where + ": edge needs \"from\", \"to\", and \"dwell\"");
        const int from = load_mode_index(edge["from"], N, where);
        const int to = load_mode_index(edge["to"], N, where);
        dwell.emplace(SemiMarkovModel::EdgeKey{from, to}, load_dwell(edge["dwell"], params, where));
        if (edge.contains("jump"))
            jumps.emplace(SemiMarkovModel::EdgeKey{from, to}, load_mixture(edge["jump"], params, where));
        else
            jumps.emplace(SemiMarkovModel::EdgeKey{from, to}, JumpMixture::identity(n));
    }
    return SemiMarkovModel(std::move(modes), std::move(P), std::move(dwell), std::move(jumps));
}

MarkovModel load_markov(const Json& doc, const ParamMap& overrides) {
    const ParamMap params = merge_parameters(doc, overrides);
    std::vector<Eigen::MatrixXd> modes = load_modes(doc, params);
    if (!doc.contains("generator")) throw ModelError("markov model needs \"generator\"");
    return MarkovModel(std::move(modes), load_matrix(doc["generator"], params, "generator"));
}

DiscreteModel load_discrete(const Json& doc, const ParamMap& overrides) {
    const ParamMap params = merge_parameters(doc, overrides);
    if (!doc.contains("transition_matrix")) throw ModelError("discrete model needs \"transition_matrix\"");
    Eigen::MatrixXd P = load_matrix(doc["transition_matrix"], params, "transition_matrix");
    const int N = static_cast<int>(P.rows());
    if (!doc.contains("edges") || !doc["edges"].is_array())
        throw ModelError("discrete model needs an \"edges\" array");
    std::map<DiscreteModel::EdgeKey, JumpMixture> mixtures;
    int n = 0;
    for (std::size_t e = 0; e < doc["edges"].size(); ++e) {
        const Json& edge = doc["edges"][e];
        const std::string where = "edges[" + std::to_string(e + 1) + "]";
        if (!edge.contains("from") || !edge.contains("to") || !edge.contains("mixture"))
            throw ModelError(where + ": edge needs \"from\", \"to\", and \"mixture\"");
        const int from = load_mode_index(edge["from"], N, where);
        const int to = load_mode_index(edge["to"], N, where);
        JumpMixture mix = load_mixture(edge["mixture"], params, where);
        n = static_cast<int>(mix.components().front().matrix.rows());
        mixtures.emplace(DiscreteModel::EdgeKey{from, to}, std::move(mix));
    }
    if (n == 0) throw ModelError("discrete model needs at least one edge");
    return DiscreteModel(n, std::move(P), std::move(mixtures));
}

SynthesisProblem load_synthesis(const Json& doc, const ParamMap& overrides) {
    const ParamMap params = merge_parameters(doc, overrides);
    if (!doc.contains("systems") || !doc["systems"].is_array() || doc["systems"].empty())
        throw ModelError("synthesis problem needs a nonempty \"systems\" array");
    SynthesisProblem problem;
    for (std::size_t i = 0; i < doc["systems"].size(); ++i) {
        const Json& sys = doc["systems"][i];
        const std::string where = "systems[" + std::to_string(i + 1) + "]";
        if (!sys.contains("A") || !sys.contains("B") || !sys.contains("C"))
            throw ModelError(where + ": each system needs \"A\", \"B\", and \"C\"");
        problem.A.push_back(load_matrix(sys["A"], params, where + ".A"));
        problem.B.push_back(load_matrix(sys["B"], params, where + ".B"));
        problem.C.push_back(load_matrix(sys["C"], params, where + ".C"));
    }
    if (doc.contains("gamma")) problem.gamma = eval_number(doc["gamma"], params);
    if (doc.contains("q_bar")) problem.q_bar = eval_number(doc["q_bar"], params);
    if (doc.contains("budget")) problem.budget = doc["budget"].get<int>();
    problem.check();
    return problem;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

Json matrix_to_json(const Eigen::MatrixXd& M) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json dwell_to_json(const DwellLaw& law) {
    struct Visit {
        Json operator()(const UniformLaw& u) const {
            return {{"type", "uniform"}, {"lo", u.lo}, {"hi", u.hi}};
        }
        Json operator()(const TruncatedWeibullLaw& w) const {
            return {{"type", "truncated_weibull"}, {"shape", w.shape}, {"scale", w.scale},
                    {"tail_mass", w.tail_mass}};
        }
        Json operator()(const DeterministicLaw& d) const {
            return {{"type", "deterministic"}, {"value", d.value}};
        }
        Json operator()(const TruncatedExponentialLaw& e) const {
            return {{"type", "truncated_exponential"}, {"rate", e.rate}, {"cap", e.cap}};
        }
        Json operator()(const EmpiricalLaw& emp) const {
            return {{"type", "empirical"}, {"samples", emp.samples}};
        }
    };
    return std::visit(Visit{}, law.spec());
}

Json mixture_to_json(const JumpMixture& mix) {
    Json components = Json::array();
    for (const JumpComponent& c : mix.components())
        components.push_back({{"weight", c.weight}, {"matrix", matrix_to_json(c.matrix)}});
    return {{"components", std::move(components)}};
}

} // namespace

Json to_json(const SemiMarkovModel& model) {
    Json doc;
    doc["type"] = "semi_markov";
    doc["modes"] = Json::array();
    for (const Eigen::MatrixXd& A : model.modes()) doc["modes"].push_back(matrix_to_json(A));
    doc["transition_matrix"] = matrix_to_json(model.transition_matrix());
    doc["edges"] = Json::array();
    for (const auto& [key, law] : model.dwell_laws()) {
        Json edge;
        edge["from"] = key.first + 1;
        edge["to"] = key.second + 1;
        edge["dwell"] = dwell_to_json(law);
        edge["jump"] = mixture_to_json(model.jump(key.first, key.second));
        doc["edges"].push_back(std::move(edge));
    }
    return doc;
}

Json to_json(const MarkovModel& model) {
    Json doc;
    doc["type"] = "markov";
    doc["modes"] = Json::array();
    for (const Eigen::MatrixXd& A : model.modes()) doc["modes"].push_back(matrix_to_json(A));
    doc["generator"] = matrix_to_json(model.generator());
    return doc;
}

Json to_json(const DiscreteModel& model) {
    Json doc;
    doc["type"] = "discrete";
    doc["transition_matrix"] = matrix_to_json(model.transition_matrix());
    doc["edges"] = Json::array();
    for (const auto& [key, mix] : model.mixtures()) {
        Json edge;
        edge["from"] = key.first + 1;
        edge["to"] = key.second + 1;
        edge["mixture"] = mixture_to_json(mix);
        doc["edges"].push_back(std::move(edge));
    }
    return doc;
}

} // namespace smjls

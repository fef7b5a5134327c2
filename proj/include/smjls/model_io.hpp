#pragma once

#include <json.hpp>
#include <map>
#include <string>

#include "smjls/model.hpp"
#include "smjls/stabilizer.hpp"

namespace smjls {

using Json = nlohmann::json;
using ParamMap = std::map<std::string, double>;

/// Arithmetic over parameter names: numbers, identifiers, + - * /, unary
/// minus and parentheses. Lets model files express fields like "3*a".
double eval_expression(const std::string& text, const ParamMap& params);

/// Numeric leaf: a JSON number, or a string expression over the parameters.
double eval_number(const Json& leaf, const ParamMap& params);

Json load_json_file(const std::string& path);

enum class ModelKind { SemiMarkov, Markov, Discrete, Synthesis };
ModelKind classify_model(const Json& doc);

/// The "parameters" object of the file (defaults), merged with overrides.
ParamMap merge_parameters(const Json& doc, const ParamMap& overrides);

/// Loaders evaluate every numeric leaf against the merged parameters.
/// Mode indices in files are 1-based.
SemiMarkovModel load_semi_markov(const Json& doc, const ParamMap& overrides = {});
MarkovModel load_markov(const Json& doc, const ParamMap& overrides = {});
DiscreteModel load_discrete(const Json& doc, const ParamMap& overrides = {});
SynthesisProblem load_synthesis(const Json& doc, const ParamMap& overrides = {});

Json to_json(const SemiMarkovModel& model);
Json to_json(const MarkovModel& model);
Json to_json(const DiscreteModel& model);

} // namespace smjls

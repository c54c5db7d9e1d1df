#pragma once

// JSON model configuration.
//
//   {"types": 1, "variant": "bgw", "offspring": [{"0": 0.25, "2": 0.75}]}
//   {"types": 2, "variant": "bgw",
//    "offspring": [{"0,0": 0.25, "0,2": 0.75}, {"0,0": 0.25, "2,0": 0.75}]}
//   {"types": 1, "variant": "bgw", "offspring": [{"geometric": "1/3"}]}
//   {"types": 1, "variant": "sevastyanov",
//    "life_span": {"1": 0.5, "2": 0.5},
//    "split": {"1": {"0": 0.5, "2": 0.5}, "2": {"0": 0.125, "2": 0.875}}}
//   {"types": 1, "variant": "sevastyanov",
//    "life_span": {"exponential": 1.0}, "split": {"0": 0.25, "2": 0.75}}
//   {"types": 2, "variant": "general",
//    "careers": [{"litter": {"0": 0.3, "3": 0.7},
//                 "ages": {"uniform": [0.5, 2.0]},
//                 "child_types": [0.5, 0.5]},
//                {"litter": {"2": 1}, "ages": {"atoms": {"1": 0.5, "1.5": 0.5}},
//                 "child_types": [0, 1]}]}
//
// Birth ages are {"atoms": {age: prob, ...}}, {"uniform": [lo, hi]} or
// {"exponential": rate}.
//
// Probabilities are JSON numbers or strings holding a decimal or a fraction
// "a/b". An optional "career_cap" bounds the children of a single career.

#include <string>

#include "branching/model.hpp"
#include "json.hpp"

namespace branching {

/// Throws Error(Parse) naming the offending path. Does not check pmf sums;
/// see validate_model.
ModelSpec parse_model_spec(const nlohmann::json& doc);

nlohmann::json model_spec_to_json(const ModelSpec& spec);

/// Reads, parses and validates. Throws Error(Io|Parse|Validation).
Model load_model_file(const std::string& path);
Model load_model_text(const std::string& text);

/// Parses a probability-like value: number, decimal string or "a/b".
double parse_real(const nlohmann::json& value, const std::string& path);

/// Shortest round-trip decimal form.
std::string format_real(double x);

}  // namespace branching

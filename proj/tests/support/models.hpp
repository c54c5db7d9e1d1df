#pragma once

#include <string>

#include "branching/model_json.hpp"

namespace fixtures {

inline const char* kBgw = R"({"types": 1, "variant": "bgw", "offspring": [{"0": "1/4", "2": "3/4"}]})";
inline const char* kSubcritical =
    R"({"types": 1, "variant": "bgw", "offspring": [{"0": "3/4", "2": "1/4"}]})";
inline const char* kFlip = R"({"types": 2, "variant": "bgw",
  "offspring": [{"0,0": "1/4", "0,2": "3/4"}, {"0,0": "1/4", "2,0": "3/4"}]})";
inline const char* kGeometric =
    R"({"types": 1, "variant": "bgw", "offspring": [{"geometric": "1/3"}]})";
inline const char* kSevastyanov = R"({"types": 1, "variant": "sevastyanov",
  "life_span": {"1": "1/2", "2": "1/2"},
  "split": {"1": {"0": "1/2", "2": "1/2"}, "2": {"0": "1/8", "2": "7/8"}}})";
inline const char* kMarkov = R"({"types": 1, "variant": "sevastyanov",
  "life_span": {"exponential": 1}, "split": {"0": "1/4", "2": "3/4"}})";
inline const char* kGeneral = R"({"types": 2, "variant": "general",
  "careers": [{"litter": {"0": 0.3, "3": 0.7}, "ages": {"uniform": [0.5, 2.0]},
               "child_types": [0.5, 0.5]},
              {"litter": {"0": 0.4, "1": 0.2, "2": 0.4}, "ages": {"atoms": {"1": 0.5, "1.5": 0.5}},
               "child_types": [0.8, 0.2]}]})";
inline const char* kExtinct = R"({"types": 1, "variant": "bgw", "offspring": [{"0": 1}]})";
inline const char* kOne = R"({"types": 1, "variant": "bgw", "offspring": [{"1": 1}]})";
inline const char* kTwo = R"({"types": 1, "variant": "bgw", "offspring": [{"2": 1}]})";

inline branching::Model load(const char* text) { return branching::load_model_text(text); }

}  // namespace fixtures

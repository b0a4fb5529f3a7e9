#pragma once

#include <string>

#include <json.hpp>

#include "sdg/strategy.hpp"

namespace sdg {

// Declarative strategy descriptions.
//
// Rule specs:     {"type": "constant", "time": t | "inf" | "-inf"}
//                 {"type": "deterministic_grid", "times": [t1, ...]}
//                 {"type": "first_exit", "center": [...], "radius": r,
//                  "space_time": bool, "t0": t, "cap_time": t?, "after": rule?}
// Selector specs: {"type": "constant", "index": k}
//                 {"type": "threshold", "coord": i, "level": x,
//                  "below": k, "above": k}
//                 {"type": "grid_feedback", ...table payload...}
//
// A deterministic_grid rule is sugar: the segment expands into one constant
// rule per listed time, all sharing the segment's selector. Emission always
// produces the expanded canonical form, and parse(emit(s)) == s holds
// bit-exactly for every canonical description (tested byte-for-byte).
// Strategies built from combinators (switches, concatenations, response
// maps) are not declaratively describable and refuse to serialize.

nlohmann::ordered_json rule_to_json(const StoppingRule& rule);
RulePtr rule_from_json(const nlohmann::ordered_json& spec);

nlohmann::ordered_json strategy_to_json(const ElementaryStrategy& strategy);
ElementaryStrategy strategy_from_json(const nlohmann::ordered_json& desc);

// Canonical text form (2-space indent; doubles round-trip exactly).
std::string strategy_to_string(const ElementaryStrategy& strategy);
ElementaryStrategy strategy_from_string(const std::string& text);

}  // namespace sdg

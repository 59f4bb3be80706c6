#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scaffold/json_io.hpp"

namespace scaffold {

struct FiredTransition {
    std::string npc;
    std::string trait;
    std::string from;
    std::string to;
    std::string keyword;

    bool operator==(const FiredTransition&) const = default;
};

struct AppliedRule {
    std::string role;
    std::size_t rule_index = 0;
    std::string param;
    double old_value = 0.0;
    double new_value = 0.0;

    bool operator==(const AppliedRule&) const = default;
};

// Audit trail of one turn, built against the memory snapshot at base_turn.
struct TurnDelta {
    std::uint64_t base_turn = 0;
    std::vector<FiredTransition> fired_transitions;
    std::vector<AppliedRule> applied_rules;
    // "contradiction_count", "player_rapport.<target>" or an auxiliary counter.
    std::map<std::string, double> metric_increments;
    std::vector<std::string> new_evidence;
    // Roles for which the composer emitted a recap block this turn.
    std::vector<std::string> recaps;
    // UnknownMetric and similar rule-pass failures, one message each.
    std::vector<std::string> rule_errors;

    bool empty() const {
        return fired_transitions.empty() && applied_rules.empty() && metric_increments.empty() &&
               new_evidence.empty() && recaps.empty();
    }

    bool operator==(const TurnDelta&) const = default;
};

inline Json to_json(const TurnDelta& d) {
    Json fired = Json::array();
    for (const auto& f : d.fired_transitions)
        fired.push_back({{"npc", f.npc}, {"trait", f.trait}, {"from", f.from}, {"to", f.to}, {"keyword", f.keyword}});
    Json applied = Json::array();
    for (const auto& a : d.applied_rules)
        applied.push_back({{"role", a.role},
                           {"rule_index", a.rule_index},
                           {"param", a.param},
                           {"old_value", a.old_value},
                           {"new_value", a.new_value}});
    return Json{{"base_turn", d.base_turn},
                {"fired_transitions", fired},
                {"applied_rules", applied},
                {"metric_increments", d.metric_increments},
                {"new_evidence", d.new_evidence},
                {"recaps", d.recaps},
                {"rule_errors", d.rule_errors}};
}

// Sorted keys, no whitespace.
inline std::string canonical_serialize(const TurnDelta& d) { return to_json(d).dump(); }

}  // namespace scaffold

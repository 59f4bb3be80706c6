#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "scaffold/memory.hpp"
#include "scaffold/schema.hpp"

namespace scaffold {

struct Finding {
    std::string kind;     // unresolved_metric | unknown_param | orphan_npc_state | trait_state
    std::string subject;  // what the finding is about, e.g. "suspect.update_rules[0]"
    std::string message;

    bool operator==(const Finding&) const = default;
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool ok() const { return findings.empty(); }
};

// Cross-reference walk over parsed documents. Alias targets that are not
// already known metrics count as auxiliary counters the session maintains.
inline ValidationReport validate_bundle(const std::vector<RoleScaffold>& scaffolds,
                                        const std::vector<TraitStateMachine>& traits,
                                        const SharedMemory& memory_template,
                                        const std::map<std::string, std::string>& aliases = {}) {
    ValidationReport report;

    std::set<std::string> metrics{"turn_index", "contradiction_count", "evidence_count"};
    for (const auto& [k, _] : memory_template.player_rapport) metrics.insert("player_rapport." + k);
    for (const auto& [k, _] : memory_template.auxiliary_counters) metrics.insert(k);
    for (const auto& [role, params] : memory_template.npc_state)
        for (const auto& [p, _] : params) metrics.insert(role + "." + p);
    for (const auto& s : scaffolds)
        for (const auto& p : s.params) metrics.insert(s.role + "." + p.name);
    for (const auto& [alias, target] : aliases) {
        metrics.insert(target);
        metrics.insert(alias);
    }

    for (const auto& s : scaffolds) {
        for (std::size_t i = 0; i < s.rules.size(); ++i) {
            auto subject = s.role + ".update_rules[" + std::to_string(i) + "]";
            for (const auto& c : s.rules[i].when)
                if (!metrics.count(c.metric))
                    report.findings.push_back({"unresolved_metric", subject,
                                               "condition metric '" + c.metric + "' has no source in memory, params or aliases"});
            for (const auto& a : s.rules[i].then)
                if (!s.find_param(a.param))
                    report.findings.push_back({"unknown_param", subject,
                                               "action targets param '" + a.param + "' not declared by role '" + s.role + "'"});
        }
    }

    for (const auto& [role, params] : memory_template.npc_state) {
        auto it = std::find_if(scaffolds.begin(), scaffolds.end(), [&](const auto& s) { return s.role == role; });
        if (it == scaffolds.end()) {
            report.findings.push_back({"orphan_npc_state", "npc_state." + role, "no scaffold declares role '" + role + "'"});
            continue;
        }
        for (const auto& [p, v] : params) {
            const auto* fp = it->find_param(p);
            if (!fp)
                report.findings.push_back({"orphan_npc_state", "npc_state." + role + "." + p,
                                           "role '" + role + "' declares no param '" + p + "'"});
            else if (v < fp->min || v > fp->max)
                report.findings.push_back({"out_of_range", "npc_state." + role + "." + p,
                                           "value " + format_number(v) + " outside the scaffold range"});
        }
    }

    for (const auto& [npc, states] : memory_template.trait_states) {
        for (const auto& [trait, label] : states) {
            bool known = std::any_of(traits.begin(), traits.end(),
                                     [&](const auto& m) { return m.trait == trait && m.knows(label); });
            if (!known)
                report.findings.push_back({"trait_state", "trait_states." + npc + "." + trait,
                                           "state '" + label + "' is not declared by any '" + trait + "' machine"});
        }
    }
    return report;
}

}  // namespace scaffold

#pragma once

// Per-turn state evolution: keyword-triggered trait transitions, condition
// evaluation over a merged metric view, and clamped application of update
// rules. Stateless; everything mutable lives in SharedMemory.

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scaffold/delta.hpp"
#include "scaffold/errors.hpp"
#include "scaffold/memory.hpp"
#include "scaffold/schema.hpp"
#include "scaffold/text.hpp"

namespace scaffold {

// ---- trait transitions -----------------------------------------------------

struct TransitionResult {
    std::vector<TraitStateMachine> machines;
    std::vector<FiredTransition> fired;
};

// Each trait independently takes at most one step: the first declared
// transition leading to a different state whose keyword occurs in the
// normalized utterance.
inline TransitionResult apply_trigger_transitions(std::span<const TraitStateMachine> machines,
                                                  std::string_view utterance, std::string_view npc = {}) {
    TransitionResult out;
    out.machines.assign(machines.begin(), machines.end());
    const auto text = normalize_text(utterance);
    if (text.empty()) return out;
    for (auto& m : out.machines) {
        for (const auto& t : m.transitions) {
            if (t.to == m.current) continue;
            if (!t.from.empty() && std::find(t.from.begin(), t.from.end(), m.current) == t.from.end()) continue;
            auto hit = std::find_if(t.trigger_keywords.begin(), t.trigger_keywords.end(), [&](const std::string& k) {
                return text.find(normalize_text(k)) != std::string::npos;
            });
            if (hit == t.trigger_keywords.end()) continue;
            out.fired.push_back(FiredTransition{std::string(npc), m.trait, m.current, t.to, *hit});
            m.current = t.to;
            break;
        }
    }
    return out;
}

// Machines with their current state taken from memory where recorded.
inline std::vector<TraitStateMachine> hydrate_traits(const NpcTraits& block, const SharedMemory& memory,
                                                     const std::string& npc) {
    auto machines = block.machines;
    auto it = memory.trait_states.find(npc);
    if (it == memory.trait_states.end()) return machines;
    for (auto& m : machines) {
        auto s = it->second.find(m.trait);
        if (s != it->second.end() && m.knows(s->second)) m.current = s->second;
    }
    return machines;
}

// ---- metric view -----------------------------------------------------------

struct Metric {
    double value = 0.0;
    bool integral = false;
};

// Read-only metric namespace frozen at turn start. Sources, highest priority
// first: memory counters, `<role>.<param>` fuzzy values, aliases.
class MetricView {
public:
    MetricView() = default;

    MetricView(const SharedMemory& memory, const std::map<std::string, std::string>& aliases = {}) {
        put("turn_index", static_cast<double>(memory.turn_index), true);
        put("contradiction_count", static_cast<double>(memory.contradiction_count), true);
        put("evidence_count", static_cast<double>(memory.recent_evidence.size()), true);
        for (const auto& [k, v] : memory.player_rapport) put("player_rapport." + k, v, false);
        for (const auto& [k, v] : memory.auxiliary_counters) put(k, static_cast<double>(v), true);
        for (const auto& [role, params] : memory.npc_state)
            for (const auto& [p, v] : params) put(role + "." + p, v, false);
        for (const auto& [alias, target] : aliases) {
            auto t = metrics_.find(target);
            if (t != metrics_.end()) metrics_.emplace(alias, t->second);
        }
    }

    std::optional<Metric> find(std::string_view name) const {
        auto it = metrics_.find(std::string(name));
        if (it == metrics_.end()) return std::nullopt;
        return it->second;
    }

    Metric at(std::string_view name) const {
        auto m = find(name);
        if (!m) throw UnknownMetric(std::string(name));
        return *m;
    }

    bool contains(std::string_view name) const { return metrics_.count(std::string(name)) != 0; }
    const std::map<std::string, Metric>& all() const { return metrics_; }

private:
    void put(const std::string& name, double v, bool integral) { metrics_.emplace(name, Metric{v, integral}); }

    std::map<std::string, Metric> metrics_;
};

inline constexpr double kEqualityTolerance = 1e-9;

inline bool compare(double value, Comparator cmp, double threshold, bool integral = false) {
    switch (cmp) {
        case Comparator::Greater: return value > threshold;
        case Comparator::GreaterEqual: return value >= threshold;
        case Comparator::Less: return value < threshold;
        case Comparator::LessEqual: return value <= threshold;
        case Comparator::Equal: return integral ? value == threshold : std::fabs(value - threshold) <= kEqualityTolerance;
    }
    return false;
}

inline bool evaluate_condition(const Condition& cond, const MetricView& view) {
    auto m = view.at(cond.metric);
    return compare(m.value, cond.comparator, cond.threshold, m.integral);
}

inline bool rule_holds(const UpdateRule& rule, const MetricView& view) {
    for (const auto& c : rule.when)
        if (!evaluate_condition(c, view)) return false;
    return true;
}

// ---- update rules ----------------------------------------------------------

// Scaffold with param values loaded from memory (defaults where absent).
inline RoleScaffold hydrate_scaffold(RoleScaffold s, const SharedMemory& memory) {
    auto it = memory.npc_state.find(s.role);
    for (auto& p : s.params) {
        p.value = p.default_value;
        if (it == memory.npc_state.end()) continue;
        auto v = it->second.find(p.name);
        if (v != it->second.end()) p.value = p.clamp(v->second);
    }
    return s;
}

struct RulePass {
    std::vector<FuzzyParam> params;
    std::vector<AppliedRule> applied;
};

// Rules are checked in declaration order against the frozen view; actions
// apply to the running param values and are clamped to [min, max]. Throws
// UnknownMetric before touching any param.
inline RulePass apply_update_rules(const RoleScaffold& scaffold, const MetricView& view) {
    std::vector<bool> fires;
    fires.reserve(scaffold.rules.size());
    for (const auto& r : scaffold.rules) fires.push_back(rule_holds(r, view));

    RulePass out{scaffold.params, {}};
    auto find = [&](const std::string& name) -> FuzzyParam& {
        for (auto& p : out.params)
            if (p.name == name) return p;
        throw SchemaError("action targets unknown param '" + name + "'");
    };
    for (std::size_t i = 0; i < scaffold.rules.size(); ++i) {
        if (!fires[i]) continue;
        for (const auto& a : scaffold.rules[i].then) {
            auto& p = find(a.param);
            double old = p.value;
            p.value = p.clamp(a.kind == ActionKind::Delta ? p.value + a.amount : a.amount);
            out.applied.push_back(AppliedRule{scaffold.role, i, p.name, old, p.value});
        }
    }
    return out;
}

// ---- auxiliary counters ----------------------------------------------------

// Increments `counter` by one on each turn addressed to an NPC of
// `addressed_role` (any role when empty) whose conditions hold.
struct CounterRule {
    std::string counter;
    std::string addressed_role;
    std::vector<Condition> when;
};

// ---- whole-turn step -------------------------------------------------------

struct TurnContext {
    std::span<const RoleScaffold> scaffolds;
    const SharedMemory* memory = nullptr;
    std::map<std::string, std::string> aliases;
    std::vector<CounterRule> counters;
    // addressed NPC
    std::string npc;
    std::string npc_role;
    const NpcTraits* traits = nullptr;
};

struct TurnStep {
    TurnDelta delta;
    MetricView view;  // start-of-turn snapshot
    std::vector<TraitStateMachine> machines;
    std::vector<RoleScaffold> scaffolds;  // post-rule values
};

// trigger transitions -> metric snapshot -> update rules (every role) ->
// counter rules. An UnknownMetric aborts that role's rule pass only and is
// recorded in delta.rule_errors.
inline TurnStep run_engine_turn(const TurnContext& ctx, std::string_view utterance) {
    const SharedMemory& memory = *ctx.memory;
    TurnStep step;
    step.delta.base_turn = memory.turn_index;

    if (ctx.traits) {
        auto tr = apply_trigger_transitions(hydrate_traits(*ctx.traits, memory, ctx.npc), utterance, ctx.npc);
        step.machines = std::move(tr.machines);
        step.delta.fired_transitions = std::move(tr.fired);
    }

    step.view = MetricView(memory, ctx.aliases);

    for (const auto& raw : ctx.scaffolds) {
        auto s = hydrate_scaffold(raw, memory);
        try {
            auto pass = apply_update_rules(s, step.view);
            s.params = std::move(pass.params);
            for (auto& a : pass.applied) step.delta.applied_rules.push_back(std::move(a));
        } catch (const UnknownMetric& e) {
            step.delta.rule_errors.push_back(s.role + ": " + e.what());
        }
        step.scaffolds.push_back(std::move(s));
    }

    for (const auto& c : ctx.counters) {
        if (!c.addressed_role.empty() && c.addressed_role != ctx.npc_role) continue;
        try {
            bool ok = true;
            for (const auto& cond : c.when) ok = ok && evaluate_condition(cond, step.view);
            if (ok) step.delta.metric_increments[c.counter] += 1;
        } catch (const UnknownMetric& e) {
            step.delta.rule_errors.push_back("counter " + c.counter + ": " + e.what());
        }
    }
    return step;
}

}  // namespace scaffold

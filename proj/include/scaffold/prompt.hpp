#pragma once

// Prompt composition under the three prompting conditions:
//   HCP     - full symbolic scaffold: constraints, all rules, full trait
//             schema and the full lore corpus.
//   LCP     - role description and lore only; no trait schema, no rules.
//   JSONRAG - constraints plus only the rules and traits selected for this
//             turn, and retrieved lore/history excerpts instead of full lore.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scaffold/delta.hpp"
#include "scaffold/engine.hpp"
#include "scaffold/errors.hpp"
#include "scaffold/gateway.hpp"
#include "scaffold/lore.hpp"
#include "scaffold/memory.hpp"
#include "scaffold/schema.hpp"

namespace scaffold {

enum class PromptCondition { HCP, LCP, JSONRAG };

inline std::string_view to_string(PromptCondition c) {
    switch (c) {
        case PromptCondition::HCP: return "HCP";
        case PromptCondition::LCP: return "LCP";
        case PromptCondition::JSONRAG: return "JSONRAG";
    }
    return "?";
}

inline std::optional<PromptCondition> parse_prompt_condition(std::string_view s) {
    if (s == "HCP" || s == "hcp") return PromptCondition::HCP;
    if (s == "LCP" || s == "lcp") return PromptCondition::LCP;
    if (s == "JSONRAG" || s == "JSON+RAG" || s == "jsonrag" || s == "json+rag") return PromptCondition::JSONRAG;
    return std::nullopt;
}

namespace block {
inline constexpr std::string_view kLore = "lore";
inline constexpr std::string_view kRetrieved = "retrieved";
inline constexpr std::string_view kRules = "rules";
inline constexpr std::string_view kTraits = "traits";
inline constexpr std::string_view kMemory = "memory";
inline constexpr std::string_view kRecap = "recap";
}  // namespace block

struct ContextBlock {
    std::string kind;
    std::string label;
    std::string text;

    bool operator==(const ContextBlock&) const = default;
};

struct PromptBundle {
    PromptCondition condition = PromptCondition::HCP;
    std::string role;  // addressed NPC id
    std::string system_text;
    std::vector<ContextBlock> context_blocks;
    std::vector<DialogueTurn> history;
    std::string user_text;
    bool recap_emitted = false;

    std::size_t count(std::string_view kind) const {
        return static_cast<std::size_t>(std::count_if(context_blocks.begin(), context_blocks.end(),
                                                      [&](const auto& b) { return b.kind == kind; }));
    }
};

inline Json to_json(const PromptBundle& b) {
    Json blocks = Json::array();
    for (const auto& c : b.context_blocks) blocks.push_back({{"kind", c.kind}, {"label", c.label}, {"text", c.text}});
    Json hist = Json::array();
    for (const auto& t : b.history) hist.push_back({{"turn", t.turn}, {"speaker", t.speaker}, {"text", t.text}});
    return Json{{"condition", to_string(b.condition)},
                {"role", b.role},
                {"system_text", b.system_text},
                {"context_blocks", blocks},
                {"history", hist},
                {"user_text", b.user_text},
                {"recap_emitted", b.recap_emitted}};
}

inline std::string serialize_bundle(const PromptBundle& b) { return to_json(b).dump(); }

// System message = system text followed by the labeled context blocks;
// history turns become alternating user/assistant messages.
inline std::vector<ChatMessage> to_messages(const PromptBundle& b) {
    std::string system = b.system_text;
    for (const auto& c : b.context_blocks) system += "\n\n### " + c.label + "\n" + c.text;
    std::vector<ChatMessage> msgs{{"system", std::move(system)}};
    for (const auto& t : b.history) {
        if (t.speaker == b.role)
            msgs.push_back({"assistant", t.text});
        else if (t.speaker == "player")
            msgs.push_back({"user", t.text});
        else
            msgs.push_back({"user", "[" + t.speaker + "] " + t.text});
    }
    msgs.push_back({"user", b.user_text});
    return msgs;
}

inline Completion complete(const Gateway& gateway, const PromptBundle& bundle, const GenerationConfig& config) {
    return gateway.complete(to_messages(bundle), config);
}

// ---- rule / trait selection ------------------------------------------------

struct SelectedRules {
    std::vector<std::size_t> rule_indices;
    std::vector<std::string> trait_lines;
};

// Metric names whose values this turn's delta changes.
inline std::set<std::string> changed_metrics(const TurnDelta& delta,
                                             const std::map<std::string, std::string>& aliases = {}) {
    std::set<std::string> out;
    for (const auto& [name, inc] : delta.metric_increments)
        if (inc != 0) out.insert(name);
    for (const auto& a : delta.applied_rules)
        if (a.old_value != a.new_value) out.insert(a.role + "." + a.param);
    if (!delta.new_evidence.empty()) out.insert("evidence_count");
    for (const auto& [alias, target] : aliases)
        if (out.count(target)) out.insert(alias);
    return out;
}

inline std::string trait_line(const TraitStateMachine& m, const FiredTransition* fired) {
    std::string line = m.trait + ": " + m.current;
    if (fired) line += " (changed from " + fired->from + " after the player said \"" + fired->keyword + "\")";
    return line;
}

// Rules whose conditions hold on the view or whose watched metrics changed,
// plus one line per trait (annotated when it fired this turn).
inline SelectedRules select_relevant_rules(const RoleScaffold& scaffold, std::span<const TraitStateMachine> machines,
                                           const TurnDelta& delta, const MetricView& view,
                                           const std::map<std::string, std::string>& aliases = {}) {
    SelectedRules out;
    auto changed = changed_metrics(delta, aliases);
    for (std::size_t i = 0; i < scaffold.rules.size(); ++i) {
        const auto& rule = scaffold.rules[i];
        bool watched = std::any_of(rule.when.begin(), rule.when.end(),
                                   [&](const Condition& c) { return changed.count(c.metric) != 0; });
        bool holds = false;
        try {
            holds = rule_holds(rule, view);
        } catch (const UnknownMetric&) {
        }
        if (watched || holds) out.rule_indices.push_back(i);
    }
    for (const auto& m : machines) {
        auto f = std::find_if(delta.fired_transitions.begin(), delta.fired_transitions.end(),
                              [&](const FiredTransition& t) { return t.trait == m.trait; });
        out.trait_lines.push_back(trait_line(m, f == delta.fired_transitions.end() ? nullptr : &*f));
    }
    return out;
}

// ---- composition -----------------------------------------------------------

struct NpcProfile {
    std::string id;
    std::string name;
    std::string description;
    std::string scaffold_role;
};

struct ComposerConfig {
    std::size_t budget_chars = 8000;
    double recap_threshold = 0.7;
    std::uint64_t recap_interval = 5;
    std::size_t history_turns = 8;
    std::string recap_param = "guidance_intensity";
};

struct ComposeInputs {
    PromptCondition condition = PromptCondition::HCP;
    const NpcProfile* npc = nullptr;
    const RoleScaffold* scaffold = nullptr;  // values reflect this turn's state
    const NpcTraits* traits = nullptr;       // current states applied; may be null
    const SharedMemory* memory = nullptr;
    std::string_view full_lore;
    const RetrievalResult* retrieval = nullptr;  // JSONRAG
    const SelectedRules* selection = nullptr;    // JSONRAG
    std::span<const DialogueTurn> history;
    std::string_view utterance;
    std::string_view system_template;
    std::string_view scenario_name;
    const std::map<std::string, std::string>* evidence_labels = nullptr;
};

inline std::string memory_digest(const SharedMemory& m, const std::map<std::string, std::string>* labels) {
    std::string out = "Turn " + std::to_string(m.turn_index) + ". Contradictions noted: " +
                      std::to_string(m.contradiction_count) + ".";
    if (m.recent_evidence.empty()) {
        out += " No evidence registered yet.";
    } else {
        std::vector<std::string> ev;
        for (const auto& id : m.recent_evidence) {
            std::string e = id;
            if (labels) {
                auto it = labels->find(id);
                if (it != labels->end()) e += " (" + it->second + ")";
            }
            ev.push_back(std::move(e));
        }
        out += " Evidence registered: " + join(ev, ", ") + ".";
    }
    if (!m.player_rapport.empty()) {
        std::vector<std::string> r;
        for (const auto& [k, v] : m.player_rapport) r.push_back(k + " " + format_number(v));
        out += " Rapport: " + join(r, ", ") + ".";
    }
    return out;
}

inline bool recap_due(const RoleScaffold& s, const SharedMemory& m, const ComposerConfig& cfg) {
    if (s.kind != RoleKind::Interviewer) return false;
    const auto* p = s.find_param(cfg.recap_param);
    if (!p || p->value < cfg.recap_threshold) return false;
    auto it = m.last_recaps.find(s.role);
    std::uint64_t last = it == m.last_recaps.end() ? 0 : it->second;
    return m.turn_index >= last && m.turn_index - last >= cfg.recap_interval;
}

inline std::string behavior_lines(const RoleScaffold& s) {
    std::string out;
    for (const auto& p : s.params)
        out += "\n- " + p.name + ": " + format_number(p.value) + " (range " + format_number(p.min) + "-" +
               format_number(p.max) + ")";
    return out;
}

inline std::size_t blocks_size(const std::vector<ContextBlock>& blocks) {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.label.size() + b.text.size();
    return n;
}

inline PromptBundle compose(const ComposeInputs& in, const ComposerConfig& cfg = {}) {
    if (!in.npc || !in.scaffold || !in.memory) throw Error("compose: npc, scaffold and memory are required");
    const auto& npc = *in.npc;
    const auto& s = *in.scaffold;
    const auto& mem = *in.memory;

    PromptBundle b;
    b.condition = in.condition;
    b.role = npc.id;
    b.user_text = std::string(in.utterance);

    std::map<std::string, std::string> vars{{"npc_name", npc.name.empty() ? npc.id : npc.name},
                                            {"npc_id", npc.id},
                                            {"role_description", npc.description.empty() ? s.description : npc.description},
                                            {"scenario_name", std::string(in.scenario_name)}};
    b.system_text = substitute_placeholders(in.system_template, vars);

    const bool symbolic = in.condition != PromptCondition::LCP;
    if (symbolic) {
        if (!s.constraints.empty()) {
            b.system_text += "\n\nConstraints:";
            for (const auto& c : s.constraints) b.system_text += "\n- " + render_constraint(c);
        }
        if (!s.params.empty()) b.system_text += "\n\nBehavior parameters (0 = minimal, 1 = maximal):" + behavior_lines(s);
    }
    if (b.system_text.size() > cfg.budget_chars)
        throw BudgetExceeded("system text (" + std::to_string(b.system_text.size()) + " chars) exceeds the budget of " +
                             std::to_string(cfg.budget_chars));

    switch (in.condition) {
        case PromptCondition::HCP: {
            b.context_blocks.push_back({std::string(block::kLore), "Case lore", std::string(in.full_lore)});
            if (in.traits) {
                b.context_blocks.push_back(
                    {std::string(block::kTraits), "Character trait schema", traits_to_json(*in.traits).dump()});
            }
            if (!s.rules.empty()) {
                std::string rules;
                for (const auto& r : s.rules) rules += (rules.empty() ? "" : "\n") + describe_rule(r);
                b.context_blocks.push_back({std::string(block::kRules), "Behavior rules", rules});
            }
            break;
        }
        case PromptCondition::LCP:
            b.context_blocks.push_back({std::string(block::kLore), "Case lore", std::string(in.full_lore)});
            break;
        case PromptCondition::JSONRAG: {
            if (in.retrieval) {
                std::size_t rank = 1;
                for (const auto& h : in.retrieval->hits)
                    b.context_blocks.push_back({std::string(block::kRetrieved),
                                                "Retrieved " + std::to_string(rank++) + " (" + h.id + ")", h.text});
            }
            if (in.selection) {
                std::string rules;
                for (auto i : in.selection->rule_indices)
                    if (i < s.rules.size()) rules += (rules.empty() ? "" : "\n") + describe_rule(s.rules[i]);
                if (!rules.empty()) b.context_blocks.push_back({std::string(block::kRules), "Active rules", rules});
                if (!in.selection->trait_lines.empty())
                    b.context_blocks.push_back(
                        {std::string(block::kTraits), "Current traits", join(in.selection->trait_lines, "\n")});
            }
            break;
        }
    }

    if (symbolic) {
        b.context_blocks.push_back({std::string(block::kMemory), "Game state", memory_digest(mem, in.evidence_labels)});
        if (recap_due(s, mem, cfg)) {
            b.recap_emitted = true;
            b.context_blocks.push_back(
                {std::string(block::kRecap), "Recap",
                 "Open this reply with a short recap of the evidence and contradictions so far, then name the next "
                 "open question. Do not reveal the solution."});
        }
    }

    // Over budget: drop retrieved blocks from the lowest rank up, then trim
    // the lore block.
    while (blocks_size(b.context_blocks) > cfg.budget_chars) {
        auto last_retrieved = std::find_if(b.context_blocks.rbegin(), b.context_blocks.rend(),
                                           [](const auto& c) { return c.kind == block::kRetrieved; });
        if (last_retrieved != b.context_blocks.rend()) {
            b.context_blocks.erase(std::next(last_retrieved).base());
            continue;
        }
        auto lore = std::find_if(b.context_blocks.begin(), b.context_blocks.end(),
                                 [](const auto& c) { return c.kind == block::kLore; });
        auto over = blocks_size(b.context_blocks) - cfg.budget_chars;
        if (lore == b.context_blocks.end() || lore->text.size() <= over)
            throw BudgetExceeded("context blocks exceed the budget of " + std::to_string(cfg.budget_chars) + " chars");
        lore->text.resize(lore->text.size() - over);
    }

    std::size_t first = in.history.size() > cfg.history_turns ? in.history.size() - cfg.history_turns : 0;
    b.history.assign(in.history.begin() + static_cast<std::ptrdiff_t>(first), in.history.end());
    return b;
}

}  // namespace scaffold

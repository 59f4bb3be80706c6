#pragma once

// Role scaffolds, trait state machines and the condition/action rule DSL.
//
// A role scaffold document follows the on-disk layout
//
//   {"npc_roles": {"suspect": {
//       "symbolic_schema": {"constraints": ["forbidden_facts_filtered"]},
//       "fuzzy_params": {"evasiveness": {"default": 0.55, "min": 0.0, "max": 1.0}},
//       "update_rules": [{"when": {"evidence_count": ">=2"},
//                         "then": {"evasiveness": "-0.10"}}]}}}
//
// Conditions are `(>|>=|<|<=|==) NUMBER`; actions are `+x`/`-x` (delta) or a
// bare `x` (absolute set).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scaffold/errors.hpp"
#include "scaffold/json_io.hpp"
#include "scaffold/text.hpp"

namespace scaffold {

enum class Comparator { Greater, GreaterEqual, Less, LessEqual, Equal };

inline std::string_view to_string(Comparator c) {
    switch (c) {
        case Comparator::Greater: return ">";
        case Comparator::GreaterEqual: return ">=";
        case Comparator::Less: return "<";
        case Comparator::LessEqual: return "<=";
        case Comparator::Equal: return "==";
    }
    return "?";
}

struct Condition {
    std::string metric;
    Comparator comparator = Comparator::Equal;
    double threshold = 0.0;

    bool operator==(const Condition&) const = default;
};

enum class ActionKind { Delta, Set };

struct Action {
    std::string param;
    ActionKind kind = ActionKind::Delta;
    double amount = 0.0;

    bool operator==(const Action&) const = default;
};

struct UpdateRule {
    std::vector<Condition> when;  // conjunctive
    std::vector<Action> then;

    bool operator==(const UpdateRule&) const = default;
};

struct FuzzyParam {
    std::string name;
    double value = 0.0;
    double default_value = 0.0;
    double min = 0.0;
    double max = 1.0;

    double clamp(double v) const { return std::clamp(v, min, max); }
    bool operator==(const FuzzyParam&) const = default;
};

struct Constraint {
    std::string tag;
    std::vector<std::string> payload;

    bool operator==(const Constraint&) const = default;
};

enum class RoleKind { Interviewer, Suspect, Custom };

inline std::string_view to_string(RoleKind k) {
    switch (k) {
        case RoleKind::Interviewer: return "interviewer";
        case RoleKind::Suspect: return "suspect";
        case RoleKind::Custom: return "custom";
    }
    return "custom";
}

struct RoleScaffold {
    std::string role;
    RoleKind kind = RoleKind::Custom;
    std::string description;
    std::vector<Constraint> constraints;
    std::vector<FuzzyParam> params;
    std::vector<UpdateRule> rules;

    const FuzzyParam* find_param(std::string_view name) const {
        auto it = std::find_if(params.begin(), params.end(), [&](const auto& p) { return p.name == name; });
        return it == params.end() ? nullptr : &*it;
    }
    FuzzyParam* find_param(std::string_view name) {
        return const_cast<FuzzyParam*>(std::as_const(*this).find_param(name));
    }

    bool operator==(const RoleScaffold&) const = default;
};

struct Transition {
    std::string to;
    std::vector<std::string> trigger_keywords;
    std::vector<std::string> from;  // empty: applies from any state

    bool operator==(const Transition&) const = default;
};

struct TraitStateMachine {
    std::string trait;
    std::string current;
    std::vector<Transition> transitions;

    std::vector<std::string> states() const {
        std::vector<std::string> out{current};
        auto add = [&](const std::string& s) {
            if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
        };
        for (const auto& t : transitions) {
            add(t.to);
            for (const auto& f : t.from) add(f);
        }
        return out;
    }
    bool knows(std::string_view state) const {
        auto s = states();
        return std::find(s.begin(), s.end(), state) != s.end();
    }

    bool operator==(const TraitStateMachine&) const = default;
};

// One NPC block of a trait document, e.g. "suspect_1" with name "Mark Olsen".
struct NpcTraits {
    std::string key;
    std::string name;
    std::vector<TraitStateMachine> machines;

    bool operator==(const NpcTraits&) const = default;
};

// ---- constraint vocabulary -------------------------------------------------

struct ConstraintSpec {
    std::string_view tag;
    std::string_view instruction;
};

inline constexpr ConstraintSpec kConstraintVocabulary[] = {
    {"no_new_facts", "Never introduce facts absent from the lore."},
    {"no_spoilers", "Never reveal the solution of the case or name the culprit."},
    {"forbidden_facts_filtered", "Never disclose facts marked as forbidden for your character."},
    {"alibi_graph", "Keep every statement consistent with your alibi and its dependencies."},
    {"recap_agenda", "When the player seems lost, recap the evidence collected and the next open question."},
    {"turn_taking", "Speak only in response to the player and give exactly one reply per turn."},
    {"contradiction_check", "Point out when a statement contradicts earlier statements or registered evidence."},
    {"evidence_citation", "Cite registered evidence by its identifier when discussing it."},
    {"deception_tactics", "You may deflect, minimize or redirect, but never fabricate new events."},
    {"emotion_transitions", "Let your tone follow the trait states you are given."},
};

inline const ConstraintSpec* find_constraint(std::string_view tag) {
    for (const auto& c : kConstraintVocabulary)
        if (c.tag == tag) return &c;
    return nullptr;
}

// Imperative prompt line for a constraint; payloads are listed after it.
inline std::string render_constraint(const Constraint& c) {
    const auto* spec = find_constraint(c.tag);
    std::string line = spec ? std::string(spec->instruction) : c.tag;
    if (!c.payload.empty()) {
        if (c.tag == "forbidden_facts_filtered")
            line = "Never disclose any of these facts, even if asked directly: " + join(c.payload, "; ") + ".";
        else
            line += " (" + join(c.payload, "; ") + ")";
    }
    return line;
}

// ---- DSL -------------------------------------------------------------------

namespace detail {

inline std::optional<double> parse_finite(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::general);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace detail

inline std::optional<Condition> try_parse_condition(std::string metric, std::string_view text) {
    Condition c;
    c.metric = std::move(metric);
    std::string_view rest;
    if (text.starts_with(">=")) {
        c.comparator = Comparator::GreaterEqual;
        rest = text.substr(2);
    } else if (text.starts_with("<=")) {
        c.comparator = Comparator::LessEqual;
        rest = text.substr(2);
    } else if (text.starts_with("==")) {
        c.comparator = Comparator::Equal;
        rest = text.substr(2);
    } else if (text.starts_with(">")) {
        c.comparator = Comparator::Greater;
        rest = text.substr(1);
    } else if (text.starts_with("<")) {
        c.comparator = Comparator::Less;
        rest = text.substr(1);
    } else {
        return std::nullopt;
    }
    auto v = detail::parse_finite(rest);
    if (!v) return std::nullopt;
    c.threshold = *v;
    return c;
}

inline Condition parse_condition(std::string metric, std::string_view text) {
    auto c = try_parse_condition(metric, text);
    if (!c) throw SchemaError("condition on '" + metric + "': cannot parse '" + std::string(text) + "'");
    return *c;
}

inline std::optional<Action> try_parse_action(std::string param, std::string_view text) {
    Action a;
    a.param = std::move(param);
    std::string_view number = text;
    if (text.starts_with("+")) {
        a.kind = ActionKind::Delta;
        number = text.substr(1);
        if (number.starts_with("-") || number.starts_with("+")) return std::nullopt;
    } else if (text.starts_with("-")) {
        a.kind = ActionKind::Delta;
    } else {
        a.kind = ActionKind::Set;
    }
    auto v = detail::parse_finite(number);
    if (!v || std::fabs(*v) > 1.0) return std::nullopt;
    a.amount = *v;
    return a;
}

inline std::string condition_text(const Condition& c) {
    return std::string(to_string(c.comparator)) + format_number(c.threshold);
}

inline std::string action_text(const Action& a) {
    return a.kind == ActionKind::Delta ? format_signed(a.amount) : format_number(a.amount);
}

inline std::string describe_rule(const UpdateRule& r) {
    std::vector<std::string> conds, acts;
    for (const auto& c : r.when) conds.push_back(c.metric + " " + condition_text(c));
    for (const auto& a : r.then) acts.push_back(a.param + " " + action_text(a));
    return "When " + join(conds, " and ") + ": " + join(acts, ", ");
}

// ---- role scaffolds --------------------------------------------------------

namespace detail {

inline RoleKind kind_from_name(std::string_view name) {
    if (name == "interviewer") return RoleKind::Interviewer;
    if (name == "suspect") return RoleKind::Suspect;
    return RoleKind::Custom;
}

inline double require_number(const OrderedJson& obj, const char* field, const std::string& where) {
    if (!obj.contains(field)) throw SchemaError(where + ": missing field '" + field + "'");
    const auto& v = obj.at(field);
    if (!v.is_number()) throw SchemaError(where + ": field '" + field + "' must be a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(where + ": field '" + field + "' must be finite");
    return d;
}

inline std::vector<std::string> string_list(const OrderedJson& v, const std::string& where) {
    if (!v.is_array()) throw SchemaError(where + ": expected a list of strings");
    std::vector<std::string> out;
    for (const auto& s : v) {
        if (!s.is_string()) throw SchemaError(where + ": expected a list of strings");
        out.push_back(s.get<std::string>());
    }
    return out;
}

inline RoleScaffold scaffold_from_json(const std::string& role, const OrderedJson& body) {
    if (!body.is_object()) throw SchemaError("role '" + role + "': expected an object");
    RoleScaffold s;
    s.role = role;
    s.kind = kind_from_name(role);
    if (body.contains("kind")) {
        const auto& k = body.at("kind");
        if (!k.is_string()) throw SchemaError("role '" + role + "': kind must be a string");
        auto ks = k.get<std::string>();
        if (ks == "interviewer") s.kind = RoleKind::Interviewer;
        else if (ks == "suspect") s.kind = RoleKind::Suspect;
        else if (ks == "custom") s.kind = RoleKind::Custom;
        else throw SchemaError("role '" + role + "': unknown kind '" + ks + "'");
    }
    if (body.contains("description")) {
        if (!body.at("description").is_string())
            throw SchemaError("role '" + role + "': description must be a string");
        s.description = body.at("description").get<std::string>();
    }

    if (body.contains("symbolic_schema")) {
        const auto& sym = body.at("symbolic_schema");
        if (!sym.is_object()) throw SchemaError("role '" + role + "': symbolic_schema must be an object");
        if (sym.contains("constraints")) {
            const auto& cs = sym.at("constraints");
            if (!cs.is_array()) throw SchemaError("role '" + role + "': constraints must be a list");
            for (const auto& c : cs) {
                Constraint con;
                if (c.is_string()) {
                    con.tag = c.get<std::string>();
                } else if (c.is_object() && c.size() == 1) {
                    con.tag = c.begin().key();
                    con.payload = string_list(c.begin().value(), "constraint '" + con.tag + "'");
                } else {
                    throw SchemaError("role '" + role + "': constraint must be a tag or {tag: [payload]}");
                }
                if (!find_constraint(con.tag))
                    throw SchemaError("role '" + role + "': unknown constraint tag '" + con.tag + "'");
                s.constraints.push_back(std::move(con));
            }
        }
    }

    if (!body.contains("fuzzy_params")) throw SchemaError("role '" + role + "': missing field 'fuzzy_params'");
    const auto& fps = body.at("fuzzy_params");
    if (!fps.is_object()) throw SchemaError("role '" + role + "': fuzzy_params must be an object");
    for (auto it = fps.begin(); it != fps.end(); ++it) {
        std::string where = "fuzzy_params." + it.key();
        if (!it.value().is_object()) throw SchemaError(where + ": expected an object");
        FuzzyParam p;
        p.name = it.key();
        p.default_value = require_number(it.value(), "default", where);
        p.min = require_number(it.value(), "min", where);
        p.max = require_number(it.value(), "max", where);
        if (p.min < 0.0 || p.max > 1.0) throw SchemaError(where + ": range must lie within [0, 1]");
        if (!(p.min <= p.default_value && p.default_value <= p.max))
            throw SchemaError(where + ": default " + format_number(p.default_value) + " outside [" +
                              format_number(p.min) + ", " + format_number(p.max) + "]");
        p.value = p.default_value;
        s.params.push_back(std::move(p));
    }

    if (body.contains("update_rules")) {
        const auto& rules = body.at("update_rules");
        if (!rules.is_array()) throw SchemaError("role '" + role + "': update_rules must be a list");
        for (std::size_t i = 0; i < rules.size(); ++i) {
            std::string where = "update_rules[" + std::to_string(i) + "]";
            const auto& r = rules[i];
            if (!r.is_object() || !r.contains("when") || !r.contains("then"))
                throw SchemaError(where + ": rule needs 'when' and 'then'", i);
            const auto& when = r.at("when");
            const auto& then = r.at("then");
            if (!when.is_object() || when.empty()) throw SchemaError(where + ": 'when' must be a non-empty object", i);
            if (!then.is_object() || then.empty()) throw SchemaError(where + ": 'then' must be a non-empty object", i);
            UpdateRule rule;
            for (auto c = when.begin(); c != when.end(); ++c) {
                if (!c.value().is_string())
                    throw SchemaError(where + ": condition on '" + c.key() + "' must be a string", i);
                auto cond = try_parse_condition(c.key(), c.value().get<std::string>());
                if (!cond)
                    throw SchemaError(where + ": cannot parse condition '" + c.value().get<std::string>() +
                                          "' on '" + c.key() + "'",
                                      i);
                rule.when.push_back(std::move(*cond));
            }
            for (auto a = then.begin(); a != then.end(); ++a) {
                if (!a.value().is_string())
                    throw SchemaError(where + ": action on '" + a.key() + "' must be a string", i);
                auto act = try_parse_action(a.key(), a.value().get<std::string>());
                if (!act)
                    throw SchemaError(where + ": cannot parse action '" + a.value().get<std::string>() + "' on '" +
                                          a.key() + "'",
                                      i);
                if (!s.find_param(act->param))
                    throw SchemaError(where + ": action targets unknown param '" + act->param + "'", i);
                rule.then.push_back(std::move(*act));
            }
            s.rules.push_back(std::move(rule));
        }
    }
    return s;
}

}  // namespace detail

// Parses every role under "npc_roles", in document order.
inline std::vector<RoleScaffold> parse_role_scaffolds(std::string_view document_text) {
    auto doc = parse_ordered(document_text, "role scaffold");
    if (!doc.is_object()) throw SchemaError("role scaffold: top level must be an object");
    std::vector<RoleScaffold> out;
    if (doc.contains("npc_roles")) {
        const auto& roles = doc.at("npc_roles");
        if (!roles.is_object()) throw SchemaError("npc_roles must be an object");
        for (auto it = roles.begin(); it != roles.end(); ++it) out.push_back(detail::scaffold_from_json(it.key(), it.value()));
    } else if (doc.contains("role") && doc.at("role").is_string()) {
        out.push_back(detail::scaffold_from_json(doc.at("role").get<std::string>(), doc));
    } else {
        throw SchemaError("role scaffold: expected 'npc_roles' or 'role'");
    }
    return out;
}

// Parses a single-role document (either a one-entry "npc_roles" block or a
// flat object carrying "role").
inline RoleScaffold parse_role_scaffold(std::string_view document_text) {
    auto all = parse_role_scaffolds(document_text);
    if (all.size() != 1)
        throw SchemaError("role scaffold: expected exactly one role, found " + std::to_string(all.size()));
    return std::move(all.front());
}

inline OrderedJson role_body_to_json(const RoleScaffold& s) {
    OrderedJson body = OrderedJson::object();
    if (s.kind != detail::kind_from_name(s.role)) body["kind"] = std::string(to_string(s.kind));
    if (!s.description.empty()) body["description"] = s.description;
    OrderedJson constraints = OrderedJson::array();
    for (const auto& c : s.constraints) {
        if (c.payload.empty())
            constraints.push_back(c.tag);
        else
            constraints.push_back(OrderedJson{{c.tag, c.payload}});
    }
    body["symbolic_schema"] = OrderedJson{{"constraints", constraints}};
    OrderedJson params = OrderedJson::object();
    for (const auto& p : s.params)
        params[p.name] = OrderedJson{{"default", p.default_value}, {"min", p.min}, {"max", p.max}};
    body["fuzzy_params"] = params;
    OrderedJson rules = OrderedJson::array();
    for (const auto& r : s.rules) {
        OrderedJson when = OrderedJson::object(), then = OrderedJson::object();
        for (const auto& c : r.when) when[c.metric] = condition_text(c);
        for (const auto& a : r.then) then[a.param] = action_text(a);
        rules.push_back(OrderedJson{{"when", when}, {"then", then}});
    }
    body["update_rules"] = rules;
    return body;
}

inline std::string serialize_role_scaffold(const RoleScaffold& s) {
    OrderedJson doc;
    doc["npc_roles"][s.role] = role_body_to_json(s);
    return doc.dump(2);
}

// ---- trait state machines --------------------------------------------------

namespace detail {

inline TraitStateMachine machine_from_json(const std::string& trait, const OrderedJson& body) {
    std::string where = "trait '" + trait + "'";
    if (!body.contains("current") || !body.at("current").is_string())
        throw SchemaError(where + ": missing string field 'current'");
    TraitStateMachine m;
    m.trait = trait;
    m.current = body.at("current").get<std::string>();
    if (m.current.empty()) throw SchemaError(where + ": empty current state");
    if (body.contains("transitions")) {
        const auto& ts = body.at("transitions");
        if (!ts.is_array()) throw SchemaError(where + ": transitions must be a list");
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const auto& t = ts[i];
            std::string tw = where + " transition " + std::to_string(i);
            if (!t.is_object() || !t.contains("to") || !t.at("to").is_string())
                throw SchemaError(tw + ": missing string field 'to'");
            Transition tr;
            tr.to = t.at("to").get<std::string>();
            if (!t.contains("trigger_keywords")) throw SchemaError(tw + ": missing trigger_keywords");
            tr.trigger_keywords = string_list(t.at("trigger_keywords"), tw);
            if (tr.trigger_keywords.empty()) throw SchemaError(tw + ": trigger_keywords must be non-empty");
            for (const auto& k : tr.trigger_keywords)
                if (normalize_text(k).empty()) throw SchemaError(tw + ": keyword '" + k + "' has no word characters");
            if (t.contains("from")) {
                const auto& f = t.at("from");
                tr.from = f.is_string() ? std::vector<std::string>{f.get<std::string>()} : string_list(f, tw);
            }
            m.transitions.push_back(std::move(tr));
        }
    }
    return m;
}

}  // namespace detail

// Parses a trait document: one block per NPC; object-valued fields carrying
// "current" are traits, string fields are metadata ("name").
inline std::vector<NpcTraits> parse_trait_document(std::string_view document_text) {
    auto doc = parse_ordered(document_text, "trait schema");
    if (!doc.is_object()) throw SchemaError("trait schema: top level must be an object");
    std::vector<NpcTraits> out;
    for (auto npc = doc.begin(); npc != doc.end(); ++npc) {
        if (!npc.value().is_object()) throw SchemaError("trait schema: NPC block '" + npc.key() + "' must be an object");
        NpcTraits block;
        block.key = npc.key();
        for (auto f = npc.value().begin(); f != npc.value().end(); ++f) {
            if (f.value().is_string()) {
                if (f.key() == "name") block.name = f.value().get<std::string>();
                continue;
            }
            if (!f.value().is_object())
                throw SchemaError("trait schema: field '" + f.key() + "' of '" + npc.key() + "' is neither metadata nor a trait");
            block.machines.push_back(detail::machine_from_json(f.key(), f.value()));
        }
        out.push_back(std::move(block));
    }
    return out;
}

inline std::vector<TraitStateMachine> parse_trait_schema(std::string_view document_text) {
    std::vector<TraitStateMachine> out;
    for (auto& block : parse_trait_document(document_text))
        for (auto& m : block.machines) out.push_back(std::move(m));
    return out;
}

inline OrderedJson traits_to_json(const NpcTraits& block) {
    OrderedJson body = OrderedJson::object();
    if (!block.name.empty()) body["name"] = block.name;
    for (const auto& m : block.machines) {
        OrderedJson ts = OrderedJson::array();
        for (const auto& t : m.transitions) {
            OrderedJson tj{{"to", t.to}, {"trigger_keywords", t.trigger_keywords}};
            if (!t.from.empty()) tj["from"] = t.from;
            ts.push_back(tj);
        }
        body[m.trait] = OrderedJson{{"current", m.current}, {"transitions", ts}};
    }
    OrderedJson doc;
    doc[block.key] = body;
    return doc;
}

}  // namespace scaffold

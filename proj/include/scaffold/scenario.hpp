#pragma once

// Scenario manifest: the set of documents one playable case is made of.
//
//   {
//     "name": "The Interview",
//     "roles": ["roles/interviewer.json", "roles/suspect.json"],
//     "npcs": [{"id": "mark", "name": "Mark Olsen", "scaffold": "suspect",
//               "traits": "traits/mark.json", "description": "..."}],
//     "memory_template": "memory_template.json",
//     "lore": {"directory": "lore", "stages": {"rules": "rules.txt", ...}},
//     "templates": {"suspect": {"HCP": "templates/suspect_hcp.txt", ...}},
//     "evidence": [{"id": "ev_017", "label": "..."}] or "evidence.json",
//     "aliases": {"suspect_evasiveness": "suspect_evasive_turns"},
//     "counters": [{"counter": "suspect_evasive_turns", "addressed": "suspect",
//                   "when": {"suspect.evasiveness": ">=0.5"}}],
//     "prompts": {"mark": "prompts/mark.txt"},
//     "judge_rubric": "judge/rubric.txt",
//     "opening": "...", "composer": {...}, "memory": {"evidence_cap": 16}
//   }

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scaffold/engine.hpp"
#include "scaffold/errors.hpp"
#include "scaffold/json_io.hpp"
#include "scaffold/lore.hpp"
#include "scaffold/memory.hpp"
#include "scaffold/prompt.hpp"
#include "scaffold/schema.hpp"
#include "scaffold/validate.hpp"

namespace scaffold {

struct EvidenceItem {
    std::string id;
    std::string label;
};

struct Scenario {
    std::filesystem::path root;
    std::string name;
    std::vector<RoleScaffold> scaffolds;
    std::vector<NpcProfile> npcs;
    std::map<std::string, NpcTraits> traits;  // by NPC id
    SharedMemory memory_template;
    LoreIndex lore;
    std::string full_lore;
    std::map<std::string, std::map<PromptCondition, std::string>> templates;  // by scaffold role
    std::vector<EvidenceItem> evidence;
    std::map<std::string, std::string> evidence_labels;
    std::map<std::string, std::string> aliases;
    std::vector<CounterRule> counters;
    std::map<std::string, std::vector<std::string>> prompts;  // by NPC id
    std::string judge_rubric;
    std::string opening_npc = "interviewer";
    std::string opening_cue = "Open the session: greet the detective and brief them on the case.";
    ComposerConfig composer;
    MemoryConfig memory_config;
    std::size_t retrieval_k = 4;

    const NpcProfile* find_npc(std::string_view id) const {
        for (const auto& n : npcs)
            if (n.id == id) return &n;
        return nullptr;
    }
    const NpcProfile& npc(std::string_view id) const {
        const auto* n = find_npc(id);
        if (!n) throw UnknownRole(std::string(id));
        return *n;
    }
    const RoleScaffold& scaffold(std::string_view role) const {
        for (const auto& s : scaffolds)
            if (s.role == role) return s;
        throw UnknownRole(std::string(role));
    }
    const NpcTraits* traits_for(std::string_view npc_id) const {
        auto it = traits.find(std::string(npc_id));
        return it == traits.end() ? nullptr : &it->second;
    }
    const std::string& template_for(const std::string& role, PromptCondition c) const {
        auto it = templates.find(role);
        if (it == templates.end() || !it->second.count(c))
            throw ScenarioInvalid("no " + std::string(to_string(c)) + " template for role '" + role + "'");
        return it->second.at(c);
    }
    bool has_evidence(std::string_view id) const { return evidence_labels.count(std::string(id)) != 0; }

    std::vector<TraitStateMachine> all_traits() const {
        std::vector<TraitStateMachine> out;
        for (const auto& [_, block] : traits) out.insert(out.end(), block.machines.begin(), block.machines.end());
        return out;
    }

    // Scaffold defaults, neutral rapport, zeroed counters, initial trait states;
    // rapport and counter values from the memory template override.
    SharedMemory initial_memory() const {
        MemorySeed seed;
        for (const auto& [k, _] : memory_template.player_rapport) seed.rapport_targets.push_back(k);
        for (const auto& [alias, target] : aliases) seed.counters.push_back(target);
        for (const auto& c : counters) seed.counters.push_back(c.counter);
        for (const auto& [npc, block] : traits)
            for (const auto& m : block.machines) seed.trait_states[npc][m.trait] = m.current;
        auto m = init_memory(scaffolds, seed);
        for (const auto& [k, v] : memory_template.player_rapport) m.player_rapport[k] = v;
        for (const auto& [k, v] : memory_template.auxiliary_counters) m.auxiliary_counters[k] = v;
        return m;
    }
};

namespace detail {

inline std::string field_string(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string()) throw ScenarioInvalid(where + ": missing string field '" + key + "'");
    return j.at(key).get<std::string>();
}

inline std::vector<std::string> read_prompt_lines(const std::filesystem::path& p) {
    std::vector<std::string> out;
    std::istringstream in(read_text_file(p));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.starts_with("#")) continue;
        out.push_back(line);
    }
    return out;
}

}  // namespace detail

// Accepts the manifest path or a directory holding scenario.json.
inline Scenario load_scenario(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    fs::path manifest = fs::is_directory(path) ? path / "scenario.json" : path;
    if (!fs::exists(manifest)) throw ScenarioInvalid("scenario manifest not found: " + manifest.string());
    Scenario sc;
    sc.root = manifest.parent_path();
    auto at = [&](const std::string& rel) { return sc.root / rel; };

    try {
        auto j = parse_json(read_text_file(manifest), manifest.string());
        sc.name = j.value("name", manifest.parent_path().filename().string());

        for (const auto& r : j.at("roles")) {
            for (auto& s : parse_role_scaffolds(read_text_file(at(r.get<std::string>())))) sc.scaffolds.push_back(std::move(s));
        }

        for (const auto& n : j.at("npcs")) {
            NpcProfile p;
            p.id = detail::field_string(n, "id", "npc");
            p.name = n.value("name", p.id);
            p.description = n.value("description", "");
            p.scaffold_role = detail::field_string(n, "scaffold", "npc '" + p.id + "'");
            if (sc.find_npc(p.id)) throw ScenarioInvalid("duplicate npc '" + p.id + "'");
            bool known = std::any_of(sc.scaffolds.begin(), sc.scaffolds.end(),
                                     [&](const auto& s) { return s.role == p.scaffold_role; });
            if (!known) throw ScenarioInvalid("npc '" + p.id + "' references unknown scaffold '" + p.scaffold_role + "'");
            if (n.contains("traits")) {
                auto blocks = parse_trait_document(read_text_file(at(n.at("traits").get<std::string>())));
                if (blocks.size() != 1) throw ScenarioInvalid("trait file for '" + p.id + "' must hold exactly one NPC block");
                sc.traits[p.id] = std::move(blocks.front());
            }
            sc.npcs.push_back(std::move(p));
        }

        if (j.contains("memory_template"))
            sc.memory_template = parse_memory(read_text_file(at(j.at("memory_template").get<std::string>())));

        const auto& lore = j.at("lore");
        auto stage_files = default_stage_files();
        if (lore.contains("stages")) {
            stage_files.clear();
            for (const auto& [stage, file] : lore.at("stages").items()) {
                auto st = parse_stage(stage);
                if (!st) throw ScenarioInvalid("unknown lore stage '" + stage + "'");
                stage_files[*st] = file.get<std::string>();
            }
        }
        sc.lore = ingest_lore(at(lore.value("directory", "lore")), stage_files);
        sc.full_lore = sc.lore.full_text();

        for (const auto& [role, byc] : j.at("templates").items()) {
            for (const auto& [cond, file] : byc.items()) {
                auto c = parse_prompt_condition(cond);
                if (!c) throw ScenarioInvalid("unknown condition '" + cond + "' in templates");
                sc.templates[role][*c] = read_text_file(at(file.get<std::string>()));
            }
        }

        if (j.contains("evidence")) {
            Json list = j.at("evidence");
            if (list.is_string()) list = parse_json(read_text_file(at(list.get<std::string>())), "evidence");
            for (const auto& e : list) {
                EvidenceItem item{detail::field_string(e, "id", "evidence"), e.value("label", "")};
                sc.evidence_labels[item.id] = item.label;
                sc.evidence.push_back(std::move(item));
            }
        }
        if (j.contains("aliases"))
            for (const auto& [k, v] : j.at("aliases").items()) sc.aliases[k] = v.get<std::string>();
        if (j.contains("counters")) {
            for (const auto& c : j.at("counters")) {
                CounterRule rule;
                rule.counter = detail::field_string(c, "counter", "counter");
                rule.addressed_role = c.value("addressed", "");
                for (const auto& [metric, text] : c.at("when").items())
                    rule.when.push_back(parse_condition(metric, text.get<std::string>()));
                sc.counters.push_back(std::move(rule));
            }
        }
        if (j.contains("prompts"))
            for (const auto& [npc, file] : j.at("prompts").items())
                sc.prompts[npc] = detail::read_prompt_lines(at(file.get<std::string>()));
        if (j.contains("judge_rubric")) sc.judge_rubric = read_text_file(at(j.at("judge_rubric").get<std::string>()));
        if (j.contains("opening")) {
            const auto& o = j.at("opening");
            sc.opening_npc = o.value("npc", sc.opening_npc);
            sc.opening_cue = o.value("cue", sc.opening_cue);
        }
        if (j.contains("composer")) {
            const auto& c = j.at("composer");
            sc.composer.budget_chars = c.value("budget_chars", sc.composer.budget_chars);
            sc.composer.recap_threshold = c.value("recap_threshold", sc.composer.recap_threshold);
            sc.composer.recap_interval = c.value("recap_interval", sc.composer.recap_interval);
            sc.composer.history_turns = c.value("history_turns", sc.composer.history_turns);
            sc.retrieval_k = c.value("retrieval_k", sc.retrieval_k);
        }
        if (j.contains("memory")) sc.memory_config.evidence_cap = j.at("memory").value("evidence_cap", sc.memory_config.evidence_cap);
    } catch (const ScenarioInvalid&) {
        throw;
    } catch (const Json::exception& e) {
        throw ScenarioInvalid(manifest.string() + ": " + e.what());
    } catch (const Error& e) {
        throw ScenarioInvalid(manifest.string() + ": " + e.what());
    }

    if (!sc.find_npc(sc.opening_npc)) throw ScenarioInvalid("opening npc '" + sc.opening_npc + "' is not declared");
    for (const auto& n : sc.npcs)
        for (auto c : {PromptCondition::HCP, PromptCondition::LCP, PromptCondition::JSONRAG}) sc.template_for(n.scaffold_role, c);
    return sc;
}

inline ValidationReport validate_scenario(const Scenario& sc) {
    auto report = validate_bundle(sc.scaffolds, sc.all_traits(), sc.memory_template, sc.aliases);
    for (const auto& c : sc.counters) {
        MetricView view(sc.initial_memory(), sc.aliases);
        for (const auto& cond : c.when)
            if (!view.contains(cond.metric))
                report.findings.push_back({"unresolved_metric", "counter " + c.counter,
                                           "condition metric '" + cond.metric + "' has no source"});
    }
    for (const auto& [npc, lines] : sc.prompts) {
        if (!sc.find_npc(npc)) report.findings.push_back({"unknown_npc", "prompts." + npc, "no such npc"});
    }
    return report;
}

}  // namespace scaffold

#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "scaffold/scenario.hpp"

namespace testing_support {

inline constexpr const char* kScenarioDir = SCAFFOLD_SCENARIO_DIR;

inline constexpr const char* kMarkTraits = R"({
  "suspect_1": {
    "name": "Mark Olsen",
    "emotional_state": {"current": "anxious",
      "transitions": [{"to": "defensive", "trigger_keywords": ["you're lying", "confess", "Sarah did it"]}, {"to": "remorseful", "trigger_keywords": ["you didn't mean to", "you tried to help", "you were manipulated"]}]},
    "cooperativeness": {"current": "low", "transitions": [{"to": "medium", "trigger_keywords": ["I want to help", "you're not alone", "help us understand"]}, {"to": "high", "trigger_keywords": ["we know Sarah's role", "you can clear your name", "we believe you"]}]}
  }
})";

inline constexpr const char* kMemoryExample =
    R"({"turn_index": 12, "contradiction_count": 2, "recent_evidence": ["ev_017", "ev_021"], "player_rapport": { "with_suspect": 0.42 }, "npc_state": {"interviewer": {"guidance_intensity": 0.58 }, "suspect":     { "evasiveness": 0.63, "disclosure_prob": 0.22 }}, "last_recaps": { "interviewer": 9 }})";

inline constexpr const char* kRoleScaffolds = R"({"npc_roles": {
    "interviewer": {"symbolic_schema": {"constraints": ["no_new_facts", "no_spoilers"]}, "fuzzy_params": {"guidance_intensity": { "default": 0.55, "min": 0.0, "max": 1.0 }}, "update_rules": [{"when": { "suspect_evasiveness": ">5" }, "then": { "guidance_intensity": "+0.10" } }]},
    "suspect": {"symbolic_schema": {"constraints": ["forbidden_facts_filtered"]}, "fuzzy_params": {"evasiveness": { "default": 0.55, "min": 0.0, "max": 1.0 }, "disclosure_prob": { "default": 0.25, "min": 0.0, "max": 1.0 }}, "update_rules": [{ "when": { "evidence_count": ">=2" }, "then": { "disclosure_prob": "+0.20", "evasiveness": "-0.10" }}]}
}})";

inline const scaffold::Scenario& shipped_scenario() {
    static const scaffold::Scenario sc = scaffold::load_scenario(kScenarioDir);
    return sc;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Random valid scaffold: 1-4 params with ranges inside [0,1], 0-5 rules over
// the given metric names and the role's own params.
inline scaffold::RoleScaffold random_scaffold(std::mt19937_64& rng, const std::string& role,
                                              const std::vector<std::string>& metrics) {
    using namespace scaffold;
    RoleScaffold s;
    s.role = role;
    s.kind = detail::kind_from_name(role);
    std::size_t nparams = 1 + pick(rng, 4);
    for (std::size_t i = 0; i < nparams; ++i) {
        FuzzyParam p;
        p.name = "p" + std::to_string(i);
        double a = uniform(rng, 0.0, 1.0), b = uniform(rng, 0.0, 1.0);
        p.min = std::min(a, b);
        p.max = std::max(a, b);
        p.default_value = uniform(rng, p.min, p.max);
        p.value = p.default_value;
        s.params.push_back(p);
    }
    static const Comparator cmps[] = {Comparator::Greater, Comparator::GreaterEqual, Comparator::Less,
                                      Comparator::LessEqual, Comparator::Equal};
    std::size_t nrules = pick(rng, 6);
    for (std::size_t r = 0; r < nrules; ++r) {
        UpdateRule rule;
        std::vector<std::string> used;
        std::size_t nconds = 1 + pick(rng, 2);
        for (std::size_t c = 0; c < nconds; ++c) {
            std::string metric = metrics.empty() || pick(rng, 2) == 0
                                     ? role + "." + s.params[pick(rng, nparams)].name
                                     : metrics[pick(rng, metrics.size())];
            if (std::find(used.begin(), used.end(), metric) != used.end()) continue;
            used.push_back(metric);
            rule.when.push_back(Condition{metric, cmps[pick(rng, 5)], uniform(rng, -0.5, 1.5)});
        }
        std::vector<std::string> targets;
        std::size_t nacts = 1 + pick(rng, nparams);
        for (std::size_t a = 0; a < nacts; ++a) {
            const auto& name = s.params[pick(rng, nparams)].name;
            if (std::find(targets.begin(), targets.end(), name) != targets.end()) continue;
            targets.push_back(name);
            bool set = pick(rng, 4) == 0;
            rule.then.push_back(Action{name, set ? ActionKind::Set : ActionKind::Delta,
                                       set ? uniform(rng, 0.0, 1.0) : uniform(rng, -1.0, 1.0)});
        }
        s.rules.push_back(rule);
    }
    return s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("scaffold-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing_support

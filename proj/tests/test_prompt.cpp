#include <gtest/gtest.h>

#include "scaffold/judge.hpp"
#include "scaffold/prompt.hpp"
#include "support.hpp"

using namespace scaffold;
using testing_support::shipped_scenario;

namespace {

struct Fixture {
    NpcProfile npc{"mark", "Mark Olsen", "IT administrator", "suspect"};
    RoleScaffold scaffold = parse_role_scaffolds(testing_support::kRoleScaffolds)[1];
    NpcTraits traits = parse_trait_document(testing_support::kMarkTraits)[0];
    SharedMemory memory = init_memory(parse_role_scaffolds(testing_support::kRoleScaffolds));
    std::string lore = "The victim is Daniel Reyes. He was found in the archive room.";
    RetrievalResult retrieval{{{"crime-0000", 2.0, HitSource::Lore, "Daniel was found in the archive."},
                               {"timeline-0001", 1.0, HitSource::Lore, "23:12 Daniel enters the archive room."}}};
    SelectedRules selection{{0}, {"cooperativeness: low"}};

    ComposeInputs inputs(PromptCondition c) const {
        ComposeInputs in;
        in.condition = c;
        in.npc = &npc;
        in.scaffold = &scaffold;
        in.traits = &traits;
        in.memory = &memory;
        in.full_lore = lore;
        in.retrieval = &retrieval;
        in.selection = &selection;
        in.utterance = "Where were you?";
        in.system_template = "You are {{npc_name}}, {{role_description}}.";
        in.scenario_name = "The Interview";
        return in;
    }
};

std::string joined(const PromptBundle& b) { return to_messages(b).front().content; }

}  // namespace

TEST(Compose, HighContextCarriesFullLoreTraitsAndRules) {
    Fixture f;
    auto b = compose(f.inputs(PromptCondition::HCP));
    EXPECT_EQ(b.count(block::kLore), 1u);
    EXPECT_EQ(b.count(block::kTraits), 1u);
    EXPECT_EQ(b.count(block::kRules), 1u);
    EXPECT_EQ(b.count(block::kRetrieved), 0u);
    EXPECT_EQ(b.count(block::kMemory), 1u);
    EXPECT_EQ(b.system_text.rfind("You are Mark Olsen, IT administrator.", 0), 0u);
    auto text = joined(b);
    EXPECT_NE(text.find(f.lore), std::string::npos);
    EXPECT_NE(text.find("trigger_keywords"), std::string::npos);
    EXPECT_NE(text.find("you were manipulated"), std::string::npos);
    EXPECT_NE(text.find("When evidence_count >=2: disclosure_prob +0.2, evasiveness -0.1"), std::string::npos);
    EXPECT_NE(text.find("- evasiveness: 0.55"), std::string::npos);
    EXPECT_NE(text.find("Never disclose"), std::string::npos);
}

TEST(Compose, LowContextHasLoreOnly) {
    Fixture f;
    auto b = compose(f.inputs(PromptCondition::LCP));
    ASSERT_EQ(b.context_blocks.size(), 1u);
    EXPECT_EQ(b.context_blocks[0].kind, block::kLore);
    auto text = joined(b);
    EXPECT_EQ(text.find("trigger_keywords"), std::string::npos);
    EXPECT_EQ(text.find("evasiveness"), std::string::npos);
    EXPECT_EQ(text.find("When "), std::string::npos);
}

TEST(Compose, RetrievalConditionCarriesRetrievedBlocksAndSelections) {
    Fixture f;
    auto b = compose(f.inputs(PromptCondition::JSONRAG));
    EXPECT_EQ(b.count(block::kLore), 0u);
    EXPECT_EQ(b.count(block::kRetrieved), 2u);
    EXPECT_EQ(b.count(block::kRules), 1u);
    EXPECT_EQ(b.count(block::kTraits), 1u);
    EXPECT_EQ(b.context_blocks[0].label, "Retrieved 1 (crime-0000)");
    auto text = joined(b);
    EXPECT_EQ(text.find("trigger_keywords"), std::string::npos);
    EXPECT_NE(text.find("cooperativeness: low"), std::string::npos);
}

TEST(Compose, MessagesJoinBlocksUnderLabels) {
    Fixture f;
    auto b = compose(f.inputs(PromptCondition::LCP));
    b.history = {{1, "player", "Hello"}, {1, "mark", "Hi."}, {2, "sarah", "He lies."}};
    auto msgs = to_messages(b);
    ASSERT_EQ(msgs.size(), 5u);
    EXPECT_EQ(msgs[0].content, b.system_text + "\n\n### Case lore\n" + f.lore);
    EXPECT_EQ(msgs[1].role, "user");
    EXPECT_EQ(msgs[2].role, "assistant");
    EXPECT_EQ(msgs[3].content, "[sarah] He lies.");
    EXPECT_EQ(msgs[4].content, "Where were you?");
}

TEST(Compose, HistoryIsTrimmedToTheWindow) {
    Fixture f;
    std::vector<DialogueTurn> history;
    for (std::uint64_t i = 0; i < 20; ++i) history.push_back({i, "player", "line " + std::to_string(i)});
    auto in = f.inputs(PromptCondition::HCP);
    in.history = history;
    auto b = compose(in, ComposerConfig{8000, 0.7, 5, 3});
    ASSERT_EQ(b.history.size(), 3u);
    EXPECT_EQ(b.history.front().text, "line 17");
}

TEST(Budget, RetrievedBlocksDropFromTheLowestRank) {
    Fixture f;
    f.retrieval.hits.push_back({"report-0000", 0.5, HitSource::Lore, std::string(300, 'x')});
    auto full = compose(f.inputs(PromptCondition::JSONRAG));
    ASSERT_EQ(full.count(block::kRetrieved), 3u);
    auto size = blocks_size(full.context_blocks);
    ComposerConfig tight;
    tight.budget_chars = size - 1;
    auto b = compose(f.inputs(PromptCondition::JSONRAG), tight);
    EXPECT_EQ(b.count(block::kRetrieved), 2u);
    EXPECT_LE(blocks_size(b.context_blocks), tight.budget_chars);
    EXPECT_EQ(b.context_blocks[1].label, "Retrieved 2 (timeline-0001)");
}

TEST(Budget, LoreIsTrimmedWhenNothingElseCanGo) {
    Fixture f;
    f.lore = std::string(5000, 'l');
    ComposerConfig cfg;
    cfg.budget_chars = 1000;
    auto b = compose(f.inputs(PromptCondition::LCP), cfg);
    EXPECT_EQ(blocks_size(b.context_blocks), 1000u);
    EXPECT_LT(b.context_blocks[0].text.size(), f.lore.size());
}

TEST(Budget, OverflowWithoutTrimmableContentThrows) {
    Fixture f;
    ComposerConfig cfg;
    cfg.budget_chars = 10;
    EXPECT_THROW(compose(f.inputs(PromptCondition::JSONRAG), cfg), BudgetExceeded);
    auto in = f.inputs(PromptCondition::HCP);
    std::string huge(9000, 't');
    in.system_template = huge;
    EXPECT_THROW(compose(in), BudgetExceeded);
}

TEST(Recap, EmittedForTheInterviewerAboveThresholdAfterTheInterval) {
    Fixture f;
    auto roles = parse_role_scaffolds(testing_support::kRoleScaffolds);
    f.scaffold = roles[0];
    f.npc = {"interviewer", "Inspector Okafor", "", "interviewer"};
    f.scaffold.params[0].value = 0.75;
    f.memory.turn_index = 6;
    auto b = compose(f.inputs(PromptCondition::HCP));
    EXPECT_TRUE(b.recap_emitted);
    EXPECT_EQ(b.count(block::kRecap), 1u);

    f.memory.last_recaps["interviewer"] = 3;
    EXPECT_FALSE(compose(f.inputs(PromptCondition::HCP)).recap_emitted);
    f.memory.last_recaps["interviewer"] = 1;
    EXPECT_TRUE(compose(f.inputs(PromptCondition::JSONRAG)).recap_emitted);
    EXPECT_FALSE(compose(f.inputs(PromptCondition::LCP)).recap_emitted);

    f.scaffold.params[0].value = 0.65;
    EXPECT_FALSE(compose(f.inputs(PromptCondition::HCP)).recap_emitted);
}

TEST(Recap, NeverForSuspects) {
    Fixture f;
    f.memory.turn_index = 40;
    EXPECT_FALSE(compose(f.inputs(PromptCondition::HCP)).recap_emitted);
}

TEST(SelectRules, HoldingOrWatchedRulesAndAnnotatedTraits) {
    auto roles = parse_role_scaffolds(testing_support::kRoleScaffolds);
    auto traits = parse_trait_schema(testing_support::kMarkTraits);
    auto m = init_memory(roles);
    TurnDelta delta;
    auto none = select_relevant_rules(roles[1], traits, delta, MetricView(m));
    EXPECT_TRUE(none.rule_indices.empty());
    ASSERT_EQ(none.trait_lines.size(), 2u);
    EXPECT_EQ(none.trait_lines[0], "emotional_state: anxious");

    m.recent_evidence = {"a", "b"};
    EXPECT_EQ(select_relevant_rules(roles[1], traits, delta, MetricView(m)).rule_indices, std::vector<std::size_t>{0});

    auto moved = apply_trigger_transitions(traits, "we believe you");
    auto sel = select_relevant_rules(roles[1], moved.machines, TurnDelta{0, moved.fired}, MetricView(init_memory(roles)));
    EXPECT_EQ(sel.trait_lines[1], "cooperativeness: high (changed from low after the player said \"we believe you\")");

    TurnDelta counted;
    counted.metric_increments["suspect_evasive_turns"] = 1;
    auto iv = select_relevant_rules(roles[0], {}, counted, MetricView(init_memory(roles)),
                                    {{"suspect_evasiveness", "suspect_evasive_turns"}});
    EXPECT_EQ(iv.rule_indices, std::vector<std::size_t>{0});
}

// ---- containment over the shipped scenario ---------------------------------

TEST(Containment, EveryShippedPromptUnderEveryCondition) {
    const auto& sc = shipped_scenario();
    std::size_t checked = 0, with_hits = 0;
    for (const auto& [npc, lines] : sc.prompts) {
        for (const auto& line : lines) {
            auto h = eval_prompt_bundle(sc, npc, PromptCondition::HCP, line);
            auto l = eval_prompt_bundle(sc, npc, PromptCondition::LCP, line);
            auto j = eval_prompt_bundle(sc, npc, PromptCondition::JSONRAG, line);
            EXPECT_EQ(h.count(block::kRetrieved), 0u);
            EXPECT_EQ(h.count(block::kLore), 1u);
            EXPECT_EQ(h.count(block::kRules), 1u);
            if (sc.traits_for(npc)) {
                EXPECT_EQ(h.count(block::kTraits), 1u);
                EXPECT_NE(joined(h).find("trigger_keywords"), std::string::npos);
            }
            EXPECT_EQ(l.count(block::kRules) + l.count(block::kTraits) + l.count(block::kRetrieved), 0u);
            EXPECT_EQ(joined(l).find("trigger_keywords"), std::string::npos);
            EXPECT_EQ(j.count(block::kLore), 0u);
            auto hits = search(sc.lore, {}, line, sc.retrieval_k).hits.size();
            EXPECT_EQ(j.count(block::kRetrieved), hits) << npc << ": " << line;
            with_hits += hits > 0;
            EXPECT_EQ(joined(j).find("trigger_keywords"), std::string::npos);
            for (const auto* b : {&h, &l, &j}) EXPECT_LE(blocks_size(b->context_blocks), sc.composer.budget_chars);
            ++checked;
        }
    }
    EXPECT_EQ(checked, 60u);
    EXPECT_GE(with_hits, 50u);
}

#include <gtest/gtest.h>

#include <random>

#include "scaffold/schema.hpp"
#include "scaffold/validate.hpp"
#include "support.hpp"

using namespace scaffold;
using testing_support::kMarkTraits;
using testing_support::kRoleScaffolds;

TEST(RoleScaffold, ParsesBothRolesOfTheRoleDocument) {
    auto roles = parse_role_scaffolds(kRoleScaffolds);
    ASSERT_EQ(roles.size(), 2u);

    const auto& iv = roles[0];
    EXPECT_EQ(iv.role, "interviewer");
    EXPECT_EQ(iv.kind, RoleKind::Interviewer);
    ASSERT_EQ(iv.constraints.size(), 2u);
    EXPECT_EQ(iv.constraints[0].tag, "no_new_facts");
    EXPECT_EQ(iv.constraints[1].tag, "no_spoilers");
    ASSERT_EQ(iv.params.size(), 1u);
    EXPECT_EQ(iv.params[0].name, "guidance_intensity");
    EXPECT_DOUBLE_EQ(iv.params[0].default_value, 0.55);
    ASSERT_EQ(iv.rules.size(), 1u);
    EXPECT_EQ(iv.rules[0].when[0], (Condition{"suspect_evasiveness", Comparator::Greater, 5.0}));
    EXPECT_EQ(iv.rules[0].then[0], (Action{"guidance_intensity", ActionKind::Delta, 0.10}));

    const auto& su = roles[1];
    EXPECT_EQ(su.kind, RoleKind::Suspect);
    ASSERT_EQ(su.params.size(), 2u);
    EXPECT_EQ(su.params[0].name, "evasiveness");
    EXPECT_DOUBLE_EQ(su.params[0].default_value, 0.55);
    EXPECT_EQ(su.params[1].name, "disclosure_prob");
    EXPECT_DOUBLE_EQ(su.params[1].default_value, 0.25);
    ASSERT_EQ(su.rules[0].then.size(), 2u);
    EXPECT_EQ(su.rules[0].then[0], (Action{"disclosure_prob", ActionKind::Delta, 0.20}));
    EXPECT_EQ(su.rules[0].then[1], (Action{"evasiveness", ActionKind::Delta, -0.10}));
}

TEST(RoleScaffold, DefaultOutsideRangeIsRejected) {
    const char* doc = R"({"npc_roles": {"suspect": {"fuzzy_params": {"evasiveness": {"default": 1.2, "min": 0.0, "max": 1.0}}}}})";
    EXPECT_THROW(parse_role_scaffolds(doc), SchemaError);
    const char* narrow = R"({"npc_roles": {"suspect": {"fuzzy_params": {"e": {"default": 0.1, "min": 0.2, "max": 0.9}}}}})";
    EXPECT_THROW(parse_role_scaffolds(narrow), SchemaError);
}

TEST(RoleScaffold, UnparseableConditionNamesTheRuleIndex) {
    const char* doc = R"({"npc_roles": {"suspect": {"fuzzy_params": {"e": {"default": 0.5, "min": 0, "max": 1}},
        "update_rules": [{"when": {"evidence_count": ">=2"}, "then": {"e": "+0.1"}},
                         {"when": {"evidence_count": "two"}, "then": {"e": "+0.1"}}]}}})";
    try {
        parse_role_scaffolds(doc);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        ASSERT_TRUE(e.rule_index().has_value());
        EXPECT_EQ(*e.rule_index(), 1u);
    }
}

TEST(RoleScaffold, ActionOnUndeclaredParamIsRejected) {
    const char* doc = R"({"npc_roles": {"suspect": {"fuzzy_params": {"e": {"default": 0.5, "min": 0, "max": 1}},
        "update_rules": [{"when": {"evidence_count": ">=2"}, "then": {"nope": "+0.1"}}]}}})";
    EXPECT_THROW(parse_role_scaffolds(doc), SchemaError);
}

TEST(RoleScaffold, DuplicateKeysAreRejected) {
    const char* doc = R"({"npc_roles": {"suspect": {"fuzzy_params": {"e": {"default": 0.5, "default": 0.6, "min": 0, "max": 1}}}}})";
    EXPECT_THROW(parse_role_scaffolds(doc), SchemaError);
}

TEST(RoleScaffold, MalformedJsonIsASyntaxError) {
    EXPECT_THROW(parse_role_scaffolds("{\"npc_roles\": "), SyntaxError);
}

TEST(RoleScaffold, UnknownConstraintTagIsRejected) {
    const char* doc = R"({"npc_roles": {"suspect": {"symbolic_schema": {"constraints": ["telepathy"]},
        "fuzzy_params": {"e": {"default": 0.5, "min": 0, "max": 1}}}}})";
    EXPECT_THROW(parse_role_scaffolds(doc), SchemaError);
}

TEST(RoleScaffold, ConstraintPayloadsSurviveRoundTrip) {
    const char* doc = R"({"npc_roles": {"suspect": {"symbolic_schema": {"constraints": [{"forbidden_facts_filtered": ["the safe code", "the second phone"]}]},
        "fuzzy_params": {"e": {"default": 0.5, "min": 0, "max": 1}}}}})";
    auto s = parse_role_scaffold(doc);
    ASSERT_EQ(s.constraints.size(), 1u);
    EXPECT_EQ(s.constraints[0].payload, (std::vector<std::string>{"the safe code", "the second phone"}));
    EXPECT_EQ(parse_role_scaffold(serialize_role_scaffold(s)), s);
    EXPECT_NE(render_constraint(s.constraints[0]).find("the second phone"), std::string::npos);
}

TEST(RoleScaffold, RoundTripOnExampleRoles) {
    for (const auto& s : parse_role_scaffolds(kRoleScaffolds)) EXPECT_EQ(parse_role_scaffold(serialize_role_scaffold(s)), s);
}

TEST(RoleScaffold, RoundTripOnGeneratedScaffolds) {
    std::mt19937_64 rng(7);
    const std::vector<std::string> metrics{"evidence_count", "turn_index", "player_rapport.with_suspect", "other.x"};
    for (int i = 0; i < 2000; ++i) {
        auto s = testing_support::random_scaffold(rng, i % 2 ? "suspect" : "witness_" + std::to_string(i), metrics);
        auto text = serialize_role_scaffold(s);
        auto back = parse_role_scaffold(text);
        ASSERT_EQ(back, s) << text;
        ASSERT_EQ(serialize_role_scaffold(back), text);
    }
}

TEST(ConditionGrammar, AcceptsEveryComparatorWithAFiniteNumber) {
    struct Case {
        const char* text;
        Comparator cmp;
        double threshold;
    } cases[] = {{">5", Comparator::Greater, 5},          {">=2", Comparator::GreaterEqual, 2},
                 {"<0.5", Comparator::Less, 0.5},         {"<=-1", Comparator::LessEqual, -1},
                 {"==0.25", Comparator::Equal, 0.25},     {">1e-3", Comparator::Greater, 1e-3},
                 {">=.5", Comparator::GreaterEqual, 0.5}, {"<3.", Comparator::Less, 3.0}};
    for (const auto& c : cases) {
        auto cond = try_parse_condition("m", c.text);
        ASSERT_TRUE(cond) << c.text;
        EXPECT_EQ(cond->comparator, c.cmp) << c.text;
        EXPECT_DOUBLE_EQ(cond->threshold, c.threshold) << c.text;
    }
}

TEST(ConditionGrammar, RejectsEverythingElse) {
    for (const char* bad : {"", "5", "=5", "=>5", "> 5", ">5 ", ">", ">=", "!=3", "<>2", ">five", ">nan", ">inf",
                            ">1e999", "≥2", ">=2;", ">0x10", "<<1"}) {
        EXPECT_FALSE(try_parse_condition("m", bad)) << bad;
        EXPECT_THROW(parse_condition("m", bad), SchemaError) << bad;
    }
}

TEST(ConditionGrammar, GeneratedConditionsRoundTripThroughText) {
    std::mt19937_64 rng(11);
    const char* ops[] = {">", ">=", "<", "<=", "=="};
    for (int i = 0; i < 5000; ++i) {
        double v = testing_support::uniform(rng, -100, 100);
        std::string text = std::string(ops[i % 5]) + format_number(v);
        auto c = try_parse_condition("m", text);
        ASSERT_TRUE(c) << text;
        EXPECT_EQ(c->threshold, v);
        EXPECT_EQ(condition_text(*c), text);
    }
}

TEST(ActionGrammar, SignMeansDeltaBareMeansSet) {
    auto plus = try_parse_action("p", "+0.10");
    ASSERT_TRUE(plus);
    EXPECT_EQ(plus->kind, ActionKind::Delta);
    EXPECT_DOUBLE_EQ(plus->amount, 0.10);
    auto minus = try_parse_action("p", "-0.10");
    ASSERT_TRUE(minus);
    EXPECT_EQ(minus->kind, ActionKind::Delta);
    EXPECT_DOUBLE_EQ(minus->amount, -0.10);
    auto set = try_parse_action("p", "0.3");
    ASSERT_TRUE(set);
    EXPECT_EQ(set->kind, ActionKind::Set);
    EXPECT_DOUBLE_EQ(set->amount, 0.3);
    for (const char* bad : {"", "+", "+-0.1", "++0.1", "1.5", "-1.01", "abc", "+0.1x"})
        EXPECT_FALSE(try_parse_action("p", bad)) << bad;
}

TEST(TraitSchema, ParsesTheSuspectTraitBlock) {
    auto blocks = parse_trait_document(kMarkTraits);
    ASSERT_EQ(blocks.size(), 1u);
    EXPECT_EQ(blocks[0].key, "suspect_1");
    EXPECT_EQ(blocks[0].name, "Mark Olsen");
    ASSERT_EQ(blocks[0].machines.size(), 2u);
    const auto& emo = blocks[0].machines[0];
    EXPECT_EQ(emo.trait, "emotional_state");
    EXPECT_EQ(emo.current, "anxious");
    ASSERT_EQ(emo.transitions.size(), 2u);
    EXPECT_EQ(emo.transitions[0].to, "defensive");
    EXPECT_EQ(emo.transitions[0].trigger_keywords,
              (std::vector<std::string>{"you're lying", "confess", "Sarah did it"}));
    EXPECT_EQ(emo.transitions[1].to, "remorseful");
    const auto& coop = blocks[0].machines[1];
    EXPECT_EQ(coop.trait, "cooperativeness");
    EXPECT_EQ(coop.current, "low");
    EXPECT_EQ(coop.states(), (std::vector<std::string>{"low", "medium", "high"}));
}

TEST(TraitSchema, RoundTrip) {
    auto blocks = parse_trait_document(kMarkTraits);
    auto again = parse_trait_document(traits_to_json(blocks[0]).dump());
    ASSERT_EQ(again.size(), 1u);
    EXPECT_EQ(again[0], blocks[0]);
}

TEST(TraitSchema, RejectsTransitionsWithoutKeywords) {
    EXPECT_THROW(parse_trait_document(R"({"a": {"mood": {"current": "x", "transitions": [{"to": "y", "trigger_keywords": []}]}}})"),
                 SchemaError);
    EXPECT_THROW(parse_trait_document(R"({"a": {"mood": {"current": "x", "transitions": [{"to": "y", "trigger_keywords": ["?!"]}]}}})"),
                 SchemaError);
    EXPECT_THROW(parse_trait_document(R"({"a": {"mood": {"transitions": []}}})"), SchemaError);
}

TEST(ValidateBundle, FlagsTheEvasivenessConditionUnlessAliased) {
    auto roles = parse_role_scaffolds(kRoleScaffolds);
    auto traits = parse_trait_schema(kMarkTraits);
    SharedMemory tmpl;
    auto report = validate_bundle(roles, traits, tmpl);
    ASSERT_EQ(report.findings.size(), 1u);
    EXPECT_EQ(report.findings[0].kind, "unresolved_metric");
    EXPECT_EQ(report.findings[0].subject, "interviewer.update_rules[0]");

    auto aliased = validate_bundle(roles, traits, tmpl, {{"suspect_evasiveness", "suspect_evasive_turns"}});
    EXPECT_TRUE(aliased.ok());
}

TEST(ValidateBundle, FlagsOrphanStateAndUnknownTraitLabels) {
    auto roles = parse_role_scaffolds(kRoleScaffolds);
    auto traits = parse_trait_schema(kMarkTraits);
    SharedMemory tmpl;
    tmpl.npc_state["ghost"]["x"] = 0.5;
    tmpl.trait_states["mark"]["cooperativeness"] = "ecstatic";
    auto report = validate_bundle(roles, traits, tmpl, {{"suspect_evasiveness", "suspect_evasive_turns"}});
    ASSERT_EQ(report.findings.size(), 2u);
    EXPECT_EQ(report.findings[0].kind, "orphan_npc_state");
    EXPECT_EQ(report.findings[1].kind, "trait_state");
}

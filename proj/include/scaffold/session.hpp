#pragma once

// Interactive play: session lifecycle and the per-turn pipeline
//   trigger transitions -> metric snapshot -> update rules
//   -> (JSONRAG) query rewrite + retrieval -> rule/trait selection
//   -> compose -> complete -> commit.
// One turn in flight per session; readers always see the last committed
// snapshot.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "scaffold/engine.hpp"
#include "scaffold/errors.hpp"
#include "scaffold/gateway.hpp"
#include "scaffold/lore.hpp"
#include "scaffold/memory.hpp"
#include "scaffold/prompt.hpp"
#include "scaffold/scenario.hpp"

namespace scaffold {

enum class Phase { Opening, Interrogation, Conclusion };

inline std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Opening: return "opening";
        case Phase::Interrogation: return "interrogation";
        case Phase::Conclusion: return "conclusion";
    }
    return "?";
}

inline std::optional<Phase> parse_phase(std::string_view s) {
    for (auto p : {Phase::Opening, Phase::Interrogation, Phase::Conclusion})
        if (to_string(p) == s) return p;
    return std::nullopt;
}

struct SessionState {
    std::string id;
    std::string scenario;
    PromptCondition condition = PromptCondition::HCP;
    Phase phase = Phase::Opening;
    std::string active_role;
    SharedMemory memory;
    std::vector<DialogueTurn> history;
    std::optional<TurnDelta> last_delta;
    std::vector<std::string> errors;
};

struct TurnOutcome {
    std::string reply;
    std::vector<std::string> segments;
    TurnDelta delta;
    std::string query;
    bool query_degraded = false;
    RetrievalResult retrieval;
    PromptBundle bundle;
    Completion completion;
};

// Flags a suspect reply that contradicts the case facts.
class ContradictionChecker {
public:
    virtual ~ContradictionChecker() = default;
    virtual bool contradicts(const Scenario& scenario, const std::string& npc, const std::string& reply) = 0;
};

// Judge-style gateway call answering YES/NO against the timeline and alibis.
class GatewayContradictionChecker : public ContradictionChecker {
public:
    GatewayContradictionChecker(std::shared_ptr<const Gateway> gateway, GenerationConfig config = {})
        : gateway_(std::move(gateway)), config_(std::move(config)) {}

    bool contradicts(const Scenario& scenario, const std::string& npc, const std::string& reply) override {
        auto facts = search(scenario.lore, {}, reply, 4);
        std::string context;
        for (const auto& h : facts.hits) context += h.text + "\n";
        auto c = gateway_->complete(
            {{"system", "You check statements against case facts. Answer YES if the statement contradicts the facts, "
                        "otherwise NO."},
             {"user", "Facts:\n" + context + "\nStatement by " + npc + ":\n" + reply}},
            config_);
        auto t = normalize_text(c.text);
        return t.starts_with("yes");
    }

private:
    std::shared_ptr<const Gateway> gateway_;
    GenerationConfig config_;
};

struct SessionConfig {
    GenerationConfig generation;
    GenerationConfig rewrite;
    std::optional<SnapshotStore> store;
    std::shared_ptr<ContradictionChecker> checker;  // off when null
};

inline Json to_json(const SessionState& s, std::size_t history_tail = 50) {
    Json hist = Json::array();
    std::size_t first = s.history.size() > history_tail ? s.history.size() - history_tail : 0;
    for (std::size_t i = first; i < s.history.size(); ++i)
        hist.push_back({{"turn", s.history[i].turn}, {"speaker", s.history[i].speaker}, {"text", s.history[i].text}});
    return Json{{"session_id", s.id},
                {"scenario", s.scenario},
                {"condition", to_string(s.condition)},
                {"phase", to_string(s.phase)},
                {"active_role", s.active_role},
                {"memory", to_json(s.memory)},
                {"fuzzy_params", s.memory.npc_state},
                {"trait_states", s.memory.trait_states},
                {"history", hist},
                {"last_delta", s.last_delta ? to_json(*s.last_delta) : Json(nullptr)},
                {"errors", s.errors}};
}

class SessionService {
public:
    SessionService(std::shared_ptr<const Gateway> gateway, SessionConfig config = {})
        : gateway_(std::move(gateway)), config_(std::move(config)) {}

    void add_scenario(std::string key, std::shared_ptr<const Scenario> scenario) {
        std::unique_lock lock(registry_mu_);
        if (default_scenario_.empty()) default_scenario_ = key;
        scenarios_[std::move(key)] = std::move(scenario);
    }

    std::shared_ptr<const Scenario> scenario(std::string_view key) const {
        std::shared_lock lock(registry_mu_);
        auto it = scenarios_.find(key.empty() ? default_scenario_ : std::string(key));
        if (it == scenarios_.end()) throw ScenarioInvalid("unknown scenario '" + std::string(key) + "'");
        return it->second;
    }

    std::string create_session(std::string_view scenario_key, std::string_view condition) {
        auto cond = parse_prompt_condition(condition);
        if (!cond) throw ScenarioInvalid("unknown condition '" + std::string(condition) + "'");
        auto sc = scenario(scenario_key);
        auto session = std::make_shared<Session>();
        session->scenario = sc;
        SessionState st;
        st.id = next_id();
        st.scenario = scenario_key.empty() ? default_key() : std::string(scenario_key);
        st.condition = *cond;
        st.phase = Phase::Opening;
        st.memory = sc->initial_memory();
        session->id = st.id;
        session->state = std::make_shared<const SessionState>(std::move(st));
        persist(*session, true);
        std::unique_lock lock(registry_mu_);
        sessions_[session->id] = session;
        return session->id;
    }

    // Reloads a persisted session by id.
    void resume(const std::string& id) {
        if (!config_.store) throw UnknownSession(id);
        auto meta = config_.store->meta(id);
        auto mem = config_.store->latest(id);
        if (!meta || !mem) throw UnknownSession(id);
        SessionState st;
        st.id = id;
        st.scenario = meta->at("scenario").get<std::string>();
        st.condition = *parse_prompt_condition(meta->at("condition").get<std::string>());
        st.phase = parse_phase(meta->at("phase").get<std::string>()).value_or(Phase::Interrogation);
        st.active_role = meta->value("active_role", "");
        for (const auto& t : meta->at("history"))
            st.history.push_back({t.at("turn").get<std::uint64_t>(), t.at("speaker").get<std::string>(),
                                  t.at("text").get<std::string>()});
        st.memory = *mem;
        auto session = std::make_shared<Session>();
        session->id = id;
        session->scenario = scenario(st.scenario);
        session->state = std::make_shared<const SessionState>(std::move(st));
        std::unique_lock lock(registry_mu_);
        sessions_[id] = session;
    }

    SessionState get_state(const std::string& id) const { return *find(id)->snapshot(); }

    std::vector<std::string> session_ids() const {
        std::shared_lock lock(registry_mu_);
        std::vector<std::string> out;
        for (const auto& [id, _] : sessions_) out.push_back(id);
        return out;
    }

    // Generates the opening NPC line once; later calls are no-ops.
    void ensure_opening(const std::string& id) {
        auto s = find(id);
        std::unique_lock turn(s->turn_mu, std::try_to_lock);
        if (!turn.owns_lock()) throw TurnInFlight();
        auto st = *s->snapshot();
        if (st.phase != Phase::Opening) return;
        open(*s, st);
        publish(*s, std::move(st));
    }

    TurnOutcome post_turn(const std::string& id, const std::string& role, const std::string& utterance,
                          const std::function<void(const std::string&)>& on_segment = {}) {
        auto s = find(id);
        std::unique_lock turn(s->turn_mu, std::try_to_lock);
        if (!turn.owns_lock()) throw TurnInFlight();
        const Scenario& sc = *s->scenario;
        const NpcProfile& npc = sc.npc(role);
        auto st = *s->snapshot();
        if (st.phase == Phase::Conclusion) throw PhaseError("session has concluded");
        if (st.phase == Phase::Opening) open(*s, st);

        TurnOutcome out;
        TurnContext ctx;
        ctx.scaffolds = sc.scaffolds;
        ctx.memory = &st.memory;
        ctx.aliases = sc.aliases;
        ctx.counters = sc.counters;
        ctx.npc = npc.id;
        ctx.npc_role = npc.scaffold_role;
        ctx.traits = sc.traits_for(npc.id);
        auto step = run_engine_turn(ctx, utterance);

        auto preview = commit_turn(st.memory, step.delta, sc.memory_config);
        auto scaffold = hydrate_scaffold(sc.scaffold(npc.scaffold_role), preview);
        std::optional<NpcTraits> traits;
        if (ctx.traits) {
            traits = *ctx.traits;
            traits->machines = hydrate_traits(*ctx.traits, preview, npc.id);
        }

        SelectedRules selection;
        if (st.condition == PromptCondition::JSONRAG) {
            auto rw = rewrite_query(st.history, utterance, *gateway_, config_.rewrite);
            out.query = rw.query;
            out.query_degraded = rw.degraded;
            out.retrieval = search(sc.lore, st.history, rw.query, sc.retrieval_k);
            selection = select_relevant_rules(scaffold, traits ? std::span<const TraitStateMachine>(traits->machines)
                                                                : std::span<const TraitStateMachine>{},
                                              step.delta, step.view, sc.aliases);
        }

        ComposeInputs in;
        in.condition = st.condition;
        in.npc = &npc;
        in.scaffold = &scaffold;
        in.traits = traits ? &*traits : nullptr;
        in.memory = &preview;
        in.full_lore = sc.full_lore;
        in.retrieval = &out.retrieval;
        in.selection = &selection;
        in.history = st.history;
        in.utterance = utterance;
        in.system_template = sc.template_for(npc.scaffold_role, st.condition);
        in.scenario_name = sc.name;
        in.evidence_labels = &sc.evidence_labels;
        out.bundle = compose(in, sc.composer);
        if (out.bundle.recap_emitted) step.delta.recaps.push_back(npc.scaffold_role);

        auto messages = to_messages(out.bundle);
        if (on_segment) {
            SentenceSegmenter seg;
            out.completion = gateway_->complete_stream(messages, config_.generation, [&](std::string_view f) {
                for (auto& piece : seg.push(f)) {
                    on_segment(piece);
                    out.segments.push_back(std::move(piece));
                }
            });
            if (auto rest = seg.flush()) {
                on_segment(*rest);
                out.segments.push_back(std::move(*rest));
            }
        } else {
            out.completion = gateway_->complete(messages, config_.generation);
            out.segments = segment_sentences({out.completion.text});
        }
        out.reply = out.completion.text;

        if (config_.checker && scaffold.kind == RoleKind::Suspect) {
            try {
                if (config_.checker->contradicts(sc, npc.id, out.reply)) step.delta.metric_increments["contradiction_count"] += 1;
            } catch (const GatewayError& e) {
                st.errors.push_back(std::string("contradiction check skipped: ") + e.what());
            }
        }

        st.memory = commit_turn(st.memory, step.delta, sc.memory_config);
        st.history.push_back({st.memory.turn_index, "player", utterance});
        st.history.push_back({st.memory.turn_index, npc.id, out.reply});
        st.active_role = npc.id;
        st.last_delta = step.delta;
        for (const auto& e : step.delta.rule_errors) st.errors.push_back(e);
        out.delta = std::move(step.delta);
        commit(*s, std::move(st));
        return out;
    }

    SessionState register_evidence(const std::string& id, const std::string& evidence_id) {
        auto s = find(id);
        std::unique_lock turn(s->turn_mu, std::try_to_lock);
        if (!turn.owns_lock()) throw TurnInFlight();
        if (!s->scenario->has_evidence(evidence_id)) throw UnknownEvidence(evidence_id);
        auto st = *s->snapshot();
        st.memory = add_evidence(std::move(st.memory), evidence_id, s->scenario->memory_config);
        if (config_.store) config_.store->update_latest(id, st.memory);
        publish(*s, std::move(st));
        return *s->snapshot();
    }

    SessionState conclude(const std::string& id) {
        auto s = find(id);
        std::unique_lock turn(s->turn_mu, std::try_to_lock);
        if (!turn.owns_lock()) throw TurnInFlight();
        auto st = *s->snapshot();
        st.phase = Phase::Conclusion;
        publish(*s, std::move(st));
        persist(*s, false);
        return *s->snapshot();
    }

    const SessionConfig& config() const { return config_; }

private:
    struct Session {
        std::string id;
        std::shared_ptr<const Scenario> scenario;
        std::mutex turn_mu;
        mutable std::mutex state_mu;
        std::shared_ptr<const SessionState> state;

        std::shared_ptr<const SessionState> snapshot() const {
            std::lock_guard lock(state_mu);
            return state;
        }
    };

    std::shared_ptr<Session> find(const std::string& id) const {
        std::shared_lock lock(registry_mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw UnknownSession(id);
        return it->second;
    }

    std::string default_key() const {
        std::shared_lock lock(registry_mu_);
        return default_scenario_;
    }

    std::string next_id() {
        std::lock_guard lock(id_mu_);
        std::ostringstream id;
        id << "s-" << std::hex << rng_() << std::dec << "-" << ++counter_;
        return id.str();
    }

    void open(Session& s, SessionState& st) {
        const Scenario& sc = *s.scenario;
        const NpcProfile& npc = sc.npc(sc.opening_npc);
        auto scaffold = hydrate_scaffold(sc.scaffold(npc.scaffold_role), st.memory);
        std::optional<NpcTraits> traits;
        if (const auto* t = sc.traits_for(npc.id)) {
            traits = *t;
            traits->machines = hydrate_traits(*t, st.memory, npc.id);
        }
        RetrievalResult retrieval;
        if (st.condition == PromptCondition::JSONRAG) retrieval = search(sc.lore, {}, sc.opening_cue, sc.retrieval_k);
        SelectedRules selection;
        if (traits)
            for (const auto& m : traits->machines) selection.trait_lines.push_back(trait_line(m, nullptr));
        ComposeInputs in;
        in.condition = st.condition;
        in.npc = &npc;
        in.scaffold = &scaffold;
        in.traits = traits ? &*traits : nullptr;
        in.memory = &st.memory;
        in.full_lore = sc.full_lore;
        in.retrieval = &retrieval;
        in.selection = &selection;
        in.utterance = sc.opening_cue;
        in.system_template = sc.template_for(npc.scaffold_role, st.condition);
        in.scenario_name = sc.name;
        in.evidence_labels = &sc.evidence_labels;
        auto bundle = compose(in, sc.composer);
        auto c = gateway_->complete(to_messages(bundle), config_.generation);
        st.history.push_back({st.memory.turn_index, npc.id, c.text});
        st.phase = Phase::Interrogation;
        st.active_role = npc.id;
    }

    void publish(Session& s, SessionState st) {
        auto next = std::make_shared<const SessionState>(std::move(st));
        std::lock_guard lock(s.state_mu);
        s.state = std::move(next);
    }

    void commit(Session& s, SessionState st) {
        if (config_.store) config_.store->commit(s.id, st.memory);
        publish(s, std::move(st));
        persist(s, false);
    }

    void persist(const Session& s, bool with_memory) const {
        if (!config_.store) return;
        auto st = s.snapshot();
        if (with_memory) config_.store->commit(s.id, st->memory);
        Json hist = Json::array();
        for (const auto& t : st->history) hist.push_back({{"turn", t.turn}, {"speaker", t.speaker}, {"text", t.text}});
        config_.store->write_meta(s.id, Json{{"scenario", st->scenario},
                                             {"condition", to_string(st->condition)},
                                             {"phase", to_string(st->phase)},
                                             {"active_role", st->active_role},
                                             {"history", hist}});
    }

    std::shared_ptr<const Gateway> gateway_;
    SessionConfig config_;
    mutable std::shared_mutex registry_mu_;
    std::map<std::string, std::shared_ptr<const Scenario>> scenarios_;
    std::string default_scenario_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::mutex id_mu_;
    std::mt19937_64 rng_{std::random_device{}()};
    std::uint64_t counter_ = 0;
};

}  // namespace scaffold

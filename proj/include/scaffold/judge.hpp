#pragma once

// Synthetic evaluation: scripted prompts per role, paired generations per
// condition, judge scoring on three anchored 1-4 scales, and the statistical
// report.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "scaffold/engine.hpp"
#include "scaffold/errors.hpp"
#include "scaffold/gateway.hpp"
#include "scaffold/json_io.hpp"
#include "scaffold/lore.hpp"
#include "scaffold/prompt.hpp"
#include "scaffold/scenario.hpp"
#include "scaffold/stats.hpp"

namespace scaffold {

inline constexpr std::array<std::string_view, 3> kMetrics = {"variation", "relevance", "hallucination"};

struct JudgeScore {
    int variation = 0;
    int relevance = 0;
    int hallucination = 0;  // inverted: higher means fewer contradictions

    int operator[](std::size_t metric) const {
        return metric == 0 ? variation : metric == 1 ? relevance : hallucination;
    }
    bool operator==(const JudgeScore&) const = default;
};

// Accepts exactly one JSON object with the three integer fields in 1..4,
// optionally wrapped in a ```json fence.
inline JudgeScore parse_verdict(std::string_view text) {
    auto b = text.find_first_not_of(" \t\r\n");
    auto e = text.find_last_not_of(" \t\r\n");
    if (b == std::string_view::npos) throw JudgeParseError("empty verdict");
    auto body = text.substr(b, e - b + 1);
    if (body.starts_with("```")) {
        auto nl = body.find('\n');
        auto close = body.rfind("```");
        if (nl == std::string_view::npos || close <= nl) throw JudgeParseError("unterminated code fence");
        body = body.substr(nl + 1, close - nl - 1);
    }
    Json j;
    try {
        j = parse_json(body, "verdict");
    } catch (const Error& ex) {
        throw JudgeParseError(std::string("verdict is not JSON: ") + ex.what());
    }
    if (!j.is_object() || j.size() != kMetrics.size()) throw JudgeParseError("verdict must hold exactly the three metrics");
    JudgeScore s;
    int* fields[] = {&s.variation, &s.relevance, &s.hallucination};
    for (std::size_t i = 0; i < kMetrics.size(); ++i) {
        std::string key(kMetrics[i]);
        if (!j.contains(key) || !j.at(key).is_number_integer()) throw JudgeParseError("verdict field '" + key + "' must be an integer");
        auto v = j.at(key).get<std::int64_t>();
        if (v < 1 || v > 4) throw JudgeParseError("verdict field '" + key + "' out of range 1-4");
        *fields[i] = static_cast<int>(v);
    }
    return s;
}

struct JudgeContext {
    std::string role;     // NPC name and description
    std::string prompt;   // scripted player line
    std::string lore;     // lore excerpts used for relevance and hallucination
    std::string label;    // neutral system label, e.g. "System A"
};

inline std::vector<ChatMessage> judge_messages(std::string_view rubric, std::string_view response,
                                               std::string_view sibling, const JudgeContext& ctx) {
    Json user{{"system_label", ctx.label},
              {"role", ctx.role},
              {"prompt", ctx.prompt},
              {"context", ctx.lore},
              {"response", response},
              {"sibling", sibling}};
    return {{"system", std::string(rubric)}, {"user", user.dump()}};
}

// One judge call sees the response and its sibling generation; an
// unparseable verdict is retried once.
inline JudgeScore judge_score(std::string_view response, std::string_view sibling, const JudgeContext& ctx,
                              const Gateway& gateway, std::string_view rubric, GenerationConfig config = {}) {
    if (rubric.empty()) throw JudgeParseError("judge rubric is empty");
    config.temperature = 0.0;
    auto messages = judge_messages(rubric, response, sibling, ctx);
    std::string first_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto c = gateway.complete(messages, config);
        try {
            return parse_verdict(c.text);
        } catch (const JudgeParseError& e) {
            if (attempt == 0) {
                first_error = e.what();
                messages.push_back({"assistant", c.text});
                messages.push_back({"user", "Reply with only the JSON object {\"variation\":n,\"relevance\":n,"
                                            "\"hallucination\":n} using integers 1-4."});
                continue;
            }
            throw JudgeParseError(std::string("unparseable verdict after retry: ") + e.what());
        }
    }
    throw JudgeParseError(first_error);
}

// ---- protocol --------------------------------------------------------------

struct EvalProtocol {
    std::array<PromptCondition, 2> conditions{PromptCondition::HCP, PromptCondition::JSONRAG};
    std::vector<std::string> roles{"interviewer", "sarah", "mark"};
    std::size_t prompts_per_role = 20;
    std::size_t runs_per_prompt = 2;
    GenerationConfig generation{};
    GenerationConfig judge{};
    std::uint64_t seed = 0;
    std::size_t workers = 4;

    std::size_t interactions() const { return roles.size() * prompts_per_role; }
};

inline EvalProtocol parse_protocol(std::string_view text) {
    auto j = parse_json(text, "protocol");
    EvalProtocol p;
    try {
        if (j.contains("conditions")) {
            const auto& c = j.at("conditions");
            if (!c.is_array() || c.size() != 2) throw SchemaError("protocol.conditions must be a pair");
            for (std::size_t i = 0; i < 2; ++i) {
                auto cond = parse_prompt_condition(c.at(i).get<std::string>());
                if (!cond) throw SchemaError("protocol.conditions: unknown condition '" + c.at(i).get<std::string>() + "'");
                p.conditions[i] = *cond;
            }
            if (p.conditions[0] == p.conditions[1]) throw SchemaError("protocol.conditions must differ");
        }
        if (j.contains("roles")) p.roles = j.at("roles").get<std::vector<std::string>>();
        p.prompts_per_role = j.value("prompts_per_role", p.prompts_per_role);
        p.runs_per_prompt = j.value("runs_per_prompt", p.runs_per_prompt);
        p.seed = j.value("seed", p.seed);
        p.workers = j.value("workers", p.workers);
        auto read_gen = [](const Json& g, GenerationConfig& out) {
            out.model = g.value("model", out.model);
            out.temperature = g.value("temperature", out.temperature);
            out.max_tokens = g.value("max_tokens", out.max_tokens);
            if (g.contains("seed")) out.seed = g.at("seed").get<std::int64_t>();
        };
        if (j.contains("generation")) read_gen(j.at("generation"), p.generation);
        if (j.contains("judge")) read_gen(j.at("judge"), p.judge);
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("protocol: ") + e.what());
    }
    if (p.roles.empty()) throw SchemaError("protocol.roles must not be empty");
    if (p.prompts_per_role == 0) throw SchemaError("protocol.prompts_per_role must be positive");
    if (p.runs_per_prompt < 2) throw SchemaError("protocol.runs_per_prompt must be at least 2");
    if (p.judge.temperature != 0.0) throw SchemaError("protocol.judge.temperature must be 0.0");
    return p;
}

// ---- raw results -----------------------------------------------------------

struct ConditionOutcome {
    PromptCondition condition = PromptCondition::HCP;
    std::string label;
    std::vector<std::string> responses;
    std::vector<JudgeScore> scores;
    std::string error;

    bool judged(std::size_t runs) const { return error.empty() && scores.size() == runs; }

    double average(std::size_t metric) const {
        double s = 0;
        for (const auto& sc : scores) s += sc[metric];
        return s / static_cast<double>(scores.size());
    }
};

struct InteractionResult {
    std::string role;
    std::size_t prompt_index = 0;
    std::string prompt;
    std::array<ConditionOutcome, 2> outcomes;
    bool done = false;

    bool valid(std::size_t runs) const { return done && outcomes[0].judged(runs) && outcomes[1].judged(runs); }
};

struct RawScores {
    std::vector<InteractionResult> interactions;  // ordered by (role, prompt index)
    std::size_t runs_per_prompt = 2;
    std::size_t generations = 0;
    std::size_t judgments = 0;
    bool complete = true;
    std::string failure;
    std::uint64_t seed = 0;
    std::string judge_model;
    std::string started_at;
    std::string finished_at;

    std::size_t invalid() const {
        std::size_t n = 0;
        for (const auto& i : interactions)
            if (i.done && !i.valid(runs_per_prompt)) ++n;
        return n;
    }
};

class EvalAborted : public GatewayError {
public:
    EvalAborted(const std::string& what, RawScores partial) : GatewayError(what), partial_(std::move(partial)) {}
    const RawScores& partial() const { return partial_; }

private:
    RawScores partial_;
};

namespace detail {

inline std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

// One fresh-memory turn for a scripted prompt under one condition.
inline PromptBundle eval_bundle(const Scenario& sc, const NpcProfile& npc, PromptCondition condition,
                                const std::string& prompt) {
    auto memory = sc.initial_memory();
    TurnContext ctx;
    ctx.scaffolds = sc.scaffolds;
    ctx.memory = &memory;
    ctx.aliases = sc.aliases;
    ctx.counters = sc.counters;
    ctx.npc = npc.id;
    ctx.npc_role = npc.scaffold_role;
    ctx.traits = sc.traits_for(npc.id);
    auto step = run_engine_turn(ctx, prompt);
    auto preview = commit_turn(memory, step.delta, sc.memory_config);
    auto scaffold = hydrate_scaffold(sc.scaffold(npc.scaffold_role), preview);
    std::optional<NpcTraits> traits;
    if (ctx.traits) {
        traits = *ctx.traits;
        traits->machines = hydrate_traits(*ctx.traits, preview, npc.id);
    }
    RetrievalResult retrieval;
    SelectedRules selection;
    if (condition == PromptCondition::JSONRAG) {
        retrieval = search(sc.lore, {}, prompt, sc.retrieval_k);
        selection = select_relevant_rules(
            scaffold, traits ? std::span<const TraitStateMachine>(traits->machines) : std::span<const TraitStateMachine>{},
            step.delta, step.view, sc.aliases);
    }
    ComposeInputs in;
    in.condition = condition;
    in.npc = &npc;
    in.scaffold = &scaffold;
    in.traits = traits ? &*traits : nullptr;
    in.memory = &preview;
    in.full_lore = sc.full_lore;
    in.retrieval = &retrieval;
    in.selection = &selection;
    in.utterance = prompt;
    in.system_template = sc.template_for(npc.scaffold_role, condition);
    in.scenario_name = sc.name;
    in.evidence_labels = &sc.evidence_labels;
    return compose(in, sc.composer);
}

}  // namespace detail

// The same bundle the eval would send for (npc, condition, prompt); exposed
// for inspection and the condition-separation checks.
inline PromptBundle eval_prompt_bundle(const Scenario& sc, const std::string& npc_id, PromptCondition condition,
                                       const std::string& prompt) {
    return detail::eval_bundle(sc, sc.npc(npc_id), condition, prompt);
}

// Execution order is shuffled by the protocol seed; condition labels are
// assigned per prompt by the same seed. A gateway failure stops the run and
// surfaces as EvalAborted carrying every finished interaction.
inline RawScores run_eval(const EvalProtocol& protocol, const Scenario& sc, const Gateway& gateway) {
    RawScores raw;
    raw.runs_per_prompt = protocol.runs_per_prompt;
    raw.seed = protocol.seed;
    raw.judge_model = protocol.judge.model;
    raw.started_at = detail::utc_now();
    if (sc.judge_rubric.empty()) throw ScenarioInvalid("scenario has no judge rubric");

    std::mt19937_64 rng(protocol.seed);
    for (const auto& role : protocol.roles) {
        sc.npc(role);
        auto it = sc.prompts.find(role);
        if (it == sc.prompts.end() || it->second.size() < protocol.prompts_per_role)
            throw ScenarioInvalid("role '" + role + "' needs " + std::to_string(protocol.prompts_per_role) +
                                  " scripted prompts");
        for (std::size_t i = 0; i < protocol.prompts_per_role; ++i) {
            InteractionResult r;
            r.role = role;
            r.prompt_index = i;
            r.prompt = it->second[i];
            bool swap = std::bernoulli_distribution(0.5)(rng);
            for (std::size_t c = 0; c < 2; ++c) {
                r.outcomes[c].condition = protocol.conditions[c];
                r.outcomes[c].label = (c == 0) != swap ? "System A" : "System B";
            }
            raw.interactions.push_back(std::move(r));
        }
    }

    std::vector<std::size_t> order(raw.interactions.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::atomic<std::size_t> generations{0}, judgments{0};
    std::mutex failure_mu;
    std::string failure;

    auto work = [&] {
        while (!stop) {
            auto k = next.fetch_add(1);
            if (k >= order.size()) return;
            auto& r = raw.interactions[order[k]];
            const auto& npc = sc.npc(r.role);
            JudgeContext ctx;
            ctx.role = npc.name + ": " + npc.description;
            ctx.prompt = r.prompt;
            for (const auto& h : search(sc.lore, {}, r.prompt, sc.retrieval_k).hits) ctx.lore += h.text + "\n";
            try {
                for (auto& out : r.outcomes) {
                    auto bundle = detail::eval_bundle(sc, npc, out.condition, r.prompt);
                    auto messages = to_messages(bundle);
                    for (std::size_t run = 0; run < protocol.runs_per_prompt; ++run) {
                        auto cfg = protocol.generation;
                        cfg.seed = static_cast<std::int64_t>(protocol.generation.seed.value_or(0)) +
                                   static_cast<std::int64_t>(run);
                        out.responses.push_back(gateway.complete(messages, cfg).text);
                        ++generations;
                    }
                    ctx.label = out.label;
                    try {
                        for (std::size_t run = 0; run < protocol.runs_per_prompt; ++run) {
                            const auto& sibling = out.responses[(run + 1) % out.responses.size()];
                            out.scores.push_back(
                                judge_score(out.responses[run], sibling, ctx, gateway, sc.judge_rubric, protocol.judge));
                            ++judgments;
                        }
                    } catch (const JudgeParseError& e) {
                        out.error = e.what();
                    }
                }
                r.done = true;
            } catch (const GatewayError& e) {
                std::lock_guard lock(failure_mu);
                if (failure.empty()) failure = e.what();
                stop = true;
            }
        }
    };

    std::size_t n = std::max<std::size_t>(1, std::min(protocol.workers, order.size()));
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();

    raw.generations = generations;
    raw.judgments = judgments;
    raw.finished_at = detail::utc_now();
    if (!failure.empty()) {
        raw.complete = false;
        raw.failure = failure;
        throw EvalAborted("evaluation aborted: " + failure, std::move(raw));
    }
    return raw;
}

// ---- report ----------------------------------------------------------------

struct ConditionStats {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

struct MetricComparison {
    std::string metric;
    std::array<ConditionStats, 2> conditions;
    double cliffs_delta = 0.0;  // positive favors the first condition
    double wilcoxon_statistic = 0.0;
    double wilcoxon_p = 1.0;
    double wilcoxon_p_holm = 1.0;
    std::optional<double> t;
    std::optional<double> t_p;
    std::optional<double> t_p_holm;
    std::size_t n = 0;
};

struct RoleRow {
    std::string role;
    std::string metric;
    std::array<ConditionStats, 2> conditions;
    double cliffs_delta = 0.0;
};

struct EvalReport {
    std::array<PromptCondition, 2> conditions{};
    std::vector<MetricComparison> aggregated;
    std::vector<RoleRow> by_role;
    std::vector<std::string> completed_roles;
    bool complete = true;
    std::size_t interactions = 0;
    std::size_t valid = 0;
    std::size_t invalid = 0;
    std::size_t generations = 0;
    std::size_t judgments = 0;
    std::uint64_t seed = 0;
    std::string judge_model;
    std::string started_at;
    std::string finished_at;
};

namespace detail {

inline ConditionStats describe(const std::vector<double>& xs) {
    ConditionStats s;
    s.n = xs.size();
    if (xs.empty()) return s;
    s.mean = stats::mean(xs);
    s.sd = xs.size() > 1 ? stats::sample_sd(xs) : 0.0;
    return s;
}

}  // namespace detail

// Per-interaction scores are the run averages; only valid interactions count.
inline EvalReport summarize(const RawScores& raw, const EvalProtocol& protocol) {
    EvalReport rep;
    rep.conditions = protocol.conditions;
    rep.complete = raw.complete;
    rep.generations = raw.generations;
    rep.judgments = raw.judgments;
    rep.seed = raw.seed;
    rep.judge_model = raw.judge_model;
    rep.started_at = raw.started_at;
    rep.finished_at = raw.finished_at;
    rep.interactions = raw.interactions.size();
    rep.invalid = raw.invalid();

    std::vector<const InteractionResult*> valid;
    for (const auto& r : raw.interactions)
        if (r.valid(raw.runs_per_prompt)) valid.push_back(&r);
    rep.valid = valid.size();

    for (const auto& role : protocol.roles) {
        bool all_done = std::count_if(raw.interactions.begin(), raw.interactions.end(), [&](const auto& r) {
                            return r.role == role && r.done;
                        }) == static_cast<std::ptrdiff_t>(protocol.prompts_per_role);
        if (all_done) rep.completed_roles.push_back(role);
        else rep.complete = false;
    }

    std::vector<double> wp, tp;
    std::vector<std::size_t> t_index;
    for (std::size_t m = 0; m < kMetrics.size(); ++m) {
        MetricComparison mc;
        mc.metric = std::string(kMetrics[m]);
        std::vector<double> a, b, d;
        for (const auto* r : valid) {
            a.push_back(r->outcomes[0].average(m));
            b.push_back(r->outcomes[1].average(m));
            d.push_back(a.back() - b.back());
        }
        mc.n = d.size();
        mc.conditions = {detail::describe(a), detail::describe(b)};
        if (!a.empty()) mc.cliffs_delta = stats::cliffs_delta(a, b);
        try {
            auto w = stats::wilcoxon_signed_rank(d);
            mc.wilcoxon_statistic = w.statistic;
            mc.wilcoxon_p = w.p_value;
        } catch (const Error&) {
            mc.wilcoxon_statistic = 0.0;
            mc.wilcoxon_p = 1.0;
        }
        try {
            auto t = stats::paired_t(d);
            mc.t = t.t;
            mc.t_p = t.p_value;
        } catch (const ZeroVariance&) {
            if (stats::mean(d) == 0.0) {
                mc.t = 0.0;
                mc.t_p = 1.0;
            }
        } catch (const Error&) {
        }
        wp.push_back(mc.wilcoxon_p);
        if (mc.t_p) {
            tp.push_back(*mc.t_p);
            t_index.push_back(m);
        }
        rep.aggregated.push_back(std::move(mc));
    }
    auto wadj = stats::holm_bonferroni(wp);
    for (std::size_t m = 0; m < rep.aggregated.size(); ++m) rep.aggregated[m].wilcoxon_p_holm = wadj[m];
    auto tadj = stats::holm_bonferroni(tp);
    for (std::size_t i = 0; i < t_index.size(); ++i) rep.aggregated[t_index[i]].t_p_holm = tadj[i];

    for (const auto& role : rep.completed_roles) {
        for (std::size_t m = 0; m < kMetrics.size(); ++m) {
            RoleRow row;
            row.role = role;
            row.metric = std::string(kMetrics[m]);
            std::vector<double> a, b;
            for (const auto* r : valid) {
                if (r->role != role) continue;
                a.push_back(r->outcomes[0].average(m));
                b.push_back(r->outcomes[1].average(m));
            }
            row.conditions = {detail::describe(a), detail::describe(b)};
            if (!a.empty()) row.cliffs_delta = stats::cliffs_delta(a, b);
            rep.by_role.push_back(std::move(row));
        }
    }
    return rep;
}

inline Json to_json(const RawScores& raw) {
    Json items = Json::array();
    for (const auto& r : raw.interactions) {
        Json outs = Json::array();
        for (const auto& o : r.outcomes) {
            Json scores = Json::array();
            for (const auto& s : o.scores)
                scores.push_back({{"variation", s.variation}, {"relevance", s.relevance}, {"hallucination", s.hallucination}});
            outs.push_back({{"condition", to_string(o.condition)},
                            {"label", o.label},
                            {"responses", o.responses},
                            {"scores", scores},
                            {"error", o.error.empty() ? Json(nullptr) : Json(o.error)}});
        }
        items.push_back({{"role", r.role},
                         {"prompt_index", r.prompt_index},
                         {"prompt", r.prompt},
                         {"done", r.done},
                         {"outcomes", outs}});
    }
    return Json{{"seed", raw.seed},
                {"complete", raw.complete},
                {"failure", raw.failure},
                {"generations", raw.generations},
                {"judgments", raw.judgments},
                {"invalid", raw.invalid()},
                {"interactions", items}};
}

inline Json to_json(const EvalReport& rep) {
    auto cond = [&](const std::array<ConditionStats, 2>& cs) {
        Json j = Json::object();
        for (std::size_t c = 0; c < 2; ++c)
            j[std::string(to_string(rep.conditions[c]))] = {{"mean", cs[c].mean}, {"sd", cs[c].sd}, {"n", cs[c].n}};
        return j;
    };
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json agg = Json::array();
    for (const auto& m : rep.aggregated)
        agg.push_back({{"metric", m.metric},
                       {"conditions", cond(m.conditions)},
                       {"cliffs_delta", m.cliffs_delta},
                       {"wilcoxon", {{"statistic", m.wilcoxon_statistic}, {"p", m.wilcoxon_p}, {"p_holm", m.wilcoxon_p_holm}}},
                       {"paired_t", {{"t", opt(m.t)}, {"p", opt(m.t_p)}, {"p_holm", opt(m.t_p_holm)}}},
                       {"n", m.n}});
    Json roles = Json::array();
    for (const auto& r : rep.by_role)
        roles.push_back({{"role", r.role}, {"metric", r.metric}, {"conditions", cond(r.conditions)},
                         {"cliffs_delta", r.cliffs_delta}});
    return Json{{"conditions", {to_string(rep.conditions[0]), to_string(rep.conditions[1])}},
                {"complete", rep.complete},
                {"completed_roles", rep.completed_roles},
                {"interactions", rep.interactions},
                {"valid", rep.valid},
                {"invalid", rep.invalid},
                {"generations", rep.generations},
                {"judgments", rep.judgments},
                {"aggregated", agg},
                {"by_role", roles},
                {"metadata",
                 {{"seed", rep.seed},
                  {"judge_model", rep.judge_model},
                  {"started_at", rep.started_at},
                  {"finished_at", rep.finished_at}}}};
}

inline std::string effect_label(double delta) {
    double a = std::fabs(delta);
    if (a < 0.147) return "negl.";
    if (a < 0.33) return "small";
    if (a < 0.474) return "medium";
    return "large";
}

// Plain-text tables: aggregated outcomes, then the per-role breakdown.
inline std::string render_report(const EvalReport& rep) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    auto cap = [](std::string s) {
        if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
        return s;
    };
    auto pval = [](std::optional<double> p) {
        if (!p) return std::string("n/a");
        std::ostringstream o;
        o << std::setprecision(4) << std::fixed << *p;
        return o.str();
    };
    out << "Aggregated outcomes (" << rep.valid << " interactions";
    if (rep.invalid) out << ", " << rep.invalid << " invalid";
    if (!rep.complete) out << ", INCOMPLETE";
    out << ")\n";
    out << std::left << std::setw(15) << "Metric" << std::setw(10) << "Condition" << std::right << std::setw(6) << "M"
        << std::setw(7) << "SD" << std::setw(18) << "Cliff's delta" << std::setw(10) << "p(W)" << std::setw(10)
        << "p(W,Holm)" << std::setw(10) << "p(t,Holm)" << "\n";
    for (const auto& m : rep.aggregated) {
        for (std::size_t c = 0; c < 2; ++c) {
            out << std::left << std::setw(15) << (c == 0 ? cap(m.metric) : "") << std::setw(10)
                << to_string(rep.conditions[c]) << std::right << std::setw(6) << m.conditions[c].mean << std::setw(7)
                << m.conditions[c].sd;
            if (c == 0) {
                std::ostringstream d;
                d << std::showpos << std::fixed << std::setprecision(2) << m.cliffs_delta << " ("
                  << effect_label(m.cliffs_delta) << ")";
                out << std::setw(18) << d.str() << std::setw(10) << pval(m.wilcoxon_p) << std::setw(10)
                    << pval(m.wilcoxon_p_holm) << std::setw(10) << pval(m.t_p_holm);
            }
            out << "\n";
        }
    }
    out << "\nBy role\n";
    out << std::left << std::setw(13) << "Role" << std::setw(15) << "Metric" << std::right;
    for (auto c : rep.conditions) out << std::setw(18) << (std::string(to_string(c)) + " M (SD)");
    out << std::setw(18) << "Cliff's delta" << "\n";
    for (const auto& r : rep.by_role) {
        out << std::left << std::setw(13) << cap(r.role) << std::setw(15) << cap(r.metric) << std::right;
        for (const auto& cs : r.conditions) {
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(2) << cs.mean << " (" << cs.sd << ")";
            out << std::setw(18) << cell.str();
        }
        std::ostringstream d;
        d << std::showpos << std::fixed << std::setprecision(2) << r.cliffs_delta << " (" << effect_label(r.cliffs_delta)
          << ")";
        out << std::setw(18) << d.str() << "\n";
    }
    return out.str();
}

}  // namespace scaffold

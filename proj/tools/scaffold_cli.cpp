// Command-line front end: validate, play, serve, eval, lore, stats.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scaffold/http_backend.hpp"
#include "scaffold/judge.hpp"
#include "scaffold/lore.hpp"
#include "scaffold/scenario.hpp"
#include "scaffold/server.hpp"
#include "scaffold/session.hpp"
#include "scaffold/stats.hpp"
#include "scaffold/synthetic.hpp"

namespace fs = std::filesystem;
using namespace scaffold;

namespace {

struct BackendOptions {
    std::string kind = "synthetic";  // live | replay | record | synthetic
    std::string inner = "live";      // what record mode records from
    std::string fixtures = "fixtures";
    std::string config;
    int retries = 2;
};

void add_backend_options(CLI::App* cmd, BackendOptions& o) {
    cmd->add_option("--backend", o.kind, "live, replay, record or synthetic")
        ->check(CLI::IsMember({"live", "replay", "record", "synthetic"}))
        ->capture_default_str();
    cmd->add_option("--record-from", o.inner, "backend recorded in record mode")
        ->check(CLI::IsMember({"live", "synthetic"}))
        ->capture_default_str();
    cmd->add_option("--fixtures", o.fixtures, "fixture directory for replay/record")->capture_default_str();
    cmd->add_option("--backend-config", o.config, "JSON file with base_url, model, timeout_ms, api_key_env");
    cmd->add_option("--retries", o.retries, "gateway retries on transient failures")->capture_default_str();
}

std::shared_ptr<Backend> make_base(const std::string& kind, const BackendOptions& o) {
    if (kind == "synthetic") return make_synthetic_backend();
    HttpBackendConfig cfg;
    if (!o.config.empty()) cfg = load_backend_config(o.config);
    return std::make_shared<OpenAiBackend>(cfg);
}

std::shared_ptr<Gateway> make_gateway(const BackendOptions& o) {
    std::shared_ptr<Backend> backend;
    if (o.kind == "replay") {
        backend = std::make_shared<ReplayBackend>(o.fixtures, FixtureMode::Replay);
    } else if (o.kind == "record") {
        fs::create_directories(o.fixtures);
        backend = std::make_shared<ReplayBackend>(o.fixtures, FixtureMode::Record, make_base(o.inner, o));
    } else {
        backend = make_base(o.kind, o);
    }
    return std::make_shared<Gateway>(backend, RetryPolicy{o.retries, std::chrono::milliseconds(250)});
}

int print_report(const ValidationReport& report) {
    for (const auto& f : report.findings) std::cout << f.kind << "\t" << f.subject << "\t" << f.message << "\n";
    std::cout << (report.ok() ? "ok" : std::to_string(report.findings.size()) + " finding(s)") << "\n";
    return report.ok() ? 0 : 1;
}

void print_state(const SessionState& st) {
    std::cout << "turn " << st.memory.turn_index << ", phase " << to_string(st.phase) << "\n";
    for (const auto& [role, params] : st.memory.npc_state)
        for (const auto& [p, v] : params) std::cout << "  " << role << "." << p << " = " << format_number(v) << "\n";
    for (const auto& [npc, traits] : st.memory.trait_states)
        for (const auto& [t, v] : traits) std::cout << "  " << npc << "." << t << " = " << v << "\n";
    std::cout << "  evidence: " << join(st.memory.recent_evidence, ", ") << "\n";
}

int run_play(const std::string& scenario_dir, const std::string& condition, const BackendOptions& bo,
             const std::string& store) {
    auto sc = std::make_shared<const Scenario>(load_scenario(scenario_dir));
    SessionConfig cfg;
    if (!store.empty()) cfg.store.emplace(store);
    auto svc = std::make_shared<SessionService>(make_gateway(bo), std::move(cfg));
    svc->add_scenario(sc->name, sc);
    auto id = svc->create_session(sc->name, condition);
    svc->ensure_opening(id);
    auto st = svc->get_state(id);
    for (const auto& t : st.history) std::cout << sc->npc(t.speaker).name << ": " << t.text << "\n";
    std::cout << "Commands: /to <npc>, /evidence <id>, /state, /conclude, /quit. Talking to: " << st.active_role
              << "\n";

    std::string role = st.active_role;
    std::string line;
    while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
        if (line.empty()) continue;
        try {
            if (line == "/quit") break;
            if (line == "/state") {
                print_state(svc->get_state(id));
                continue;
            }
            if (line == "/conclude") {
                svc->conclude(id);
                std::cout << "Session concluded.\n";
                break;
            }
            if (line.starts_with("/to ")) {
                role = sc->npc(line.substr(4)).id;
                std::cout << "Talking to " << sc->npc(role).name << "\n";
                continue;
            }
            if (line.starts_with("/evidence ")) {
                svc->register_evidence(id, line.substr(10));
                std::cout << "Registered " << line.substr(10) << "\n";
                continue;
            }
            std::cout << sc->npc(role).name << ": " << std::flush;
            auto out = svc->post_turn(id, role, line, [](const std::string& seg) { std::cout << seg << std::flush; });
            std::cout << "\n";
            for (const auto& f : out.delta.fired_transitions)
                std::cout << "  [" << f.npc << "." << f.trait << ": " << f.from << " -> " << f.to << "]\n";
            for (const auto& r : out.delta.applied_rules)
                std::cout << "  [" << r.role << "." << r.param << ": " << format_number(r.old_value) << " -> "
                          << format_number(r.new_value) << "]\n";
        } catch (const Error& e) {
            std::cout << "\nerror: " << e.what() << "\n";
        }
    }
    return 0;
}

int run_serve(const std::vector<std::string>& scenarios, const std::string& host, int port, const BackendOptions& bo,
              const std::string& store) {
    SessionConfig cfg;
    if (!store.empty()) cfg.store.emplace(store);
    auto svc = std::make_shared<SessionService>(make_gateway(bo), std::move(cfg));
    for (const auto& dir : scenarios) {
        auto sc = std::make_shared<const Scenario>(load_scenario(dir));
        svc->add_scenario(sc->name, sc);
        std::cout << "loaded scenario '" << sc->name << "' from " << dir << "\n";
    }
    httplib::Server server;
    install_routes(server, svc);
    std::cout << "listening on " << host << ":" << port << "\n" << std::flush;
    return server.listen(host, port) ? 0 : 1;
}

int run_eval_cmd(const std::string& protocol_file, const std::string& scenario_dir, const BackendOptions& bo,
                 std::optional<std::uint64_t> seed, const std::string& out, const std::string& raw_out) {
    auto protocol = parse_protocol(read_text_file(protocol_file));
    if (seed) protocol.seed = *seed;
    auto sc = load_scenario(scenario_dir);
    auto gateway = make_gateway(bo);
    auto write = [&](const RawScores& raw) {
        auto report = summarize(raw, protocol);
        if (!out.empty()) write_file_atomic(out, to_json(report).dump(2));
        if (!raw_out.empty()) write_file_atomic(raw_out, to_json(raw).dump(2));
        std::cout << render_report(report);
        std::cout << "\n" << raw.generations << " generations, " << raw.judgments << " judgments\n";
    };
    try {
        write(run_eval(protocol, sc, *gateway));
        return 0;
    } catch (const EvalAborted& e) {
        std::cerr << e.what() << "\n";
        write(e.partial());
        return 2;
    }
}

int run_lore_ingest(const std::string& scenario_dir, const std::string& out) {
    auto sc = load_scenario(scenario_dir);
    std::map<std::string, int> per_stage;
    for (const auto& c : sc.lore.chunks()) ++per_stage[std::string(to_string(c.stage))];
    for (auto s : kLoreStages) std::cout << to_string(s) << "\t" << per_stage[std::string(to_string(s))] << " chunk(s)\n";
    std::cout << sc.lore.chunks().size() << " chunks, avgdl " << format_number(sc.lore.stats().avgdl()) << "\n";
    if (!out.empty()) {
        std::vector<LoreDocument> docs;
        for (const auto& c : sc.lore.chunks()) docs.push_back({c.stage, c.source, c.text});
        write_file_atomic(out, index_cache_json(sc.lore, corpus_hash(docs)).dump(2));
    }
    return 0;
}

int run_lore_chain(const std::string& templates_dir, const std::string& out_dir, const BackendOptions& bo) {
    std::vector<StageTemplate> templates;
    for (auto s : kLoreStages) {
        auto p = fs::path(templates_dir) / (std::string(to_string(s)) + ".txt");
        if (!fs::exists(p)) throw MissingStage("chain template missing: " + p.string());
        templates.push_back({s, read_text_file(p)});
    }
    fs::create_directories(out_dir);
    auto gateway = make_gateway(bo);
    try {
        auto docs = run_lore_chain(templates, *gateway, {}, fs::path(out_dir));
        std::cout << docs.size() << " stage(s) written to " << out_dir << "\n";
        return 0;
    } catch (const LoreChainError& e) {
        std::cerr << e.what() << " (" << e.completed().size() << " stage(s) kept)\n";
        return 2;
    }
}

// CSV rows: metric,a,b (header optional). Each row is one paired observation.
int run_stats(const std::string& csv) {
    std::ifstream in(csv);
    if (!in) throw Error("cannot open " + csv);
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> data;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (cols.size() != 3) throw Error(csv + ":" + std::to_string(lineno) + ": expected metric,a,b");
        char* end = nullptr;
        double a = std::strtod(cols[1].c_str(), &end);
        if (end == cols[1].c_str()) {
            if (lineno == 1) continue;
            throw Error(csv + ":" + std::to_string(lineno) + ": not a number: " + cols[1]);
        }
        double b = std::strtod(cols[2].c_str(), &end);
        if (end == cols[2].c_str()) throw Error(csv + ":" + std::to_string(lineno) + ": not a number: " + cols[2]);
        if (!data.count(cols[0])) order.push_back(cols[0]);
        data[cols[0]].first.push_back(a);
        data[cols[0]].second.push_back(b);
    }
    std::vector<double> wp;
    std::vector<std::string> lines;
    for (const auto& m : order) {
        const auto& [a, b] = data[m];
        std::vector<double> d;
        for (std::size_t i = 0; i < a.size(); ++i) d.push_back(a[i] - b[i]);
        std::ostringstream row;
        row << m << "\tn=" << a.size() << "\tmean_a=" << format_number(stats::mean(a))
            << "\tmean_b=" << format_number(stats::mean(b)) << "\tdelta=" << format_number(stats::cliffs_delta(a, b));
        double p = 1.0;
        try {
            auto w = stats::wilcoxon_signed_rank(d);
            p = w.p_value;
            row << "\tW=" << format_number(w.statistic) << "\tp_W=" << format_number(w.p_value)
                << (w.exact ? " (exact)" : " (normal)");
        } catch (const AllZeroDifferences&) {
            row << "\tW=n/a (all differences zero)";
        }
        try {
            auto t = stats::paired_t(d);
            row << "\tt=" << format_number(t.t) << "\tp_t=" << format_number(t.p_value);
        } catch (const Error& e) {
            row << "\tt=n/a (" << e.what() << ")";
        }
        wp.push_back(p);
        lines.push_back(row.str());
    }
    auto adj = stats::holm_bonferroni(wp);
    for (std::size_t i = 0; i < lines.size(); ++i) std::cout << lines[i] << "\tp_W_holm=" << format_number(adj[i]) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Role-sensitive NPC dialogue engine"};
    app.require_subcommand(1);

    std::string scenario_dir;
    auto* validate = app.add_subcommand("validate", "Check a scenario bundle");
    validate->add_option("scenario", scenario_dir, "scenario directory or manifest")->required();

    BackendOptions play_bo;
    std::string condition = "HCP", play_store;
    auto* play = app.add_subcommand("play", "Text REPL against a scenario");
    play->add_option("scenario", scenario_dir)->required();
    play->add_option("--condition", condition, "HCP, LCP or JSONRAG")->capture_default_str();
    play->add_option("--store", play_store, "snapshot directory");
    add_backend_options(play, play_bo);

    BackendOptions serve_bo;
    std::vector<std::string> serve_scenarios;
    std::string host = "127.0.0.1", serve_store;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "HTTP API");
    serve->add_option("scenarios", serve_scenarios, "scenario directories")->required();
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--store", serve_store, "snapshot directory");
    add_backend_options(serve, serve_bo);

    auto* eval = app.add_subcommand("eval", "Synthetic evaluation");
    eval->require_subcommand(1);
    BackendOptions eval_bo;
    std::string protocol_file, out_file, raw_file;
    std::optional<std::uint64_t> seed;
    auto* eval_run = eval->add_subcommand("run", "Run the judge protocol");
    eval_run->add_option("--protocol", protocol_file)->required();
    eval_run->add_option("--scenario", scenario_dir)->required();
    eval_run->add_option("--seed", seed, "overrides the protocol seed");
    eval_run->add_option("--out", out_file, "report JSON");
    eval_run->add_option("--raw", raw_file, "raw scores JSON");
    add_backend_options(eval_run, eval_bo);

    auto* lore = app.add_subcommand("lore", "Lore corpus tools");
    lore->require_subcommand(1);
    std::string cache_out, templates_dir, chain_out;
    auto* ingest = lore->add_subcommand("ingest", "Chunk and index a scenario's lore");
    ingest->add_option("scenario", scenario_dir)->required();
    ingest->add_option("--out", cache_out, "index cache JSON");
    BackendOptions chain_bo;
    auto* chain = lore->add_subcommand("chain", "Generate the seven lore stages");
    chain->add_option("--templates", templates_dir, "directory with <stage>.txt prompt templates")->required();
    chain->add_option("--out", chain_out, "output directory")->required();
    add_backend_options(chain, chain_bo);

    std::string csv;
    auto* st = app.add_subcommand("stats", "Paired tests on metric,a,b CSV data");
    st->add_option("csv", csv)->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) {
            auto sc = load_scenario(scenario_dir);
            return print_report(validate_scenario(sc));
        }
        if (*play) return run_play(scenario_dir, condition, play_bo, play_store);
        if (*serve) return run_serve(serve_scenarios, host, port, serve_bo, serve_store);
        if (*eval_run) return run_eval_cmd(protocol_file, scenario_dir, eval_bo, seed, out_file, raw_file);
        if (*ingest) return run_lore_ingest(scenario_dir, cache_out);
        if (*chain) return run_lore_chain(templates_dir, chain_out, chain_bo);
        if (*st) return run_stats(csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

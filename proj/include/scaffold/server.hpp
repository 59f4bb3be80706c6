#pragma once

// HTTP API over a SessionService.
//
//   POST /sessions                      {scenario, condition} -> {session_id}
//   POST /sessions/{id}/turns           {role, utterance}     -> {reply, segments, delta, state}
//   POST /sessions/{id}/turns/stream    same body; text/event-stream of
//                                       `segment` events then `done` (or `error`)
//   GET  /sessions/{id}/state
//   POST /sessions/{id}/evidence        {id}
//   POST /sessions/{id}/conclude

#include <memory>
#include <string>

#include <httplib.h>

#include "scaffold/errors.hpp"
#include "scaffold/json_io.hpp"
#include "scaffold/session.hpp"

namespace scaffold {

inline int http_status_for(const std::exception& e) {
    if (dynamic_cast<const UnknownSession*>(&e)) return 404;
    if (dynamic_cast<const TurnInFlight*>(&e) || dynamic_cast<const PhaseError*>(&e)) return 409;
    if (dynamic_cast<const GatewayTimeout*>(&e)) return 504;
    if (dynamic_cast<const GatewayError*>(&e)) return 502;
    if (dynamic_cast<const UnknownEvidence*>(&e) || dynamic_cast<const UnknownRole*>(&e) ||
        dynamic_cast<const ScenarioInvalid*>(&e) || dynamic_cast<const SchemaError*>(&e) ||
        dynamic_cast<const SyntaxError*>(&e) || dynamic_cast<const Json::exception*>(&e))
        return 400;
    if (dynamic_cast<const BudgetExceeded*>(&e)) return 422;
    return 500;
}

inline std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const UnknownSession*>(&e)) return "UnknownSession";
    if (dynamic_cast<const TurnInFlight*>(&e)) return "TurnInFlight";
    if (dynamic_cast<const PhaseError*>(&e)) return "PhaseError";
    if (dynamic_cast<const GatewayTimeout*>(&e)) return "GatewayTimeout";
    if (dynamic_cast<const FixtureMissing*>(&e)) return "FixtureMissing";
    if (dynamic_cast<const GatewayError*>(&e)) return "GatewayError";
    if (dynamic_cast<const UnknownEvidence*>(&e)) return "UnknownEvidence";
    if (dynamic_cast<const UnknownRole*>(&e)) return "UnknownRole";
    if (dynamic_cast<const ScenarioInvalid*>(&e)) return "ScenarioInvalid";
    if (dynamic_cast<const BudgetExceeded*>(&e)) return "BudgetExceeded";
    return "Error";
}

inline Json error_json(const std::exception& e) { return Json{{"error", error_kind(e)}, {"message", e.what()}}; }

// State view plus the scenario's evidence list with registration flags.
inline Json state_view(const SessionService& svc, const SessionState& st) {
    auto j = to_json(st);
    auto sc = svc.scenario(st.scenario);
    Json ev = Json::array();
    for (const auto& e : sc->evidence) {
        bool reg = std::find(st.memory.recent_evidence.begin(), st.memory.recent_evidence.end(), e.id) !=
                   st.memory.recent_evidence.end();
        ev.push_back({{"id", e.id}, {"label", e.label}, {"registered", reg}});
    }
    j["evidence"] = ev;
    Json npcs = Json::array();
    for (const auto& n : sc->npcs) npcs.push_back({{"id", n.id}, {"name", n.name}, {"scaffold", n.scaffold_role}});
    j["npcs"] = npcs;
    return j;
}

namespace detail {

inline Json request_body(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    auto j = parse_json(req.body, "request body");
    if (!j.is_object()) throw SchemaError("request body must be a JSON object");
    return j;
}

inline std::string body_string(const Json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) throw SchemaError(std::string("missing string field '") + key + "'");
    return j.at(key).get<std::string>();
}

inline void reply_json(httplib::Response& res, const Json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        reply_json(res, error_json(e), http_status_for(e));
    }
}

inline std::string sse_event(std::string_view event, const Json& data) {
    return "event: " + std::string(event) + "\ndata: " + data.dump() + "\n\n";
}

}  // namespace detail

inline void install_routes(httplib::Server& server, std::shared_ptr<SessionService> svc) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", [svc](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            auto body = detail::request_body(req);
            auto id = svc->create_session(body.value("scenario", ""), body.value("condition", "HCP"));
            detail::reply_json(res, Json{{"session_id", id}}, 201);
        });
    });

    server.Get(R"(/sessions/([^/]+)/state)", [svc](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            std::string id = req.matches[1];
            Json opening_error;
            try {
                svc->ensure_opening(id);
            } catch (const TurnInFlight&) {
            } catch (const GatewayError& e) {
                opening_error = error_json(e);
            }
            auto j = state_view(*svc, svc->get_state(id));
            if (!opening_error.is_null()) j["opening_error"] = opening_error;
            detail::reply_json(res, j);
        });
    });

    server.Post(R"(/sessions/([^/]+)/turns)", [svc](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            std::string id = req.matches[1];
            auto body = detail::request_body(req);
            auto out = svc->post_turn(id, detail::body_string(body, "role"), detail::body_string(body, "utterance"));
            detail::reply_json(res, Json{{"reply", out.reply},
                                         {"segments", out.segments},
                                         {"delta", to_json(out.delta)},
                                         {"query", out.query},
                                         {"state", state_view(*svc, svc->get_state(id))}});
        });
    });

    server.Post(R"(/sessions/([^/]+)/turns/stream)", [svc](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            std::string id = req.matches[1];
            auto body = detail::request_body(req);
            auto role = detail::body_string(body, "role");
            auto utterance = detail::body_string(body, "utterance");
            svc->get_state(id);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream", [svc, id, role, utterance](std::size_t, httplib::DataSink& sink) {
                    auto send = [&](std::string_view event, const Json& data) {
                        auto s = detail::sse_event(event, data);
                        sink.write(s.data(), s.size());
                    };
                    try {
                        auto out = svc->post_turn(id, role, utterance,
                                                  [&](const std::string& seg) { send("segment", Json{{"text", seg}}); });
                        send("done", Json{{"reply", out.reply},
                                          {"delta", to_json(out.delta)},
                                          {"state", state_view(*svc, svc->get_state(id))}});
                    } catch (const std::exception& e) {
                        auto j = error_json(e);
                        j["status"] = http_status_for(e);
                        send("error", j);
                    }
                    sink.done();
                    return true;
                });
        });
    });

    server.Post(R"(/sessions/([^/]+)/evidence)", [svc](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            std::string id = req.matches[1];
            auto body = detail::request_body(req);
            auto st = svc->register_evidence(id, detail::body_string(body, "id"));
            detail::reply_json(res, state_view(*svc, st));
        });
    });

    server.Post(R"(/sessions/([^/]+)/conclude)", [svc](const httplib::Request& req, httplib::Response& res) {
        detail::guarded(res, [&] {
            std::string id = req.matches[1];
            detail::reply_json(res, state_view(*svc, svc->conclude(id)));
        });
    });
}

}  // namespace scaffold

#pragma once

// OpenAI-compatible chat-completions backend over cpp-httplib.
// Build with CPPHTTPLIB_OPENSSL_SUPPORT for https endpoints.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <httplib.h>

#include "scaffold/errors.hpp"
#include "scaffold/gateway.hpp"
#include "scaffold/json_io.hpp"

namespace scaffold {

struct HttpBackendConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string model = "gpt-4o";
    std::chrono::milliseconds timeout{30000};
};

// {"base_url": ..., "path": ..., "api_key_env": ..., "model": ..., "timeout_ms": ...}
inline HttpBackendConfig load_backend_config(const std::filesystem::path& file) {
    auto j = parse_json(read_text_file(file), file.string());
    HttpBackendConfig c;
    c.base_url = j.value("base_url", c.base_url);
    c.path = j.value("path", c.path);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.model = j.value("model", c.model);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<std::int64_t>(c.timeout.count())));
    return c;
}

inline Json chat_request_body(const std::vector<ChatMessage>& messages, const GenerationConfig& config, bool stream) {
    Json msgs = Json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    Json body{{"model", config.model},
              {"messages", msgs},
              {"temperature", config.temperature},
              {"max_tokens", config.max_tokens},
              {"stream", stream}};
    if (config.seed) body["seed"] = *config.seed;
    return body;
}

// Incremental parser for `data: {...}` server-sent events.
class SseDecoder {
public:
    // Returns the content deltas completed by this chunk.
    std::vector<std::string> push(std::string_view chunk) {
        buffer_ += chunk;
        std::vector<std::string> out;
        std::size_t nl;
        while ((nl = buffer_.find('\n')) != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.starts_with("data:")) continue;
            std::string data = line.substr(5);
            if (!data.empty() && data.front() == ' ') data.erase(0, 1);
            if (data == "[DONE]") {
                done_ = true;
                continue;
            }
            auto j = Json::parse(data, nullptr, false);
            if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) continue;
            const auto& choice = j["choices"][0];
            if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
                finish_reason_ = choice["finish_reason"].get<std::string>();
            if (choice.contains("delta") && choice["delta"].contains("content") && choice["delta"]["content"].is_string())
                out.push_back(choice["delta"]["content"].get<std::string>());
        }
        return out;
    }

    bool done() const { return done_; }
    const std::string& finish_reason() const { return finish_reason_; }

private:
    std::string buffer_;
    bool done_ = false;
    std::string finish_reason_ = "stop";
};

class OpenAiBackend : public Backend {
public:
    explicit OpenAiBackend(HttpBackendConfig config) : config_(std::move(config)) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (!key || !*key) throw GatewayRejected("environment variable " + config_.api_key_env + " is not set", 401);
        api_key_ = key;
    }

    std::string name() const override { return "openai"; }

    Completion generate(const std::vector<ChatMessage>& messages, const GenerationConfig& config) override {
        auto start = std::chrono::steady_clock::now();
        auto cli = client(config);
        auto res = cli.Post(config_.path, headers(), chat_request_body(messages, config, false).dump(), "application/json");
        check(res);
        auto j = Json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
            throw TransientFailure("malformed completion response");
        Completion c;
        const auto& choice = j["choices"][0];
        c.text = choice["message"].value("content", "");
        c.finish_reason = choice.value("finish_reason", "stop");
        c.backend = name();
        if (j.contains("usage"))
            c.usage = Usage{j["usage"].value("prompt_tokens", std::int64_t{0}),
                            j["usage"].value("completion_tokens", std::int64_t{0})};
        c.latency_ms = elapsed_ms(start);
        return c;
    }

    Completion generate_stream(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                               const FragmentSink& sink) override {
        auto start = std::chrono::steady_clock::now();
        auto cli = client(config);
        SseDecoder sse;
        Completion c;
        c.backend = name();
        int status = 0;
        std::string error_body;
        httplib::Request req;
        req.method = "POST";
        req.path = config_.path;
        req.headers = headers();
        req.set_header("Accept", "text/event-stream");
        req.body = chat_request_body(messages, config, true).dump();
        req.set_header("Content-Type", "application/json");
        req.response_handler = [&](const httplib::Response& r) {
            status = r.status;
            return true;
        };
        req.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
            if (status != 200) {
                error_body.append(data, len);
                return true;
            }
            for (auto& piece : sse.push(std::string_view(data, len))) {
                c.text += piece;
                sink(piece);
            }
            return true;
        };
        auto res = cli.send(req);
        if (!res) throw TransientFailure("connection failed: " + httplib::to_string(res.error()));
        classify(status, error_body);
        c.finish_reason = sse.finish_reason();
        c.latency_ms = elapsed_ms(start);
        return c;
    }

private:
    httplib::Client client(const GenerationConfig& config) const {
        httplib::Client cli(config_.base_url);
        auto t = config.timeout.count() > 0 ? config.timeout : config_.timeout;
        auto sec = std::chrono::duration_cast<std::chrono::seconds>(t);
        auto usec = std::chrono::duration_cast<std::chrono::microseconds>(t - sec);
        cli.set_connection_timeout(sec.count(), usec.count());
        cli.set_read_timeout(sec.count(), usec.count());
        cli.set_write_timeout(sec.count(), usec.count());
        return cli;
    }

    httplib::Headers headers() const { return {{"Authorization", "Bearer " + api_key_}}; }

    static void classify(int status, const std::string& body) {
        if (status == 200) return;
        if (status == 429 || status >= 500) throw TransientFailure("HTTP " + std::to_string(status) + ": " + body);
        throw GatewayRejected("HTTP " + std::to_string(status) + ": " + body, status);
    }

    static void check(const httplib::Result& res) {
        if (!res) throw TransientFailure("connection failed: " + httplib::to_string(res.error()));
        classify(res->status, res->body);
    }

    static double elapsed_ms(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }

    HttpBackendConfig config_;
    std::string api_key_;
};

}  // namespace scaffold

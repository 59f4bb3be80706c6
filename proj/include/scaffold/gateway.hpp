#pragma once

// Chat-completion gateway: a backend interface with retry/backoff on top,
// a fixture-backed record/replay backend for deterministic runs, and the
// streaming sentence segmenter.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <cctype>
#include <vector>

#include <openssl/evp.h>

#include "scaffold/errors.hpp"
#include "scaffold/json_io.hpp"
#include "scaffold/text.hpp"

namespace scaffold {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct GenerationConfig {
    std::string model = "gpt-4o";
    double temperature = 0.0;
    int max_tokens = 400;
    std::optional<std::int64_t> seed;
    std::chrono::milliseconds timeout{30000};
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct Completion {
    std::string text;
    std::string finish_reason = "stop";
    double latency_ms = 0.0;
    std::string backend;
    std::optional<Usage> usage;
};

using FragmentSink = std::function<void(std::string_view)>;

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual Completion generate(const std::vector<ChatMessage>& messages, const GenerationConfig& config) = 0;

    // Backends without native streaming deliver the whole text as one fragment.
    virtual Completion generate_stream(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                                       const FragmentSink& sink) {
        auto c = generate(messages, config);
        if (!c.text.empty()) sink(c.text);
        return c;
    }
};

// Backend around a plain function; used for offline generators and mocks.
class CallbackBackend : public Backend {
public:
    using Fn = std::function<std::string(const std::vector<ChatMessage>&, const GenerationConfig&)>;

    CallbackBackend(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

    std::string name() const override { return name_; }
    Completion generate(const std::vector<ChatMessage>& messages, const GenerationConfig& config) override {
        Completion c;
        c.text = fn_(messages, config);
        c.backend = name_;
        return c;
    }

private:
    std::string name_;
    Fn fn_;
};

// ---- retries ---------------------------------------------------------------

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds base_delay{250};
};

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit Gateway(std::shared_ptr<Backend> backend, RetryPolicy policy = {}, Sleeper sleeper = {})
        : backend_(std::move(backend)), policy_(policy), sleeper_(std::move(sleeper)) {
        if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }

    Backend& backend() const { return *backend_; }

    Completion complete(const std::vector<ChatMessage>& messages, const GenerationConfig& config) const {
        return with_retries([&](bool&) { return backend_->generate(messages, config); });
    }

    // A failure after the first fragment was delivered is not retried.
    Completion complete_stream(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                               const FragmentSink& sink) const {
        return with_retries([&](bool& delivered) {
            return backend_->generate_stream(messages, config, [&](std::string_view f) {
                delivered = true;
                sink(f);
            });
        });
    }

private:
    template <typename F>
    Completion with_retries(F&& attempt) const {
        std::string last;
        for (int i = 0; i <= policy_.max_retries; ++i) {
            bool delivered = false;
            try {
                return attempt(delivered);
            } catch (const TransientFailure& e) {
                last = e.what();
                if (delivered) throw GatewayTimeout("stream interrupted: " + last);
            }
            if (i < policy_.max_retries) sleeper_(policy_.base_delay * (1 << i));
        }
        throw GatewayTimeout("gateway gave up after " + std::to_string(policy_.max_retries + 1) +
                             " attempts: " + last);
    }

    std::shared_ptr<Backend> backend_;
    RetryPolicy policy_;
    Sleeper sleeper_;
};

// ---- record / replay -------------------------------------------------------

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

// Stable key over everything that can change the output; the timeout is
// excluded.
inline std::string fixture_key(const std::vector<ChatMessage>& messages, const GenerationConfig& config) {
    Json msgs = Json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    Json j{{"messages", msgs},
           {"model", config.model},
           {"temperature", config.temperature},
           {"max_tokens", config.max_tokens},
           {"seed", config.seed ? Json(*config.seed) : Json(nullptr)}};
    return sha256_hex(j.dump());
}

enum class FixtureMode { Replay, Record };

// One JSON file per fixture key under a directory.
class ReplayBackend : public Backend {
public:
    ReplayBackend(std::filesystem::path dir, FixtureMode mode = FixtureMode::Replay,
                  std::shared_ptr<Backend> inner = nullptr)
        : dir_(std::move(dir)), mode_(mode), inner_(std::move(inner)) {
        if (mode_ == FixtureMode::Record && !inner_) throw Error("record mode needs an inner backend");
    }

    std::string name() const override { return "replay"; }

    std::filesystem::path fixture_path(const std::string& key) const { return dir_ / (key + ".json"); }

    Completion generate(const std::vector<ChatMessage>& messages, const GenerationConfig& config) override {
        auto key = fixture_key(messages, config);
        if (auto hit = load(key)) return *hit;
        if (mode_ == FixtureMode::Replay) throw FixtureMissing("no fixture for key " + key);
        auto c = inner_->generate(messages, config);
        store(key, c);
        return c;
    }

    // Replayed text is streamed word by word so segmentation sees realistic
    // fragment boundaries.
    Completion generate_stream(const std::vector<ChatMessage>& messages, const GenerationConfig& config,
                               const FragmentSink& sink) override {
        auto key = fixture_key(messages, config);
        auto hit = load(key);
        if (!hit) {
            if (mode_ == FixtureMode::Replay) throw FixtureMissing("no fixture for key " + key);
            auto c = inner_->generate_stream(messages, config, sink);
            store(key, c);
            return c;
        }
        const auto& text = hit->text;
        std::size_t start = 0;
        for (std::size_t i = 1; i <= text.size(); ++i) {
            if (i == text.size() || text[i] == ' ') {
                sink(std::string_view(text).substr(start, i - start));
                start = i;
            }
        }
        return *hit;
    }

    std::size_t hits() const {
        std::lock_guard lock(mu_);
        return hits_;
    }
    std::size_t recorded() const {
        std::lock_guard lock(mu_);
        return recorded_;
    }

private:
    std::optional<Completion> load(const std::string& key) const {
        std::lock_guard lock(mu_);
        auto p = fixture_path(key);
        if (!std::filesystem::exists(p)) return std::nullopt;
        auto j = parse_json(read_text_file(p), p.string());
        Completion c;
        c.text = j.at("text").get<std::string>();
        c.finish_reason = j.value("finish_reason", "stop");
        c.backend = "replay";
        c.latency_ms = 0.0;
        ++hits_;
        return c;
    }

    void store(const std::string& key, const Completion& c) {
        std::lock_guard lock(mu_);
        Json j{{"key", key}, {"text", c.text}, {"finish_reason", c.finish_reason}, {"backend", c.backend}};
        write_file_atomic(fixture_path(key), j.dump(2));
        ++recorded_;
    }

    std::filesystem::path dir_;
    FixtureMode mode_;
    std::shared_ptr<Backend> inner_;
    mutable std::mutex mu_;
    mutable std::size_t hits_ = 0;
    std::size_t recorded_ = 0;
};

// ---- sentence segmentation -------------------------------------------------

// Emits a segment at every . ! ? followed by whitespace; whitespace after the
// terminator starts the next segment. The concatenation of all segments is
// exactly the concatenation of all pushed fragments.
class SentenceSegmenter {
public:
    std::vector<std::string> push(std::string_view fragment) {
        buffer_ += fragment;
        std::vector<std::string> out;
        std::size_t start = 0;
        for (std::size_t i = scan_from_; i + 1 < buffer_.size(); ++i) {
            if (is_sentence_terminator(buffer_[i]) && std::isspace(static_cast<unsigned char>(buffer_[i + 1]))) {
                out.push_back(buffer_.substr(start, i + 1 - start));
                start = i + 1;
            }
        }
        buffer_.erase(0, start);
        // The last byte cannot be judged until the next fragment arrives.
        scan_from_ = buffer_.empty() ? 0 : buffer_.size() - 1;
        return out;
    }

    std::optional<std::string> flush() {
        scan_from_ = 0;
        if (buffer_.empty()) return std::nullopt;
        return std::exchange(buffer_, {});
    }

private:
    std::string buffer_;
    std::size_t scan_from_ = 0;
};

inline std::vector<std::string> segment_sentences(const std::vector<std::string>& fragments) {
    SentenceSegmenter seg;
    std::vector<std::string> out;
    for (const auto& f : fragments)
        for (auto& s : seg.push(f)) out.push_back(std::move(s));
    if (auto rest = seg.flush()) out.push_back(std::move(*rest));
    return out;
}

}  // namespace scaffold

#pragma once

// Offline stand-ins for the live model: a deterministic NPC generator and an
// anchored-rubric judge. They answer every request kind the engine issues
// (NPC replies, query rewrites, lore chain stages, judge verdicts,
// contradiction checks) so complete runs can be recorded without network
// access.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "scaffold/gateway.hpp"
#include "scaffold/json_io.hpp"
#include "scaffold/lore.hpp"
#include "scaffold/text.hpp"

namespace scaffold {

namespace detail {

inline std::uint64_t stable_hash(std::string_view s) {
    auto hex = sha256_hex(s).substr(0, 16);
    return std::stoull(hex, nullptr, 16);
}

inline std::set<std::string> token_set(std::string_view s) {
    auto t = tokenize(s);
    return {t.begin(), t.end()};
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& x : a) common += b.count(x);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

// Words that carry checkable facts: anything with a digit, and capitalized
// words that do not open a sentence.
inline std::vector<std::string> fact_tokens(std::string_view text) {
    std::vector<std::string> out;
    bool sentence_start = true;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) {
            if (is_sentence_terminator(text[i]) || text[i] == '"' || text[i] == ':') sentence_start = true;
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '\'')) ++j;
        if (j == i) break;
        std::string word(text.substr(i, j - i));
        bool digit = std::any_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c); });
        bool capital = std::isupper(static_cast<unsigned char>(word[0])) && word.size() > 1;
        if (digit || (capital && !sentence_start)) out.push_back(normalize_text(word));
        sentence_start = false;
        i = j;
    }
    return out;
}

inline std::vector<std::string> context_sections(std::string_view system, std::initializer_list<std::string_view> labels) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = system.find("\n### ", pos)) != std::string_view::npos) {
        auto eol = system.find('\n', pos + 5);
        if (eol == std::string_view::npos) break;
        auto label = system.substr(pos + 5, eol - pos - 5);
        auto next = system.find("\n### ", eol);
        auto body = system.substr(eol + 1, next == std::string_view::npos ? std::string_view::npos : next - eol - 1);
        for (auto l : labels)
            if (label.starts_with(l)) out.emplace_back(body);
        pos = eol;
    }
    return out;
}

}  // namespace detail

// ---- judge -----------------------------------------------------------------

struct SyntheticVerdict {
    int variation = 1;
    int relevance = 1;
    int hallucination = 4;
};

// Anchors mirror the shipped rubric: identical pairs score variation 1; every
// unsupported fact (name or number absent from prompt and context) costs one
// hallucination point.
inline SyntheticVerdict synthetic_judgement(std::string_view response, std::string_view sibling, std::string_view prompt,
                                            std::string_view context) {
    SyntheticVerdict v;
    auto r = detail::token_set(response);
    double sim = detail::jaccard(r, detail::token_set(sibling));
    v.variation = sim >= 1.0 ? 1 : sim >= 0.7 ? 2 : sim >= 0.4 ? 3 : 4;

    std::string grounding = std::string(prompt) + " " + std::string(context);
    auto g = detail::token_set(grounding);
    std::size_t content = 0, supported = 0;
    for (const auto& t : r) {
        if (t.size() < 4) continue;
        ++content;
        supported += g.count(t);
    }
    double fit = content == 0 ? 0.0 : static_cast<double>(supported) / static_cast<double>(content);
    v.relevance = fit >= 0.6 ? 4 : fit >= 0.4 ? 3 : fit >= 0.2 ? 2 : 1;

    std::set<std::string> novel;
    for (const auto& f : detail::fact_tokens(response))
        if (!g.count(f)) novel.insert(f);
    v.hallucination = std::max(1, 4 - static_cast<int>(novel.size()));
    return v;
}

// ---- generator -------------------------------------------------------------

inline constexpr std::array<std::string_view, 6> kSyntheticOpeners = {
    "Look,", "Honestly,", "Right.", "Fine.", "As I said,", "Listen,"};

inline constexpr std::array<std::string_view, 3> kSyntheticHedges = {
    "I don't see why that matters.", "That's all I remember.", "You'd have to ask someone else."};

// Deterministic reply: an opener chosen by hash, the context sentence that
// best overlaps the user's words (hash breaks ties), and a hedge when the
// prompt reports high evasiveness. Seeds perturb every choice.
inline std::string synthetic_reply(const std::vector<ChatMessage>& messages, const GenerationConfig& config) {
    const std::string& system = messages.front().content;
    const std::string& user = messages.back().content;
    std::string salt = std::to_string(config.seed.value_or(0)) + "|" + user;
    auto h = detail::stable_hash(salt + "|" + system);

    std::vector<std::string> sentences;
    for (const auto& body : detail::context_sections(system, {"Case lore", "Retrieved"}))
        for (auto& s : split_sentences(body))
            if (!s.starts_with("[")) sentences.push_back(std::move(s));

    auto want = detail::token_set(user);
    std::string best;
    std::size_t best_score = 0;
    std::uint64_t best_tie = 0;
    for (const auto& s : sentences) {
        std::size_t score = 0;
        for (const auto& t : detail::token_set(s))
            if (t.size() >= 4 && want.count(t)) ++score;
        auto tie = detail::stable_hash(salt + "|" + s);
        if (best.empty() || score > best_score || (score == best_score && tie < best_tie)) {
            best = s;
            best_score = score;
            best_tie = tie;
        }
    }

    std::string out(kSyntheticOpeners[h % kSyntheticOpeners.size()]);
    out += " " + (best.empty() ? std::string("I have nothing to add to that.") : best);
    auto pos = system.find("- evasiveness: ");
    if (pos != std::string::npos) {
        double e = std::strtod(system.c_str() + pos + 15, nullptr);
        if (e >= 0.5) out += " " + std::string(kSyntheticHedges[(h >> 8) % kSyntheticHedges.size()]);
    }
    return out;
}

inline std::string synthetic_rewrite(const std::vector<ChatMessage>& messages) {
    const std::string& user = messages.back().content;
    auto marker = user.rfind("Last message: ");
    std::string last = marker == std::string::npos ? user : user.substr(marker + 14);
    std::string convo = marker == std::string::npos ? "" : user.substr(0, marker);
    std::vector<std::string> names;
    for (const auto& f : detail::fact_tokens(convo))
        if (std::find(names.begin(), names.end(), f) == names.end()) names.push_back(f);
    if (names.size() > 4) names.erase(names.begin(), names.end() - 4);
    return names.empty() ? last : last + " " + join(names, " ");
}

// Dispatches on the request shape.
inline std::string synthetic_respond(const std::vector<ChatMessage>& messages, const GenerationConfig& config) {
    if (messages.empty()) return "";
    const std::string& system = messages.front().content;
    const std::string& user = messages.back().content;
    if (system == kRewriteInstruction) return synthetic_rewrite(messages);
    if (system == kLoreChainSystem) {
        auto words = split_sentences(user);
        return "Stage notes. " + (words.empty() ? std::string() : words.front());
    }
    if (system.starts_with("You check statements against case facts")) return "NO";
    if (user.starts_with("{")) {
        try {
            auto j = Json::parse(user);
            if (j.contains("response") && j.contains("sibling")) {
                auto v = synthetic_judgement(j.at("response").get<std::string>(), j.at("sibling").get<std::string>(),
                                             j.value("prompt", ""), j.value("context", ""));
                return Json{{"variation", v.variation}, {"relevance", v.relevance}, {"hallucination", v.hallucination}}
                    .dump();
            }
        } catch (const Json::exception&) {
        }
    }
    return synthetic_reply(messages, config);
}

inline std::shared_ptr<Backend> make_synthetic_backend() {
    return std::make_shared<CallbackBackend>("synthetic", synthetic_respond);
}

}  // namespace scaffold

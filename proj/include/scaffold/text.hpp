#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace scaffold {

namespace detail {

inline bool is_word_byte(unsigned char c) {
    // Bytes >= 0x80 belong to UTF-8 sequences; treat them as letters so
    // non-ASCII words survive tokenization intact.
    return std::isalnum(c) || c >= 0x80;
}

}  // namespace detail

// Lowercase, drop punctuation, collapse whitespace, trim. Used on both sides
// of keyword matching.
inline std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (!detail::is_word_byte(c)) continue;
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// Lowercased word tokens split at every non-word byte; no stemming.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (detail::is_word_byte(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline bool is_sentence_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

// Sentences end at . ! ? followed by whitespace or end of text. Returned
// sentences are trimmed; empty ones are skipped.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    auto push_trimmed = [&](std::string_view s) {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string_view::npos) return;
        auto e = s.find_last_not_of(" \t\r\n");
        out.emplace_back(s.substr(b, e - b + 1));
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!is_sentence_terminator(text[i])) continue;
        bool at_end = i + 1 == text.size();
        if (at_end || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
            push_trimmed(text.substr(start, i + 1 - start));
            start = i + 1;
        }
    }
    if (start < text.size()) push_trimmed(text.substr(start));
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace scaffold

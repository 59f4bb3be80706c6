#pragma once

// Lore corpus: sentence-aware chunking, BM25 retrieval over lore chunks and
// dialogue history, gateway-backed query rewriting, and the staged lore
// generation chain.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scaffold/errors.hpp"
#include "scaffold/gateway.hpp"
#include "scaffold/json_io.hpp"
#include "scaffold/text.hpp"

namespace scaffold {

enum class LoreStage { Rules, Crime, Organization, Psychology, Perception, Timeline, Report };

inline constexpr std::array<LoreStage, 7> kLoreStages = {LoreStage::Rules,      LoreStage::Crime,
                                                         LoreStage::Organization, LoreStage::Psychology,
                                                         LoreStage::Perception, LoreStage::Timeline,
                                                         LoreStage::Report};

inline std::string_view to_string(LoreStage s) {
    switch (s) {
        case LoreStage::Rules: return "rules";
        case LoreStage::Crime: return "crime";
        case LoreStage::Organization: return "organization";
        case LoreStage::Psychology: return "psychology";
        case LoreStage::Perception: return "perception";
        case LoreStage::Timeline: return "timeline";
        case LoreStage::Report: return "report";
    }
    return "?";
}

inline std::optional<LoreStage> parse_stage(std::string_view name) {
    for (auto s : kLoreStages)
        if (to_string(s) == name) return s;
    return std::nullopt;
}

struct LoreDocument {
    LoreStage stage = LoreStage::Rules;
    std::string source;
    std::string text;
};

struct LoreChunk {
    std::string id;
    LoreStage stage = LoreStage::Rules;
    std::string text;
    std::string source;
    std::size_t offset = 0;  // byte offset of the chunk's first sentence in the source

    bool operator==(const LoreChunk&) const = default;
};

struct ChunkingConfig {
    std::size_t target_chars = 400;
    std::size_t overlap_sentences = 1;
};

// ---- chunking --------------------------------------------------------------

namespace detail {

struct Sentence {
    std::string text;
    std::size_t offset;
};

inline std::vector<Sentence> locate_sentences(std::string_view text) {
    std::vector<Sentence> out;
    std::size_t cursor = 0;
    for (auto& s : split_sentences(text)) {
        auto at = text.find(s, cursor);
        if (at == std::string_view::npos) at = cursor;
        cursor = at + s.size();
        out.push_back({std::move(s), at});
    }
    return out;
}

// Breaks a sentence longer than the target at spaces (hard cut if none).
inline std::vector<Sentence> split_long(const Sentence& s, std::size_t target) {
    std::vector<Sentence> out;
    std::string_view rest = s.text;
    std::size_t off = s.offset;
    while (rest.size() > target) {
        auto cut = rest.rfind(' ', target);
        if (cut == std::string_view::npos || cut == 0) cut = target;
        out.push_back({std::string(rest.substr(0, cut)), off});
        auto skip = cut < rest.size() && rest[cut] == ' ' ? cut + 1 : cut;
        rest.remove_prefix(skip);
        off += skip;
    }
    if (!rest.empty()) out.push_back({std::string(rest), off});
    return out;
}

}  // namespace detail

// Greedy packing of whole sentences up to target_chars; each chunk after the
// first repeats the previous chunk's last sentence when it still fits.
inline std::vector<LoreChunk> chunk_document(const LoreDocument& doc, const ChunkingConfig& cfg = {}) {
    std::vector<detail::Sentence> sentences;
    for (const auto& s : detail::locate_sentences(doc.text))
        for (auto& piece : detail::split_long(s, cfg.target_chars)) sentences.push_back(std::move(piece));

    std::vector<LoreChunk> chunks;
    std::size_t next = 0;
    while (next < sentences.size()) {
        std::vector<std::size_t> members;
        std::size_t size = 0;
        auto add = [&](std::size_t i) {
            size += (members.empty() ? 0 : 1) + sentences[i].text.size();
            members.push_back(i);
        };
        if (!chunks.empty() && cfg.overlap_sentences > 0) {
            std::size_t first = next >= cfg.overlap_sentences ? next - cfg.overlap_sentences : 0;
            std::size_t overlap = 0;
            for (std::size_t i = first; i < next; ++i) overlap += sentences[i].text.size() + 1;
            if (overlap + sentences[next].text.size() <= cfg.target_chars)
                for (std::size_t i = first; i < next; ++i) add(i);
        }
        add(next++);
        while (next < sentences.size() && size + 1 + sentences[next].text.size() <= cfg.target_chars) add(next++);

        LoreChunk c;
        c.stage = doc.stage;
        c.source = doc.source;
        c.offset = sentences[members.front()].offset;
        for (std::size_t k = 0; k < members.size(); ++k) {
            if (k) c.text += ' ';
            c.text += sentences[members[k]].text;
        }
        chunks.push_back(std::move(c));
    }
    return chunks;
}

// ---- BM25 ------------------------------------------------------------------

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// Inverted statistics over a fixed set of token lists.
class Bm25Collection {
public:
    Bm25Collection() = default;

    explicit Bm25Collection(std::vector<std::vector<std::string>> docs, Bm25Params params = {}) : params_(params) {
        double total = 0;
        for (auto& tokens : docs) {
            std::map<std::string, int> tf;
            for (const auto& t : tokens) ++tf[t];
            for (const auto& [term, _] : tf) ++df_[term];
            lengths_.push_back(static_cast<double>(tokens.size()));
            total += static_cast<double>(tokens.size());
            tf_.push_back(std::move(tf));
        }
        avgdl_ = docs.empty() ? 0.0 : total / static_cast<double>(docs.size());
    }

    std::size_t size() const { return tf_.size(); }
    double avgdl() const { return avgdl_; }
    int df(const std::string& term) const {
        auto it = df_.find(term);
        return it == df_.end() ? 0 : it->second;
    }

    // ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
    double idf(const std::string& term) const {
        double n = static_cast<double>(size());
        double d = static_cast<double>(df(term));
        return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    }

    // `terms` must already be unique.
    double score(std::size_t doc, const std::vector<std::string>& terms) const {
        const auto& tf = tf_[doc];
        double s = 0.0;
        for (const auto& t : terms) {
            auto it = tf.find(t);
            if (it == tf.end()) continue;
            double f = it->second;
            double norm = params_.k1 * (1.0 - params_.b + params_.b * lengths_[doc] / avgdl_);
            s += idf(t) * f * (params_.k1 + 1.0) / (f + norm);
        }
        return s;
    }

private:
    Bm25Params params_;
    std::vector<std::map<std::string, int>> tf_;
    std::vector<double> lengths_;
    std::map<std::string, int> df_;
    double avgdl_ = 0.0;
};

inline std::vector<std::string> query_terms(std::string_view query) {
    auto tokens = tokenize(query);
    std::vector<std::string> unique;
    std::set<std::string> seen;
    for (auto& t : tokens)
        if (seen.insert(t).second) unique.push_back(std::move(t));
    return unique;
}

class LoreIndex {
public:
    LoreIndex() = default;

    explicit LoreIndex(std::vector<LoreChunk> chunks, Bm25Params params = {}) : chunks_(std::move(chunks)) {
        std::vector<std::vector<std::string>> docs;
        for (const auto& c : chunks_) docs.push_back(tokenize(c.text));
        stats_ = Bm25Collection(std::move(docs), params);
    }

    const std::vector<LoreChunk>& chunks() const { return chunks_; }
    const Bm25Collection& stats() const { return stats_; }
    bool empty() const { return chunks_.empty(); }

    std::set<LoreStage> stages() const {
        std::set<LoreStage> s;
        for (const auto& c : chunks_) s.insert(c.stage);
        return s;
    }

    // Full corpus text in stage order, for prompts that carry the entire lore.
    std::string full_text() const {
        std::string out;
        std::optional<LoreStage> current;
        for (const auto& c : chunks_) {
            if (!current || *current != c.stage) {
                if (!out.empty()) out += "\n";
                out += "[" + std::string(to_string(c.stage)) + "]\n";
                current = c.stage;
            }
            out += c.text + "\n";
        }
        return out;
    }

private:
    std::vector<LoreChunk> chunks_;
    Bm25Collection stats_;
};

// Chunk ids are "<stage>-<nnnn>", numbered per stage in corpus order.
inline LoreIndex build_index(const std::vector<LoreDocument>& docs, const ChunkingConfig& cfg = {},
                             Bm25Params params = {}) {
    std::vector<LoreChunk> all;
    std::map<LoreStage, int> counter;
    for (const auto& d : docs) {
        if (d.text.find_first_not_of(" \t\r\n") == std::string::npos)
            throw EmptyDocument("lore document '" + d.source + "' is empty");
        for (auto& c : chunk_document(d, cfg)) {
            std::ostringstream id;
            id << to_string(c.stage) << '-' << std::setw(4) << std::setfill('0') << counter[c.stage]++;
            c.id = id.str();
            all.push_back(std::move(c));
        }
    }
    return LoreIndex(std::move(all), params);
}

// `stage_files` maps each stage to a file name inside `dir`; every one of the
// seven stages must be declared and present.
inline LoreIndex ingest_lore(const std::filesystem::path& dir, const std::map<LoreStage, std::string>& stage_files,
                             const ChunkingConfig& cfg = {}) {
    std::vector<LoreDocument> docs;
    for (auto stage : kLoreStages) {
        auto it = stage_files.find(stage);
        if (it == stage_files.end())
            throw MissingStage("lore stage '" + std::string(to_string(stage)) + "' is not declared");
        auto path = dir / it->second;
        if (!std::filesystem::exists(path))
            throw MissingStage("lore stage '" + std::string(to_string(stage)) + "' file missing: " + path.string());
        docs.push_back({stage, it->second, read_text_file(path)});
    }
    return build_index(docs, cfg);
}

inline std::map<LoreStage, std::string> default_stage_files() {
    std::map<LoreStage, std::string> m;
    for (auto s : kLoreStages) m[s] = std::string(to_string(s)) + ".txt";
    return m;
}

// Hash of the corpus bytes; keys the optional on-disk index cache.
inline std::string corpus_hash(const std::vector<LoreDocument>& docs) {
    std::string all;
    for (const auto& d : docs) all += std::string(to_string(d.stage)) + '\0' + d.source + '\0' + d.text + '\0';
    return sha256_hex(all);
}

inline Json index_cache_json(const LoreIndex& index, const std::string& hash) {
    Json chunks = Json::array();
    for (const auto& c : index.chunks())
        chunks.push_back({{"id", c.id},
                          {"stage", to_string(c.stage)},
                          {"text", c.text},
                          {"source", c.source},
                          {"offset", c.offset}});
    return Json{{"corpus_hash", hash}, {"chunks", chunks}};
}

inline std::optional<LoreIndex> load_index_cache(const Json& j, const std::string& expected_hash) {
    if (j.value("corpus_hash", "") != expected_hash) return std::nullopt;
    std::vector<LoreChunk> chunks;
    for (const auto& c : j.at("chunks")) {
        auto stage = parse_stage(c.at("stage").get<std::string>());
        if (!stage) return std::nullopt;
        chunks.push_back({c.at("id").get<std::string>(), *stage, c.at("text").get<std::string>(),
                          c.at("source").get<std::string>(), c.at("offset").get<std::size_t>()});
    }
    return LoreIndex(std::move(chunks));
}

// ---- search ----------------------------------------------------------------

struct DialogueTurn {
    std::uint64_t turn = 0;
    std::string speaker;  // "player" or an NPC id
    std::string text;

    bool operator==(const DialogueTurn&) const = default;
};

enum class HitSource { Lore, History };

struct RetrievalHit {
    std::string id;
    double score = 0.0;
    HitSource source = HitSource::Lore;
    std::string text;

    bool operator==(const RetrievalHit&) const = default;
};

struct RetrievalResult {
    std::vector<RetrievalHit> hits;
};

struct SearchConfig {
    Bm25Params bm25;
    double recency_decay = 0.9;
};

inline std::string history_id(std::size_t position) {
    std::ostringstream id;
    id << "history-" << std::setw(4) << std::setfill('0') << position;
    return id.str();
}

// Lore chunks by BM25; history turns by BM25 over the history alone, times
// decay^age where the newest turn has age 0. Zero scores are dropped. Ties:
// lore before history, then id ascending.
inline RetrievalResult search(const LoreIndex& index, const std::vector<DialogueTurn>& history, std::string_view query,
                              std::size_t k, const SearchConfig& cfg = {}) {
    if (k == 0) throw Error("search: k must be at least 1");
    RetrievalResult out;
    auto terms = query_terms(query);
    if (terms.empty()) return out;

    std::vector<RetrievalHit> hits;
    for (std::size_t i = 0; i < index.chunks().size(); ++i) {
        double s = index.stats().score(i, terms);
        if (s > 0.0) hits.push_back({index.chunks()[i].id, s, HitSource::Lore, index.chunks()[i].text});
    }

    if (!history.empty()) {
        std::vector<std::vector<std::string>> docs;
        for (const auto& t : history) docs.push_back(tokenize(t.text));
        Bm25Collection hist(std::move(docs), cfg.bm25);
        for (std::size_t i = 0; i < history.size(); ++i) {
            double age = static_cast<double>(history.size() - 1 - i);
            double s = hist.score(i, terms) * std::pow(cfg.recency_decay, age);
            if (s > 0.0) hits.push_back({history_id(i), s, HitSource::History, history[i].speaker + ": " + history[i].text});
        }
    }

    std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.source != b.source) return a.source == HitSource::Lore;
        return a.id < b.id;
    });
    if (hits.size() > k) hits.resize(k);
    out.hits = std::move(hits);
    return out;
}

// ---- query rewriting -------------------------------------------------------

struct RewriteResult {
    std::string query;
    bool degraded = false;
};

inline constexpr std::string_view kRewriteInstruction =
    "Rewrite the player's last message as a self-contained search query for a case-file database. "
    "Resolve pronouns and ellipsis using the conversation. Reply with the query only.";

inline std::vector<ChatMessage> rewrite_messages(const std::vector<DialogueTurn>& history, std::string_view utterance,
                                                 std::size_t window = 6) {
    std::string convo;
    std::size_t first = history.size() > window ? history.size() - window : 0;
    for (std::size_t i = first; i < history.size(); ++i) convo += history[i].speaker + ": " + history[i].text + "\n";
    return {{"system", std::string(kRewriteInstruction)},
            {"user", "Conversation:\n" + convo + "\nLast message: " + std::string(utterance)}};
}

// Falls back to the utterance itself when there is no history or the gateway
// fails.
inline RewriteResult rewrite_query(const std::vector<DialogueTurn>& history, std::string_view utterance,
                                   const Gateway& gateway, const GenerationConfig& config = {}) {
    if (history.empty()) return {std::string(utterance), false};
    try {
        auto c = gateway.complete(rewrite_messages(history, utterance), config);
        auto q = c.text;
        auto b = q.find_first_not_of(" \t\r\n\"");
        auto e = q.find_last_not_of(" \t\r\n\"");
        if (b == std::string::npos) return {std::string(utterance), true};
        return {q.substr(b, e - b + 1), false};
    } catch (const GatewayError&) {
        return {std::string(utterance), true};
    }
}

// ---- staged lore generation ------------------------------------------------

struct StageTemplate {
    LoreStage stage = LoreStage::Rules;
    std::string text;  // may reference earlier stages as {{rules}}, {{crime}}, ...
};

class LoreChainError : public GatewayError {
public:
    LoreChainError(LoreStage failed, std::vector<LoreDocument> completed, const std::string& cause)
        : GatewayError("lore chain failed at stage '" + std::string(to_string(failed)) + "': " + cause),
          failed_(failed),
          completed_(std::move(completed)) {}

    LoreStage failed_stage() const { return failed_; }
    const std::vector<LoreDocument>& completed() const { return completed_; }

private:
    LoreStage failed_;
    std::vector<LoreDocument> completed_;
};

inline std::string substitute_placeholders(std::string_view text, const std::map<std::string, std::string>& vars) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto open = text.find("{{", i);
        if (open == std::string_view::npos) {
            out.append(text.substr(i));
            break;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(text.substr(i));
            break;
        }
        out.append(text.substr(i, open - i));
        std::string name(text.substr(open + 2, close - open - 2));
        auto it = vars.find(name);
        if (it == vars.end()) throw SchemaError("template references unknown placeholder '{{" + name + "}}'");
        out += it->second;
        i = close + 2;
    }
    return out;
}

inline constexpr std::string_view kLoreChainSystem =
    "You are writing the lore bible for a murder-mystery interrogation game. Write plain prose.";

// Runs the stages in order; each stage sees all earlier outputs as
// placeholders. When out_dir is set, every finished stage is written as
// <stage>.txt and chain-status.json records progress.
inline std::vector<LoreDocument> run_lore_chain(const std::vector<StageTemplate>& templates, const Gateway& gateway,
                                                const GenerationConfig& config = {},
                                                const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
    std::vector<LoreDocument> done;
    std::map<std::string, std::string> vars;
    auto write_status = [&](std::optional<LoreStage> failed) {
        if (!out_dir) return;
        Json completed = Json::array();
        for (const auto& d : done) completed.push_back(to_string(d.stage));
        Json status{{"completed", completed}, {"failed", failed ? Json(to_string(*failed)) : Json(nullptr)}};
        write_file_atomic(*out_dir / "chain-status.json", status.dump(2));
    };
    for (const auto& t : templates) {
        std::string prompt = substitute_placeholders(t.text, vars);
        Completion c;
        try {
            c = gateway.complete({{"system", std::string(kLoreChainSystem)}, {"user", prompt}}, config);
        } catch (const GatewayError& e) {
            write_status(t.stage);
            throw LoreChainError(t.stage, done, e.what());
        }
        std::string name(to_string(t.stage));
        LoreDocument doc{t.stage, name + ".txt", c.text};
        if (out_dir) write_file_atomic(*out_dir / doc.source, doc.text);
        vars[name] = doc.text;
        done.push_back(std::move(doc));
    }
    write_status(std::nullopt);
    return done;
}

}  // namespace scaffold

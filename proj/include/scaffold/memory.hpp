#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scaffold/delta.hpp"
#include "scaffold/errors.hpp"
#include "scaffold/json_io.hpp"
#include "scaffold/schema.hpp"

namespace scaffold {

// Persistent per-session game state consulted by every NPC.
struct SharedMemory {
    std::uint64_t turn_index = 0;
    std::uint64_t contradiction_count = 0;
    std::vector<std::string> recent_evidence;
    std::map<std::string, double> player_rapport;
    std::map<std::string, std::map<std::string, double>> npc_state;
    std::map<std::string, std::uint64_t> last_recaps;
    std::map<std::string, std::int64_t> auxiliary_counters;
    // npc -> trait -> current state label
    std::map<std::string, std::map<std::string, std::string>> trait_states;

    bool operator==(const SharedMemory&) const = default;
};

struct MemoryConfig {
    std::size_t evidence_cap = 16;
};

// Extra seeding beyond the scaffold defaults.
struct MemorySeed {
    std::vector<std::string> rapport_targets;
    std::vector<std::string> counters;
    std::map<std::string, std::map<std::string, std::string>> trait_states;
};

inline constexpr double kNeutralRapport = 0.5;

inline std::string rapport_target(const RoleScaffold& s) { return "with_" + s.role; }

inline SharedMemory init_memory(const std::vector<RoleScaffold>& scaffolds, const MemorySeed& seed = {}) {
    SharedMemory m;
    for (const auto& s : scaffolds) {
        auto& state = m.npc_state[s.role];
        for (const auto& p : s.params) state[p.name] = p.default_value;
        if (s.kind == RoleKind::Suspect) m.player_rapport[rapport_target(s)] = kNeutralRapport;
    }
    for (const auto& t : seed.rapport_targets) m.player_rapport.emplace(t, kNeutralRapport);
    for (const auto& c : seed.counters) m.auxiliary_counters.emplace(c, 0);
    m.trait_states = seed.trait_states;
    return m;
}

// Appends an evidence id; duplicates are ignored, the oldest entry is evicted
// past the cap.
inline SharedMemory add_evidence(SharedMemory memory, const std::string& id, const MemoryConfig& cfg = {}) {
    auto& ev = memory.recent_evidence;
    if (std::find(ev.begin(), ev.end(), id) != ev.end()) return memory;
    ev.push_back(id);
    while (ev.size() > cfg.evidence_cap) ev.erase(ev.begin());
    return memory;
}

inline SharedMemory commit_turn(const SharedMemory& memory, const TurnDelta& delta, const MemoryConfig& cfg = {}) {
    if (delta.base_turn != memory.turn_index) throw StaleDelta(memory.turn_index, delta.base_turn);
    SharedMemory out = memory;
    out.turn_index = memory.turn_index + 1;
    for (const auto& a : delta.applied_rules) out.npc_state[a.role][a.param] = a.new_value;
    for (const auto& f : delta.fired_transitions) out.trait_states[f.npc][f.trait] = f.to;
    for (const auto& [name, inc] : delta.metric_increments) {
        if (name == "contradiction_count") {
            auto next = static_cast<std::int64_t>(out.contradiction_count) + std::llround(inc);
            out.contradiction_count = static_cast<std::uint64_t>(std::max<std::int64_t>(0, next));
        } else if (name.starts_with("player_rapport.")) {
            auto& r = out.player_rapport[name.substr(std::string_view("player_rapport.").size())];
            r = std::clamp(r + inc, 0.0, 1.0);
        } else {
            out.auxiliary_counters[name] += std::llround(inc);
        }
    }
    for (const auto& id : delta.new_evidence) out = add_evidence(std::move(out), id, cfg);
    for (const auto& role : delta.recaps) out.last_recaps[role] = out.turn_index;
    return out;
}

// ---- serialization ---------------------------------------------------------

inline Json to_json(const SharedMemory& m) {
    return Json{{"turn_index", m.turn_index},
                {"contradiction_count", m.contradiction_count},
                {"recent_evidence", m.recent_evidence},
                {"player_rapport", m.player_rapport},
                {"npc_state", m.npc_state},
                {"last_recaps", m.last_recaps},
                {"auxiliary_counters", m.auxiliary_counters},
                {"trait_states", m.trait_states}};
}

namespace detail {

inline std::uint64_t require_count(const Json& v, const std::string& what) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw SchemaError("memory: '" + what + "' must be a non-negative integer");
}

inline double require_unit(const Json& v, const std::string& what) {
    if (!v.is_number()) throw SchemaError("memory: '" + what + "' must be a number");
    double d = v.get<double>();
    if (!(d >= 0.0 && d <= 1.0)) throw SchemaError("memory: '" + what + "' must lie in [0, 1]");
    return d;
}

}  // namespace detail

inline SharedMemory memory_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("memory: top level must be an object");
    SharedMemory m;
    if (j.contains("turn_index")) m.turn_index = detail::require_count(j.at("turn_index"), "turn_index");
    if (j.contains("contradiction_count"))
        m.contradiction_count = detail::require_count(j.at("contradiction_count"), "contradiction_count");
    if (j.contains("recent_evidence")) {
        for (const auto& e : j.at("recent_evidence")) {
            if (!e.is_string()) throw SchemaError("memory: recent_evidence entries must be strings");
            m.recent_evidence.push_back(e.get<std::string>());
        }
    }
    if (j.contains("player_rapport")) {
        for (const auto& [k, v] : j.at("player_rapport").items())
            m.player_rapport[k] = detail::require_unit(v, "player_rapport." + k);
    }
    if (j.contains("npc_state")) {
        for (const auto& [role, params] : j.at("npc_state").items()) {
            if (!params.is_object()) throw SchemaError("memory: npc_state." + role + " must be an object");
            auto& dst = m.npc_state[role];
            for (const auto& [p, v] : params.items()) dst[p] = detail::require_unit(v, "npc_state." + role + "." + p);
        }
    }
    if (j.contains("last_recaps")) {
        for (const auto& [k, v] : j.at("last_recaps").items())
            m.last_recaps[k] = detail::require_count(v, "last_recaps." + k);
    }
    if (j.contains("auxiliary_counters")) {
        for (const auto& [k, v] : j.at("auxiliary_counters").items()) {
            if (!v.is_number_integer()) throw SchemaError("memory: auxiliary_counters." + k + " must be an integer");
            m.auxiliary_counters[k] = v.get<std::int64_t>();
        }
    }
    if (j.contains("trait_states")) {
        for (const auto& [npc, traits] : j.at("trait_states").items()) {
            auto& dst = m.trait_states[npc];
            for (const auto& [t, v] : traits.items()) {
                if (!v.is_string()) throw SchemaError("memory: trait_states." + npc + "." + t + " must be a string");
                dst[t] = v.get<std::string>();
            }
        }
    }
    for (const auto& [role, at] : m.last_recaps)
        if (at > m.turn_index) throw SchemaError("memory: last_recaps." + role + " is ahead of turn_index");
    return m;
}

inline SharedMemory parse_memory(std::string_view text) { return memory_from_json(parse_json(text, "memory")); }

// Sorted keys, shortest round-trip numbers, no newlines.
inline std::string canonical_serialize(const SharedMemory& m) { return to_json(m).dump(); }

// ---- persistence -----------------------------------------------------------

// `<root>/<session-id>/turn-<n>.json` per committed turn plus `latest.json`.
class SnapshotStore {
public:
    explicit SnapshotStore(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    std::filesystem::path turn_path(const std::string& session, std::uint64_t turn) const {
        return root_ / session / ("turn-" + std::to_string(turn) + ".json");
    }
    std::filesystem::path latest_path(const std::string& session) const { return root_ / session / "latest.json"; }

    // Turn file first, then the latest pointer: a crash in between leaves the
    // previous latest intact.
    void commit(const std::string& session, const SharedMemory& m) const {
        auto bytes = canonical_serialize(m);
        write_file_atomic(turn_path(session, m.turn_index), bytes);
        write_file_atomic(latest_path(session), bytes);
    }

    // Between-turn updates (evidence registration) move only the pointer.
    void update_latest(const std::string& session, const SharedMemory& m) const {
        write_file_atomic(latest_path(session), canonical_serialize(m));
    }

    std::optional<SharedMemory> latest(const std::string& session) const { return load(latest_path(session)); }
    std::optional<SharedMemory> turn(const std::string& session, std::uint64_t n) const {
        return load(turn_path(session, n));
    }

    void write_meta(const std::string& session, const Json& meta) const {
        write_file_atomic(root_ / session / "session.json", meta.dump(2));
    }
    std::optional<Json> meta(const std::string& session) const {
        auto p = root_ / session / "session.json";
        if (!std::filesystem::exists(p)) return std::nullopt;
        return parse_json(read_text_file(p), p.string());
    }

private:
    static std::optional<SharedMemory> load(const std::filesystem::path& p) {
        if (!std::filesystem::exists(p)) return std::nullopt;
        return parse_memory(read_text_file(p));
    }

    std::filesystem::path root_;
};

}  // namespace scaffold

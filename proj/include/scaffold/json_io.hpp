#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "scaffold/errors.hpp"

namespace scaffold {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

namespace detail {

template <typename J>
J parse_strict(std::string_view text, const std::string& what) {
    // nlohmann silently keeps the last of two duplicate keys; documents here
    // treat that as a schema error.
    std::vector<std::set<std::string>> open_objects;
    std::string duplicate;
    auto callback = [&](int /*depth*/, typename J::parse_event_t event, J& parsed) {
        using E = typename J::parse_event_t;
        if (event == E::object_start) {
            open_objects.emplace_back();
        } else if (event == E::object_end) {
            if (!open_objects.empty()) open_objects.pop_back();
        } else if (event == E::key && !open_objects.empty()) {
            auto key = parsed.template get<std::string>();
            if (!open_objects.back().insert(key).second && duplicate.empty()) duplicate = key;
        }
        return true;
    };
    J doc;
    try {
        doc = J::parse(text.begin(), text.end(), callback);
    } catch (const typename J::parse_error& e) {
        throw SyntaxError(what + ": " + e.what());
    }
    if (!duplicate.empty()) throw SchemaError(what + ": duplicate key '" + duplicate + "'");
    return doc;
}

}  // namespace detail

// Parses JSON keeping object key order; duplicate keys are rejected.
inline OrderedJson parse_ordered(std::string_view text, const std::string& what = "document") {
    return detail::parse_strict<OrderedJson>(text, what);
}

inline Json parse_json(std::string_view text, const std::string& what = "document") {
    return detail::parse_strict<Json>(text, what);
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes via a temporary sibling and rename so readers never observe a
// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error("cannot rename " + tmp.string() + ": " + ec.message());
}

// Shortest decimal text that round-trips to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// Signed form used for delta actions: "+0.1", "-0.1".
inline std::string format_signed(double v) {
    auto s = format_number(v);
    return std::signbit(v) ? s : "+" + s;
}

}  // namespace scaffold

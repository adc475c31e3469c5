#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "text.hpp"

namespace bookqa::jsonl {

using nlohmann::json;

/// Location of a record, used to build error messages.
struct RecordRef {
    std::string_view file;
    std::size_t line = 0;

    [[noreturn]] void fail(std::string_view field, std::string_view problem) const {
        std::ostringstream msg;
        msg << file << ":" << line << ": field '" << field << "': " << problem;
        bookqa::fail(ErrorKind::schema, msg.str());
    }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::io, "cannot open '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Calls fn(record, ref) for every non-blank line of a newline-delimited
/// JSON file. Lines must be valid UTF-8 and hold one JSON object each.
inline void for_each_record(const std::string& path,
                            const std::function<void(const json&, const RecordRef&)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::io, "cannot open '" + path + "'");
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        const RecordRef ref{path, line_no};
        if (!is_valid_utf8(line)) {
            ref.fail("<record>", "invalid UTF-8");
        }
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            ref.fail("<record>", "not a JSON object");
        }
        fn(record, ref);
    }
}

inline std::string get_string(const json& record, const RecordRef& ref, std::string_view field) {
    const auto it = record.find(field);
    if (it == record.end()) {
        ref.fail(field, "missing");
    }
    if (!it->is_string()) {
        ref.fail(field, "expected a string");
    }
    return it->get<std::string>();
}

inline std::size_t get_index(const json& record, const RecordRef& ref, std::string_view field) {
    const auto it = record.find(field);
    if (it == record.end()) {
        ref.fail(field, "missing");
    }
    if (!it->is_number_unsigned()) {
        ref.fail(field, "expected a non-negative integer");
    }
    return it->get<std::size_t>();
}

inline double get_number(const json& record, const RecordRef& ref, std::string_view field) {
    const auto it = record.find(field);
    if (it == record.end()) {
        ref.fail(field, "missing");
    }
    if (!it->is_number()) {
        ref.fail(field, "expected a number");
    }
    return it->get<double>();
}

/// JSON string literal (quoted and escaped).
inline std::string quote(std::string_view s) { return json(std::string(s)).dump(); }

/// Fixed-point rendering, e.g. fixed(0.5, 6) == "0.500000".
inline std::string fixed(double value, int decimals) {
    if (value == 0.0) {
        value = 0.0;  // no "-0.000000"
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string out(buf);
    if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) {
        out.erase(0, 1);
    }
    return out;
}

}  // namespace bookqa::jsonl

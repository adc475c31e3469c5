#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bookqa {

enum class ErrorKind {
    invalid_argument,  // precondition violated by the caller
    io,                // file missing or unreadable
    schema,            // malformed record in an input file
    data,              // well-formed input that violates a corpus invariant
    protocol,          // external reranker misbehaved
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::io: return "io";
    case ErrorKind::schema: return "schema";
    case ErrorKind::data: return "data";
    case ErrorKind::protocol: return "protocol";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

  private:
    ErrorKind m_kind;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
    if (!condition) {
        fail(ErrorKind::invalid_argument, what);
    }
}

}  // namespace bookqa

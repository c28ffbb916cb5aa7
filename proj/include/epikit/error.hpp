#pragma once

#include <stdexcept>
#include <string>

namespace epikit {

enum class ErrorKind {
    InvalidArgument,  // caller supplied something outside the contract
    Shape,            // dimensions disagree
    Parse,            // malformed input file
    Runtime,          // algorithmic failure on valid input
    NotFound,         // unknown session / node / id
    Conflict,         // command not allowed in the current state
};

/// Library-wide exception. `field` names the offending input (e.g.
/// "static_graph.n_nodes") when one can be pinned down.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string field = {})
        : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorKind kind_;
    std::string field_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message, std::string field = {}) {
    throw Error(kind, message, std::move(field));
}

inline void require(bool ok, const std::string& message, std::string field = {}) {
    if (!ok) fail(ErrorKind::InvalidArgument, message, std::move(field));
}

}  // namespace epikit

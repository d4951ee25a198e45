#pragma once

#include <stdexcept>
#include <string>

namespace vn {

/// Error taxonomy shared by the whole library. The C API maps each kind to a
/// distinct status code, the CLI maps status codes to exit codes.
enum class ErrorKind {
    Config,     // bad or missing configuration / unknown key
    Io,         // filesystem failure
    Load,       // checkpoint or tree file unreadable / wrong format
    Geometry,   // invalid on-tree position, degenerate geometry
    Parameter,  // out-of-range numeric parameter
    Lifecycle,  // API misuse (e.g. stepping a finished episode)
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

} // namespace vn

#pragma once

#include <stdexcept>
#include <string>

namespace prf {

// Failure categories. The CLI maps each one onto its own exit code.
enum class ErrorKind {
    config,       // invalid parameters, malformed config or filter spec
    io,           // unreadable / unwritable path
    format,       // file exists but its format is not supported
    numeric,      // solver breakdown, non-finite values, failed calibration
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::config, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::io, msg); }
inline Error format_error(const std::string& msg) { return Error(ErrorKind::format, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::numeric, msg); }

} // namespace prf

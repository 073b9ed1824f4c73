#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace mdn {

/// Raised when tensor/image dimensions are incompatible with an operation.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for unreadable, malformed or truncated files.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a configuration violates an invariant (rates, layer wiring, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename Head, typename... Tail>
void format_into(std::ostringstream& os, const Head& head, const Tail&... tail) {
    os << head;
    format_into(os, tail...);
}

}  // namespace detail

/// Builds an error message from stream-able pieces.
template <typename... Parts>
std::string msg(const Parts&... parts) {
    std::ostringstream os;
    detail::format_into(os, parts...);
    return os.str();
}

}  // namespace mdn

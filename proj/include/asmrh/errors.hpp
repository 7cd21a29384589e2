#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace asmrh {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape / rank / axis violations.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid configuration values or config-file schema violations.
struct ConfigError : Error {
    using Error::Error;
};

// Bad input data: missing files, malformed manifests, out-of-range labels.
struct DataError : Error {
    using Error::Error;
};

// Malformed on-disk containers (WAV chunks, checkpoint framing).
struct FormatError : Error {
    using Error::Error;
};

// Checkpoint/config mismatch: file is well-formed but does not fit the model.
struct IncompatibleError : Error {
    using Error::Error;
};

// NaN/Inf detected while finite checking is enabled, or a numeric
// invariant (e.g. spectral realness) failed.
struct NumericError : Error {
    using Error::Error;
};

namespace detail {
inline void concat_into(std::ostringstream&) {}
template <typename A, typename... Rest>
void concat_into(std::ostringstream& os, const A& a, const Rest&... rest) {
    os << a;
    concat_into(os, rest...);
}
}  // namespace detail

// msg("foo ", 42, " bar") -> "foo 42 bar"
template <typename... Args>
std::string msg(const Args&... args) {
    std::ostringstream os;
    detail::concat_into(os, args...);
    return os.str();
}

}  // namespace asmrh

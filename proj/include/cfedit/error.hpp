#pragma once

#include <stdexcept>
#include <string>

namespace cfe {

enum class Errc {
    invalid_argument = 1,
    io = 2,
    format = 3,
    not_found = 4,
    precondition = 5,
    backend_unavailable = 6,
    protocol = 7,
    internal = 8,
};

/// Every failure raised by the library carries one of these codes so the C
/// boundary can translate it without string matching.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace cfe

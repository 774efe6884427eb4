#pragma once

#include <stdexcept>
#include <string>

namespace isospiral {

// Error categories map onto CLI exit codes (bad input = 2, infeasible geometry = 3).
enum class ErrorKind {
    internal,
    bad_input,
    infeasible_geometry,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace isospiral

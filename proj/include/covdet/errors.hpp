#pragma once

#include <stdexcept>
#include <string>

namespace covdet {

// Error categories map onto the CLI exit codes.
enum class ErrorKind {
    usage = 1,
    data = 2,
    runtime = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }
    int exit_code() const { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void raise_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void raise_runtime(const std::string& msg) { throw Error(ErrorKind::runtime, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) throw Error(kind, msg);
}

} // namespace covdet

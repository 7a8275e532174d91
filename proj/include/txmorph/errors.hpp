#pragma once

#include <stdexcept>
#include <string>

namespace txmorph {

// Coarse category used by the CLI to pick an exit code.
enum class ErrorKind { validation, numerical, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message),
          kind_(kind),
          code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

inline Error validation_error(std::string code, const std::string& message) {
    return Error(ErrorKind::validation, std::move(code), message);
}

inline Error numerical_error(std::string code, const std::string& message) {
    return Error(ErrorKind::numerical, std::move(code), message);
}

inline Error io_error(std::string code, const std::string& message) {
    return Error(ErrorKind::io, std::move(code), message);
}

}  // namespace txmorph

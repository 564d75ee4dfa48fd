#pragma once

#include <stdexcept>
#include <string>

namespace sftgen {

/// Coarse failure category. The CLI maps these onto process exit codes
/// (validation=1, external=2, invariant=3).
enum class ErrorKind { validation, external, invariant };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Bad input, bad config, precondition violation.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

/// Internal consistency check failed. Always a bug or corrupted artifact.
class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& what) : Error(ErrorKind::invariant, what) {}
};

/// Model output that does not follow the requested layout. Carries the raw
/// text so the caller can log or quarantine it.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw)
        : Error(ErrorKind::external, what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

}  // namespace sftgen

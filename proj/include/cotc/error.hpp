#pragma once

#include <stdexcept>
#include <string>

namespace cotc {

// Error families map one-to-one onto CLI exit codes.
enum class ErrorFamily {
    Usage = 2,
    Input = 3,
    Gateway = 4,
    ConfigMismatch = 5,
    MissingArtifact = 6,
    Stage = 7,
    Internal = 1,
};

class Error : public std::runtime_error {
public:
    Error(ErrorFamily family, const std::string& what)
        : std::runtime_error(what), family_(family) {}

    ErrorFamily family() const noexcept { return family_; }

private:
    ErrorFamily family_;
};

// A type invariant was violated. `field()` names the offending field.
class InvariantError : public Error {
public:
    InvariantError(std::string field, const std::string& what)
        : Error(ErrorFamily::Input, field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// A serialized line could not be decoded.
class DecodeError : public Error {
public:
    DecodeError(std::string field, const std::string& what)
        : Error(ErrorFamily::Input, "decode error at '" + field + "': " + what),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace cotc

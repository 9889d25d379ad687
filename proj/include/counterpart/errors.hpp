#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace counterpart {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid game, population, grid, or protocol configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A move that the game rules forbid in the current state.
class RuleViolation : public Error {
public:
    using Error::Error;
};

/// Operation applied to a state it is not defined for (e.g. payoffs of a live game).
class StateError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A record carries a field this version of the schema does not know.
class VersionError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Structurally parsed data that breaks a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

class RosterError : public Error {
public:
    using Error::Error;
};

class EncoderError : public Error {
public:
    using Error::Error;
};

class PredictorError : public Error {
public:
    using Error::Error;
};

}  // namespace counterpart

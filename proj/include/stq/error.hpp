#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace stq {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Out-of-range coordinates, timestamps, or malformed configuration values.
class DomainError : public Error {
public:
    using Error::Error;
};

class KeyError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Stored data disagrees with its catalog, or an expected blob is missing.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Unknown function, duplicate registration, or an invocation that exhausted
/// its retries.
class InvocationError : public Error {
public:
    using Error::Error;
};

/// The distributed engine disagreed with the single-node oracle.
class CorrectnessError : public Error {
public:
    using Error::Error;
};

/// A CSV record failed validation. Carries the 1-based input line number
/// (0 when the record was parsed outside of a stream).
class RecordError : public Error {
public:
    RecordError(std::size_t line, const std::string& what)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Lexical, syntax, or semantic error in query text, positioned at a
/// 0-based byte offset.
class ParseError : public Error {
public:
    enum class Kind { Lexical, Syntax, Semantic };

    ParseError(Kind kind, std::size_t offset, std::string message,
               std::vector<std::string> expected = {});

    Kind kind() const { return kind_; }
    std::size_t offset() const { return offset_; }
    const std::string& message() const { return message_; }
    const std::vector<std::string>& expected() const { return expected_; }

private:
    Kind kind_;
    std::size_t offset_;
    std::string message_;
    std::vector<std::string> expected_;
};

const char* to_string(ParseError::Kind kind);

} // namespace stq

#include "stq/error.hpp"

namespace stq {

namespace {

std::string render(ParseError::Kind kind, std::size_t offset, const std::string& message,
                   const std::vector<std::string>& expected) {
    std::string out = std::string(to_string(kind)) + " error at offset " + std::to_string(offset) +
                      ": " + message;
    if (!expected.empty()) {
        out += " (expected one of:";
        for (const auto& e : expected) {
            out += ' ';
            out += e;
        }
        out += ')';
    }
    return out;
}

} // namespace

ParseError::ParseError(Kind kind, std::size_t offset, std::string message,
                       std::vector<std::string> expected)
    : Error(render(kind, offset, message, expected)),
      kind_(kind),
      offset_(offset),
      message_(std::move(message)),
      expected_(std::move(expected)) {}

const char* to_string(ParseError::Kind kind) {
    switch (kind) {
    case ParseError::Kind::Lexical:
        return "lexical";
    case ParseError::Kind::Syntax:
        return "syntax";
    case ParseError::Kind::Semantic:
        return "semantic";
    }
    return "parse";
}

} // namespace stq

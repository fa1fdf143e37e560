#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stq/model.hpp"

namespace stq {

enum class Field { EntityId, Ts, Lat, Lon, Alt, Value };

const char* to_string(Field field);
std::optional<Field> field_from_name(std::string_view name);
/// Every field except entity_id.
bool is_numeric(Field field);

enum class AggKind { CountAll, Count, Sum, Avg, Min, Max };

struct Aggregate {
    AggKind kind = AggKind::CountAll;
    std::optional<Field> field; ///< absent exactly for COUNT(*)

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

/// "COUNT(*)", "AVG(value)", ...
std::string to_string(const Aggregate& agg);

enum class Comparator { Eq, Ne, Lt, Le, Gt, Ge };

const char* to_string(Comparator cmp);

struct RegionTerm {
    BoundingBox bbox;
    friend bool operator==(const RegionTerm&, const RegionTerm&) = default;
};

struct TimeTerm {
    TimeInterval interval;
    friend bool operator==(const TimeTerm&, const TimeTerm&) = default;
};

/// Numeric literal, or a string literal for entity_id.
using Literal = std::variant<double, std::string>;

struct FieldTerm {
    Field field = Field::Value;
    Comparator cmp = Comparator::Eq;
    Literal literal;

    friend bool operator==(const FieldTerm&, const FieldTerm&) = default;
};

using PredicateTerm = std::variant<RegionTerm, TimeTerm, FieldTerm>;

enum class GroupKey { Cell, TimeBucket, Entity };

const char* to_string(GroupKey key);

using OrderTarget = std::variant<Aggregate, GroupKey, Field>;

enum class Direction { Asc, Desc };

struct OrderBy {
    OrderTarget target;
    Direction direction = Direction::Asc;

    friend bool operator==(const OrderBy&, const OrderBy&) = default;
};

/// Parsed query. An empty aggregate list means `SELECT *`; `where` is a
/// conjunction.
struct QueryAst {
    std::vector<Aggregate> aggregates;
    std::vector<PredicateTerm> where;
    std::optional<GroupKey> group_by;
    std::optional<OrderBy> order_by;
    std::optional<std::int64_t> limit;

    bool all_rows() const { return aggregates.empty(); }
    const BoundingBox* region() const;
    const TimeInterval* time() const;

    friend bool operator==(const QueryAst&, const QueryAst&) = default;
};

enum class TokenKind {
    Keyword,
    Identifier,
    Integer,
    Number,
    Timestamp,
    String,
    LParen,
    RParen,
    Comma,
    Star,
    Compare,
};

struct Token {
    TokenKind kind;
    std::string text;   ///< keywords upper-cased; string literals unescaped
    std::size_t offset; ///< 0-based byte offset into the query text
    double number = 0.0;        ///< Integer, Number, Timestamp (epoch seconds)
    std::int64_t integer = 0;   ///< Integer, Timestamp
    Comparator cmp = Comparator::Eq;
};

/// Throws ParseError(Lexical) at the offending offset.
std::vector<Token> tokenize(std::string_view text);

/// Throws ParseError with the offending offset; syntax errors list the
/// expected tokens. Never returns a partially built AST.
QueryAst parse(std::string_view text);

/// Throws ParseError(Semantic) if the AST breaks a validation rule. parse()
/// already applies this; exposed for programmatically built ASTs.
void validate(const QueryAst& ast);

/// Canonical single-line rendering: upper-case keywords, explicit ORDER BY
/// direction, RFC 3339 UTC timestamps. parse(pretty(a)) == a.
std::string pretty(const QueryAst& ast);

/// Whole-second RFC 3339 with 'Z' or a +hh:mm/-hh:mm offset.
std::optional<std::int64_t> parse_rfc3339(std::string_view text);
/// `YYYY-MM-DDTHH:MM:SSZ`
std::string format_rfc3339(std::int64_t epoch_seconds);

} // namespace stq

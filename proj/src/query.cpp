#include "stq/query.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <set>

#include "stq/error.hpp"
#include "stq/text.hpp"

namespace stq {

namespace {

constexpr std::array<std::string_view, 19> kKeywords = {
    "SELECT", "WHERE",  "AND",  "GROUP", "BY",  "ORDER", "ASC",  "DESC",       "LIMIT", "COUNT",
    "SUM",    "AVG",    "MIN",  "MAX",   "REGION", "TIME", "CELL", "TIMEBUCKET", "ENTITY"};

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::optional<int> digits(std::string_view s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) {
        return std::nullopt;
    }
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (!is_digit(s[i])) {
            return std::nullopt;
        }
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

} // namespace

const char* to_string(Field field) {
    switch (field) {
    case Field::EntityId:
        return "entity_id";
    case Field::Ts:
        return "ts";
    case Field::Lat:
        return "lat";
    case Field::Lon:
        return "lon";
    case Field::Alt:
        return "alt";
    case Field::Value:
        return "value";
    }
    return "?";
}

std::optional<Field> field_from_name(std::string_view name) {
    auto n = lower(name);
    for (auto f : {Field::EntityId, Field::Ts, Field::Lat, Field::Lon, Field::Alt, Field::Value}) {
        if (n == to_string(f)) {
            return f;
        }
    }
    return std::nullopt;
}

bool is_numeric(Field field) { return field != Field::EntityId; }

std::string to_string(const Aggregate& agg) {
    const char* name = "COUNT";
    switch (agg.kind) {
    case AggKind::CountAll:
        return "COUNT(*)";
    case AggKind::Count:
        name = "COUNT";
        break;
    case AggKind::Sum:
        name = "SUM";
        break;
    case AggKind::Avg:
        name = "AVG";
        break;
    case AggKind::Min:
        name = "MIN";
        break;
    case AggKind::Max:
        name = "MAX";
        break;
    }
    return std::string(name) + "(" + (agg.field ? to_string(*agg.field) : "?") + ")";
}

const char* to_string(Comparator cmp) {
    switch (cmp) {
    case Comparator::Eq:
        return "=";
    case Comparator::Ne:
        return "!=";
    case Comparator::Lt:
        return "<";
    case Comparator::Le:
        return "<=";
    case Comparator::Gt:
        return ">";
    case Comparator::Ge:
        return ">=";
    }
    return "?";
}

const char* to_string(GroupKey key) {
    switch (key) {
    case GroupKey::Cell:
        return "CELL";
    case GroupKey::TimeBucket:
        return "TIMEBUCKET";
    case GroupKey::Entity:
        return "ENTITY";
    }
    return "?";
}

const BoundingBox* QueryAst::region() const {
    for (const auto& t : where) {
        if (const auto* r = std::get_if<RegionTerm>(&t)) {
            return &r->bbox;
        }
    }
    return nullptr;
}

const TimeInterval* QueryAst::time() const {
    for (const auto& t : where) {
        if (const auto* r = std::get_if<TimeTerm>(&t)) {
            return &r->interval;
        }
    }
    return nullptr;
}

std::optional<std::int64_t> parse_rfc3339(std::string_view s) {
    using namespace std::chrono;
    auto year = digits(s, 0, 4);
    auto month = digits(s, 5, 2);
    auto day = digits(s, 8, 2);
    auto hh = digits(s, 11, 2);
    auto mm = digits(s, 14, 2);
    auto ss = digits(s, 17, 2);
    if (!year || !month || !day || !hh || !mm || !ss || s.size() < 20 || s[4] != '-' ||
        s[7] != '-' || (s[10] != 'T' && s[10] != 't') || s[13] != ':' || s[16] != ':') {
        return std::nullopt;
    }
    std::int64_t offset = 0;
    auto zone = s.substr(19);
    if (zone == "Z" || zone == "z") {
        offset = 0;
    } else if (zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') && zone[3] == ':') {
        auto oh = digits(zone, 1, 2);
        auto om = digits(zone, 4, 2);
        if (!oh || !om || *oh > 23 || *om > 59) {
            return std::nullopt;
        }
        offset = (*oh * 3600 + *om * 60) * (zone[0] == '-' ? -1 : 1);
    } else {
        return std::nullopt;
    }
    year_month_day ymd{std::chrono::year{*year}, std::chrono::month{static_cast<unsigned>(*month)},
                       std::chrono::day{static_cast<unsigned>(*day)}};
    if (!ymd.ok() || *hh > 23 || *mm > 59 || *ss > 59) {
        return std::nullopt;
    }
    auto days_since = sys_days{ymd}.time_since_epoch().count();
    return static_cast<std::int64_t>(days_since) * 86400 + *hh * 3600 + *mm * 60 + *ss - offset;
}

std::string format_rfc3339(std::int64_t epoch_seconds) {
    using namespace std::chrono;
    sys_seconds tp{seconds{epoch_seconds}};
    auto day_point = floor<days>(tp);
    year_month_day ymd{day_point};
    auto secs = (tp - day_point).count();
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                  static_cast<long long>(secs % 60));
    return buf;
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto lexical = [&](std::size_t at, std::string msg) {
        throw ParseError(ParseError::Kind::Lexical, at, std::move(msg));
    };
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        auto start = i;
        auto single = [&](TokenKind kind) {
            out.push_back(Token{kind, std::string(1, c), start});
            ++i;
        };
        if (c == '(') {
            single(TokenKind::LParen);
        } else if (c == ')') {
            single(TokenKind::RParen);
        } else if (c == ',') {
            single(TokenKind::Comma);
        } else if (c == '*') {
            single(TokenKind::Star);
        } else if (c == '=' || c == '<' || c == '>' || c == '!') {
            Token t{TokenKind::Compare, std::string(1, c), start};
            bool eq_next = i + 1 < text.size() && text[i + 1] == '=';
            if (c == '=') {
                t.cmp = Comparator::Eq;
            } else if (c == '!') {
                if (!eq_next) {
                    lexical(start, "expected '=' after '!'");
                }
                t.cmp = Comparator::Ne;
            } else if (c == '<') {
                t.cmp = eq_next ? Comparator::Le : Comparator::Lt;
            } else {
                t.cmp = eq_next ? Comparator::Ge : Comparator::Gt;
            }
            if (eq_next && c != '=') {
                t.text += '=';
                ++i;
            }
            ++i;
            out.push_back(std::move(t));
        } else if (c == '\'') {
            std::string value;
            ++i;
            bool closed = false;
            while (i < text.size()) {
                if (text[i] == '\'') {
                    if (i + 1 < text.size() && text[i + 1] == '\'') {
                        value += '\'';
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                value += text[i++];
            }
            if (!closed) {
                lexical(start, "unterminated string literal");
            }
            out.push_back(Token{TokenKind::String, std::move(value), start});
        } else if (digits(text, i, 4) && i + 4 < text.size() && text[i + 4] == '-') {
            auto end = i;
            while (end < text.size() &&
                   (is_digit(text[end]) || std::string_view("-:+.TtZz").find(text[end]) !=
                                               std::string_view::npos)) {
                ++end;
            }
            auto lit = text.substr(i, end - i);
            auto epoch = parse_rfc3339(lit);
            if (!epoch) {
                lexical(start, lit.find('.') != std::string_view::npos
                                   ? "fractional seconds are not supported in timestamps"
                                   : "malformed RFC 3339 timestamp \"" + std::string(lit) + "\"");
            }
            Token t{TokenKind::Timestamp, std::string(lit), start};
            t.integer = *epoch;
            t.number = static_cast<double>(*epoch);
            out.push_back(std::move(t));
            i = end;
        } else if (is_digit(c) || c == '.' ||
                   (c == '-' && i + 1 < text.size() &&
                    (is_digit(text[i + 1]) || text[i + 1] == '.'))) {
            auto end = i + (c == '-' ? 1 : 0);
            bool is_float = false;
            auto run = [&] {
                auto b = end;
                while (end < text.size() && is_digit(text[end])) {
                    ++end;
                }
                return end > b;
            };
            bool int_digits = run();
            bool frac_digits = false;
            if (end < text.size() && text[end] == '.') {
                is_float = true;
                ++end;
                frac_digits = run();
            }
            if (!int_digits && !frac_digits) {
                lexical(start, "malformed number");
            }
            if (end < text.size() && (text[end] == 'e' || text[end] == 'E')) {
                is_float = true;
                ++end;
                if (end < text.size() && (text[end] == '+' || text[end] == '-')) {
                    ++end;
                }
                if (!run()) {
                    lexical(start, "malformed number exponent");
                }
            }
            if (end < text.size() && is_ident_char(text[end])) {
                lexical(end, "unexpected character '" + std::string(1, text[end]) +
                                 "' after number");
            }
            auto lit = text.substr(i, end - i);
            Token t{is_float ? TokenKind::Number : TokenKind::Integer, std::string(lit), start};
            auto d = parse_double(lit);
            if (!d) {
                lexical(start, "number out of range");
            }
            t.number = *d;
            if (!is_float) {
                auto n = parse_int64(lit);
                if (!n) {
                    lexical(start, "integer out of range");
                }
                t.integer = *n;
            }
            out.push_back(std::move(t));
            i = end;
        } else if (is_ident_start(c)) {
            auto end = i;
            while (end < text.size() && is_ident_char(text[end])) {
                ++end;
            }
            auto word = text.substr(i, end - i);
            auto up = upper(word);
            bool kw = std::find(kKeywords.begin(), kKeywords.end(), up) != kKeywords.end();
            out.push_back(Token{kw ? TokenKind::Keyword : TokenKind::Identifier,
                                kw ? up : std::string(word), start});
            i = end;
        } else {
            lexical(start, "illegal character '" + std::string(1, c) + "'");
        }
    }
    return out;
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)), end_offset_(text.size()) {}

    QueryAst parse_query() {
        QueryAst ast;
        expect_keyword("SELECT");
        if (accept(TokenKind::Star, "'*'")) {
            // SELECT *
        } else {
            ast.aggregates.push_back(parse_aggregate());
            while (accept(TokenKind::Comma, "','")) {
                ast.aggregates.push_back(parse_aggregate());
            }
        }
        if (accept_keyword("WHERE")) {
            ast.where.push_back(parse_term());
            while (accept_keyword("AND")) {
                ast.where.push_back(parse_term());
            }
        }
        if (accept_keyword("GROUP")) {
            group_offset_ = current_offset();
            expect_keyword("BY");
            ast.group_by = parse_group_key();
        }
        if (accept_keyword("ORDER")) {
            expect_keyword("BY");
            order_offset_ = current_offset();
            OrderBy order{parse_order_target()};
            if (accept_keyword("DESC")) {
                order.direction = Direction::Desc;
            } else {
                accept_keyword("ASC");
            }
            ast.order_by = order;
        }
        if (accept_keyword("LIMIT")) {
            const auto& t = expect(TokenKind::Integer, "integer");
            if (t.integer <= 0) {
                throw ParseError(ParseError::Kind::Semantic, t.offset, "LIMIT must be positive");
            }
            ast.limit = t.integer;
        }
        if (!at_end()) {
            syntax_error();
        }
        validate_at(ast);
        return ast;
    }

private:
    bool at_end() const { return pos_ >= tokens_.size(); }
    std::size_t current_offset() const { return at_end() ? end_offset_ : tokens_[pos_].offset; }

    [[noreturn]] void syntax_error() {
        std::vector<std::string> expected(expected_.begin(), expected_.end());
        std::string found = at_end() ? "end of input" : "'" + tokens_[pos_].text + "'";
        throw ParseError(ParseError::Kind::Syntax, current_offset(), "unexpected " + found,
                         std::move(expected));
    }

    const Token& advance() {
        expected_.clear();
        return tokens_[pos_++];
    }

    bool accept(TokenKind kind, const char* what) {
        if (!at_end() && tokens_[pos_].kind == kind) {
            advance();
            return true;
        }
        expected_.insert(what);
        return false;
    }

    bool accept_keyword(std::string_view kw) {
        if (!at_end() && tokens_[pos_].kind == TokenKind::Keyword && tokens_[pos_].text == kw) {
            advance();
            return true;
        }
        expected_.insert(std::string(kw));
        return false;
    }

    const Token& expect(TokenKind kind, const char* what) {
        if (!at_end() && tokens_[pos_].kind == kind) {
            return advance();
        }
        expected_.insert(what);
        syntax_error();
    }

    void expect_keyword(std::string_view kw) {
        if (!accept_keyword(kw)) {
            syntax_error();
        }
    }

    Field parse_field() {
        const auto& t = expect(TokenKind::Identifier, "field name");
        auto f = field_from_name(t.text);
        if (!f) {
            throw ParseError(ParseError::Kind::Semantic, t.offset,
                             "unknown field '" + t.text +
                                 "' (fields: entity_id, ts, lat, lon, alt, value)");
        }
        return *f;
    }

    static std::optional<AggKind> agg_kind(const Token& t) {
        if (t.kind != TokenKind::Keyword) {
            return std::nullopt;
        }
        if (t.text == "COUNT") return AggKind::Count;
        if (t.text == "SUM") return AggKind::Sum;
        if (t.text == "AVG") return AggKind::Avg;
        if (t.text == "MIN") return AggKind::Min;
        if (t.text == "MAX") return AggKind::Max;
        return std::nullopt;
    }

    Aggregate parse_aggregate() {
        std::optional<AggKind> kind = at_end() ? std::nullopt : agg_kind(tokens_[pos_]);
        if (!kind) {
            for (const char* k : {"COUNT", "SUM", "AVG", "MIN", "MAX"}) {
                expected_.insert(k);
            }
            syntax_error();
        }
        advance();
        expect(TokenKind::LParen, "'('");
        Aggregate agg{*kind, std::nullopt};
        if (*kind == AggKind::Count && accept(TokenKind::Star, "'*'")) {
            agg.kind = AggKind::CountAll;
        } else {
            auto field_offset = current_offset();
            agg.field = parse_field();
            if (*kind != AggKind::Count && !is_numeric(*agg.field)) {
                throw ParseError(ParseError::Kind::Semantic, field_offset,
                                 to_string(agg) + " requires a numeric field");
            }
        }
        expect(TokenKind::RParen, "')'");
        return agg;
    }

    double parse_number() {
        if (!at_end() && (tokens_[pos_].kind == TokenKind::Integer ||
                          tokens_[pos_].kind == TokenKind::Number)) {
            return advance().number;
        }
        expected_.insert("number");
        syntax_error();
    }

    PredicateTerm parse_term() {
        auto start = current_offset();
        if (accept_keyword("REGION")) {
            expect(TokenKind::LParen, "'('");
            std::array<double, 4> v{};
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (k > 0) {
                    expect(TokenKind::Comma, "','");
                }
                v[k] = parse_number();
            }
            expect(TokenKind::RParen, "')'");
            try {
                return RegionTerm{BoundingBox::make(v[0], v[1], v[2], v[3])};
            } catch (const DomainError& e) {
                throw ParseError(ParseError::Kind::Semantic, start, e.what());
            }
        }
        if (accept_keyword("TIME")) {
            expect(TokenKind::LParen, "'('");
            auto a = expect(TokenKind::Timestamp, "RFC 3339 timestamp").integer;
            expect(TokenKind::Comma, "','");
            auto b = expect(TokenKind::Timestamp, "RFC 3339 timestamp").integer;
            expect(TokenKind::RParen, "')'");
            try {
                return TimeTerm{TimeInterval::make(a, b)};
            } catch (const DomainError& e) {
                throw ParseError(ParseError::Kind::Semantic, start, e.what());
            }
        }
        auto field = parse_field();
        const auto& op = expect(TokenKind::Compare, "comparison operator");
        auto lit_offset = current_offset();
        if (field == Field::EntityId) {
            if (op.cmp != Comparator::Eq) {
                throw ParseError(ParseError::Kind::Semantic, op.offset,
                                 "entity_id supports only '=' comparisons");
            }
            if (!at_end() && (tokens_[pos_].kind == TokenKind::Integer ||
                              tokens_[pos_].kind == TokenKind::Number ||
                              tokens_[pos_].kind == TokenKind::Timestamp)) {
                throw ParseError(ParseError::Kind::Semantic, lit_offset,
                                 "entity_id compares only against a string literal");
            }
            return FieldTerm{field, op.cmp, expect(TokenKind::String, "string literal").text};
        }
        if (!at_end() && tokens_[pos_].kind == TokenKind::Timestamp) {
            if (field != Field::Ts) {
                throw ParseError(ParseError::Kind::Semantic, lit_offset,
                                 "timestamp literals compare only against ts");
            }
            return FieldTerm{field, op.cmp, advance().number};
        }
        if (!at_end() && tokens_[pos_].kind == TokenKind::String) {
            throw ParseError(ParseError::Kind::Semantic, lit_offset,
                             std::string("field ") + to_string(field) + " is numeric");
        }
        if (field == Field::Ts) {
            expected_.insert("RFC 3339 timestamp");
        }
        return FieldTerm{field, op.cmp, parse_number()};
    }

    GroupKey parse_group_key() {
        if (accept_keyword("CELL")) return GroupKey::Cell;
        if (accept_keyword("TIMEBUCKET")) return GroupKey::TimeBucket;
        if (accept_keyword("ENTITY")) return GroupKey::Entity;
        syntax_error();
    }

    OrderTarget parse_order_target() {
        if (!at_end() && agg_kind(tokens_[pos_])) {
            return parse_aggregate();
        }
        for (const char* k : {"COUNT", "SUM", "AVG", "MIN", "MAX"}) {
            expected_.insert(k);
        }
        if (!at_end() && tokens_[pos_].kind == TokenKind::Identifier) {
            return parse_field();
        }
        expected_.insert("field name");
        return parse_group_key();
    }

    void validate_at(const QueryAst& ast) {
        try {
            validate(ast);
        } catch (const ParseError& e) {
            // Re-anchor clause-level errors at the clause that caused them.
            std::size_t at = e.offset();
            if (e.message().starts_with("ORDER BY")) {
                at = order_offset_;
            } else if (e.message().starts_with("GROUP BY")) {
                at = group_offset_;
            }
            throw ParseError(ParseError::Kind::Semantic, at, e.message());
        }
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::size_t end_offset_;
    std::set<std::string> expected_;
    std::size_t order_offset_ = 0;
    std::size_t group_offset_ = 0;
};

int slot_of(AggKind kind) {
    switch (kind) {
    case AggKind::CountAll:
    case AggKind::Count:
        return 0;
    case AggKind::Sum:
        return 1;
    case AggKind::Avg:
        return 2;
    case AggKind::Min:
        return 3;
    case AggKind::Max:
        return 4;
    }
    return 0;
}

} // namespace

void validate(const QueryAst& ast) {
    auto semantic = [](std::string msg) {
        throw ParseError(ParseError::Kind::Semantic, 0, std::move(msg));
    };
    std::array<bool, 5> slots{};
    for (const auto& agg : ast.aggregates) {
        bool needs_field = agg.kind != AggKind::CountAll;
        if (needs_field != agg.field.has_value()) {
            semantic(to_string(agg) + " has the wrong arity");
        }
        if (needs_field && agg.kind != AggKind::Count && !is_numeric(*agg.field)) {
            semantic(to_string(agg) + " requires a numeric field");
        }
        auto& used = slots[static_cast<std::size_t>(slot_of(agg.kind))];
        if (used) {
            semantic("at most one aggregate of each kind may be selected (COUNT(*) and COUNT(field) "
                     "share one result slot): " + to_string(agg));
        }
        used = true;
    }
    int regions = 0;
    int times = 0;
    for (const auto& term : ast.where) {
        if (const auto* r = std::get_if<RegionTerm>(&term)) {
            ++regions;
            try {
                BoundingBox::make(r->bbox.min_lat, r->bbox.min_lon, r->bbox.max_lat,
                                  r->bbox.max_lon);
            } catch (const DomainError& e) {
                semantic(e.what());
            }
        } else if (const auto* t = std::get_if<TimeTerm>(&term)) {
            ++times;
            if (t->interval.start_ts >= t->interval.end_ts) {
                semantic("TIME interval must satisfy start < end");
            }
        } else {
            const auto& f = std::get<FieldTerm>(term);
            bool is_string = std::holds_alternative<std::string>(f.literal);
            if (f.field == Field::EntityId) {
                if (!is_string || f.cmp != Comparator::Eq) {
                    semantic("entity_id supports only '=' against a string literal");
                }
            } else if (is_string) {
                semantic(std::string("field ") + to_string(f.field) + " is numeric");
            }
        }
    }
    if (regions > 1) {
        semantic("at most one REGION term is allowed");
    }
    if (times > 1) {
        semantic("at most one TIME term is allowed");
    }
    if (ast.group_by && ast.all_rows()) {
        semantic("GROUP BY requires aggregate select");
    }
    if (ast.order_by) {
        const auto& target = ast.order_by->target;
        if (const auto* agg = std::get_if<Aggregate>(&target)) {
            if (std::find(ast.aggregates.begin(), ast.aggregates.end(), *agg) ==
                ast.aggregates.end()) {
                semantic("ORDER BY " + to_string(*agg) + " is not selected");
            }
        } else if (const auto* key = std::get_if<GroupKey>(&target)) {
            if (ast.group_by != *key) {
                semantic(std::string("ORDER BY ") + to_string(*key) + " requires GROUP BY " +
                         to_string(*key));
            }
        } else if (!ast.all_rows()) {
            semantic(std::string("ORDER BY field ") + to_string(std::get<Field>(target)) +
                     " is only allowed for SELECT *");
        }
    }
    if (ast.limit && *ast.limit <= 0) {
        semantic("LIMIT must be positive");
    }
}

QueryAst parse(std::string_view text) { return Parser(text).parse_query(); }

std::string pretty(const QueryAst& ast) {
    std::string out = "SELECT ";
    if (ast.all_rows()) {
        out += "*";
    } else {
        for (std::size_t i = 0; i < ast.aggregates.size(); ++i) {
            if (i > 0) {
                out += ", ";
            }
            out += to_string(ast.aggregates[i]);
        }
    }
    for (std::size_t i = 0; i < ast.where.size(); ++i) {
        out += i == 0 ? " WHERE " : " AND ";
        const auto& term = ast.where[i];
        if (const auto* r = std::get_if<RegionTerm>(&term)) {
            out += "REGION(" + format_double(r->bbox.min_lat) + ", " +
                   format_double(r->bbox.min_lon) + ", " + format_double(r->bbox.max_lat) + ", " +
                   format_double(r->bbox.max_lon) + ")";
        } else if (const auto* t = std::get_if<TimeTerm>(&term)) {
            out += "TIME(" + format_rfc3339(t->interval.start_ts) + ", " +
                   format_rfc3339(t->interval.end_ts) + ")";
        } else {
            const auto& f = std::get<FieldTerm>(term);
            out += std::string(to_string(f.field)) + " " + to_string(f.cmp) + " ";
            if (const auto* s = std::get_if<std::string>(&f.literal)) {
                out += '\'';
                for (char c : *s) {
                    out += c;
                    if (c == '\'') {
                        out += '\'';
                    }
                }
                out += '\'';
            } else {
                out += format_double(std::get<double>(f.literal));
            }
        }
    }
    if (ast.group_by) {
        out += std::string(" GROUP BY ") + to_string(*ast.group_by);
    }
    if (ast.order_by) {
        out += " ORDER BY ";
        const auto& target = ast.order_by->target;
        if (const auto* agg = std::get_if<Aggregate>(&target)) {
            out += to_string(*agg);
        } else if (const auto* key = std::get_if<GroupKey>(&target)) {
            out += to_string(*key);
        } else {
            out += to_string(std::get<Field>(target));
        }
        out += ast.order_by->direction == Direction::Desc ? " DESC" : " ASC";
    }
    if (ast.limit) {
        out += " LIMIT " + std::to_string(*ast.limit);
    }
    return out;
}

} // namespace stq

#include "stq/text.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace stq {

std::string format_double(double value) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
    if (text.empty()) {
        return std::nullopt;
    }
    // from_chars rejects a leading '+', which CSV producers sometimes emit.
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    double out = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(out)) {
        return std::nullopt;
    }
    return out;
}

std::optional<std::int64_t> parse_int64(std::string_view text) {
    if (text.empty()) {
        return std::nullopt;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    std::int64_t out = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return out;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(text.substr(start));
            return out;
        }
        out.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        auto end = pos == std::string_view::npos ? text.size() : pos;
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        out.push_back(line);
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view text) {
    const auto* ws = " \t\r\n";
    auto b = text.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = text.find_last_not_of(ws);
    return text.substr(b, e - b + 1);
}

} // namespace stq

#ifndef KNNAVG_IO_HPP
#define KNNAVG_IO_HPP

#include <array>
#include <charconv>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "knnavg/core.hpp"

namespace knnavg::io {

/// Shortest decimal text that parses back to exactly `value`.
inline auto format_double(double value) -> std::string
{
    std::array<char, 64> buf{};
    auto const [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    require(ec == std::errc{}, "format_double: conversion failed");
    return { buf.data(), end };
}

inline auto parse_double(std::string_view text) -> double
{
    double value = 0.0;
    if (text == "inf") { return std::numeric_limits<double>::infinity(); }
    if (text == "-inf") { return -std::numeric_limits<double>::infinity(); }
    auto const [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    require(ec == std::errc{} && end == text.data() + text.size(), "parse_double: malformed number '" + std::string(text) + "'");
    return value;
}

inline auto parse_u64(std::string_view text) -> std::uint64_t
{
    std::uint64_t value = 0;
    auto const [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    require(ec == std::errc{} && end == text.data() + text.size(), "parse_u64: malformed integer '" + std::string(text) + "'");
    return value;
}

// Fields never contain commas or quotes, so no quoting is needed.
inline auto split_csv(std::string_view line) -> std::vector<std::string_view>
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto const pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

inline auto join_csv(std::vector<std::string> const& fields) -> std::string
{
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) { out += ','; }
        out += fields[i];
    }
    return out;
}

} // namespace knnavg::io

#endif

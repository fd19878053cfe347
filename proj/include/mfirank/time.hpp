#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mfirank {

// All timestamps are naive wall-clock times in one zone; no conversion is ever applied.
using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;
using Date = std::chrono::sys_days;

namespace detail {

inline bool parse_fixed_int(std::string_view s, int& out) {
    for (char c : s)
        if (c < '0' || c > '9') return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

inline void append_padded(std::string& out, long value, int width) {
    std::string digits = std::to_string(value < 0 ? -value : value);
    if (value < 0) out.push_back('-');
    for (int i = static_cast<int>(digits.size()); i < width; ++i) out.push_back('0');
    out += digits;
}

} // namespace detail

/// Parses "YYYY-MM-DD HH:MM:SS". Returns nullopt on any deviation from that format.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    if (s.size() != 19 || s[4] != '-' || s[7] != '-' || s[10] != ' ' || s[13] != ':' || s[16] != ':')
        return std::nullopt;
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
    if (!detail::parse_fixed_int(s.substr(0, 4), y) || !detail::parse_fixed_int(s.substr(5, 2), mo) ||
        !detail::parse_fixed_int(s.substr(8, 2), d) || !detail::parse_fixed_int(s.substr(11, 2), h) ||
        !detail::parse_fixed_int(s.substr(14, 2), mi) || !detail::parse_fixed_int(s.substr(17, 2), se))
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return std::nullopt;
    return Timestamp{Date{ymd}} + std::chrono::hours{h} + std::chrono::minutes{mi} + Seconds{se};
}

inline Date day_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }

/// "YYYY-MM-DD"
inline std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    std::string out;
    detail::append_padded(out, static_cast<int>(ymd.year()), 4);
    out.push_back('-');
    detail::append_padded(out, static_cast<unsigned>(ymd.month()), 2);
    out.push_back('-');
    detail::append_padded(out, static_cast<unsigned>(ymd.day()), 2);
    return out;
}

/// "YYYY-MM-DD HH:MM:SS", the inverse of parse_timestamp.
inline std::string format_timestamp(Timestamp t) {
    const Date d = day_of(t);
    const std::chrono::hh_mm_ss hms{t - Timestamp{d}};
    std::string out = format_date(d);
    out.push_back(' ');
    detail::append_padded(out, hms.hours().count(), 2);
    out.push_back(':');
    detail::append_padded(out, hms.minutes().count(), 2);
    out.push_back(':');
    detail::append_padded(out, hms.seconds().count(), 2);
    return out;
}

/// Monday 00:00 of the ISO week containing `t`.
inline Date iso_week_start(Timestamp t) {
    const Date d = day_of(t);
    const std::chrono::weekday wd{d};
    return d - std::chrono::days{wd.iso_encoding() - 1};
}

} // namespace mfirank

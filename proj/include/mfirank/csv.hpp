#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfirank/error.hpp"

namespace mfirank::csv {

struct Row {
    std::size_t line = 0; // 1-based physical line where the row starts
    std::vector<std::string> fields;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Index of `name` in the header, or nullopt.
    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF, optional UTF-8 BOM.
/// An empty stream yields an empty table with no header.
inline Table read(std::istream& in) {
    const std::string text{std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
    std::string_view s = text;
    if (s.starts_with("\xEF\xBB\xBF")) s.remove_prefix(3);

    Table table;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    auto end_row = [&] {
        fields.push_back(std::move(field));
        field.clear();
        const bool blank = fields.size() == 1 && fields[0].empty();
        if (!blank) {
            if (table.header.empty())
                table.header = std::move(fields);
            else
                table.rows.push_back(Row{row_line, std::move(fields)});
        }
        fields.clear();
        row_has_content = false;
    };

    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < s.size() && s[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (!row_has_content) row_line = line;
        row_has_content = true;
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            if (i + 1 < s.size() && s[i + 1] == '\n') continue;
            end_row();
            ++line;
        } else if (c == '\n') {
            end_row();
            ++line;
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) throw DataError("csv: unterminated quoted field starting near line " + std::to_string(row_line));
    if (row_has_content) end_row();
    return table;
}

inline bool needs_quoting(std::string_view v) {
    return v.find_first_of(",\"\r\n") != std::string_view::npos || (!v.empty() && (v.front() == ' ' || v.back() == ' '));
}

inline void write_field(std::ostream& out, std::string_view v) {
    if (!needs_quoting(v)) {
        out << v;
        return;
    }
    out << '"';
    for (char c : v) {
        if (c == '"') out << '"';
        out << c;
    }
    out << '"';
}

inline void write_row(std::ostream& out, std::span<const std::string> fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        write_field(out, fields[i]);
    }
    out << '\n';
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_number(double v) {
    if (v == 0.0) return "0"; // folds -0
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// Accepts "4", "4.0", "4.000"; rejects fractional values.
inline std::optional<long long> parse_integral(std::string_view s) {
    const auto v = parse_number(s);
    if (!v || std::floor(*v) != *v || std::fabs(*v) > 9.0e15) return std::nullopt;
    return static_cast<long long>(*v);
}

} // namespace mfirank::csv

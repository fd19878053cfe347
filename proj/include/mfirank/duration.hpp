#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfirank/time.hpp"

namespace mfirank {

/// Pattern table for free-text SLA phrases ("в течение 20 минут", "моментально").
///
/// A phrase is lower-cased (ASCII and Cyrillic), then:
///   - if it has no number and contains an instant keyword, it maps to zero;
///   - otherwise the largest number in it is the quantity (ranges resolve to their upper
///     bound), or 1 when a unit appears without a number ("в течение часа");
///   - the unit is the table entry matching earliest after the last number.
/// Anything else is unparseable, which is distinct from zero.
struct DurationTable {
    struct Unit {
        std::string match; // lower-case substring
        std::int64_t seconds = 0;
    };
    std::vector<Unit> units{{"сек", 1},        {"мин", 60},      {"час", 3600},    {"сут", 86400},
                            {"дн", 86400},     {"ден", 86400},   {"недел", 604800}, {"sec", 1},
                            {"min", 60},       {"hour", 3600},   {"day", 86400},   {"week", 604800}};
    std::vector<std::string> instant{"моментально", "мгновенно", "сразу", "instant", "immediately"};
};

/// UTF-8 lower-casing for ASCII and the basic Cyrillic block (А-Я, Ё).
inline std::string utf8_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (c >= 'A' && c <= 'Z') {
            out.push_back(static_cast<char>(c + 32));
        } else if (c == 0xD0 && i + 1 < s.size()) {
            const auto d = static_cast<unsigned char>(s[i + 1]);
            if (d >= 0x90 && d <= 0x9F) { // А-П
                out.push_back(static_cast<char>(0xD0));
                out.push_back(static_cast<char>(d + 0x20));
            } else if (d >= 0xA0 && d <= 0xAF) { // Р-Я
                out.push_back(static_cast<char>(0xD1));
                out.push_back(static_cast<char>(d - 0x20));
            } else if (d == 0x81) { // Ё
                out.push_back(static_cast<char>(0xD1));
                out.push_back(static_cast<char>(0x91));
            } else {
                out.push_back(static_cast<char>(c));
                out.push_back(static_cast<char>(d));
            }
            ++i;
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

/// Declared duration in seconds, or nullopt when the phrase matches nothing in the table.
inline std::optional<Seconds> parse_declared_duration(std::string_view phrase, const DurationTable& table = {}) {
    const std::string text = utf8_lower(phrase);

    double quantity = -1.0;
    std::size_t after_last_number = 0;
    for (std::size_t i = 0; i < text.size();) {
        if (text[i] < '0' || text[i] > '9') {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && text[j] >= '0' && text[j] <= '9') ++j;
        std::string number = text.substr(i, j - i);
        if (j + 1 < text.size() && (text[j] == '.' || text[j] == ',') && text[j + 1] >= '0' && text[j + 1] <= '9') {
            number.push_back('.');
            ++j;
            while (j < text.size() && text[j] >= '0' && text[j] <= '9') number.push_back(text[j++]);
        }
        quantity = std::max(quantity, std::stod(number));
        after_last_number = j;
        i = j;
    }

    if (quantity < 0.0) {
        for (const auto& word : table.instant)
            if (text.find(utf8_lower(word)) != std::string::npos) return Seconds{0};
    }

    const std::size_t search_from = quantity < 0.0 ? 0 : after_last_number;
    std::size_t best_pos = std::string::npos;
    std::int64_t unit_seconds = 0;
    for (const auto& unit : table.units) {
        const auto pos = text.find(utf8_lower(unit.match), search_from);
        if (pos < best_pos) {
            best_pos = pos;
            unit_seconds = unit.seconds;
        }
    }
    if (best_pos == std::string::npos) return std::nullopt;
    if (quantity < 0.0) quantity = 1.0;
    return Seconds{static_cast<std::int64_t>(std::llround(quantity * static_cast<double>(unit_seconds)))};
}

} // namespace mfirank

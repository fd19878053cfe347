#pragma once

#include <chrono>
#include <optional>
#include <sstream>
#include <string>

#include "mfirank/mfirank.hpp"

namespace testing {

using namespace mfirank;

inline Timestamp ts(std::string_view text) {
    auto t = parse_timestamp(text);
    if (!t) throw std::runtime_error("bad test timestamp " + std::string(text));
    return *t;
}

inline Timestamp base_time() { return ts("2023-01-02 00:00:00"); }

inline Timestamp at(std::int64_t seconds_from_base) { return base_time() + std::chrono::seconds{seconds_from_base}; }

/// Conversion record with the fields tests usually care about.
inline ConversionRecord app(std::string mfi, std::string client, Status status, Timestamp click = base_time(),
                            std::optional<std::int64_t> conv_after = std::nullopt,
                            std::optional<std::int64_t> sale_after = std::nullopt, std::optional<double> income = std::nullopt) {
    ConversionRecord r;
    r.mfi_id = std::move(mfi);
    r.client_id = std::move(client);
    r.status = status;
    r.card_id = "card-" + r.mfi_id;
    r.page_id = "main";
    r.click_time = click;
    if (conv_after) r.conversion_time = click + std::chrono::seconds{*conv_after};
    if (sale_after && r.conversion_time) r.sale_time = *r.conversion_time + std::chrono::seconds{*sale_after};
    if (status == Status::sale) r.income = income ? income : std::optional<double>(100.0);
    return r;
}

inline ProductRecord product(std::string mfi, std::optional<double> rating = 4.0, std::int64_t reviews = 10) {
    ProductRecord p;
    p.mfi_id = mfi;
    p.card_id = "card-" + mfi;
    p.avg_user_rating = rating;
    p.n_reviews = reviews;
    p.consideration_time = "в течение 20 минут";
    p.payment_time = "моментально";
    return p;
}

inline ClickRecord click(std::string mfi, std::string client, Timestamp t = base_time()) {
    ClickRecord c;
    c.mfi_id = mfi;
    c.card_id = "card-" + mfi;
    c.client_id = std::move(client);
    c.click_time = t;
    c.page_id = "main";
    return c;
}

template <class Records, class Writer>
std::string serialize(const Records& records, Writer writer) {
    std::ostringstream out;
    writer(out, records, SchemaConfig{});
    return out.str();
}

} // namespace testing

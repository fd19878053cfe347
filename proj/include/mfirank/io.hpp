#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfirank/csv.hpp"
#include "mfirank/error.hpp"
#include "mfirank/records.hpp"
#include "mfirank/schema.hpp"
#include "mfirank/time.hpp"

namespace mfirank {

struct RowError {
    std::size_t line = 0;
    std::string column;
    std::string message;
};

template <class Record>
struct Parsed {
    std::vector<Record> records;
    std::vector<RowError> errors; // rows listed here were dropped
};

namespace detail {

/// Resolves logical columns against a parsed header.
class FieldLookup {
public:
    template <std::size_t N, std::size_t M>
    FieldLookup(const csv::Table& table, const ColumnMap& map, const std::array<std::string_view, N>& logical,
                const std::array<std::string_view, M>& required, std::string_view file_kind) {
        for (auto name : logical) index_[std::string(name)] = table.column(map.header(name));
        for (auto name : required) {
            if (!index_[std::string(name)])
                throw DataError(std::string(file_kind) + ": missing mandatory column '" + map.header(name) + "'");
        }
        header_size_ = table.header.size();
    }

    std::string_view get(const csv::Row& row, std::string_view logical) const {
        const auto& idx = index_.at(std::string(logical));
        if (!idx || *idx >= row.fields.size()) return {};
        return row.fields[*idx];
    }

    std::size_t header_size() const { return header_size_; }

private:
    std::map<std::string, std::optional<std::size_t>> index_;
    std::size_t header_size_ = 0;
};

struct RowFailure {
    std::string column;
    std::string message;
};

inline std::optional<int> positive_int(std::string_view s) {
    const auto v = csv::parse_integral(s);
    if (!v || *v < 1 || *v > 1'000'000'000) return std::nullopt;
    return static_cast<int>(*v);
}

inline std::optional<double> non_negative(std::string_view s) {
    const auto v = csv::parse_number(s);
    if (!v || *v < 0.0) return std::nullopt;
    return v;
}

inline std::string opt_text(const std::optional<double>& v) { return v ? csv::format_number(*v) : std::string{}; }
inline std::string opt_text(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string{}; }
inline std::string opt_text(const std::optional<Timestamp>& v) { return v ? format_timestamp(*v) : std::string{}; }

template <std::size_t N>
void write_header(std::ostream& out, const ColumnMap& map, const std::array<std::string_view, N>& logical) {
    std::vector<std::string> header;
    for (auto name : logical) header.push_back(map.header(name));
    csv::write_row(out, header);
}

} // namespace detail

/// Parses the conversion CSV. Missing mandatory columns throw; a bad click_time, loan type or
/// field count drops the row into `errors`. Unparseable optional fields become absent.
inline Parsed<ConversionRecord> parse_conversions(std::istream& in, const SchemaConfig& schema = {}) {
    const csv::Table table = csv::read(in);
    Parsed<ConversionRecord> out;
    if (table.header.empty()) return out;
    const detail::FieldLookup f(table, schema.conversions, columns::conversion, columns::conversion_required,
                                "conversions");
    const auto& dict = schema.dictionaries;
    out.records.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (row.fields.size() != f.header_size()) {
            out.errors.push_back({row.line, "", "expected " + std::to_string(f.header_size()) + " fields, got " +
                                                    std::to_string(row.fields.size())});
            continue;
        }
        ConversionRecord r;
        const auto click = parse_timestamp(f.get(row, "click_time"));
        if (!click) {
            out.errors.push_back({row.line, "click_time", "malformed timestamp '" + std::string(f.get(row, "click_time")) + "'"});
            continue;
        }
        const auto loan = dict.parse_loan_type(f.get(row, "loan_type"));
        if (!loan) {
            out.errors.push_back({row.line, "loan_type", "unknown loan type '" + std::string(f.get(row, "loan_type")) + "'"});
            continue;
        }
        r.click_time = *click;
        r.loan_type = *loan;
        r.mfi_id = f.get(row, "mfi_id");
        r.card_id = f.get(row, "card_id");
        r.page_id = f.get(row, "page_id");
        r.page_rank = detail::positive_int(f.get(row, "page_rank"));
        r.global_rank = detail::positive_int(f.get(row, "global_rank"));
        r.conversion_time = parse_timestamp(f.get(row, "conversion_time"));
        r.sale_time = parse_timestamp(f.get(row, "sale_time"));
        r.status = dict.parse_status(f.get(row, "status"));
        r.income = detail::non_negative(f.get(row, "income"));
        r.client_id = f.get(row, "client_id");
        r.geo = {std::string(f.get(row, "country")), std::string(f.get(row, "region")), std::string(f.get(row, "city"))};
        r.device = {std::string(f.get(row, "device_type")),     std::string(f.get(row, "device")),
                    std::string(f.get(row, "os")),              std::string(f.get(row, "browser")),
                    std::string(f.get(row, "connection_type")), std::string(f.get(row, "provider"))};
        out.records.push_back(std::move(r));
    }
    return out;
}

/// Parses the product CSV. A repeated card_id throws; out-of-range ratings, unknown boolean
/// spellings and inverted min/max bounds drop the row into `errors`.
inline Parsed<ProductRecord> parse_products(std::istream& in, const SchemaConfig& schema = {}) {
    const csv::Table table = csv::read(in);
    Parsed<ProductRecord> out;
    if (table.header.empty()) return out;
    const detail::FieldLookup f(table, schema.products, columns::product, columns::product_required, "products");
    const auto& dict = schema.dictionaries;
    std::set<std::string> seen_cards;

    for (const auto& row : table.rows) {
        if (row.fields.size() != f.header_size()) {
            out.errors.push_back({row.line, "", "expected " + std::to_string(f.header_size()) + " fields, got " +
                                                    std::to_string(row.fields.size())});
            continue;
        }
        ProductRecord p;
        p.mfi_id = f.get(row, "mfi_id");
        p.card_id = f.get(row, "card_id");
        if (!seen_cards.insert(p.card_id).second)
            throw DataError("products: duplicate card_id '" + p.card_id + "' at line " + std::to_string(row.line));

        std::optional<detail::RowFailure> failure;
        auto fail = [&](std::string column, std::string message) {
            if (!failure) failure = detail::RowFailure{std::move(column), std::move(message)};
        };

        const auto loan_text = f.get(row, "loan_type");
        if (loan_text.empty()) {
            p.loan_type = LoanType::standard;
        } else if (auto loan = dict.parse_loan_type(loan_text)) {
            p.loan_type = *loan;
        } else {
            fail("loan_type", "unknown loan type '" + std::string(loan_text) + "'");
        }

        p.region = f.get(row, "region");
        p.work_schedule = f.get(row, "work_schedule");
        p.application_receipt_schedule = f.get(row, "application_receipt_schedule");
        p.processing_and_payment_schedule = f.get(row, "processing_and_payment_schedule");
        p.submission_method = f.get(row, "submission_method");
        p.calls = f.get(row, "calls");
        p.documents = f.get(row, "documents");
        p.identification = f.get(row, "identification");
        p.application_processing = f.get(row, "application_processing");
        p.consideration_time = f.get(row, "consideration_time");
        p.payment_time = f.get(row, "payment_time");
        p.payment_method = f.get(row, "payment_method");
        p.repayment_method = f.get(row, "repayment_method");

        const auto reviews_text = f.get(row, "n_reviews");
        if (!reviews_text.empty()) {
            const auto n = csv::parse_integral(reviews_text);
            if (!n || *n < 0)
                fail("n_reviews", "invalid review count '" + std::string(reviews_text) + "'");
            else
                p.n_reviews = *n;
        }
        const auto rating_text = f.get(row, "avg_user_rating");
        if (!rating_text.empty()) {
            const auto rating = csv::parse_number(rating_text);
            if (!rating || *rating < 1.0 || *rating > 5.0)
                fail("avg_user_rating", "rating '" + std::string(rating_text) + "' outside [1,5]");
            else
                p.avg_user_rating = rating;
        } else if (p.n_reviews > 0) {
            fail("avg_user_rating", "rating missing although n_reviews > 0");
        }

        auto boolean = [&](std::string_view column, bool& target) {
            const auto text = f.get(row, column);
            if (auto b = dict.parse_bool(text))
                target = *b;
            else
                fail(std::string(column), "unrecognised boolean '" + std::string(text) + "'");
        };
        boolean("unreliability", p.unreliability);
        boolean("bad_credit_score", p.bad_credit_score);
        boolean("loan_extension", p.loan_extension);

        auto bounds = [&](std::string_view lo_col, std::string_view hi_col, std::optional<double>& lo,
                          std::optional<double>& hi) {
            lo = csv::parse_number(f.get(row, lo_col));
            hi = csv::parse_number(f.get(row, hi_col));
            if (lo && hi && *lo > *hi) fail(std::string(lo_col), std::string(lo_col) + " exceeds " + std::string(hi_col));
        };
        bounds("loan_amount_min", "loan_amount_max", p.loan_amount_min, p.loan_amount_max);
        bounds("loan_term_min", "loan_term_max", p.loan_term_min, p.loan_term_max);
        bounds("interest_min", "interest_max", p.interest_min, p.interest_max);
        bounds("age_min", "age_max", p.age_min, p.age_max);

        if (failure) {
            out.errors.push_back({row.line, failure->column, failure->message});
            continue;
        }
        out.records.push_back(std::move(p));
    }
    return out;
}

/// Parses the click CSV (the eight published columns).
inline Parsed<ClickRecord> parse_clicks(std::istream& in, const SchemaConfig& schema = {}) {
    const csv::Table table = csv::read(in);
    Parsed<ClickRecord> out;
    if (table.header.empty()) return out;
    const detail::FieldLookup f(table, schema.clicks, columns::click, columns::click_required, "clicks");
    const auto& dict = schema.dictionaries;
    out.records.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (row.fields.size() != f.header_size()) {
            out.errors.push_back({row.line, "", "expected " + std::to_string(f.header_size()) + " fields, got " +
                                                    std::to_string(row.fields.size())});
            continue;
        }
        const auto click = parse_timestamp(f.get(row, "click_time"));
        if (!click) {
            out.errors.push_back({row.line, "click_time", "malformed timestamp '" + std::string(f.get(row, "click_time")) + "'"});
            continue;
        }
        ClickRecord c;
        c.click_time = *click;
        const auto loan_text = f.get(row, "loan_type");
        if (!loan_text.empty()) {
            const auto loan = dict.parse_loan_type(loan_text);
            if (!loan) {
                out.errors.push_back({row.line, "loan_type", "unknown loan type '" + std::string(loan_text) + "'"});
                continue;
            }
            c.loan_type = *loan;
        }
        c.mfi_id = f.get(row, "mfi_id");
        c.card_id = f.get(row, "card_id");
        c.client_id = f.get(row, "client_id");
        c.page_id = f.get(row, "page_id");
        c.page_rank = detail::positive_int(f.get(row, "page_rank"));
        c.income = detail::non_negative(f.get(row, "income"));
        out.records.push_back(std::move(c));
    }
    return out;
}

inline void write_conversions(std::ostream& out, std::span<const ConversionRecord> records, const SchemaConfig& schema = {}) {
    detail::write_header(out, schema.conversions, columns::conversion);
    for (const auto& r : records) {
        const std::vector<std::string> row{
            r.mfi_id,
            std::string(to_string(r.loan_type)),
            r.card_id,
            r.page_id,
            detail::opt_text(r.page_rank),
            detail::opt_text(r.global_rank),
            format_timestamp(r.click_time),
            detail::opt_text(r.conversion_time),
            detail::opt_text(r.sale_time),
            std::string(to_string(r.status)),
            detail::opt_text(r.income),
            r.client_id,
            r.geo.country,
            r.geo.region,
            r.geo.city,
            r.device.device_type,
            r.device.device,
            r.device.os,
            r.device.browser,
            r.device.connection_type,
            r.device.provider};
        csv::write_row(out, row);
    }
}

inline void write_products(std::ostream& out, std::span<const ProductRecord> records, const SchemaConfig& schema = {}) {
    detail::write_header(out, schema.products, columns::product);
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    for (const auto& p : records) {
        const std::vector<std::string> row{p.mfi_id,
                                           p.card_id,
                                           std::string(to_string(p.loan_type)),
                                           p.region,
                                           p.work_schedule,
                                           p.application_receipt_schedule,
                                           p.processing_and_payment_schedule,
                                           p.submission_method,
                                           p.calls,
                                           p.documents,
                                           p.identification,
                                           p.application_processing,
                                           p.consideration_time,
                                           p.payment_time,
                                           p.payment_method,
                                           p.repayment_method,
                                           detail::opt_text(p.avg_user_rating),
                                           std::to_string(p.n_reviews),
                                           b(p.unreliability),
                                           b(p.bad_credit_score),
                                           b(p.loan_extension),
                                           detail::opt_text(p.loan_amount_min),
                                           detail::opt_text(p.loan_amount_max),
                                           detail::opt_text(p.loan_term_min),
                                           detail::opt_text(p.loan_term_max),
                                           detail::opt_text(p.interest_min),
                                           detail::opt_text(p.interest_max),
                                           detail::opt_text(p.age_min),
                                           detail::opt_text(p.age_max)};
        csv::write_row(out, row);
    }
}

inline void write_clicks(std::ostream& out, std::span<const ClickRecord> records, const SchemaConfig& schema = {}) {
    detail::write_header(out, schema.clicks, columns::click);
    for (const auto& c : records) {
        const std::vector<std::string> row{c.mfi_id,
                                           c.card_id,
                                           format_timestamp(c.click_time),
                                           c.client_id,
                                           c.page_id,
                                           detail::opt_text(c.page_rank),
                                           std::string(to_string(c.loan_type)),
                                           detail::opt_text(c.income)};
        csv::write_row(out, row);
    }
}

} // namespace mfirank

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "mfirank/error.hpp"
#include "mfirank/records.hpp"

namespace mfirank {

/// Logical column names. Header names in the files default to these and can be remapped.
namespace columns {

inline constexpr std::array<std::string_view, 21> conversion = {
    "mfi_id",  "loan_type",   "card_id", "page_id", "page_rank",   "global_rank",     "click_time",
    "conversion_time", "sale_time", "status", "income",  "client_id", "country", "region",
    "city",    "device_type", "device",  "os",      "browser",     "connection_type", "provider"};

inline constexpr std::array<std::string_view, 5> conversion_required = {"mfi_id", "client_id", "click_time", "status",
                                                                        "loan_type"};

inline constexpr std::array<std::string_view, 29> product = {
    "mfi_id",           "card_id",          "loan_type",
    "region",           "work_schedule",    "application_receipt_schedule",
    "processing_and_payment_schedule",      "submission_method",
    "calls",            "documents",        "identification",
    "application_processing",               "consideration_time",
    "payment_time",     "payment_method",   "repayment_method",
    "avg_user_rating",  "n_reviews",        "unreliability",
    "bad_credit_score", "loan_extension",   "loan_amount_min",
    "loan_amount_max",  "loan_term_min",    "loan_term_max",
    "interest_min",     "interest_max",     "age_min",
    "age_max"};

inline constexpr std::array<std::string_view, 2> product_required = {"mfi_id", "card_id"};

inline constexpr std::array<std::string_view, 8> click = {"mfi_id",  "card_id",   "click_time", "client_id",
                                                          "page_id", "page_rank", "loan_type",  "income"};

inline constexpr std::array<std::string_view, 3> click_required = {"mfi_id", "client_id", "click_time"};

} // namespace columns

/// Maps logical column names to the header names used in a particular file.
class ColumnMap {
public:
    void set(std::string logical, std::string header) { overrides_[std::move(logical)] = std::move(header); }

    std::string header(std::string_view logical) const {
        if (auto it = overrides_.find(std::string(logical)); it != overrides_.end()) return it->second;
        return std::string(logical);
    }

    const std::map<std::string, std::string>& overrides() const { return overrides_; }

private:
    std::map<std::string, std::string> overrides_;
};

/// String-to-enum dictionaries used while parsing. Canonical spellings are always accepted.
struct Dictionaries {
    std::map<std::string, Status> status{{"sale", Status::sale}, {"rejected", Status::rejected}};
    std::map<std::string, LoanType> loan_type{{"loan-usual", LoanType::standard}};
    std::map<std::string, bool> boolean{{"Да", true},    {"Нет", false},  {"Есть", true}, {"да", true},
                                        {"нет", false},  {"есть", true},  {"True", true}, {"False", false},
                                        {"true", true},  {"false", false}, {"1", true},   {"0", false},
                                        {"1.0", true},   {"0.0", false}};

    /// Anything not listed maps to pending.
    Status parse_status(std::string_view s) const {
        if (auto it = status.find(std::string(s)); it != status.end()) return it->second;
        return Status::pending;
    }

    std::optional<LoanType> parse_loan_type(std::string_view s) const {
        if (s == "standard") return LoanType::standard;
        if (s == "long-term") return LoanType::long_term;
        if (s == "interest-free") return LoanType::interest_free;
        if (auto it = loan_type.find(std::string(s)); it != loan_type.end()) return it->second;
        return std::nullopt;
    }

    /// Empty means false; an unknown non-empty spelling is nullopt.
    std::optional<bool> parse_bool(std::string_view s) const {
        if (s.empty()) return false;
        if (auto it = boolean.find(std::string(s)); it != boolean.end()) return it->second;
        return std::nullopt;
    }
};

struct SchemaConfig {
    ColumnMap conversions;
    ColumnMap products;
    ColumnMap clicks;
    Dictionaries dictionaries;
};

} // namespace mfirank

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "mfirank/time.hpp"

namespace mfirank {

enum class LoanType : std::uint8_t { standard, long_term, interest_free };
enum class Status : std::uint8_t { pending, sale, rejected };

inline std::string_view to_string(LoanType t) {
    switch (t) {
    case LoanType::standard: return "standard";
    case LoanType::long_term: return "long-term";
    case LoanType::interest_free: return "interest-free";
    }
    return "standard";
}

inline std::string_view to_string(Status s) {
    switch (s) {
    case Status::pending: return "pending";
    case Status::sale: return "sale";
    case Status::rejected: return "rejected";
    }
    return "pending";
}

inline bool is_final(Status s) { return s != Status::pending; }

struct Geo {
    std::string country;
    std::string region;
    std::string city;
    bool operator==(const Geo&) const = default;
};

struct Device {
    std::string device_type;
    std::string device;
    std::string os;
    std::string browser;
    std::string connection_type;
    std::string provider;
    bool operator==(const Device&) const = default;
};

/// One submitted loan application.
struct ConversionRecord {
    std::string mfi_id;
    LoanType loan_type = LoanType::standard;
    std::string card_id;
    std::string page_id;
    std::optional<int> page_rank;
    std::optional<int> global_rank;
    Timestamp click_time{};
    std::optional<Timestamp> conversion_time;
    std::optional<Timestamp> sale_time;
    Status status = Status::pending;
    std::optional<double> income;
    std::string client_id;
    Geo geo;
    Device device;

    bool operator==(const ConversionRecord&) const = default;
};

/// One MFI card (an MFI offering one loan type).
struct ProductRecord {
    std::string mfi_id;
    std::string card_id;
    LoanType loan_type = LoanType::standard;
    std::string region;
    std::string work_schedule;
    std::string application_receipt_schedule;
    std::string processing_and_payment_schedule;
    std::string submission_method;
    std::string calls;
    std::string documents;
    std::string identification;
    std::string application_processing;
    std::string consideration_time;
    std::string payment_time;
    std::string payment_method;
    std::string repayment_method;
    std::optional<double> avg_user_rating;
    std::int64_t n_reviews = 0;
    bool unreliability = false;
    bool bad_credit_score = false;
    bool loan_extension = false;
    std::optional<double> loan_amount_min, loan_amount_max;
    std::optional<double> loan_term_min, loan_term_max;
    std::optional<double> interest_min, interest_max;
    std::optional<double> age_min, age_max;

    bool operator==(const ProductRecord&) const = default;
};

/// A click-out from the aggregator, with or without a subsequent conversion.
struct ClickRecord {
    std::string mfi_id;
    std::string card_id;
    Timestamp click_time{};
    std::string client_id;
    std::string page_id;
    std::optional<int> page_rank;
    LoanType loan_type = LoanType::standard;
    std::optional<double> income;

    bool operator==(const ClickRecord&) const = default;
};

/// Durations between the three application timestamps.
struct Timeline {
    std::optional<Seconds> conversion_period; // click -> conversion
    std::optional<Seconds> processing_period; // conversion -> sale
    bool valid = true;                        // false when a difference came out negative

    bool operator==(const Timeline&) const = default;
};

/// Conversion and processing periods of one application. A negative difference marks the
/// record invalid and leaves both periods absent.
inline Timeline derive_timeline(const ConversionRecord& r) {
    Timeline t;
    if (!r.conversion_time) return t;
    const Seconds conv = *r.conversion_time - r.click_time;
    if (conv.count() < 0) return Timeline{std::nullopt, std::nullopt, false};
    t.conversion_period = conv;
    if (r.status == Status::sale && r.sale_time) {
        const Seconds proc = *r.sale_time - *r.conversion_time;
        if (proc.count() < 0) return Timeline{std::nullopt, std::nullopt, false};
        t.processing_period = proc;
    }
    return t;
}

} // namespace mfirank

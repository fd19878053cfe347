#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mfirank/records.hpp"

namespace mfirank {

/// Non-owning view over the three datasets.
struct DatasetView {
    std::span<const ConversionRecord> conversions;
    std::span<const ProductRecord> products;
    std::span<const ClickRecord> clicks;
};

/// Owning counterpart of DatasetView.
struct Datasets {
    std::vector<ConversionRecord> conversions;
    std::vector<ProductRecord> products;
    std::vector<ClickRecord> clicks;

    DatasetView view() const { return {conversions, products, clicks}; }
};

/// Keeps records of the given loan type (nullopt keeps everything), preserving order.
template <class Record>
std::vector<Record> filter_loan_type(std::span<const Record> records, std::optional<LoanType> type) {
    std::vector<Record> out;
    for (const auto& r : records)
        if (!type || r.loan_type == *type) out.push_back(r);
    return out;
}

template <class Record>
std::vector<Record> filter_standard(std::span<const Record> records) {
    return filter_loan_type(records, std::optional<LoanType>{LoanType::standard});
}

template <class Record>
std::vector<Record> filter_standard(const std::vector<Record>& records) {
    return filter_standard(std::span<const Record>(records));
}

/// Record positions grouped by MFI, in first-seen order of the MFI and input order inside a group.
template <class Record>
std::map<std::string, std::vector<std::size_t>> group_by_mfi(std::span<const Record> records) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].mfi_id].push_back(i);
    return groups;
}

struct IntegrityWarning {
    std::string kind;
    std::size_t count = 0;
    std::vector<std::string> examples; // at most five offending keys
};

struct ValidationReport {
    std::size_t n_mfis = 0;
    std::size_t n_clients = 0;
    std::size_t n_applications = 0;
    std::size_t n_sales = 0;
    std::size_t n_rejected = 0;
    std::size_t n_pending = 0;
    double share_pending = 0.0;
    double share_sale = 0.0;
    double share_rejected = 0.0;
    std::size_t n_products = 0;
    std::size_t n_product_mfis = 0;
    std::size_t n_clicks = 0;
    std::size_t n_invalid_timelines = 0; // negative periods; excluded from features
    std::vector<IntegrityWarning> warnings;

    std::size_t warning_count() const {
        std::size_t n = 0;
        for (const auto& w : warnings) n += w.count;
        return n;
    }
};

namespace detail {

class WarningCollector {
public:
    void add(const std::string& kind, const std::string& key) {
        auto& w = by_kind_[kind];
        w.kind = kind;
        ++w.count;
        if (w.examples.size() < 5 && std::find(w.examples.begin(), w.examples.end(), key) == w.examples.end())
            w.examples.push_back(key);
    }

    std::vector<IntegrityWarning> take() {
        std::vector<IntegrityWarning> out;
        for (auto& [_, w] : by_kind_) out.push_back(std::move(w));
        return out;
    }

private:
    std::map<std::string, IntegrityWarning> by_kind_;
};

} // namespace detail

/// Dataset summary: counts, status shares, timeline validity and referential-integrity warnings.
inline ValidationReport validate(DatasetView data) {
    ValidationReport rep;
    detail::WarningCollector warn;

    std::set<std::string> mfis, clients, product_mfis, product_cards;
    for (const auto& p : data.products) {
        product_mfis.insert(p.mfi_id);
        product_cards.insert(p.card_id);
    }
    using ClickKey = std::tuple<std::string, std::string, Timestamp>;
    std::set<ClickKey> click_keys;
    for (const auto& c : data.clicks) click_keys.emplace(c.mfi_id, c.client_id, c.click_time);

    for (const auto& r : data.conversions) {
        mfis.insert(r.mfi_id);
        clients.insert(r.client_id);
        switch (r.status) {
        case Status::sale: ++rep.n_sales; break;
        case Status::rejected: ++rep.n_rejected; break;
        case Status::pending: ++rep.n_pending; break;
        }
        if (!derive_timeline(r).valid) ++rep.n_invalid_timelines;

        if (!data.products.empty()) {
            if (!product_mfis.contains(r.mfi_id)) warn.add("conversion_mfi_missing_from_products", r.mfi_id);
            if (!r.card_id.empty() && !product_cards.contains(r.card_id))
                warn.add("conversion_card_missing_from_products", r.card_id);
        }
        if (!data.clicks.empty() && !click_keys.contains(ClickKey{r.mfi_id, r.client_id, r.click_time}))
            warn.add("conversion_without_click", r.mfi_id + "/" + r.client_id + "/" + format_timestamp(r.click_time));
        if (r.status == Status::sale && (!r.sale_time || !r.income))
            warn.add("sale_missing_sale_time_or_income", r.mfi_id + "/" + r.client_id);
        if (r.status != Status::sale && r.sale_time) warn.add("non_sale_with_sale_time", r.mfi_id + "/" + r.client_id);
    }
    if (!data.products.empty()) {
        for (const auto& c : data.clicks)
            if (!product_mfis.contains(c.mfi_id)) warn.add("click_mfi_missing_from_products", c.mfi_id);
    }

    rep.n_mfis = mfis.size();
    rep.n_clients = clients.size();
    rep.n_applications = data.conversions.size();
    if (rep.n_applications > 0) {
        const double n = static_cast<double>(rep.n_applications);
        rep.share_pending = static_cast<double>(rep.n_pending) / n;
        rep.share_sale = static_cast<double>(rep.n_sales) / n;
        rep.share_rejected = static_cast<double>(rep.n_rejected) / n;
    }
    rep.n_products = data.products.size();
    rep.n_product_mfis = product_mfis.size();
    rep.n_clicks = data.clicks.size();
    rep.warnings = warn.take();
    return rep;
}

} // namespace mfirank

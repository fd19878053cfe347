#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfirank/dataset.hpp"
#include "mfirank/duration.hpp"
#include "mfirank/error.hpp"
#include "mfirank/feature_set.hpp"
#include "mfirank/records.hpp"

namespace mfirank {

/// Two feature values closer than this are treated as tied.
inline constexpr double kTieTolerance = 1e-9;

inline constexpr double kOnTimeShare = 0.9;
inline constexpr std::int64_t kOnTimeLimitSec = 3600;
inline constexpr std::int64_t kOutlierLimitSec = 7200;
inline constexpr double kRejectedShareThreshold = 0.05;

// ---------------------------------------------------------------------------------------------
// Rating

/// Whether review counts are summed once per MFI or once per card. The product file repeats
/// an MFI's reviews on each of its cards, so per-MFI is the default.
enum class ReviewScope { per_mfi, per_card };

struct RatingPrior {
    std::int64_t total_reviews = 0; // N
    double weighted_sum = 0.0;      // sum of n_m * tau_m

    double prior_mean() const { return weighted_sum / static_cast<double>(total_reviews); }
};

struct ReviewSummary {
    std::int64_t n_reviews = 0;
    std::optional<double> avg_rating;
};

/// Review count and average per MFI. With several cards, the card with the most reviews wins.
inline std::map<std::string, ReviewSummary> reviews_by_mfi(std::span<const ProductRecord> products) {
    std::map<std::string, ReviewSummary> out;
    for (const auto& p : products) {
        auto [it, inserted] = out.try_emplace(p.mfi_id);
        if (inserted || p.n_reviews > it->second.n_reviews) it->second = {p.n_reviews, p.avg_user_rating};
    }
    return out;
}

inline RatingPrior rating_prior(std::span<const ProductRecord> products, ReviewScope scope = ReviewScope::per_mfi) {
    RatingPrior prior;
    auto add = [&](std::int64_t n, const std::optional<double>& tau) {
        if (n <= 0 || !tau) return;
        prior.total_reviews += n;
        prior.weighted_sum += static_cast<double>(n) * *tau;
    };
    if (scope == ReviewScope::per_card) {
        for (const auto& p : products) add(p.n_reviews, p.avg_user_rating);
    } else {
        for (const auto& [_, r] : reviews_by_mfi(products)) add(r.n_reviews, r.avg_rating);
    }
    if (prior.total_reviews == 0) throw DataError("no reviews in corpus");
    return prior;
}

/// Posterior mean rating of an MFI with `n` reviews averaging `tau`, under a Dirichlet prior whose
/// pseudo-counts are the corpus review counts: (sum_k n_k tau_k + n tau) / (N + n).
inline double normalize_rating(const RatingPrior& prior, std::int64_t n, double tau) {
    if (n < 0) throw UsageError("normalize_rating: negative review count");
    if (n == 0) return prior.prior_mean();
    if (!(tau >= 1.0 && tau <= 5.0)) throw UsageError("normalize_rating: rating outside [1,5]");
    return (prior.weighted_sum + static_cast<double>(n) * tau) / static_cast<double>(prior.total_reviews + n);
}

// ---------------------------------------------------------------------------------------------
// Loan approval rate

struct LarPrior {
    std::int64_t total_sales = 0; // S
    std::int64_t total_apps = 0;  // T, pending included

    double prior_mean() const { return static_cast<double>(total_sales) / static_cast<double>(total_apps); }
};

inline LarPrior lar_prior(std::span<const ConversionRecord> conversions) {
    LarPrior prior;
    for (const auto& r : conversions) {
        ++prior.total_apps;
        if (r.status == Status::sale) ++prior.total_sales;
    }
    if (prior.total_apps == 0) throw DataError("lar_prior: no applications");
    return prior;
}

/// Beta-posterior approval rate: (S + sales) / (T + apps).
inline double normalize_lar(const LarPrior& prior, std::int64_t sales, std::int64_t apps) {
    if (sales < 0 || apps < sales) throw UsageError("normalize_lar: need 0 <= sales <= applications");
    return static_cast<double>(prior.total_sales + sales) / static_cast<double>(prior.total_apps + apps);
}

// ---------------------------------------------------------------------------------------------
// Timing helpers shared by fairness and service period

struct ApplicationTiming {
    double conversion_sec = 0.0;
    std::optional<double> processing_sec; // sale applications only
};

/// Valid applications that have a conversion period.
inline std::vector<ApplicationTiming> measurable_timings(std::span<const ConversionRecord> apps) {
    std::vector<ApplicationTiming> out;
    for (const auto& r : apps) {
        const Timeline t = derive_timeline(r);
        if (!t.valid || !t.conversion_period) continue;
        ApplicationTiming a{static_cast<double>(t.conversion_period->count()), std::nullopt};
        if (t.processing_period) a.processing_sec = static_cast<double>(t.processing_period->count());
        out.push_back(a);
    }
    return out;
}

inline double on_time_share(std::span<const ApplicationTiming> timings) {
    if (timings.empty()) return 0.0;
    const auto fast = std::count_if(timings.begin(), timings.end(),
                                    [](const ApplicationTiming& a) { return a.conversion_sec < kOnTimeLimitSec; });
    return static_cast<double>(fast) / static_cast<double>(timings.size());
}

/// An MFI is on time when at least 90% of its conversion periods are under one hour.
inline bool is_on_time(std::span<const ApplicationTiming> timings) {
    return !timings.empty() && on_time_share(timings) >= kOnTimeShare;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw UsageError("median of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Nearest-rank percentile: element ceil(q * n) (1-based) of the ascending sort. `q_tenths`
/// is the quantile in tenths so the index stays integer-exact.
inline double nearest_rank_percentile(std::vector<double> v, int q_tenths) {
    if (v.empty()) throw UsageError("percentile of empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    std::size_t k = (static_cast<std::size_t>(q_tenths) * n + 9) / 10;
    k = std::clamp<std::size_t>(k, 1, n);
    return v[k - 1];
}

/// Mean processing period of sale applications, if any.
inline std::optional<double> mean_sale_processing(std::span<const ConversionRecord> apps) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : apps) {
        const Timeline t = derive_timeline(r);
        if (t.valid && t.processing_period) {
            sum += static_cast<double>(t.processing_period->count());
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------------------------
// Fairness

struct FairnessScore {
    int points = 0;
    bool status_reporting = false; // >5% rejected and at least one sale
    bool on_time = false;          // >=90% conversion periods under an hour
    bool sla_met = false;          // at least half processed within the declared time
    bool reliable = false;         // unreliability flag is false

    // Criterion-3 metadata.
    bool sla_evaluable = false;
    std::optional<std::int64_t> declared_sla_sec;
    std::size_t sla_population = 0;
    std::size_t sla_within = 0;
    std::string sla_population_kind = "sale applications with a processing period";

    double rejected_share = 0.0;
    double on_time_share = 0.0;
};

/// Four-point diligence score for one MFI's applications and its product card.
inline FairnessScore fairness(std::span<const ConversionRecord> mfi_apps, const ProductRecord& product,
                              const DurationTable& durations = {}) {
    FairnessScore s;
    std::size_t sales = 0, rejected = 0;
    for (const auto& r : mfi_apps) {
        if (r.status == Status::sale) ++sales;
        if (r.status == Status::rejected) ++rejected;
    }
    if (!mfi_apps.empty()) s.rejected_share = static_cast<double>(rejected) / static_cast<double>(mfi_apps.size());
    s.status_reporting = s.rejected_share > kRejectedShareThreshold && sales >= 1;

    const auto timings = measurable_timings(mfi_apps);
    s.on_time_share = on_time_share(timings);
    s.on_time = is_on_time(timings);

    const auto consideration = parse_declared_duration(product.consideration_time, durations);
    const auto payment = parse_declared_duration(product.payment_time, durations);
    s.sla_evaluable = consideration.has_value() && payment.has_value();
    if (s.sla_evaluable) {
        s.declared_sla_sec = (*consideration + *payment).count();
        for (const auto& a : timings) {
            if (!a.processing_sec) continue;
            ++s.sla_population;
            if (*a.processing_sec <= static_cast<double>(*s.declared_sla_sec)) ++s.sla_within;
        }
        s.sla_met = s.sla_population > 0 && 2 * s.sla_within >= s.sla_population;
    }

    s.reliable = !product.unreliability;
    s.points = int(s.status_reporting) + int(s.on_time) + int(s.sla_met) + int(s.reliable);
    return s;
}

// ---------------------------------------------------------------------------------------------
// Service period

/// P90 of per-application service periods (conversion + processing) for one MFI.
///
/// For on-time MFIs, conversion periods above two hours are replaced by the median of the MFI's
/// raw conversion periods. Missing processing periods are imputed with the MFI's mean sale
/// processing period, else `fallback_processing_sec`, else zero.
inline double service_period_p90(std::span<const ConversionRecord> mfi_apps,
                                 std::optional<double> fallback_processing_sec = std::nullopt) {
    const auto timings = measurable_timings(mfi_apps);
    if (timings.empty()) throw DataError("no measurable applications");

    std::vector<double> raw_conversion;
    raw_conversion.reserve(timings.size());
    for (const auto& a : timings) raw_conversion.push_back(a.conversion_sec);
    const bool on_time = is_on_time(timings);
    const double conversion_median = median(raw_conversion);

    const double imputed = mean_sale_processing(mfi_apps).value_or(fallback_processing_sec.value_or(0.0));

    std::vector<double> service;
    service.reserve(timings.size());
    for (const auto& a : timings) {
        double conversion = a.conversion_sec;
        if (on_time && conversion > kOutlierLimitSec) conversion = conversion_median;
        service.push_back(conversion + a.processing_sec.value_or(imputed));
    }
    return nearest_rank_percentile(std::move(service), 9);
}

// ---------------------------------------------------------------------------------------------
// Earnings per click

/// Total sale income of `mfi` divided by its click count.
inline double epc(std::span<const ClickRecord> clicks, std::span<const ConversionRecord> conversions, std::string_view mfi) {
    double revenue = 0.0;
    std::size_t sales = 0;
    for (const auto& r : conversions) {
        if (r.mfi_id != mfi || r.status != Status::sale) continue;
        ++sales;
        revenue += r.income.value_or(0.0);
    }
    const auto n_clicks = std::count_if(clicks.begin(), clicks.end(), [&](const ClickRecord& c) { return c.mfi_id == mfi; });
    if (sales == 0) return 0.0;
    if (n_clicks == 0) throw DataError("epc: MFI '" + std::string(mfi) + "' has sales but no clicks");
    return revenue / static_cast<double>(n_clicks);
}

// ---------------------------------------------------------------------------------------------
// Feature table

struct FeatureVector {
    std::string mfi_id;
    std::optional<double> rating_norm;
    std::optional<double> lar_norm;
    std::optional<int> fairness;
    std::optional<double> service_p90;
    std::optional<double> epc;
    std::optional<FairnessScore> fairness_detail;

    std::optional<double> value(Feature f) const {
        switch (f) {
        case Feature::rating: return rating_norm;
        case Feature::lar: return lar_norm;
        case Feature::fairness: return fairness ? std::optional<double>(*fairness) : std::nullopt;
        case Feature::service_period: return service_p90;
        case Feature::epc: return epc;
        }
        return std::nullopt;
    }

    FeatureSet active() const {
        FeatureSet s;
        for (Feature f : all_features)
            if (value(f)) s.insert(f);
        return s;
    }
};

struct FeatureOptions {
    FeatureSet active = FeatureSet::all();
    std::optional<LoanType> loan_type = LoanType::standard; // nullopt: every loan type
    DurationTable durations;
    ReviewScope review_scope = ReviewScope::per_mfi;
};

struct Exclusion {
    std::string mfi_id;
    std::string reason;
};

struct FeatureTable {
    std::vector<FeatureVector> rows; // ordered by mfi_id
    std::vector<Exclusion> excluded;
    std::optional<RatingPrior> rating_prior;
    std::optional<LarPrior> lar_prior;
    FeatureSet active;
};

/// One feature vector per MFI present in both conversions and products. Conversions with
/// negative time differences are dropped first; MFIs whose active features cannot be computed
/// are excluded with a reason.
inline FeatureTable feature_table(DatasetView data, const FeatureOptions& options = {}) {
    if (options.active.empty()) throw UsageError("feature subset must not be empty");
    FeatureTable table;
    table.active = options.active;

    std::vector<ConversionRecord> conversions;
    for (const auto& r : data.conversions)
        if ((!options.loan_type || r.loan_type == *options.loan_type) && derive_timeline(r).valid) conversions.push_back(r);
    const auto clicks = filter_loan_type(data.clicks, options.loan_type);
    if (conversions.empty()) return table;

    const std::span<const ConversionRecord> conv_span(conversions);
    const auto groups = group_by_mfi(conv_span);

    std::map<std::string, const ProductRecord*> card_for_mfi;
    for (const auto& p : data.products) {
        auto [it, inserted] = card_for_mfi.try_emplace(p.mfi_id, &p);
        if (!inserted && options.loan_type && it->second->loan_type != *options.loan_type && p.loan_type == *options.loan_type)
            it->second = &p;
    }
    const auto reviews = reviews_by_mfi(data.products);

    if (options.active.contains(Feature::rating)) table.rating_prior = rating_prior(data.products, options.review_scope);
    if (options.active.contains(Feature::lar)) table.lar_prior = lar_prior(conv_span);
    const auto global_processing = mean_sale_processing(conv_span);

    for (const auto& [mfi, idx] : groups) {
        const auto card = card_for_mfi.find(mfi);
        if (card == card_for_mfi.end()) {
            table.excluded.push_back({mfi, "missing from products"});
            continue;
        }
        std::vector<ConversionRecord> apps;
        apps.reserve(idx.size());
        for (auto i : idx) apps.push_back(conversions[i]);

        FeatureVector v;
        v.mfi_id = mfi;
        try {
            if (options.active.contains(Feature::rating)) {
                const auto& rv = reviews.at(mfi);
                const std::int64_t n = options.review_scope == ReviewScope::per_mfi ? rv.n_reviews : card->second->n_reviews;
                const auto tau = options.review_scope == ReviewScope::per_mfi ? rv.avg_rating : card->second->avg_user_rating;
                v.rating_norm = normalize_rating(*table.rating_prior, tau ? n : 0, tau.value_or(0.0));
            }
            if (options.active.contains(Feature::lar)) {
                const auto sales = std::count_if(apps.begin(), apps.end(), [](const ConversionRecord& r) { return r.status == Status::sale; });
                v.lar_norm = normalize_lar(*table.lar_prior, sales, static_cast<std::int64_t>(apps.size()));
            }
            if (options.active.contains(Feature::fairness)) {
                v.fairness_detail = fairness(apps, *card->second, options.durations);
                v.fairness = v.fairness_detail->points;
            }
            if (options.active.contains(Feature::service_period)) v.service_p90 = service_period_p90(apps, global_processing);
            if (options.active.contains(Feature::epc)) v.epc = epc(clicks, apps, mfi);
        } catch (const DataError& e) {
            table.excluded.push_back({mfi, e.what()});
            continue;
        }
        table.rows.push_back(std::move(v));
    }
    return table;
}

} // namespace mfirank

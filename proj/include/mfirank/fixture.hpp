#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mfirank/dataset.hpp"
#include "mfirank/error.hpp"
#include "mfirank/records.hpp"
#include "mfirank/time.hpp"

namespace mfirank {

/// Knobs for synthetic datasets. Per-MFI vectors may be shorter than the MFI count; missing
/// entries are drawn from the generator.
struct FixtureConfig {
    Date start = Date{std::chrono::year{2023} / std::chrono::January / 2}; // a Monday
    int days = 21;
    std::vector<double> approval_rates;         // P(sale) per application, by MFI index
    std::vector<double> rejection_report_rates; // P(rejected | not approved), by MFI index
    double co_application_rate = 0.3;           // chance a client applies to one more MFI
    double clicks_per_conversion = 4.0;
    int rank_period_days = 14;                  // global ranking refresh
};

/// Deterministic generator that does not depend on the standard library's distribution code.
class FixtureRng {
public:
    explicit FixtureRng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) { // inclusive
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }
    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }

private:
    std::mt19937_64 engine_;
};

inline std::string fixture_mfi_id(int m) { return "MFI " + std::to_string(m + 1); }
inline std::string fixture_card_id(int m, LoanType t) { return std::to_string(1000 + 10 * m + static_cast<int>(t)); }

/// Internally consistent synthetic conversions, products and clicks.
inline Datasets generate_fixture(std::uint64_t seed, int n_mfis, int n_clients, const FixtureConfig& config = {}) {
    if (n_mfis < 2) throw UsageError("fixture: need at least 2 MFIs");
    if (n_clients < 0) throw UsageError("fixture: negative client count");
    if (config.days < 1) throw UsageError("fixture: days must be positive");
    FixtureRng rng(seed);
    Datasets out;

    static constexpr std::array consideration_phrases{"в течение 20 минут", "до 15 минут", "моментально",
                                                      "в течение 1 часа", "от 1 до 3 дней"};
    static constexpr std::array payment_phrases{"моментально", "в течение 5 минут", "до 2 часов"};
    static constexpr std::array oses{"iOS", "Android", "Windows"};
    static constexpr std::array cities{"Chelyabinsk", "Novosibirsk", "Omsk", "Tomsk"};
    static constexpr std::array pages{"main", "pensioneram", "na-kartu"};

    struct MfiProfile {
        double approval = 0.0;
        double reject_report = 0.0;
        double base_income = 0.0;
        double fast_conversion = 0.0; // share of conversions within 30 min
    };
    std::vector<MfiProfile> profiles(static_cast<std::size_t>(n_mfis));
    for (int m = 0; m < n_mfis; ++m) {
        auto& p = profiles[static_cast<std::size_t>(m)];
        const auto idx = static_cast<std::size_t>(m);
        const double drawn_approval = rng.uniform(0.05, 0.35);
        const double drawn_reject = rng.uniform(0.0, 0.5);
        p.approval = idx < config.approval_rates.size() ? config.approval_rates[idx] : drawn_approval;
        p.reject_report = idx < config.rejection_report_rates.size() ? config.rejection_report_rates[idx] : drawn_reject;
        p.base_income = std::round(rng.uniform(50.0, 250.0));
        p.fast_conversion = rng.uniform(0.6, 1.0);
    }

    for (int m = 0; m < n_mfis; ++m) {
        for (LoanType t : {LoanType::standard, LoanType::long_term}) {
            if (t == LoanType::long_term && m % 2 == 0) continue;
            ProductRecord p;
            p.mfi_id = fixture_mfi_id(m);
            p.card_id = fixture_card_id(m, t);
            p.loan_type = t;
            p.region = "Вся Россия";
            p.work_schedule = p.application_receipt_schedule = p.processing_and_payment_schedule = "круглосуточно";
            p.submission_method = "Онлайн";
            p.calls = "Заемщику";
            p.documents = "Паспорт";
            p.identification = "СМС-код";
            p.application_processing = "Автоматически";
            p.consideration_time = consideration_phrases[static_cast<std::size_t>(rng.uniform_int(0, consideration_phrases.size() - 1))];
            p.payment_time = payment_phrases[static_cast<std::size_t>(rng.uniform_int(0, payment_phrases.size() - 1))];
            p.payment_method = p.repayment_method = "карта";
            p.n_reviews = rng.uniform_int(0, 400);
            if (p.n_reviews > 0) p.avg_user_rating = std::round(rng.uniform(2.0, 5.0) * 10.0) / 10.0;
            p.unreliability = rng.bernoulli(0.2);
            p.bad_credit_score = rng.bernoulli(0.5);
            p.loan_extension = rng.bernoulli(0.5);
            p.loan_amount_min = 1000.0 * static_cast<double>(rng.uniform_int(1, 5));
            p.loan_amount_max = *p.loan_amount_min + 1000.0 * static_cast<double>(rng.uniform_int(5, 50));
            p.loan_term_min = t == LoanType::long_term ? 60.0 : 5.0;
            p.loan_term_max = t == LoanType::long_term ? 365.0 : 30.0;
            p.interest_min = 0.0;
            p.interest_max = 1.0;
            p.age_min = static_cast<double>(rng.uniform_int(18, 23));
            p.age_max = static_cast<double>(rng.uniform_int(65, 80));
            out.products.push_back(std::move(p));
        }
    }

    // Global ranking per refresh period: a permutation of MFIs.
    const int periods = (config.days + config.rank_period_days - 1) / std::max(1, config.rank_period_days);
    std::vector<std::vector<int>> rank_of(static_cast<std::size_t>(std::max(1, periods)));
    for (auto& ranks : rank_of) {
        std::vector<int> order(static_cast<std::size_t>(n_mfis));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        ranks.assign(static_cast<std::size_t>(n_mfis), 0);
        for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos) + 1;
    }

    const Timestamp t0{config.start};
    const std::int64_t horizon = static_cast<std::int64_t>(config.days) * 86400;
    for (int c = 0; c < n_clients; ++c) {
        std::string client = "c" + std::to_string(100000 + c);
        std::vector<int> chosen{c % n_mfis};
        while (static_cast<int>(chosen.size()) < n_mfis && rng.bernoulli(config.co_application_rate)) {
            int m = static_cast<int>(rng.uniform_int(0, n_mfis - 1));
            while (std::find(chosen.begin(), chosen.end(), m) != chosen.end()) m = (m + 1) % n_mfis;
            chosen.push_back(m);
        }
        const std::string os = oses[static_cast<std::size_t>(rng.uniform_int(0, oses.size() - 1))];
        const std::string city = cities[static_cast<std::size_t>(rng.uniform_int(0, cities.size() - 1))];
        for (int m : chosen) {
            const auto& prof = profiles[static_cast<std::size_t>(m)];
            ConversionRecord r;
            r.mfi_id = fixture_mfi_id(m);
            r.loan_type = (m % 2 == 1 && rng.bernoulli(0.2)) ? LoanType::long_term : LoanType::standard;
            r.card_id = fixture_card_id(m, r.loan_type);
            r.page_id = pages[static_cast<std::size_t>(rng.uniform_int(0, pages.size() - 1))];
            r.click_time = t0 + Seconds{rng.uniform_int(0, horizon - 1)};
            const auto period = static_cast<std::size_t>((r.click_time - t0).count() / (86400LL * std::max(1, config.rank_period_days)));
            r.global_rank = rank_of[std::min(period, rank_of.size() - 1)][static_cast<std::size_t>(m)];
            r.page_rank = r.global_rank;
            const std::int64_t conv_delay =
                rng.bernoulli(prof.fast_conversion) ? rng.uniform_int(60, 1800) : rng.uniform_int(3600, 3 * 86400);
            r.conversion_time = r.click_time + Seconds{conv_delay};
            if (rng.bernoulli(prof.approval)) {
                r.status = Status::sale;
                r.sale_time = *r.conversion_time + Seconds{rng.uniform_int(60, 2 * 86400)};
                r.income = std::round(prof.base_income * rng.uniform(0.9, 1.1) * 1e6) / 1e6;
            } else {
                r.status = rng.bernoulli(prof.reject_report) ? Status::rejected : Status::pending;
            }
            r.client_id = client;
            r.geo = {"Россия", "Region " + city, city};
            r.device = {"Мобильный телефон", os == "iOS" ? "iPhone" : "Phone", os, "Browser", "Сотовая связь", "DP 1"};
            out.conversions.push_back(std::move(r));
        }
    }
    std::stable_sort(out.conversions.begin(), out.conversions.end(),
                     [](const ConversionRecord& a, const ConversionRecord& b) { return a.click_time < b.click_time; });

    for (const auto& r : out.conversions)
        out.clicks.push_back({r.mfi_id, r.card_id, r.click_time, r.client_id, r.page_id, r.page_rank, r.loan_type, r.income});
    const auto extra = static_cast<std::size_t>(
        std::floor(std::max(0.0, config.clicks_per_conversion - 1.0) * static_cast<double>(out.conversions.size())));
    for (std::size_t k = 0; k < extra; ++k) {
        const int m = static_cast<int>(rng.uniform_int(0, n_mfis - 1));
        ClickRecord c;
        c.mfi_id = fixture_mfi_id(m);
        c.loan_type = LoanType::standard;
        c.card_id = fixture_card_id(m, c.loan_type);
        c.click_time = t0 + Seconds{rng.uniform_int(0, horizon - 1)};
        c.client_id = "v" + std::to_string(100000 + k);
        c.page_id = pages[static_cast<std::size_t>(rng.uniform_int(0, pages.size() - 1))];
        out.clicks.push_back(std::move(c));
    }
    std::stable_sort(out.clicks.begin(), out.clicks.end(),
                     [](const ClickRecord& a, const ClickRecord& b) { return a.click_time < b.click_time; });
    return out;
}

} // namespace mfirank

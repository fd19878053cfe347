#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mfirank/dataset.hpp"
#include "mfirank/error.hpp"
#include "mfirank/features.hpp"
#include "mfirank/matrix.hpp"
#include "mfirank/rank.hpp"
#include "mfirank/records.hpp"
#include "mfirank/stats.hpp"
#include "mfirank/time.hpp"

namespace mfirank {

// ---------------------------------------------------------------------------------------------
// Reapproval table

struct PairEstimate {
    double probability = 0.0;
    std::size_t support = 0; // conditioning clients
    std::size_t hits = 0;    // of which had the outcome
    bool fallback = false;   // support below the minimum; marginal LAR used instead
};

/// Conditional outcome probabilities for every ordered MFI pair:
/// sale(i, j)   = P(client's application at i is a sale     | application at j is a sale),
/// reject(i, j) = P(client's application at i is rejected | application at j is rejected).
class ReapprovalTable {
public:
    std::vector<std::string> mfis; // sorted
    DenseMatrix<PairEstimate> sale;
    DenseMatrix<PairEstimate> reject;
    std::vector<double> mean_income;  // mean income of approved applications
    std::vector<double> marginal_lar; // normalised LAR
    double prior_lar = 0.0;
    std::size_t min_support = 0;
    std::size_t multi_mfi_clients = 0;
    std::vector<std::string> warnings;

    std::optional<std::size_t> index(std::string_view mfi) const {
        const auto it = std::lower_bound(mfis.begin(), mfis.end(), mfi);
        if (it == mfis.end() || *it != mfi) return std::nullopt;
        return static_cast<std::size_t>(it - mfis.begin());
    }

    const PairEstimate& p_sale(std::string_view i, std::string_view j) const { return sale(at(i), at(j)); }
    const PairEstimate& p_reject(std::string_view i, std::string_view j) const { return reject(at(i), at(j)); }

    std::size_t ordered_pairs() const { return mfis.size() * (mfis.size() - (mfis.empty() ? 0 : 1)); }

private:
    std::size_t at(std::string_view mfi) const {
        if (auto i = index(mfi)) return *i;
        throw UsageError("reapproval table has no MFI '" + std::string(mfi) + "'");
    }
};

namespace detail {

struct FinalOutcome {
    Timestamp click{};
    std::size_t order = 0;
    Status status = Status::pending;
};

/// Latest final (sale/rejected) status of every client at every MFI, by click time then input order.
inline std::map<std::string, std::map<std::size_t, FinalOutcome>> final_outcomes(std::span<const ConversionRecord> conversions,
                                                                                 const ReapprovalTable& table) {
    std::map<std::string, std::map<std::size_t, FinalOutcome>> out;
    for (std::size_t k = 0; k < conversions.size(); ++k) {
        const auto& r = conversions[k];
        if (!is_final(r.status)) continue;
        const std::size_t m = *table.index(r.mfi_id);
        auto& slot = out[r.client_id];
        auto it = slot.find(m);
        if (it == slot.end() || std::tie(it->second.click, it->second.order) < std::tie(r.click_time, k))
            slot[m] = FinalOutcome{r.click_time, k, r.status};
    }
    return out;
}

} // namespace detail

/// Builds the table from co-applying clients. Pending applications take no part. Pairs whose
/// support is below `min_support` fall back to MFI i's normalised LAR (sale) or its complement
/// (reject), and are flagged.
inline ReapprovalTable reapproval_table(std::span<const ConversionRecord> conversions, std::size_t min_support = 5) {
    ReapprovalTable t;
    t.min_support = min_support;
    for (const auto& r : conversions) t.mfis.push_back(r.mfi_id);
    std::sort(t.mfis.begin(), t.mfis.end());
    t.mfis.erase(std::unique(t.mfis.begin(), t.mfis.end()), t.mfis.end());
    const std::size_t n = t.mfis.size();
    t.sale = DenseMatrix<PairEstimate>(n, n);
    t.reject = DenseMatrix<PairEstimate>(n, n);
    t.mean_income.assign(n, 0.0);
    t.marginal_lar.assign(n, 0.0);
    if (n == 0) {
        t.warnings.push_back("no applications");
        return t;
    }

    const LarPrior prior = lar_prior(conversions);
    t.prior_lar = prior.prior_mean();
    std::vector<std::int64_t> apps(n, 0), sales(n, 0), incomes(n, 0);
    std::vector<double> income_sum(n, 0.0);
    for (const auto& r : conversions) {
        const std::size_t m = *t.index(r.mfi_id);
        ++apps[m];
        if (r.status != Status::sale) continue;
        ++sales[m];
        if (r.income) {
            income_sum[m] += *r.income;
            ++incomes[m];
        }
    }
    for (std::size_t m = 0; m < n; ++m) {
        t.marginal_lar[m] = normalize_lar(prior, sales[m], apps[m]);
        t.mean_income[m] = incomes[m] ? income_sum[m] / static_cast<double>(incomes[m]) : 0.0;
    }

    for (const auto& [client, outcomes] : detail::final_outcomes(conversions, t)) {
        if (outcomes.size() < 2) continue;
        ++t.multi_mfi_clients;
        for (const auto& [j, oj] : outcomes) {
            for (const auto& [i, oi] : outcomes) {
                if (i == j) continue;
                if (oj.status == Status::sale) {
                    auto& e = t.sale(i, j);
                    ++e.support;
                    if (oi.status == Status::sale) ++e.hits;
                } else {
                    auto& e = t.reject(i, j);
                    ++e.support;
                    if (oi.status == Status::rejected) ++e.hits;
                }
            }
        }
    }
    if (t.multi_mfi_clients == 0) t.warnings.push_back("no client has final statuses at two or more MFIs; every pair uses the fallback");

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            auto& s = t.sale(i, j);
            auto& r = t.reject(i, j);
            if (i == j) {
                s.probability = r.probability = 1.0;
                continue;
            }
            for (auto* e : {&s, &r}) {
                e->fallback = e->support == 0 || e->support < min_support;
                if (!e->fallback) e->probability = static_cast<double>(e->hits) / static_cast<double>(e->support);
            }
            if (s.fallback) s.probability = t.marginal_lar[i];
            if (r.fallback) r.probability = 1.0 - t.marginal_lar[i];
        }
    }
    return t;
}

// ---------------------------------------------------------------------------------------------
// Weekly VRA schedule

struct VraConfig {
    FeatureOptions features;
    RankOptions rank;
};

enum class ListSource { vra, reused, historical };

inline std::string_view to_string(ListSource s) {
    switch (s) {
    case ListSource::vra: return "vra";
    case ListSource::reused: return "reused";
    case ListSource::historical: return "historical";
    }
    return "vra";
}

struct WeeklyList {
    Date week_start{};
    std::vector<std::string> ranked; // position k (1-based) is ranked[k - 1]; "" marks an empty slot
    std::size_t training_size = 0;   // conversions strictly before week_start
    ListSource source = ListSource::vra;
};

/// Position-indexed list from the global_rank field of applications clicked in [from, to):
/// slot k - 1 holds the MFI seen most often at global rank k (ties: smaller id).
inline std::vector<std::string> historical_list(std::span<const ConversionRecord> conversions, Timestamp from, Timestamp to) {
    std::map<int, std::map<std::string, std::size_t>> seen;
    for (const auto& r : conversions)
        if (r.global_rank && r.click_time >= from && r.click_time < to) ++seen[*r.global_rank][r.mfi_id];
    std::vector<std::string> out;
    for (const auto& [rank, counts] : seen) {
        if (out.size() < static_cast<std::size_t>(rank)) out.resize(static_cast<std::size_t>(rank));
        const auto best = std::max_element(counts.begin(), counts.end(),
                                           [](const auto& a, const auto& b) { return a.second < b.second; });
        out[static_cast<std::size_t>(rank) - 1] = best->first;
    }
    return out;
}

/// One ranked list per ISO week of the data, each trained on everything clicked before the
/// week's Monday 00:00. A week whose training data cannot produce a ranking of two or more MFIs
/// reuses the previous list; with no previous list, the week's historical global ranking is used.
inline std::vector<WeeklyList> weekly_schedule(DatasetView data, const VraConfig& config) {
    std::vector<WeeklyList> out;
    if (data.conversions.empty()) return out;

    std::vector<ConversionRecord> conversions(data.conversions.begin(), data.conversions.end());
    std::stable_sort(conversions.begin(), conversions.end(),
                     [](const ConversionRecord& a, const ConversionRecord& b) { return a.click_time < b.click_time; });
    std::vector<ClickRecord> clicks(data.clicks.begin(), data.clicks.end());
    std::stable_sort(clicks.begin(), clicks.end(), [](const ClickRecord& a, const ClickRecord& b) { return a.click_time < b.click_time; });

    const Date first = iso_week_start(conversions.front().click_time);
    const Date last = iso_week_start(conversions.back().click_time);
    for (Date week = first; week <= last; week += std::chrono::days{7}) {
        const Timestamp cut{week};
        const auto conv_end = std::lower_bound(conversions.begin(), conversions.end(), cut,
                                               [](const ConversionRecord& r, Timestamp t) { return r.click_time < t; });
        const auto click_end = std::lower_bound(clicks.begin(), clicks.end(), cut,
                                                [](const ClickRecord& c, Timestamp t) { return c.click_time < t; });
        WeeklyList entry;
        entry.week_start = week;
        entry.training_size = static_cast<std::size_t>(conv_end - conversions.begin());

        std::optional<std::vector<std::string>> ranked;
        if (entry.training_size > 0) {
            try {
                const std::span<const ConversionRecord> train_conv(conversions.data(), entry.training_size);
                const std::span<const ClickRecord> train_clicks(clicks.data(), static_cast<std::size_t>(click_end - clicks.begin()));
                const FeatureTable table = feature_table({train_conv, data.products, train_clicks}, config.features);
                if (table.rows.size() >= 2) ranked = rank_mfis(table.rows, config.features.active, config.rank).ranked;
            } catch (const Error&) {
                ranked.reset();
            }
        }
        if (ranked) {
            entry.ranked = std::move(*ranked);
            entry.source = ListSource::vra;
        } else if (!out.empty()) {
            entry.ranked = out.back().ranked;
            entry.source = ListSource::reused;
        } else {
            entry.ranked = historical_list(conversions, cut, cut + std::chrono::days{7});
            entry.source = ListSource::historical;
        }
        out.push_back(std::move(entry));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Simulation

enum class SimSource { copied, conditional_sale, conditional_rejected, pending_marginal, unknown_mfi };

inline std::string_view to_string(SimSource s) {
    switch (s) {
    case SimSource::copied: return "copied";
    case SimSource::conditional_sale: return "conditional_sale";
    case SimSource::conditional_rejected: return "conditional_rejected";
    case SimSource::pending_marginal: return "pending_marginal";
    case SimSource::unknown_mfi: return "unknown_mfi";
    }
    return "copied";
}

struct SimulatedApplication {
    std::size_t record = 0; // index into the historical conversions
    Date day{};
    int position = 0;
    std::string hist_mfi;
    std::string vra_mfi;
    double p_sale = 0.0;
    double mean_income = 0.0;
    bool copied = false;
    SimSource source = SimSource::copied;
    double hist_sale = 0.0;   // 1 for an actual sale
    double hist_income = 0.0; // actual income, 0 unless sale
    bool fallback = false;    // table estimate came from the marginal LAR
};

struct CoverageReport {
    std::size_t total = 0;
    std::size_t simulated = 0;
    std::size_t no_global_rank = 0;
    std::size_t out_of_range = 0; // position beyond the list or at an empty slot
    std::size_t no_week = 0;      // no list scheduled for the application's week
};

struct PeriodTotals {
    Date start{};
    std::size_t applications = 0;
    double hist_lar = 0.0;
    double hist_avg_income = 0.0;
    double vra_lar = 0.0;
    double vra_avg_income = 0.0;
};

struct SimulationResult {
    std::vector<SimulatedApplication> applications;
    double total_lar = 0.0;  // mean p_sale
    double avg_income = 0.0; // mean expected income
    double hist_lar = 0.0;
    double hist_avg_income = 0.0;
    CoverageReport coverage;
    std::vector<PeriodTotals> weekly;
};

/// Replays historical applications against the scheduled lists. Each application keeps its
/// historical position; the VRA MFI at that position either has the client's actual outcome
/// (copied) or an expected outcome from the reapproval table conditioned on the historical status.
/// Pending historical applications use the VRA MFI's marginal normalised LAR.
inline SimulationResult simulate(std::span<const ConversionRecord> historical, std::span<const WeeklyList> schedule,
                                 const ReapprovalTable& table) {
    SimulationResult out;
    std::map<Date, const WeeklyList*> by_week;
    for (const auto& w : schedule) by_week[w.week_start] = &w;

    std::map<std::pair<std::string, std::string>, std::size_t> latest; // (client, mfi) -> record
    for (std::size_t k = 0; k < historical.size(); ++k) {
        const auto key = std::make_pair(historical[k].client_id, historical[k].mfi_id);
        auto it = latest.find(key);
        if (it == latest.end() || historical[it->second].click_time <= historical[k].click_time) latest[key] = k;
    }

    std::map<Date, PeriodTotals> weekly;
    for (std::size_t k = 0; k < historical.size(); ++k) {
        const auto& r = historical[k];
        ++out.coverage.total;
        const Date week = iso_week_start(r.click_time);
        const auto w = by_week.find(week);
        if (w == by_week.end()) {
            ++out.coverage.no_week;
            continue;
        }
        if (!r.global_rank) {
            ++out.coverage.no_global_rank;
            continue;
        }
        const auto& list = w->second->ranked;
        const auto pos = static_cast<std::size_t>(*r.global_rank);
        if (pos > list.size() || list[pos - 1].empty()) {
            ++out.coverage.out_of_range;
            continue;
        }

        SimulatedApplication a;
        a.record = k;
        a.day = day_of(r.click_time);
        a.position = *r.global_rank;
        a.hist_mfi = r.mfi_id;
        a.vra_mfi = list[pos - 1];
        a.hist_sale = r.status == Status::sale ? 1.0 : 0.0;
        a.hist_income = r.status == Status::sale ? r.income.value_or(0.0) : 0.0;

        std::optional<std::size_t> copy_from;
        if (a.vra_mfi == a.hist_mfi) {
            copy_from = k;
        } else if (auto it = latest.find({r.client_id, a.vra_mfi}); it != latest.end()) {
            copy_from = it->second;
        }

        if (copy_from) {
            const auto& src = historical[*copy_from];
            a.copied = true;
            a.source = SimSource::copied;
            a.p_sale = src.status == Status::sale ? 1.0 : 0.0;
            a.mean_income = src.status == Status::sale ? src.income.value_or(0.0) : 0.0;
        } else {
            const auto vi = table.index(a.vra_mfi);
            const auto hi = table.index(a.hist_mfi);
            if (!vi) {
                a.source = SimSource::unknown_mfi;
                a.p_sale = table.prior_lar;
                a.fallback = true;
            } else if (r.status == Status::sale && hi) {
                const auto& e = table.sale(*vi, *hi);
                a.source = SimSource::conditional_sale;
                a.p_sale = e.probability;
                a.fallback = e.fallback;
            } else if (r.status == Status::rejected && hi) {
                const auto& e = table.reject(*vi, *hi);
                a.source = SimSource::conditional_rejected;
                a.p_sale = 1.0 - e.probability;
                a.fallback = e.fallback;
            } else {
                a.source = SimSource::pending_marginal;
                a.p_sale = table.marginal_lar[*vi];
            }
            a.mean_income = (vi ? table.mean_income[*vi] : 0.0) * a.p_sale;
        }

        auto& wt = weekly[week];
        wt.start = week;
        ++wt.applications;
        wt.hist_lar += a.hist_sale;
        wt.hist_avg_income += a.hist_income;
        wt.vra_lar += a.p_sale;
        wt.vra_avg_income += a.mean_income;

        out.total_lar += a.p_sale;
        out.avg_income += a.mean_income;
        out.hist_lar += a.hist_sale;
        out.hist_avg_income += a.hist_income;
        out.applications.push_back(std::move(a));
    }
    out.coverage.simulated = out.applications.size();
    if (out.coverage.simulated > 0) {
        const double n = static_cast<double>(out.coverage.simulated);
        out.total_lar /= n;
        out.avg_income /= n;
        out.hist_lar /= n;
        out.hist_avg_income /= n;
    }
    for (auto& [_, wt] : weekly) {
        const double n = static_cast<double>(wt.applications);
        wt.hist_lar /= n;
        wt.hist_avg_income /= n;
        wt.vra_lar /= n;
        wt.vra_avg_income /= n;
        out.weekly.push_back(wt);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Daily plot series

struct DailyPoint {
    Date date{};
    std::string algorithm; // "historical" or "vra"
    double income = 0.0;
    double sales = 0.0; // expected for "vra"
    std::size_t clicks = 0;
    double share_per_click = 0.0;
};

/// Daily income and sales-per-click for both rankings over every calendar day from the first to
/// the last simulated application, empty days included.
inline std::vector<DailyPoint> daily_series(const SimulationResult& sim, std::span<const ClickRecord> clicks) {
    std::vector<DailyPoint> out;
    if (sim.applications.empty()) return out;
    Date first = sim.applications.front().day, last = first;
    for (const auto& a : sim.applications) {
        first = std::min(first, a.day);
        last = std::max(last, a.day);
    }
    std::map<Date, std::size_t> clicks_per_day;
    for (const auto& c : clicks) ++clicks_per_day[day_of(c.click_time)];
    struct Acc {
        double hist_income = 0, hist_sales = 0, vra_income = 0, vra_sales = 0;
    };
    std::map<Date, Acc> acc;
    for (const auto& a : sim.applications) {
        auto& d = acc[a.day];
        d.hist_income += a.hist_income;
        d.hist_sales += a.hist_sale;
        d.vra_income += a.mean_income;
        d.vra_sales += a.p_sale;
    }
    for (Date d = first; d <= last; d += std::chrono::days{1}) {
        const Acc a = acc.contains(d) ? acc[d] : Acc{};
        const std::size_t n_clicks = clicks_per_day.contains(d) ? clicks_per_day[d] : 0;
        const double denom = static_cast<double>(n_clicks);
        out.push_back({d, "historical", a.hist_income, a.hist_sales, n_clicks, n_clicks ? a.hist_sales / denom : 0.0});
        out.push_back({d, "vra", a.vra_income, a.vra_sales, n_clicks, n_clicks ? a.vra_sales / denom : 0.0});
    }
    return out;
}

/// Sums daily points into ISO weeks; share is recomputed from the summed sales and clicks.
inline std::vector<DailyPoint> weekly_series(std::span<const DailyPoint> daily) {
    std::map<std::pair<Date, std::string>, DailyPoint> acc;
    for (const auto& p : daily) {
        const Date week = iso_week_start(Timestamp{p.date});
        auto& w = acc[{week, p.algorithm}];
        w.date = week;
        w.algorithm = p.algorithm;
        w.income += p.income;
        w.sales += p.sales;
        w.clicks += p.clicks;
    }
    std::vector<DailyPoint> out;
    for (auto& [_, w] : acc) {
        w.share_per_click = w.clicks ? w.sales / static_cast<double>(w.clicks) : 0.0;
        out.push_back(w);
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Full offline evaluation

struct EvaluationResult {
    std::vector<WeeklyList> schedule;
    ReapprovalTable table;
    SimulationResult simulation;
    std::vector<DailyPoint> daily;
};

/// Schedule, reapproval table and simulation over the configured loan type.
inline EvaluationResult evaluate(DatasetView data, const VraConfig& config, std::size_t min_support = 5) {
    const auto conversions = filter_loan_type(data.conversions, config.features.loan_type);
    const auto clicks = filter_loan_type(data.clicks, config.features.loan_type);
    EvaluationResult r;
    r.schedule = weekly_schedule({conversions, data.products, clicks}, config);
    r.table = reapproval_table(conversions, min_support);
    r.simulation = simulate(conversions, r.schedule, r.table);
    r.daily = daily_series(r.simulation, clicks);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Association of approval with device OS

/// Per-MFI (sale?, iOS?) contingency tables.
inline std::map<std::string, stats::TwoByTwo> sale_by_ios_tables(std::span<const ConversionRecord> conversions,
                                                                std::string_view ios_label = "iOS") {
    std::map<std::string, stats::TwoByTwo> out;
    for (const auto& r : conversions) {
        auto& t = out[r.mfi_id];
        const bool sale = r.status == Status::sale;
        const bool ios = r.device.os == ios_label;
        if (sale && ios) ++t.n11;
        else if (sale) ++t.n10;
        else if (ios) ++t.n01;
        else ++t.n00;
    }
    return out;
}

} // namespace mfirank

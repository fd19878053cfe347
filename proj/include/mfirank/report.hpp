#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfirank/config.hpp"
#include "mfirank/csv.hpp"
#include "mfirank/dataset.hpp"
#include "mfirank/eval.hpp"
#include "mfirank/features.hpp"
#include "mfirank/io.hpp"
#include "mfirank/rank.hpp"
#include "mfirank/stats.hpp"

namespace mfirank {

// ---------------------------------------------------------------------------------------------
// Feature table CSV

inline constexpr std::array<std::string_view, 6> feature_csv_header = {"mfi_id", "rating_norm", "lar_norm",
                                                                       "fairness", "service_p90_sec", "epc"};

/// Inactive features are written as empty fields.
inline void write_feature_csv(std::ostream& out, std::span<const FeatureVector> rows) {
    std::vector<std::string> fields(feature_csv_header.begin(), feature_csv_header.end());
    csv::write_row(out, fields);
    for (const auto& r : rows) {
        fields = {r.mfi_id, detail::opt_text(r.rating_norm), detail::opt_text(r.lar_norm), detail::opt_text(r.fairness),
                  detail::opt_text(r.service_p90), detail::opt_text(r.epc)};
        csv::write_row(out, fields);
    }
}

inline std::vector<FeatureVector> read_feature_csv(std::istream& in) {
    const csv::Table t = csv::read(in);
    std::array<std::size_t, 6> col{};
    for (std::size_t k = 0; k < feature_csv_header.size(); ++k) {
        const auto c = t.column(feature_csv_header[k]);
        if (!c) throw DataError("feature file: missing column '" + std::string(feature_csv_header[k]) + "'");
        col[k] = *c;
    }
    std::vector<FeatureVector> out;
    for (const auto& row : t.rows) {
        if (row.fields.size() != t.header.size())
            throw DataError("feature file line " + std::to_string(row.line) + ": wrong number of fields");
        auto number = [&](std::size_t k) -> std::optional<double> {
            const auto& s = row.fields[col[k]];
            if (s.empty()) return std::nullopt;
            if (auto v = csv::parse_number(s)) return v;
            throw DataError("feature file line " + std::to_string(row.line) + ": bad " + std::string(feature_csv_header[k]) +
                            " '" + s + "'");
        };
        FeatureVector v;
        v.mfi_id = row.fields[col[0]];
        if (v.mfi_id.empty()) throw DataError("feature file line " + std::to_string(row.line) + ": empty mfi_id");
        v.rating_norm = number(1);
        v.lar_norm = number(2);
        if (auto f = number(3)) {
            if (*f != static_cast<int>(*f) || *f < 0 || *f > 4)
                throw DataError("feature file line " + std::to_string(row.line) + ": fairness must be an integer in [0, 4]");
            v.fairness = static_cast<int>(*f);
        }
        v.service_p90 = number(4);
        v.epc = number(5);
        out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// JSON

inline std::string date_text(Date d) { return format_date(d); }

inline json to_json(const ValidationReport& r) {
    json warnings = json::array();
    for (const auto& w : r.warnings) warnings.push_back({{"kind", w.kind}, {"count", w.count}, {"examples", w.examples}});
    return {{"n_mfis", r.n_mfis},
            {"n_clients", r.n_clients},
            {"n_applications", r.n_applications},
            {"n_sales", r.n_sales},
            {"n_rejected", r.n_rejected},
            {"n_pending", r.n_pending},
            {"share_pending", r.share_pending},
            {"share_sale", r.share_sale},
            {"share_rejected", r.share_rejected},
            {"n_products", r.n_products},
            {"n_product_mfis", r.n_product_mfis},
            {"n_clicks", r.n_clicks},
            {"n_invalid_timelines", r.n_invalid_timelines},
            {"warning_count", r.warning_count()},
            {"warnings", warnings}};
}

template <class T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

inline json to_json(const FairnessScore& f) {
    return {{"points", f.points},
            {"status_reporting", f.status_reporting},
            {"on_time", f.on_time},
            {"sla_met", f.sla_met},
            {"reliable", f.reliable},
            {"sla_evaluable", f.sla_evaluable},
            {"declared_sla_sec", optional_json(f.declared_sla_sec)},
            {"sla_population", f.sla_population},
            {"sla_within", f.sla_within},
            {"sla_population_kind", f.sla_population_kind},
            {"rejected_share", f.rejected_share},
            {"on_time_share", f.on_time_share}};
}

inline json to_json(const FeatureTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) {
        json row = {{"mfi_id", r.mfi_id},
                    {"rating_norm", optional_json(r.rating_norm)},
                    {"lar_norm", optional_json(r.lar_norm)},
                    {"fairness", optional_json(r.fairness)},
                    {"service_p90_sec", optional_json(r.service_p90)},
                    {"epc", optional_json(r.epc)}};
        if (r.fairness_detail) row["fairness_breakdown"] = to_json(*r.fairness_detail);
        rows.push_back(row);
    }
    json excluded = json::array();
    for (const auto& e : t.excluded) excluded.push_back({{"mfi_id", e.mfi_id}, {"reason", e.reason}});
    json j = {{"active_features", t.active.to_string()}, {"rows", rows}, {"excluded", excluded}};
    if (t.rating_prior)
        j["rating_prior"] = {{"total_reviews", t.rating_prior->total_reviews},
                             {"weighted_sum", t.rating_prior->weighted_sum},
                             {"prior_mean", t.rating_prior->prior_mean()}};
    if (t.lar_prior)
        j["lar_prior"] = {{"total_sales", t.lar_prior->total_sales},
                          {"total_apps", t.lar_prior->total_apps},
                          {"prior_mean", t.lar_prior->prior_mean()}};
    return j;
}

inline json to_json(const RankResult& r) {
    json matrix = json::array();
    for (std::size_t i = 0; i < r.matrix.size(); ++i) {
        const auto row = r.matrix.points.row(i);
        matrix.push_back(std::vector<int>(row.begin(), row.end()));
    }
    json transition = json::array();
    for (std::size_t i = 0; i < r.transition.rows(); ++i) {
        const auto row = r.transition.row(i);
        transition.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"active_features", r.matrix.active.to_string()},
            {"mfi_order", r.matrix.order},
            {"matrix", matrix},
            {"transition", transition},
            {"pi", r.distribution.pi},
            {"power_converged", r.distribution.power_converged},
            {"power_iterations", r.distribution.power_iterations},
            {"max_disagreement", r.distribution.max_disagreement},
            {"ranked", r.ranked}};
}

inline json to_json(const ReapprovalTable& t) {
    json pairs = json::array();
    std::size_t fallbacks = 0;
    for (std::size_t i = 0; i < t.mfis.size(); ++i) {
        for (std::size_t j = 0; j < t.mfis.size(); ++j) {
            if (i == j) continue;
            const auto& s = t.sale(i, j);
            const auto& r = t.reject(i, j);
            fallbacks += s.fallback + r.fallback;
            pairs.push_back({{"i", t.mfis[i]},
                             {"j", t.mfis[j]},
                             {"p_sale", s.probability},
                             {"sale_support", s.support},
                             {"sale_fallback", s.fallback},
                             {"p_reject", r.probability},
                             {"reject_support", r.support},
                             {"reject_fallback", r.fallback}});
        }
    }
    json mfis = json::array();
    for (std::size_t m = 0; m < t.mfis.size(); ++m)
        mfis.push_back({{"mfi_id", t.mfis[m]}, {"mean_income", t.mean_income[m]}, {"marginal_lar", t.marginal_lar[m]}});
    return {{"min_support", t.min_support},
            {"prior_lar", t.prior_lar},
            {"multi_mfi_clients", t.multi_mfi_clients},
            {"fallback_estimates", fallbacks},
            {"warnings", t.warnings},
            {"mfis", mfis},
            {"pairs", pairs}};
}

inline json to_json(std::span<const DailyPoint> points) {
    json out = json::array();
    for (const auto& p : points)
        out.push_back({{"date", date_text(p.date)},
                       {"algorithm", p.algorithm},
                       {"income", p.income},
                       {"sales", p.sales},
                       {"clicks", p.clicks},
                       {"share_per_click", p.share_per_click}});
    return out;
}

inline json to_json(const EvaluationResult& e) {
    json weeks = json::array();
    for (const auto& w : e.schedule)
        weeks.push_back({{"week_start", date_text(w.week_start)},
                         {"source", to_string(w.source)},
                         {"training_size", w.training_size},
                         {"ranked", w.ranked}});
    json totals = json::array();
    for (const auto& t : e.simulation.weekly)
        totals.push_back({{"week_start", date_text(t.start)},
                          {"applications", t.applications},
                          {"hist_lar", t.hist_lar},
                          {"hist_avg_income", t.hist_avg_income},
                          {"vra_lar", t.vra_lar},
                          {"vra_avg_income", t.vra_avg_income}});
    const auto& s = e.simulation;
    std::size_t copied = 0, pending = 0, fallback = 0, unknown = 0;
    for (const auto& a : s.applications) {
        copied += a.copied;
        pending += a.source == SimSource::pending_marginal;
        fallback += a.fallback;
        unknown += a.source == SimSource::unknown_mfi;
    }
    return {{"weekly_lists", weeks},
            {"weekly_totals", totals},
            {"aggregate",
             {{"applications", s.applications.size()},
              {"total_lar", s.total_lar},
              {"avg_income", s.avg_income},
              {"hist_lar", s.hist_lar},
              {"hist_avg_income", s.hist_avg_income},
              {"copied", copied},
              {"pending_marginal", pending},
              {"fallback_estimates", fallback},
              {"unknown_vra_mfi", unknown}}},
            {"coverage",
             {{"total", s.coverage.total},
              {"simulated", s.coverage.simulated},
              {"no_global_rank", s.coverage.no_global_rank},
              {"out_of_range", s.coverage.out_of_range},
              {"no_week", s.coverage.no_week}}},
            {"reapproval", to_json(e.table)},
            {"daily", to_json(std::span<const DailyPoint>(e.daily))}};
}

inline std::vector<DailyPoint> daily_from_json(const json& j) {
    std::vector<DailyPoint> out;
    try {
        for (const auto& p : j) {
            const auto date = parse_timestamp(p.at("date").get<std::string>() + " 00:00:00");
            if (!date) throw DataError("daily series: bad date");
            out.push_back({day_of(*date), p.at("algorithm").get<std::string>(), p.at("income").get<double>(),
                           p.at("sales").get<double>(), p.at("clicks").get<std::size_t>(), p.at("share_per_click").get<double>()});
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("daily series: ") + e.what());
    }
    return out;
}

inline constexpr std::string_view daily_csv_header = "date,income,share_per_click,algorithm";

inline void write_daily_csv(std::ostream& out, std::span<const DailyPoint> points) {
    out << daily_csv_header << '\n';
    for (const auto& p : points) {
        const std::vector<std::string> row{format_date(p.date), csv::format_number(p.income), csv::format_number(p.share_per_click),
                                           p.algorithm};
        csv::write_row(out, row);
    }
}

inline json to_json(const stats::WelchResult& w) {
    return {{"mean1", w.mean1}, {"mean2", w.mean2}, {"t", w.t}, {"df", w.df}, {"p", w.p}, {"degenerate", w.degenerate}};
}

} // namespace mfirank

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "mfirank/duration.hpp"
#include "mfirank/error.hpp"
#include "mfirank/eval.hpp"
#include "mfirank/feature_set.hpp"
#include "mfirank/features.hpp"
#include "mfirank/rank.hpp"
#include "mfirank/records.hpp"
#include "mfirank/schema.hpp"

namespace mfirank {

using json = nlohmann::ordered_json;

/// Pipeline settings. Loaded from JSON; unknown keys are rejected.
struct PipelineConfig {
    std::string conversions_path;
    std::string products_path;
    std::string clicks_path;
    std::optional<LoanType> loan_type = LoanType::standard; // nullopt: all loan types
    FeatureSet features = FeatureSet::all();
    double tie_tolerance = kTieTolerance;
    double damping = 0.0;
    std::size_t min_support = 5;
    std::string week_convention = "iso";
    std::string out_dir = "out";
    ReviewScope review_scope = ReviewScope::per_mfi;
    std::string ios_label = "iOS";
    SchemaConfig schema;
    DurationTable durations;

    void check() const {
        if (features.empty()) throw UsageError("config: features must not be empty");
        if (!(damping >= 0.0 && damping < 1.0)) throw UsageError("config: damping must lie in [0, 1)");
        if (!(tie_tolerance >= 0.0)) throw UsageError("config: tie_tolerance must be non-negative");
        if (week_convention != "iso") throw UsageError("config: unsupported week_convention '" + week_convention + "'");
    }

    FeatureOptions feature_options() const {
        FeatureOptions o;
        o.active = features;
        o.loan_type = loan_type;
        o.durations = durations;
        o.review_scope = review_scope;
        return o;
    }

    RankOptions rank_options() const {
        RankOptions o;
        o.tie_tolerance = tie_tolerance;
        o.damping = damping;
        return o;
    }

    VraConfig vra_config() const { return {feature_options(), rank_options()}; }
};

inline std::string loan_filter_name(const std::optional<LoanType>& t) { return t ? std::string(to_string(*t)) : "all"; }

inline std::optional<LoanType> parse_loan_filter(std::string_view s) {
    if (s == "all") return std::nullopt;
    if (s == "standard") return LoanType::standard;
    if (s == "long-term") return LoanType::long_term;
    if (s == "interest-free") return LoanType::interest_free;
    throw UsageError("unknown loan type '" + std::string(s) + "' (expected standard, long-term, interest-free or all)");
}

namespace detail {

inline json column_map_json(const ColumnMap& m) {
    json j = json::object();
    for (const auto& [k, v] : m.overrides()) j[k] = v;
    return j;
}

template <class Names>
ColumnMap column_map_from(const json& j, const Names& names, std::string_view file) {
    ColumnMap m;
    for (const auto& [k, v] : j.items()) {
        if (std::find(names.begin(), names.end(), k) == names.end())
            throw UsageError("config: unknown " + std::string(file) + " column '" + k + "'");
        m.set(k, v.template get<std::string>());
    }
    return m;
}

inline Status status_from_name(const std::string& s) {
    if (s == "sale") return Status::sale;
    if (s == "rejected") return Status::rejected;
    if (s == "pending") return Status::pending;
    throw UsageError("config: unknown status '" + s + "'");
}

} // namespace detail

inline json to_json(const PipelineConfig& c) {
    json j;
    j["paths"] = {{"conversions", c.conversions_path}, {"products", c.products_path}, {"clicks", c.clicks_path}};
    j["loan_type"] = loan_filter_name(c.loan_type);
    j["features"] = c.features.to_string();
    j["tie_tolerance"] = c.tie_tolerance;
    j["damping"] = c.damping;
    j["min_support"] = c.min_support;
    j["week_convention"] = c.week_convention;
    j["out_dir"] = c.out_dir;
    j["review_scope"] = c.review_scope == ReviewScope::per_mfi ? "per_mfi" : "per_card";
    j["ios_label"] = c.ios_label;
    j["columns"] = {{"conversions", detail::column_map_json(c.schema.conversions)},
                    {"products", detail::column_map_json(c.schema.products)},
                    {"clicks", detail::column_map_json(c.schema.clicks)}};
    json status = json::object();
    for (const auto& [k, v] : c.schema.dictionaries.status) status[k] = to_string(v);
    j["status_map"] = status;
    json loan = json::object();
    for (const auto& [k, v] : c.schema.dictionaries.loan_type) loan[k] = to_string(v);
    j["loan_type_map"] = loan;
    json boolean = json::object();
    for (const auto& [k, v] : c.schema.dictionaries.boolean) boolean[k] = v;
    j["bool_map"] = boolean;
    json units = json::array();
    for (const auto& u : c.durations.units) units.push_back({{"match", u.match}, {"seconds", u.seconds}});
    j["duration_patterns"] = {{"units", units}, {"instant", c.durations.instant}};
    return j;
}

/// Reads a config object. Missing keys keep their defaults.
inline PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    if (!j.is_object()) throw UsageError("config: top level must be an object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "paths") {
                for (const auto& [k, p] : v.items()) {
                    if (k == "conversions") c.conversions_path = p.get<std::string>();
                    else if (k == "products") c.products_path = p.get<std::string>();
                    else if (k == "clicks") c.clicks_path = p.get<std::string>();
                    else throw UsageError("config: unknown path key '" + k + "'");
                }
            } else if (key == "loan_type") {
                c.loan_type = parse_loan_filter(v.get<std::string>());
            } else if (key == "features") {
                if (v.is_array()) {
                    std::string joined;
                    for (const auto& f : v) joined += (joined.empty() ? "" : ",") + f.get<std::string>();
                    c.features = FeatureSet::parse(joined);
                } else {
                    c.features = FeatureSet::parse(v.get<std::string>());
                }
            } else if (key == "tie_tolerance") {
                c.tie_tolerance = v.get<double>();
            } else if (key == "damping") {
                c.damping = v.get<double>();
            } else if (key == "min_support") {
                if (!v.is_number_unsigned()) throw UsageError("config: min_support must be a non-negative integer");
                c.min_support = v.get<std::size_t>();
            } else if (key == "week_convention") {
                c.week_convention = v.get<std::string>();
            } else if (key == "out_dir") {
                c.out_dir = v.get<std::string>();
            } else if (key == "review_scope") {
                const auto s = v.get<std::string>();
                if (s == "per_mfi") c.review_scope = ReviewScope::per_mfi;
                else if (s == "per_card") c.review_scope = ReviewScope::per_card;
                else throw UsageError("config: unknown review_scope '" + s + "'");
            } else if (key == "ios_label") {
                c.ios_label = v.get<std::string>();
            } else if (key == "columns") {
                for (const auto& [file, m] : v.items()) {
                    if (file == "conversions") c.schema.conversions = detail::column_map_from(m, columns::conversion, file);
                    else if (file == "products") c.schema.products = detail::column_map_from(m, columns::product, file);
                    else if (file == "clicks") c.schema.clicks = detail::column_map_from(m, columns::click, file);
                    else throw UsageError("config: unknown columns section '" + file + "'");
                }
            } else if (key == "status_map") {
                c.schema.dictionaries.status.clear();
                for (const auto& [k, s] : v.items()) c.schema.dictionaries.status[k] = detail::status_from_name(s.get<std::string>());
            } else if (key == "loan_type_map") {
                c.schema.dictionaries.loan_type.clear();
                for (const auto& [k, s] : v.items()) {
                    const auto name = s.get<std::string>();
                    if (name == "all") throw UsageError("config: loan_type_map target must be a loan type");
                    c.schema.dictionaries.loan_type[k] = *parse_loan_filter(name);
                }
            } else if (key == "bool_map") {
                c.schema.dictionaries.boolean.clear();
                for (const auto& [k, b] : v.items()) c.schema.dictionaries.boolean[k] = b.get<bool>();
            } else if (key == "duration_patterns") {
                for (const auto& [k, section] : v.items()) {
                    if (k == "units") {
                        c.durations.units.clear();
                        for (const auto& u : section)
                            c.durations.units.push_back({utf8_lower(u.at("match").get<std::string>()), u.at("seconds").get<std::int64_t>()});
                    } else if (k == "instant") {
                        c.durations.instant.clear();
                        for (const auto& w : section) c.durations.instant.push_back(utf8_lower(w.get<std::string>()));
                    } else {
                        throw UsageError("config: unknown duration_patterns key '" + k + "'");
                    }
                }
            } else {
                throw UsageError("config: unknown key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    c.check();
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a 64 over the canonical JSON form. The output directory is left out: it does not
/// change any result, so reruns into another directory carry the same digest.
inline std::string config_digest(const PipelineConfig& c) {
    json j = to_json(c);
    j.erase("out_dir");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace mfirank

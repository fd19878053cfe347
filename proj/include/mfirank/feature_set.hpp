#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mfirank/error.hpp"

namespace mfirank {

enum class Feature : std::size_t { rating = 0, lar = 1, fairness = 2, service_period = 3, epc = 4 };

inline constexpr std::array<Feature, 5> all_features{Feature::rating, Feature::lar, Feature::fairness,
                                                     Feature::service_period, Feature::epc};

inline std::string_view to_string(Feature f) {
    static constexpr std::array<std::string_view, 5> names{"rating", "lar", "fairness", "service_period", "epc"};
    return names[static_cast<std::size_t>(f)];
}

/// Service period is the only lower-is-better feature.
inline bool higher_is_better(Feature f) { return f != Feature::service_period; }

class FeatureSet {
public:
    constexpr FeatureSet() = default;
    FeatureSet(std::initializer_list<Feature> features) {
        for (Feature f : features) insert(f);
    }

    static FeatureSet all() { return FeatureSet{Feature::rating, Feature::lar, Feature::fairness, Feature::service_period, Feature::epc}; }

    /// Comma-separated names, e.g. "rating,lar,epc". "all" selects every feature.
    static FeatureSet parse(std::string_view list) {
        if (list == "all") return all();
        FeatureSet set;
        while (!list.empty()) {
            const auto comma = list.find(',');
            std::string_view name = list.substr(0, comma);
            while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
            while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
            bool found = false;
            for (Feature f : all_features) {
                if (mfirank::to_string(f) == name) {
                    set.insert(f);
                    found = true;
                }
            }
            if (!found) throw UsageError("unknown feature '" + std::string(name) + "'");
            if (comma == std::string_view::npos) break;
            list.remove_prefix(comma + 1);
        }
        if (set.empty()) throw UsageError("feature subset must not be empty");
        return set;
    }

    void insert(Feature f) { bits_.set(static_cast<std::size_t>(f)); }
    bool contains(Feature f) const { return bits_.test(static_cast<std::size_t>(f)); }
    bool empty() const { return bits_.none(); }
    std::size_t size() const { return bits_.count(); }
    bool is_subset_of(const FeatureSet& other) const { return (bits_ & ~other.bits_).none(); }

    std::vector<Feature> members() const {
        std::vector<Feature> out;
        for (Feature f : all_features)
            if (contains(f)) out.push_back(f);
        return out;
    }

    std::string to_string() const {
        std::string out;
        for (Feature f : members()) {
            if (!out.empty()) out += ',';
            out += mfirank::to_string(f);
        }
        return out;
    }

    bool operator==(const FeatureSet&) const = default;

private:
    std::bitset<5> bits_;
};

} // namespace mfirank

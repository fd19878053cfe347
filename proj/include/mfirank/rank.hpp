#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfirank/csv.hpp"
#include "mfirank/error.hpp"
#include "mfirank/feature_set.hpp"
#include "mfirank/features.hpp"
#include "mfirank/matrix.hpp"
#include "mfirank/records.hpp"

namespace mfirank {

/// a(i, j) = number of active features on which MFI j beats MFI i.
struct ComparisonMatrix {
    std::vector<std::string> order;
    DenseMatrix<int> points;
    FeatureSet active;

    std::size_t size() const { return order.size(); }
    int operator()(std::size_t i, std::size_t j) const { return points(i, j); }
};

/// Pairwise feature duels. Ties (within `tie_tolerance`) score nothing for either side.
inline ComparisonMatrix comparison_matrix(std::span<const FeatureVector> features, FeatureSet active,
                                          double tie_tolerance = kTieTolerance) {
    if (active.empty()) throw UsageError("comparison_matrix: empty feature subset");
    if (features.size() < 2) throw UsageError("comparison_matrix: need at least two MFIs");
    std::set<std::string> seen;
    for (const auto& f : features) {
        if (!seen.insert(f.mfi_id).second) throw UsageError("comparison_matrix: duplicate mfi_id '" + f.mfi_id + "'");
        for (Feature feat : active.members())
            if (!f.value(feat))
                throw UsageError("comparison_matrix: '" + f.mfi_id + "' lacks feature " + std::string(to_string(feat)));
    }

    const std::size_t n = features.size();
    ComparisonMatrix m{{}, DenseMatrix<int>(n, n, 0), active};
    for (const auto& f : features) m.order.push_back(f.mfi_id);
    for (Feature feat : active.members()) {
        const double sign = higher_is_better(feat) ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double advantage = sign * (*features[j].value(feat) - *features[i].value(feat));
                if (advantage > tie_tolerance) ++m.points(i, j);
            }
        }
    }
    return m;
}

/// Row-normalised comparison matrix. A zero row becomes uniform over the other MFIs; `damping`
/// mixes every row with the uniform distribution over all MFIs.
inline DenseMatrix<double> transition(const ComparisonMatrix& a, double damping = 0.0) {
    const std::size_t n = a.size();
    if (n < 2) throw UsageError("transition: ranking needs at least two MFIs");
    if (!(damping >= 0.0 && damping < 1.0)) throw UsageError("transition: damping must lie in [0, 1)");
    DenseMatrix<double> p(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        long total = 0;
        for (std::size_t j = 0; j < n; ++j) total += a(i, j);
        for (std::size_t j = 0; j < n; ++j) {
            double v = 0.0;
            if (total > 0)
                v = static_cast<double>(a(i, j)) / static_cast<double>(total);
            else if (j != i)
                v = 1.0 / static_cast<double>(n - 1);
            p(i, j) = (1.0 - damping) * v + damping / static_cast<double>(n);
        }
    }
    return p;
}

struct StationaryOptions {
    double agreement_tolerance = 1e-8; // direct vs power iteration
    double power_tolerance = 1e-13;    // L1 change that stops power iteration
    std::size_t max_iterations = 20000;
};

struct StationaryDistribution {
    std::vector<double> pi;
    bool power_converged = false; // false: periodic chain, direct solve used alone
    std::size_t power_iterations = 0;
    double max_disagreement = 0.0; // between the two routes, when both ran
};

namespace detail {

/// Solves pi (P - I) = 0 with sum(pi) = 1 by Gaussian elimination with partial pivoting.
/// The last balance equation is replaced by the normalisation constraint.
inline std::vector<double> stationary_direct(const DenseMatrix<double>& p) {
    const std::size_t n = p.rows();
    DenseMatrix<double> m(n, n + 1, 0.0); // augmented system on the transpose
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = p(j, i) - (i == j ? 1.0 : 0.0);
    for (std::size_t j = 0; j < n; ++j) m(n - 1, j) = 1.0;
    m(n - 1, n) = 1.0;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(m(r, col)) > std::fabs(m(pivot, col))) pivot = r;
        if (std::fabs(m(pivot, col)) < 1e-13) throw InvariantError("stationary: singular system (chain is not irreducible)");
        if (pivot != col)
            for (std::size_t c = 0; c <= n; ++c) std::swap(m(pivot, c), m(col, c));
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double factor = m(r, col) / m(col, col);
            if (factor == 0.0) continue;
            for (std::size_t c = col; c <= n; ++c) m(r, c) -= factor * m(col, c);
        }
    }
    std::vector<double> pi(n);
    for (std::size_t i = 0; i < n; ++i) pi[i] = m(i, n) / m(i, i);
    return pi;
}

inline std::vector<double> left_multiply(std::span<const double> v, const DenseMatrix<double>& p) {
    const std::size_t n = p.rows();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] == 0.0) continue;
        const auto row = p.row(i);
        for (std::size_t j = 0; j < n; ++j) out[j] += v[i] * row[j];
    }
    return out;
}

} // namespace detail

/// Stationary distribution of a row-stochastic matrix, computed by a direct linear solve and by
/// power iteration from the uniform vector. The two must agree within the configured tolerance;
/// a non-convergent power iteration (periodic chain) leaves the direct solution flagged.
inline StationaryDistribution stationary(const DenseMatrix<double>& p, const StationaryOptions& opt = {}) {
    const std::size_t n = p.rows();
    if (n < 2 || p.cols() != n) throw UsageError("stationary: need a square matrix of size >= 2");
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : p.row(i)) {
            if (v < 0.0) throw UsageError("stationary: negative transition probability");
            s += v;
        }
        if (std::fabs(s - 1.0) > 1e-9) throw UsageError("stationary: row " + std::to_string(i) + " does not sum to 1");
    }

    StationaryDistribution out;
    std::vector<double> direct = detail::stationary_direct(p);
    for (double& v : direct)
        if (v < 0.0 && v > -1e-12) v = 0.0;

    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        std::vector<double> next = detail::left_multiply(x, p);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change += std::fabs(next[i] - x[i]);
        x = std::move(next);
        out.power_iterations = it;
        if (change < opt.power_tolerance) {
            out.power_converged = true;
            break;
        }
    }

    if (out.power_converged) {
        const double sum = std::accumulate(x.begin(), x.end(), 0.0);
        for (double& v : x) v /= sum;
        for (std::size_t i = 0; i < n; ++i) out.max_disagreement = std::max(out.max_disagreement, std::fabs(x[i] - direct[i]));
        if (out.max_disagreement > opt.agreement_tolerance)
            throw InvariantError("stationary: direct solve and power iteration disagree by " +
                                 std::to_string(out.max_disagreement));
    }
    for (double v : direct)
        if (v < 0.0) throw InvariantError("stationary: negative probability in direct solution");
    const double sum = std::accumulate(direct.begin(), direct.end(), 0.0);
    for (double& v : direct) v /= sum;
    out.pi = std::move(direct);
    return out;
}

/// MFIs by descending stationary probability. Probabilities within 1e-9 of the head of a run
/// are tied; ties go to the higher normalised LAR, then to the smaller mfi_id.
inline std::vector<std::string> rank_list(std::span<const double> pi, std::span<const std::string> order,
                                          std::span<const FeatureVector> features = {}) {
    if (pi.size() != order.size()) throw UsageError("rank_list: distribution and MFI order differ in length");
    std::map<std::string, double> lar;
    for (const auto& f : features)
        if (f.lar_norm) lar[f.mfi_id] = *f.lar_norm;
    auto lar_of = [&](const std::string& id) {
        auto it = lar.find(id);
        return it == lar.end() ? -1.0 : it->second;
    };
    auto secondary = [&](std::size_t a, std::size_t b) {
        const double la = lar_of(order[a]), lb = lar_of(order[b]);
        if (std::fabs(la - lb) > kTieTolerance) return la > lb;
        return order[a] < order[b];
    };

    std::vector<std::size_t> idx(pi.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (pi[a] != pi[b]) return pi[a] > pi[b];
        return secondary(a, b);
    });
    for (std::size_t start = 0; start < idx.size();) {
        std::size_t end = start + 1;
        while (end < idx.size() && pi[idx[start]] - pi[idx[end]] <= kTieTolerance) ++end;
        std::sort(idx.begin() + static_cast<std::ptrdiff_t>(start), idx.begin() + static_cast<std::ptrdiff_t>(end), secondary);
        start = end;
    }

    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(order[i]);
    return out;
}

struct RankOptions {
    double tie_tolerance = kTieTolerance;
    double damping = 0.0;
    StationaryOptions stationary;
};

struct RankResult {
    ComparisonMatrix matrix;
    DenseMatrix<double> transition;
    StationaryDistribution distribution;
    std::vector<std::string> ranked;
};

/// Comparison matrix -> row normalisation -> stationary distribution -> ordered list.
inline RankResult rank_mfis(std::span<const FeatureVector> features, FeatureSet active, const RankOptions& opt = {}) {
    RankResult r;
    r.matrix = comparison_matrix(features, active, opt.tie_tolerance);
    r.transition = transition(r.matrix, opt.damping);
    r.distribution = stationary(r.transition, opt.stationary);
    r.ranked = rank_list(r.distribution.pi, r.matrix.order, features);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Page filtering

/// One predicate over a ProductRecord field: `field op value`.
/// Fields: mfi_id, card_id, loan_type, region, unreliability, bad_credit_score, loan_extension,
/// loan_amount_min/max, loan_term_min/max, interest_min/max, age_min/max.
/// Ops: eq, ne, lt, le, gt, ge, contains.
struct PageConstraint {
    std::string field;
    std::string op;
    std::string value;
};

struct PageEntry {
    int position = 0;
    std::string mfi_id;
};

struct PageRanking {
    std::vector<PageEntry> entries;
    std::vector<std::string> warnings;
};

namespace detail {

inline bool compare_text(std::string_view lhs, std::string_view op, std::string_view rhs) {
    if (op == "eq") return lhs == rhs;
    if (op == "ne") return lhs != rhs;
    if (op == "contains") return lhs.find(rhs) != std::string_view::npos;
    throw UsageError("page_filter: operator '" + std::string(op) + "' not valid for text fields");
}

inline bool compare_number(const std::optional<double>& lhs, std::string_view op, std::string_view rhs_text) {
    const auto rhs = csv::parse_number(rhs_text);
    if (!rhs) throw UsageError("page_filter: '" + std::string(rhs_text) + "' is not a number");
    if (!lhs) return false;
    if (op == "eq") return *lhs == *rhs;
    if (op == "ne") return *lhs != *rhs;
    if (op == "lt") return *lhs < *rhs;
    if (op == "le") return *lhs <= *rhs;
    if (op == "gt") return *lhs > *rhs;
    if (op == "ge") return *lhs >= *rhs;
    throw UsageError("page_filter: operator '" + std::string(op) + "' not valid for numeric fields");
}

inline bool satisfies(const ProductRecord& p, const PageConstraint& c) {
    const std::map<std::string_view, std::function<std::optional<double>(const ProductRecord&)>> numeric{
        {"loan_amount_min", [](const ProductRecord& r) { return r.loan_amount_min; }},
        {"loan_amount_max", [](const ProductRecord& r) { return r.loan_amount_max; }},
        {"loan_term_min", [](const ProductRecord& r) { return r.loan_term_min; }},
        {"loan_term_max", [](const ProductRecord& r) { return r.loan_term_max; }},
        {"interest_min", [](const ProductRecord& r) { return r.interest_min; }},
        {"interest_max", [](const ProductRecord& r) { return r.interest_max; }},
        {"age_min", [](const ProductRecord& r) { return r.age_min; }},
        {"age_max", [](const ProductRecord& r) { return r.age_max; }},
    };
    if (auto it = numeric.find(c.field); it != numeric.end()) return compare_number(it->second(p), c.op, c.value);
    if (c.field == "mfi_id") return compare_text(p.mfi_id, c.op, c.value);
    if (c.field == "card_id") return compare_text(p.card_id, c.op, c.value);
    if (c.field == "loan_type") return compare_text(to_string(p.loan_type), c.op, c.value);
    if (c.field == "region") return compare_text(p.region, c.op, c.value);
    auto flag = [&](bool v) { return compare_text(v ? "true" : "false", c.op, c.value); };
    if (c.field == "unreliability") return flag(p.unreliability);
    if (c.field == "bad_credit_score") return flag(p.bad_credit_score);
    if (c.field == "loan_extension") return flag(p.loan_extension);
    throw UsageError("page_filter: unknown field '" + c.field + "'");
}

} // namespace detail

/// Subsequence of the global list whose MFI has at least one card satisfying every constraint,
/// renumbered from 1.
inline PageRanking page_filter(std::span<const std::string> ranked, std::span<const ProductRecord> products,
                               std::span<const PageConstraint> constraints) {
    static const std::set<std::string_view> known{"mfi_id",          "card_id",         "loan_type",      "region",
                                                  "unreliability",   "bad_credit_score", "loan_extension", "loan_amount_min",
                                                  "loan_amount_max", "loan_term_min",   "loan_term_max",  "interest_min",
                                                  "interest_max",    "age_min",         "age_max"};
    for (const auto& c : constraints)
        if (!known.contains(c.field)) throw UsageError("page_filter: unknown field '" + c.field + "'");

    PageRanking out;
    for (const auto& mfi : ranked) {
        bool ok = constraints.empty();
        for (const auto& p : products) {
            if (ok) break;
            if (p.mfi_id != mfi) continue;
            ok = std::all_of(constraints.begin(), constraints.end(),
                             [&](const PageConstraint& c) { return detail::satisfies(p, c); });
        }
        if (ok) out.entries.push_back({static_cast<int>(out.entries.size()) + 1, mfi});
    }
    if (out.entries.empty() && !ranked.empty()) out.warnings.push_back("no MFI satisfies the page constraints");
    return out;
}

} // namespace mfirank

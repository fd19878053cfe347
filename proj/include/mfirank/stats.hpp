#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mfirank/error.hpp"

namespace mfirank::stats {

// ---------------------------------------------------------------------------------------------
// Special functions

inline double log_choose(std::int64_t n, std::int64_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

namespace detail {

// Continued fraction for I_x(a, b), modified Lentz. Converges fast for x < (a + 1) / (a + b + 2).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 500;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw InvariantError("incomplete beta: continued fraction did not converge");
}

} // namespace detail

/// Regularised incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw UsageError("incomplete_beta: parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw UsageError("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(T > t) for Student's t with `df` degrees of freedom (df may be fractional).
inline double student_t_upper(double t, double df) {
    if (!(df > 0.0)) throw UsageError("student_t_upper: df must be positive");
    if (std::isnan(t)) throw UsageError("student_t_upper: t is NaN");
    if (t == 0.0) return 0.5;
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t > 0.0 ? tail : 1.0 - tail;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Inverse standard normal CDF: rational initial guess refined by Halley steps on erfc.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("normal_quantile: p must lie in (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int i = 0; i < 2; ++i) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

// ---------------------------------------------------------------------------------------------
// Fisher's exact test

struct Proportion {
    std::int64_t successes = 0;
    std::int64_t trials = 0;
};

/// One-sided Fisher exact test, alternative "group 1 has the higher success rate".
/// Returns P(X >= successes1) for X hypergeometric with the table's margins.
inline double fisher_exact_greater(Proportion g1, Proportion g2) {
    for (const auto& g : {g1, g2}) {
        if (g.trials <= 0) throw UsageError("fisher_exact_greater: trials must be positive");
        if (g.successes < 0 || g.successes > g.trials) throw UsageError("fisher_exact_greater: successes outside [0, trials]");
    }
    const std::int64_t n = g1.trials + g2.trials;
    const std::int64_t k = g1.successes + g2.successes;
    const std::int64_t draws = g1.trials;
    const std::int64_t lo = std::max<std::int64_t>(0, draws - (n - k));
    const std::int64_t hi = std::min(draws, k);
    if (g1.successes <= lo) return 1.0;

    const double log_denominator = log_choose(n, draws);
    auto log_pmf = [&](std::int64_t x) { return log_choose(k, x) + log_choose(n - k, draws - x) - log_denominator; };

    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(hi - g1.successes + 1));
    for (std::int64_t x = g1.successes; x <= hi; ++x) terms.push_back(log_pmf(x));
    const double peak = *std::max_element(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - peak);
    return std::min(1.0, std::exp(peak) * sum);
}

// ---------------------------------------------------------------------------------------------
// Welch's t-test

struct WelchResult {
    double mean1 = 0.0;
    double mean2 = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 0.5;
    bool degenerate = false; // both samples constant
};

inline double sample_mean(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

inline double sample_variance(std::span<const double> x) {
    const double m = sample_mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

/// Welch's unequal-variance t-test, alternative "sample 1 has the larger mean".
inline WelchResult welch_t_greater(std::span<const double> s1, std::span<const double> s2) {
    if (s1.size() < 2 || s2.size() < 2) throw UsageError("welch_t_greater: each sample needs at least 2 values");
    WelchResult r;
    r.mean1 = sample_mean(s1);
    r.mean2 = sample_mean(s2);
    const double n1 = static_cast<double>(s1.size()), n2 = static_cast<double>(s2.size());
    const double q1 = sample_variance(s1) / n1, q2 = sample_variance(s2) / n2;
    const double se2 = q1 + q2;
    if (se2 == 0.0) {
        r.degenerate = true;
        r.df = n1 + n2 - 2.0;
        if (r.mean1 == r.mean2) {
            r.t = 0.0;
            r.p = 0.5;
        } else {
            r.t = r.mean1 > r.mean2 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            r.p = r.mean1 > r.mean2 ? 0.0 : 1.0;
        }
        return r;
    }
    r.t = (r.mean1 - r.mean2) / std::sqrt(se2);
    r.df = se2 * se2 / (q1 * q1 / (n1 - 1.0) + q2 * q2 / (n2 - 1.0));
    r.p = student_t_upper(r.t, r.df);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Yule's colligation coefficient

/// 2x2 counts; first index is the row attribute (e.g. sale?), second the column (e.g. iOS?).
struct TwoByTwo {
    std::int64_t n11 = 0;
    std::int64_t n10 = 0;
    std::int64_t n01 = 0;
    std::int64_t n00 = 0;

    std::int64_t total() const { return n11 + n10 + n01 + n00; }
    TwoByTwo transposed() const { return {n11, n01, n10, n00}; }
};

/// Y = (sqrt(n11 n00) - sqrt(n10 n01)) / (sqrt(n11 n00) + sqrt(n10 n01)).
/// Undefined (nullopt) when a whole row or column is empty.
inline std::optional<double> yule_colligation(const TwoByTwo& t) {
    if (t.n11 < 0 || t.n10 < 0 || t.n01 < 0 || t.n00 < 0) throw UsageError("yule_colligation: negative count");
    const double concordant = std::sqrt(static_cast<double>(t.n11) * static_cast<double>(t.n00));
    const double discordant = std::sqrt(static_cast<double>(t.n10) * static_cast<double>(t.n01));
    if (concordant + discordant == 0.0) return std::nullopt;
    return (concordant - discordant) / (concordant + discordant);
}

struct YuleInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool continuity_corrected = false; // a zero cell forced +0.5 on every cell
};

/// Confidence interval for Y from the asymptotic log-odds-ratio interval, mapped through
/// Y = tanh(log(OR) / 4), which is monotone.
inline YuleInterval yule_ci(const TwoByTwo& t, double level = 0.995) {
    if (!(level > 0.0 && level < 1.0)) throw UsageError("yule_ci: level must lie in (0,1)");
    if (t.n11 < 0 || t.n10 < 0 || t.n01 < 0 || t.n00 < 0) throw UsageError("yule_ci: negative count");
    if (t.total() == 0) throw UsageError("yule_ci: empty table");
    YuleInterval out;
    double a = static_cast<double>(t.n11), b = static_cast<double>(t.n10), c = static_cast<double>(t.n01),
           d = static_cast<double>(t.n00);
    if (t.n11 == 0 || t.n10 == 0 || t.n01 == 0 || t.n00 == 0) {
        a += 0.5;
        b += 0.5;
        c += 0.5;
        d += 0.5;
        out.continuity_corrected = true;
    }
    const double log_or = std::log(a) + std::log(d) - std::log(b) - std::log(c);
    const double se = std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    out.lo = std::tanh((log_or - z * se) / 4.0);
    out.hi = std::tanh((log_or + z * se) / 4.0);
    if (out.lo > out.hi) std::swap(out.lo, out.hi);
    return out;
}

} // namespace mfirank::stats

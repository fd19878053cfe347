#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "helpers.hpp"

using namespace mfirank;
using namespace testing;
using Catch::Approx;

// --------------------------------------------------------------------------------------------- rating

TEST_CASE("rating prior sums", "[features][rating]") {
    std::vector<ProductRecord> one{product("A", 4.0, 10)};
    auto prior = rating_prior(one);
    CHECK(prior.total_reviews == 10);
    CHECK(prior.weighted_sum == 40.0);
    CHECK(prior.prior_mean() == 4.0);

    std::vector<ProductRecord> two{product("A", 5.0, 2), product("B", 3.0, 8)};
    prior = rating_prior(two);
    CHECK(prior.total_reviews == 10);
    CHECK(prior.weighted_sum == 34.0);
    CHECK(prior.prior_mean() == Approx(3.4));
}

TEST_CASE("rating prior needs reviews", "[features][rating]") {
    std::vector<ProductRecord> none{product("A", std::nullopt, 0), product("B", std::nullopt, 0)};
    try {
        rating_prior(none);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()) == "no reviews in corpus");
    }
    CHECK_THROWS_AS(rating_prior(std::vector<ProductRecord>{}), DataError);
}

TEST_CASE("rating prior counts each MFI once unless asked per card", "[features][rating]") {
    auto a1 = product("A", 4.0, 10);
    auto a2 = product("A", 2.0, 4);
    a2.card_id = "A-long";
    std::vector<ProductRecord> cards{a1, a2, product("B", 3.0, 6)};
    const auto per_mfi = rating_prior(cards);
    CHECK(per_mfi.total_reviews == 16);
    CHECK(per_mfi.weighted_sum == 58.0);
    const auto per_card = rating_prior(cards, ReviewScope::per_card);
    CHECK(per_card.total_reviews == 20);
    CHECK(per_card.weighted_sum == 66.0);
}

TEST_CASE("normalize_rating is the posterior mean", "[features][rating]") {
    const RatingPrior prior{10, 34.0};
    CHECK(normalize_rating(prior, 0, 5.0) == prior.prior_mean());
    CHECK(normalize_rating(prior, 2, 5.0) == Approx(44.0 / 12.0));
    CHECK(normalize_rating(prior, 2, 5.0) == Approx(3.6667).margin(1e-4));
}

TEST_CASE("normalised ratings of MFI 87 and MFI 64 fit one corpus prior near 3.87", "[features][rating]") {
    // Both MFIs average 4 stars; 103 and 339 reviews. Solve the two posterior-mean equations
    // for the corpus totals and check the implied prior and the reproduced values.
    const double r87 = 3.8712, r64 = 3.8747;
    const double n87 = 103, n64 = 339, tau = 4.0;
    const double total = (n64 * (tau - r64) - n87 * (tau - r87)) / (r64 - r87);
    const double weighted = r87 * (total + n87) - n87 * tau;
    const RatingPrior prior{static_cast<std::int64_t>(std::llround(total)), weighted};
    CHECK(prior.prior_mean() == Approx(3.87).margin(0.01));
    CHECK(normalize_rating(prior, 103, 4.0) == Approx(3.8712).margin(0.005));
    CHECK(normalize_rating(prior, 339, 4.0) == Approx(3.8747).margin(0.005));
    CHECK(normalize_rating(prior, 339, 4.0) > normalize_rating(prior, 103, 4.0));
}

// --------------------------------------------------------------------------------------------- LAR

TEST_CASE("LAR prior and normalisation", "[features][lar]") {
    std::vector<ConversionRecord> apps;
    for (int k = 0; k < 100; ++k) apps.push_back(app("A", "c" + std::to_string(k), k < 20 ? Status::sale : (k < 30 ? Status::rejected : Status::pending)));
    const auto prior = lar_prior(apps);
    CHECK(prior.total_sales == 20);
    CHECK(prior.total_apps == 100);
    CHECK(prior.prior_mean() == 0.2);
    CHECK(normalize_lar(prior, 5, 10) == Approx(25.0 / 110.0));
    CHECK(normalize_lar(prior, 5, 10) == Approx(0.22727).margin(1e-5));
    CHECK(normalize_lar(prior, 0, 0) == 0.2);
    CHECK_THROWS_AS(lar_prior(std::vector<ConversionRecord>{}), DataError);
}

TEST_CASE("MFI 18 normalised LAR from a standard-loan prior near 0.13", "[features][lar]") {
    // raw LAR 0.23 over 5075 applications; corpus prior about 0.13 over roughly 170 thousand
    const LarPrior prior{22100, 170000};
    CHECK(prior.prior_mean() == Approx(0.13));
    CHECK(normalize_lar(prior, 1167, 5075) == Approx(0.1329).margin(0.005));
}

TEST_CASE("shrinkage bounds and monotonicity", "[features][property]") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::int64_t> count(1, 5000);
    std::uniform_real_distribution<double> rating(1.0, 5.0);
    for (int k = 0; k < 1000; ++k) {
        const std::int64_t total = count(rng) * 3;
        const RatingPrior rp{total, static_cast<double>(total) * rating(rng)};
        const double tau = rating(rng);
        const std::int64_t n = count(rng);
        const double lo = std::min(rp.prior_mean(), tau), hi = std::max(rp.prior_mean(), tau);
        const double r = normalize_rating(rp, n, tau);
        CHECK(r >= lo - 1e-12);
        CHECK(r <= hi + 1e-12);
        const double more = normalize_rating(rp, n + 1 + count(rng), tau);
        if (tau > rp.prior_mean() + 1e-9) CHECK(more > r);
        if (tau < rp.prior_mean() - 1e-9) CHECK(more < r);
        CHECK(std::abs(more - tau) <= std::abs(r - tau) + 1e-12);

        const std::int64_t apps_total = count(rng) * 10;
        const LarPrior lp{std::uniform_int_distribution<std::int64_t>(0, apps_total)(rng), apps_total};
        const std::int64_t apps = count(rng);
        const std::int64_t sales = std::uniform_int_distribution<std::int64_t>(0, apps)(rng);
        const double raw = static_cast<double>(sales) / static_cast<double>(apps);
        const double l = normalize_lar(lp, sales, apps);
        CHECK(l >= std::min(lp.prior_mean(), raw) - 1e-12);
        CHECK(l <= std::max(lp.prior_mean(), raw) + 1e-12);
        CHECK(l >= 0.0);
        CHECK(l <= 1.0);
        // doubling the evidence at the same raw rate moves further toward it
        const double doubled = normalize_lar(lp, 2 * sales, 2 * apps);
        if (raw > lp.prior_mean() + 1e-9) CHECK(doubled > l);
        if (raw < lp.prior_mean() - 1e-9) CHECK(doubled < l);
    }
}

TEST_CASE("equal raw ratings order by review count", "[features][property]") {
    const RatingPrior prior{1000, 3870.0};
    for (double tau : {4.0, 4.5, 5.0}) {
        double previous = prior.prior_mean();
        for (std::int64_t n : {1, 5, 20, 100, 500}) {
            const double r = normalize_rating(prior, n, tau);
            CHECK(r > previous);
            previous = r;
        }
    }
    for (double tau : {1.0, 2.5, 3.5}) {
        double previous = prior.prior_mean();
        for (std::int64_t n : {1, 5, 20, 100, 500}) {
            const double r = normalize_rating(prior, n, tau);
            CHECK(r < previous);
            previous = r;
        }
    }
}

// --------------------------------------------------------------------------------------------- durations

TEST_CASE("declared durations", "[features][duration]") {
    CHECK(parse_declared_duration("в течение 20 минут") == Seconds{1200});
    CHECK(parse_declared_duration("моментально") == Seconds{0});
    CHECK_FALSE(parse_declared_duration("по договорённости"));
    CHECK_FALSE(parse_declared_duration(""));
    CHECK(parse_declared_duration("по договорённости") != Seconds{0});
}

TEST_CASE("duration pattern table on twenty phrases", "[features][duration]") {
    const std::vector<std::pair<std::string, std::int64_t>> table{
        {"в течение 20 минут", 1200},   {"моментально", 0},           {"Мгновенно", 0},
        {"сразу", 0},                   {"до 15 минут", 900},         {"в течение 1 часа", 3600},
        {"в течение часа", 3600},       {"2 часа", 7200},             {"до 24 часов", 86400},
        {"1 день", 86400},              {"от 1 до 3 дней", 259200},   {"3 суток", 259200},
        {"1 неделя", 604800},           {"до 2 недель", 1209600},     {"30 секунд", 30},
        {"5 мин", 300},                 {"В ТЕЧЕНИЕ 10 МИНУТ", 600},  {"within 2 hours", 7200},
        {"instant", 0},                 {"1-2 days", 172800},
    };
    REQUIRE(table.size() == 20);
    for (const auto& [phrase, seconds] : table) {
        INFO(phrase);
        const auto parsed = parse_declared_duration(phrase);
        REQUIRE(parsed);
        CHECK(parsed->count() == seconds);
    }
}

TEST_CASE("duration table is configurable", "[features][duration]") {
    DurationTable t;
    t.units = {{"тик", 7}};
    t.instant = {"мигом"};
    CHECK(parse_declared_duration("3 тика", t) == Seconds{21});
    CHECK(parse_declared_duration("мигом", t) == Seconds{0});
    CHECK_FALSE(parse_declared_duration("20 минут", t));
}

// --------------------------------------------------------------------------------------------- fairness

TEST_CASE("fairness with every criterion failing", "[features][fairness]") {
    std::vector<ConversionRecord> apps;
    for (int k = 0; k < 10; ++k) apps.push_back(app("A", "c" + std::to_string(k), Status::pending, at(k), 7200));
    auto p = product("A");
    p.unreliability = true;
    const auto f = fairness(apps, p);
    CHECK(f.points == 0);
    CHECK_FALSE(f.status_reporting);
    CHECK_FALSE(f.on_time);
    CHECK_FALSE(f.sla_met);
    CHECK_FALSE(f.reliable);
}

TEST_CASE("fairness engineered to pass criteria 2 and 4 only", "[features][fairness]") {
    std::vector<ConversionRecord> apps;
    // fast conversions, one slow sale: on time; no rejections; the sale misses its 20-minute SLA
    for (int k = 0; k < 9; ++k) apps.push_back(app("A", "c" + std::to_string(k), Status::pending, at(k), 300));
    apps.push_back(app("A", "s", Status::sale, at(20), 300, 7200, 50.0));
    const auto f = fairness(apps, product("A"));
    CHECK_FALSE(f.status_reporting);
    CHECK(f.on_time);
    CHECK_FALSE(f.sla_met);
    CHECK(f.reliable);
    CHECK(f.points == 2);
    CHECK(f.sla_evaluable);
    CHECK(f.declared_sla_sec == 1200);
    CHECK(f.sla_population == 1);
    CHECK(f.sla_within == 0);
}

TEST_CASE("fairness with all four criteria", "[features][fairness]") {
    std::vector<ConversionRecord> apps;
    for (int k = 0; k < 8; ++k) apps.push_back(app("A", "c" + std::to_string(k), Status::pending, at(k), 120));
    apps.push_back(app("A", "r", Status::rejected, at(30), 120));
    apps.push_back(app("A", "s", Status::sale, at(40), 120, 600, 10.0));
    const auto f = fairness(apps, product("A"));
    CHECK(f.points == 4);
    CHECK(f.rejected_share == Approx(0.1));
}

TEST_CASE("fairness thresholds are strict where stated", "[features][fairness]") {
    // exactly 5% rejected does not score
    std::vector<ConversionRecord> apps;
    for (int k = 0; k < 18; ++k) apps.push_back(app("A", "c" + std::to_string(k), Status::pending, at(k), 100));
    apps.push_back(app("A", "r", Status::rejected, at(50), 100));
    apps.push_back(app("A", "s", Status::sale, at(60), 100, 10, 1.0));
    CHECK_FALSE(fairness(apps, product("A")).status_reporting);
    // rejections but no sale
    apps.back().status = Status::rejected;
    apps.back().sale_time.reset();
    apps.back().income.reset();
    CHECK_FALSE(fairness(apps, product("A")).status_reporting);
    // exactly 90% under an hour is on time; a conversion of exactly one hour is not under it
    std::vector<ConversionRecord> timing;
    for (int k = 0; k < 9; ++k) timing.push_back(app("A", "c" + std::to_string(k), Status::pending, at(k), 3599));
    timing.push_back(app("A", "z", Status::pending, at(10), 3600));
    CHECK(fairness(timing, product("A")).on_time);
    timing[0].conversion_time = timing[0].click_time + Seconds{3600};
    CHECK_FALSE(fairness(timing, product("A")).on_time);
}

TEST_CASE("half of the sales within the declared time meets the SLA", "[features][fairness]") {
    std::vector<ConversionRecord> apps{app("A", "a", Status::sale, at(0), 60, 1200, 1.0), app("A", "b", Status::sale, at(1), 60, 1201, 1.0)};
    auto f = fairness(apps, product("A"));
    CHECK(f.sla_population == 2);
    CHECK(f.sla_within == 1);
    CHECK(f.sla_met);
    apps[0].sale_time = *apps[0].sale_time + Seconds{1};
    CHECK_FALSE(fairness(apps, product("A")).sla_met);
}

TEST_CASE("unparseable SLA is not evaluable", "[features][fairness]") {
    std::vector<ConversionRecord> apps{app("A", "a", Status::sale, at(0), 60, 10, 1.0)};
    auto p = product("A");
    p.consideration_time = "индивидуально";
    const auto f = fairness(apps, p);
    CHECK_FALSE(f.sla_evaluable);
    CHECK_FALSE(f.sla_met);
    CHECK_FALSE(f.declared_sla_sec);
}

TEST_CASE("fairness points equal the number of true flags", "[features][fairness][property]") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto data = generate_fixture(seed, 6, 200);
        const auto table = feature_table(data.view());
        for (const auto& row : table.rows) {
            REQUIRE(row.fairness_detail);
            const auto& f = *row.fairness_detail;
            CHECK(f.points == int(f.status_reporting) + int(f.on_time) + int(f.sla_met) + int(f.reliable));
            CHECK(f.points >= 0);
            CHECK(f.points <= 4);
        }
    }
}

// --------------------------------------------------------------------------------------------- service period

TEST_CASE("nearest-rank percentile", "[features][service]") {
    CHECK(nearest_rank_percentile({5.0}, 9) == 5.0);
    CHECK(nearest_rank_percentile({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 9) == 9.0);
    CHECK(nearest_rank_percentile({10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 11}, 9) == 10.0);
    for (std::size_t n = 1; n <= 1000; ++n) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i + 1);
        std::size_t k = 1;
        while (10 * k < 9 * n) ++k; // smallest k with k/n >= 0.9
        CHECK(nearest_rank_percentile(v, 9) == static_cast<double>(k));
    }
}

TEST_CASE("service period of a single application", "[features][service]") {
    std::vector<ConversionRecord> apps{app("A", "a", Status::sale, at(0), 600, 3600, 1.0)};
    CHECK(service_period_p90(apps) == 4200.0);
}

TEST_CASE("service period replaces a late conversion at an on-time MFI", "[features][service]") {
    std::vector<ConversionRecord> apps;
    const std::array<std::int64_t, 4> processing{1000, 2000, 3000, 4000};
    for (int k = 1; k <= 9; ++k) {
        if (k <= 4)
            apps.push_back(app("A", "c" + std::to_string(k), Status::sale, at(k), 100 * k, processing[static_cast<std::size_t>(k - 1)], 1.0));
        else
            apps.push_back(app("A", "c" + std::to_string(k), Status::pending, at(k), 100 * k));
    }
    apps.push_back(app("A", "late", Status::rejected, at(20), 10000));
    // median of raw conversions (100..900, 10000) = 550; imputed processing = 2500
    // service: 1100 2200 3300 4400 3000 3100 3200 3300 3400 3050 -> 9th of 10 sorted = 3400
    CHECK(service_period_p90(apps) == 3400.0);

    // not on time once a second slow conversion appears: nothing is replaced
    apps.push_back(app("A", "late2", Status::pending, at(30), 9000));
    // service: 1100 2200 3300 4400 3000 3100 3200 3300 3400 12500 11500 -> ceil(9.9)=10th = 11500
    CHECK(service_period_p90(apps) == 11500.0);
}

TEST_CASE("service period imputation fallbacks", "[features][service]") {
    std::vector<ConversionRecord> apps{app("A", "a", Status::pending, at(0), 100), app("A", "b", Status::pending, at(1), 200)};
    CHECK(service_period_p90(apps) == 200.0);
    CHECK(service_period_p90(apps, 1000.0) == 1200.0);
    std::vector<ConversionRecord> none{app("A", "a", Status::pending, at(0))};
    try {
        service_period_p90(none);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()) == "no measurable applications");
    }
}

TEST_CASE("service period is permutation invariant and monotone under shifts", "[features][service][property]") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::int64_t> conv(10, 20000), proc(10, 100000);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ConversionRecord> apps;
        for (int k = 0; k < 30; ++k) {
            const bool sale = k % 3 == 0;
            apps.push_back(app("A", "c" + std::to_string(k), sale ? Status::sale : Status::pending, at(k), conv(rng),
                               sale ? std::optional<std::int64_t>(proc(rng)) : std::nullopt, 1.0));
        }
        const double base = service_period_p90(apps);
        auto shuffled = apps;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(service_period_p90(shuffled) == base);
        auto shifted = apps;
        for (auto& r : shifted)
            if (r.sale_time) r.sale_time = *r.sale_time + Seconds{500};
        CHECK(service_period_p90(shifted) >= base);
    }
}

// --------------------------------------------------------------------------------------------- EPC

TEST_CASE("EPC is revenue over clicks", "[features][epc]") {
    std::vector<ConversionRecord> conv{app("A", "a", Status::sale, at(0), 60, 60, 100.0), app("A", "b", Status::sale, at(1), 60, 60, 100.0),
                                       app("A", "c", Status::rejected, at(2), 60), app("B", "d", Status::sale, at(3), 60, 60, 999.0)};
    std::vector<ClickRecord> clicks;
    for (int k = 0; k < 40; ++k) clicks.push_back(click("A", "x" + std::to_string(k)));
    clicks.push_back(click("B", "d"));
    CHECK(epc(clicks, conv, "A") == 5.0);
    CHECK(epc(clicks, conv, "C") == 0.0);
    conv[0].status = conv[1].status = Status::pending;
    CHECK(epc(clicks, conv, "A") == 0.0);
    CHECK_THROWS_AS(epc(std::vector<ClickRecord>{}, conv, "B"), DataError);
}

TEST_CASE("EPC scales with income and inversely with clicks", "[features][epc][property]") {
    const auto data = generate_fixture(8, 5, 300);
    for (int m = 0; m < 5; ++m) {
        const auto id = fixture_mfi_id(m);
        const double base = epc(data.clicks, data.conversions, id);
        auto scaled = data.conversions;
        for (auto& r : scaled)
            if (r.income) *r.income *= 3.0;
        CHECK(epc(data.clicks, scaled, id) == Approx(3.0 * base));
        auto doubled = data.clicks;
        doubled.insert(doubled.end(), data.clicks.begin(), data.clicks.end());
        CHECK(epc(doubled, data.conversions, id) == Approx(base / 2.0));
    }
}

// --------------------------------------------------------------------------------------------- feature table

TEST_CASE("identical MFIs get identical vectors", "[features][table]") {
    std::vector<ConversionRecord> conv;
    std::vector<ClickRecord> clicks;
    for (const std::string m : {"A", "B"}) {
        for (int k = 0; k < 10; ++k) {
            const auto status = k < 3 ? Status::sale : (k < 5 ? Status::rejected : Status::pending);
            conv.push_back(app(m, m + std::to_string(k), status, at(k), 100 + k, status == Status::sale ? std::optional<std::int64_t>(500) : std::nullopt, 40.0));
            clicks.push_back(click(m, m + std::to_string(k), at(k)));
            clicks.push_back(click(m, "v" + std::to_string(k), at(k)));
        }
    }
    std::vector<ProductRecord> prod{product("A", 4.2, 30), product("B", 4.2, 30)};
    const auto table = feature_table({conv, prod, clicks});
    REQUIRE(table.rows.size() == 2);
    const auto& a = table.rows[0];
    const auto& b = table.rows[1];
    for (Feature f : all_features) CHECK(a.value(f) == b.value(f));
    CHECK(a.epc == Approx(120.0 / 20.0));
    CHECK(a.lar_norm == Approx(0.3));
    CHECK(a.rating_norm == Approx(4.2));
}

TEST_CASE("feature subset controls the active features", "[features][table]") {
    const auto data = generate_fixture(21, 5, 300);
    FeatureOptions options;
    options.active = FeatureSet::parse("rating,lar,epc");
    const auto table = feature_table(data.view(), options);
    REQUIRE_FALSE(table.rows.empty());
    for (const auto& row : table.rows) {
        CHECK(row.active() == options.active);
        CHECK(row.active().size() == 3);
        CHECK_FALSE(row.fairness);
        CHECK_FALSE(row.service_p90);
    }
    options.active = FeatureSet{};
    CHECK_THROWS_AS(feature_table(data.view(), options), UsageError);
    CHECK_THROWS_AS(FeatureSet::parse("rating,speed"), UsageError);
    CHECK_THROWS_AS(FeatureSet::parse(""), UsageError);
    CHECK(FeatureSet::parse("all") == FeatureSet::all());
}

TEST_CASE("MFIs missing from products are excluded", "[features][table]") {
    auto data = generate_fixture(22, 4, 200);
    const auto gone = fixture_mfi_id(2);
    std::erase_if(data.products, [&](const ProductRecord& p) { return p.mfi_id == gone; });
    std::erase_if(data.clicks, [&](const ClickRecord& c) { return c.mfi_id == gone; });
    const auto table = feature_table(data.view());
    CHECK(table.rows.size() == 3);
    REQUIRE(table.excluded.size() == 1);
    CHECK(table.excluded[0].mfi_id == gone);
    CHECK(table.excluded[0].reason == "missing from products");
    for (const auto& row : table.rows) CHECK(row.mfi_id != gone);
}

TEST_CASE("feature table uses the configured loan type", "[features][table]") {
    const auto data = generate_fixture(23, 6, 600);
    const auto standard = feature_table(data.view());
    REQUIRE(standard.lar_prior);
    std::int64_t expected = 0;
    for (const auto& r : data.conversions) expected += r.loan_type == LoanType::standard;
    CHECK(standard.lar_prior->total_apps == expected);

    FeatureOptions all_types;
    all_types.loan_type = std::nullopt;
    const auto everything = feature_table(data.view(), all_types);
    CHECK(everything.lar_prior->total_apps == static_cast<std::int64_t>(data.conversions.size()));
}

TEST_CASE("feature vectors respect their value ranges", "[features][table][property]") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        const auto data = generate_fixture(seed, 7, 400);
        const auto table = feature_table(data.view());
        for (const auto& row : table.rows) {
            CHECK(*row.rating_norm >= 1.0);
            CHECK(*row.rating_norm <= 5.0);
            CHECK(*row.lar_norm >= 0.0);
            CHECK(*row.lar_norm <= 1.0);
            CHECK(*row.service_p90 >= 0.0);
            CHECK(*row.epc >= 0.0);
        }
    }
}

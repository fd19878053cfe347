#include <catch_amalgamated.hpp>

#include <set>

#include "helpers.hpp"

using namespace mfirank;
using namespace testing;
using Catch::Approx;

namespace {

ConversionRecord ranked_app(std::string mfi, std::string client, Status status, Timestamp click, int rank) {
    auto r = app(std::move(mfi), std::move(client), status, click, 60, status == Status::sale ? std::optional<std::int64_t>(60) : std::nullopt);
    r.global_rank = rank;
    return r;
}

// Reference table built pair by pair, directly from the definition.
struct NaiveCount {
    std::size_t support = 0;
    std::size_t hits = 0;
};

std::map<std::pair<std::string, std::string>, NaiveCount> naive_sale_counts(const std::vector<ConversionRecord>& conv) {
    // latest final status per (client, mfi), by click time then input order
    std::map<std::pair<std::string, std::string>, std::pair<Timestamp, Status>> last;
    for (const auto& r : conv) {
        if (r.status == Status::pending) continue;
        const auto key = std::make_pair(r.client_id, r.mfi_id);
        const auto it = last.find(key);
        if (it == last.end() || it->second.first <= r.click_time) last[key] = {r.click_time, r.status};
    }
    std::set<std::string> clients, mfis;
    for (const auto& r : conv) {
        clients.insert(r.client_id);
        mfis.insert(r.mfi_id);
    }
    std::map<std::pair<std::string, std::string>, NaiveCount> out;
    for (const auto& i : mfis)
        for (const auto& j : mfis) {
            if (i == j) continue;
            NaiveCount c;
            for (const auto& cl : clients) {
                const auto oi = last.find({cl, i});
                const auto oj = last.find({cl, j});
                if (oi == last.end() || oj == last.end() || oj->second.second != Status::sale) continue;
                ++c.support;
                if (oi->second.second == Status::sale) ++c.hits;
            }
            out[{i, j}] = c;
        }
    return out;
}

} // namespace

// --------------------------------------------------------------------------------------------- reapproval table

TEST_CASE("clients approved everywhere give certainty", "[eval][table]") {
    std::vector<ConversionRecord> conv;
    for (int c = 0; c < 10; ++c) {
        conv.push_back(app("A", "c" + std::to_string(c), Status::sale, at(c)));
        conv.push_back(app("B", "c" + std::to_string(c), Status::sale, at(c + 100)));
    }
    const auto t = reapproval_table(conv);
    const auto& e = t.p_sale("A", "B");
    CHECK(e.probability == 1.0);
    CHECK(e.support == 10);
    CHECK(e.hits == 10);
    CHECK_FALSE(e.fallback);
    CHECK(t.p_sale("B", "A").probability == 1.0);
    CHECK(t.multi_mfi_clients == 10);
    CHECK(t.warnings.empty());
}

TEST_CASE("conditional sale share", "[eval][table]") {
    std::vector<ConversionRecord> conv;
    for (int c = 0; c < 8; ++c) {
        const std::string id = "c" + std::to_string(c);
        conv.push_back(app("B", id, Status::sale, at(c)));
        conv.push_back(app("A", id, c < 3 ? Status::sale : Status::rejected, at(1000 + c)));
    }
    const auto t = reapproval_table(conv);
    CHECK(t.p_sale("A", "B").probability == Approx(0.375));
    CHECK(t.p_sale("A", "B").support == 8);
    // conditioned on rejection at A, B approved all five
    CHECK(t.p_reject("B", "A").support == 5);
    CHECK(t.p_reject("B", "A").probability == 0.0);
    // only three clients were approved at A: below the minimum support
    CHECK(t.p_sale("B", "A").support == 3);
    CHECK(t.p_sale("B", "A").fallback);
    CHECK(t.p_sale("A", "A").probability == 1.0);
    CHECK(t.p_reject("B", "B").probability == 1.0);
}

TEST_CASE("the latest final status counts and pending is ignored", "[eval][table]") {
    std::vector<ConversionRecord> conv;
    for (int c = 0; c < 5; ++c) {
        const std::string id = "c" + std::to_string(c);
        conv.push_back(app("B", id, Status::sale, at(c)));
        conv.push_back(app("A", id, Status::rejected, at(100 + c)));
        conv.push_back(app("A", id, Status::sale, at(200 + c)));
        conv.push_back(app("A", id, Status::pending, at(300 + c)));
    }
    const auto t = reapproval_table(conv);
    CHECK(t.p_sale("A", "B").support == 5);
    CHECK(t.p_sale("A", "B").probability == 1.0);
    CHECK(t.p_reject("B", "A").support == 0);
}

TEST_CASE("thin pairs fall back to the marginal rate", "[eval][table]") {
    std::vector<ConversionRecord> conv;
    for (int c = 0; c < 3; ++c) {
        const std::string id = "c" + std::to_string(c);
        conv.push_back(app("A", id, Status::sale, at(c)));
        conv.push_back(app("B", id, Status::sale, at(10 + c)));
    }
    for (int c = 0; c < 20; ++c) conv.push_back(app("A", "solo" + std::to_string(c), c % 4 ? Status::rejected : Status::sale, at(50 + c)));
    const auto t = reapproval_table(conv, 5);
    const auto a = *t.index("A");
    CHECK(t.p_sale("A", "B").fallback);
    CHECK(t.p_sale("A", "B").support == 3);
    CHECK(t.p_sale("A", "B").probability == Approx(t.marginal_lar[a]));
    CHECK(t.p_reject("A", "B").fallback);
    CHECK(t.p_reject("A", "B").probability == Approx(1.0 - t.marginal_lar[a]));
    const auto strict = reapproval_table(conv, 3);
    CHECK_FALSE(strict.p_sale("A", "B").fallback);
    CHECK(strict.p_sale("A", "B").probability == 1.0);
}

TEST_CASE("no co-applying clients", "[eval][table]") {
    std::vector<ConversionRecord> conv{app("A", "1", Status::sale), app("B", "2", Status::rejected), app("C", "3", Status::sale)};
    const auto t = reapproval_table(conv);
    CHECK(t.multi_mfi_clients == 0);
    REQUIRE(t.warnings.size() == 1);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            CHECK(t.sale(i, j).fallback);
            CHECK(t.sale(i, j).probability == Approx(t.marginal_lar[i]));
        }
    CHECK(reapproval_table(std::vector<ConversionRecord>{}).warnings.size() == 1);
}

TEST_CASE("pair count", "[eval][table]") {
    std::vector<ConversionRecord> conv;
    for (int m = 0; m < 67; ++m) conv.push_back(app("M" + std::to_string(m), "c", Status::sale, at(m)));
    const auto t = reapproval_table(conv);
    CHECK(t.mfis.size() == 67);
    CHECK(t.ordered_pairs() == 4422);
    CHECK(t.ordered_pairs() / 2 == 2211);
    CHECK(t.multi_mfi_clients == 1);
}

TEST_CASE("table counts agree with a pairwise recount", "[eval][table][property]") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto data = generate_fixture(seed, 3 + static_cast<int>(seed % 4), 60);
        const auto t = reapproval_table(data.conversions, 1);
        const auto naive = naive_sale_counts(data.conversions);
        for (const auto& [key, c] : naive) {
            const auto& e = t.p_sale(key.first, key.second);
            INFO(seed << " " << key.first << " | " << key.second);
            CHECK(e.support == c.support);
            CHECK(e.hits == c.hits);
            if (c.support > 0) CHECK(e.probability == Approx(static_cast<double>(c.hits) / static_cast<double>(c.support)));
        }
        for (std::size_t i = 0; i < t.mfis.size(); ++i)
            for (std::size_t j = 0; j < t.mfis.size(); ++j) {
                CHECK(t.sale(i, j).probability >= 0.0);
                CHECK(t.sale(i, j).probability <= 1.0);
                CHECK(t.reject(i, j).probability >= 0.0);
                CHECK(t.reject(i, j).probability <= 1.0);
            }
    }
}

// --------------------------------------------------------------------------------------------- schedule

TEST_CASE("weekly schedule trains strictly on earlier data", "[eval][schedule]") {
    const auto data = generate_fixture(3, 5, 300);
    const auto conv = filter_standard<ConversionRecord>(data.conversions);
    const auto clicks = filter_standard<ClickRecord>(data.clicks);
    const Datasets standard{conv, data.products, clicks};
    const auto schedule = weekly_schedule(standard.view(), VraConfig{});
    REQUIRE(schedule.size() == 3);
    for (std::size_t w = 0; w < schedule.size(); ++w) {
        const Timestamp cut{schedule[w].week_start};
        CHECK(std::chrono::weekday{schedule[w].week_start} == std::chrono::Monday);
        const auto before = static_cast<std::size_t>(
            std::count_if(conv.begin(), conv.end(), [&](const ConversionRecord& r) { return r.click_time < cut; }));
        CHECK(schedule[w].training_size == before);
        if (w > 0) CHECK(schedule[w].training_size > schedule[w - 1].training_size);
    }
    CHECK(schedule[0].training_size == 0);
    CHECK(schedule[0].source == ListSource::historical);
    CHECK(schedule[1].source == ListSource::vra);
    CHECK(schedule[2].source == ListSource::vra);
}

TEST_CASE("later data never changes an earlier list", "[eval][schedule][property]") {
    auto data = generate_fixture(11, 5, 300);
    const auto base = weekly_schedule(data.view(), VraConfig{});
    REQUIRE(base.size() == 3);
    const Timestamp cut{base[2].week_start};
    // flip every outcome from the last week on and inflate its incomes
    for (auto& r : data.conversions)
        if (r.click_time >= cut) {
            r.status = r.status == Status::sale ? Status::rejected : Status::sale;
            r.income = r.status == Status::sale ? std::optional<double>(1e6) : std::nullopt;
            if (r.status == Status::sale && !r.sale_time && r.conversion_time) r.sale_time = *r.conversion_time;
        }
    const auto probed = weekly_schedule(data.view(), VraConfig{});
    REQUIRE(probed.size() == 3);
    for (std::size_t w = 0; w < 3; ++w) {
        CHECK(probed[w].ranked == base[w].ranked);
        CHECK(probed[w].training_size == base[w].training_size);
    }
}

TEST_CASE("first week uses the historical ranking; thin weeks reuse the last list", "[eval][schedule]") {
    std::vector<ConversionRecord> conv;
    // week 1: three MFIs at fixed positions
    for (int k = 0; k < 6; ++k) {
        conv.push_back(ranked_app("B", "w1-" + std::to_string(k), Status::sale, at(3600 * k), 1));
        conv.push_back(ranked_app("C", "w1-" + std::to_string(k), Status::rejected, at(3600 * k + 60), 3));
    }
    conv.push_back(ranked_app("A", "odd", Status::sale, at(5000), 1)); // minority at position 1
    const std::vector<ProductRecord> products{product("A"), product("B"), product("C")};
    const Datasets data{conv, products, {}};
    const auto schedule = weekly_schedule(data.view(), VraConfig{});
    REQUIRE(schedule.size() == 1);
    CHECK(schedule[0].source == ListSource::historical);
    CHECK(schedule[0].ranked == std::vector<std::string>{"B", "", "C"});
    CHECK(to_string(ListSource::reused) == "reused");

    // a second week of data from a single MFI: training has two MFIs so a list is built
    conv.push_back(ranked_app("B", "w2", Status::sale, at(8 * 86400), 1));
    std::vector<ClickRecord> clicks;
    for (const auto& r : conv) clicks.push_back(click(r.mfi_id, r.client_id, r.click_time));
    const Datasets two{conv, products, clicks};
    const auto s2 = weekly_schedule(two.view(), VraConfig{});
    REQUIRE(s2.size() == 2);
    CHECK(s2[1].source == ListSource::vra);
    CHECK(s2[1].ranked.size() == 3);
}

TEST_CASE("insufficient training data reuses the previous list", "[eval][schedule]") {
    // only one MFI has data before week 3, so weeks 2 and 3 cannot rank
    std::vector<ConversionRecord> conv{ranked_app("A", "1", Status::sale, at(0), 1), ranked_app("A", "2", Status::sale, at(8 * 86400), 1),
                                       ranked_app("B", "3", Status::sale, at(15 * 86400), 2)};
    const std::vector<ProductRecord> products{product("A"), product("B")};
    const Datasets data{conv, products, {}};
    const auto s = weekly_schedule(data.view(), VraConfig{});
    REQUIRE(s.size() == 3);
    CHECK(s[0].source == ListSource::historical);
    CHECK(s[1].source == ListSource::reused);
    CHECK(s[1].ranked == s[0].ranked);
    CHECK(s[2].source == ListSource::reused);
}

// --------------------------------------------------------------------------------------------- simulation

TEST_CASE("replaying the historical list reproduces history", "[eval][simulate]") {
    const auto data = generate_fixture(5, 4, 200);
    const auto conv = filter_standard<ConversionRecord>(data.conversions);
    // per-week historical lists: the fixture keeps one ranking per period, so slots match every application
    std::vector<WeeklyList> schedule;
    std::set<Date> weeks;
    for (const auto& r : conv) weeks.insert(iso_week_start(r.click_time));
    for (Date w : weeks) {
        WeeklyList l;
        l.week_start = w;
        l.ranked = historical_list(conv, Timestamp{w}, Timestamp{w + std::chrono::days{7}});
        l.source = ListSource::historical;
        schedule.push_back(l);
    }
    const auto table = reapproval_table(conv);
    const auto sim = simulate(conv, schedule, table);
    REQUIRE(sim.coverage.simulated > 0);
    CHECK(sim.coverage.simulated == conv.size());
    for (const auto& a : sim.applications) {
        CHECK(a.copied);
        CHECK(a.vra_mfi == a.hist_mfi);
        CHECK(a.p_sale == a.hist_sale);
        CHECK(a.mean_income == a.hist_income);
    }
    CHECK(sim.total_lar == Approx(sim.hist_lar).margin(1e-12));
    CHECK(sim.avg_income == Approx(sim.hist_avg_income).margin(1e-9));

    const auto daily = daily_series(sim, data.clicks);
    for (std::size_t k = 0; k + 1 < daily.size(); k += 2) {
        CHECK(daily[k].date == daily[k + 1].date);
        CHECK(daily[k].algorithm == "historical");
        CHECK(daily[k + 1].algorithm == "vra");
        CHECK(daily[k].income == Approx(daily[k + 1].income));
        CHECK(daily[k].share_per_click == Approx(daily[k + 1].share_per_click));
    }
}

TEST_CASE("a swapped slot takes the conditional expectation", "[eval][simulate]") {
    std::vector<ConversionRecord> conv;
    // five co-applicants approved at A; three of them approved at B too
    for (int c = 0; c < 5; ++c) {
        const std::string id = "co" + std::to_string(c);
        conv.push_back(ranked_app("A", id, Status::sale, at(c), 1));
        conv.push_back(ranked_app("B", id, c < 3 ? Status::sale : Status::rejected, at(100 + c), 2));
    }
    conv.push_back(ranked_app("A", "x", Status::sale, at(1000), 1));
    const auto table = reapproval_table(conv, 5);
    REQUIRE(table.p_sale("B", "A").probability == Approx(0.6));
    REQUIRE(table.mean_income[*table.index("B")] == Approx(100.0));

    const std::vector<WeeklyList> schedule{{iso_week_start(base_time()), {"B", "A"}, 0, ListSource::vra}};
    const auto sim = simulate(conv, schedule, table);
    const auto it = std::find_if(sim.applications.begin(), sim.applications.end(),
                                 [&](const SimulatedApplication& a) { return conv[a.record].client_id == "x"; });
    REQUIRE(it != sim.applications.end());
    CHECK(it->vra_mfi == "B");
    CHECK_FALSE(it->copied);
    CHECK(it->source == SimSource::conditional_sale);
    CHECK(it->p_sale == Approx(0.6));
    CHECK(it->mean_income == Approx(60.0));

    // co-applicants at position 1 are copied from their own B application
    for (const auto& a : sim.applications)
        if (conv[a.record].client_id != "x") CHECK(a.copied);
}

TEST_CASE("rejected and pending applications", "[eval][simulate]") {
    std::vector<ConversionRecord> conv;
    for (int c = 0; c < 6; ++c) {
        const std::string id = "co" + std::to_string(c);
        conv.push_back(ranked_app("A", id, Status::rejected, at(c), 2));
        conv.push_back(ranked_app("B", id, c < 2 ? Status::sale : Status::rejected, at(100 + c), 1));
    }
    conv.push_back(ranked_app("A", "r", Status::rejected, at(1000), 1));
    conv.push_back(ranked_app("A", "p", Status::pending, at(1001), 1));
    conv.push_back(ranked_app("Z", "u", Status::sale, at(1002), 2));
    const auto table = reapproval_table(conv, 5);
    const std::vector<WeeklyList> schedule{{iso_week_start(base_time()), {"B", "Q"}, 0, ListSource::vra}};
    const auto sim = simulate(conv, schedule, table);
    auto find = [&](const std::string& client) {
        return *std::find_if(sim.applications.begin(), sim.applications.end(),
                             [&](const SimulatedApplication& a) { return conv[a.record].client_id == client; });
    };
    const auto r = find("r");
    CHECK(r.source == SimSource::conditional_rejected);
    CHECK(r.p_sale == Approx(1.0 - table.p_reject("B", "A").probability));
    CHECK(r.p_sale == Approx(2.0 / 6.0));
    const auto p = find("p");
    CHECK(p.source == SimSource::pending_marginal);
    CHECK(p.p_sale == Approx(table.marginal_lar[*table.index("B")]));
    const auto u = find("u");
    CHECK(u.vra_mfi == "Q");
    CHECK(u.source == SimSource::unknown_mfi);
    CHECK(u.p_sale == Approx(table.prior_lar));
    CHECK(u.mean_income == 0.0);
}

TEST_CASE("coverage counts every skipped application", "[eval][simulate]") {
    std::vector<ConversionRecord> conv{ranked_app("A", "1", Status::sale, at(0), 1), ranked_app("A", "2", Status::sale, at(10), 5),
                                       app("A", "3", Status::sale, at(20)), ranked_app("B", "4", Status::sale, at(30), 2),
                                       ranked_app("A", "5", Status::sale, at(30 * 86400), 1)};
    const auto table = reapproval_table(conv);
    const std::vector<WeeklyList> schedule{{iso_week_start(base_time()), {"A", ""}, 0, ListSource::vra}};
    const auto sim = simulate(conv, schedule, table);
    CHECK(sim.coverage.total == 5);
    CHECK(sim.coverage.simulated == 1);
    CHECK(sim.coverage.out_of_range == 2);
    CHECK(sim.coverage.no_global_rank == 1);
    CHECK(sim.coverage.no_week == 1);
    CHECK(sim.coverage.simulated + sim.coverage.out_of_range + sim.coverage.no_global_rank + sim.coverage.no_week ==
          sim.coverage.total);
}

// --------------------------------------------------------------------------------------------- series

TEST_CASE("daily series covers every day in range", "[eval][series]") {
    std::vector<ConversionRecord> conv{ranked_app("A", "1", Status::sale, at(0), 1), ranked_app("A", "2", Status::rejected, at(4 * 86400), 1)};
    const auto table = reapproval_table(conv);
    const std::vector<WeeklyList> schedule{{iso_week_start(base_time()), {"A"}, 0, ListSource::vra}};
    const auto sim = simulate(conv, schedule, table);
    const std::vector<ClickRecord> clicks{click("A", "1", at(0)), click("A", "1", at(10)), click("A", "2", at(4 * 86400))};
    const auto daily = daily_series(sim, clicks);
    REQUIRE(daily.size() == 10);
    CHECK(daily[0].clicks == 2);
    CHECK(daily[0].share_per_click == Approx(0.5));
    CHECK(daily[0].income == Approx(100.0));
    CHECK(daily[2].clicks == 0);
    CHECK(daily[2].share_per_click == 0.0);
    CHECK(daily[8].share_per_click == 0.0);

    const auto weekly = weekly_series(daily);
    REQUIRE(weekly.size() == 2);
    CHECK(weekly[0].clicks == 3);
    CHECK(weekly[0].sales == Approx(1.0));
    CHECK(weekly[0].share_per_click == Approx(1.0 / 3.0));
    CHECK(daily_series(SimulationResult{}, clicks).empty());
}

TEST_CASE("evaluation pipeline on a fixture", "[eval][pipeline]") {
    const auto data = generate_fixture(21, 5, 400);
    const auto r = evaluate(data.view(), VraConfig{});
    CHECK(r.schedule.size() == 3);
    CHECK(r.simulation.coverage.total == filter_standard<ConversionRecord>(data.conversions).size());
    CHECK(r.simulation.total_lar >= 0.0);
    CHECK(r.simulation.total_lar <= 1.0);
    CHECK(r.daily.size() % 2 == 0);
    const auto again = evaluate(data.view(), VraConfig{});
    CHECK(again.simulation.total_lar == r.simulation.total_lar);
    CHECK(again.simulation.avg_income == r.simulation.avg_income);
}

TEST_CASE("sale by device tables", "[eval][ios]") {
    auto ios_sale = app("A", "1", Status::sale);
    ios_sale.device.os = "iOS";
    auto ios_rej = app("A", "2", Status::rejected);
    ios_rej.device.os = "iOS";
    auto and_sale = app("A", "3", Status::sale);
    and_sale.device.os = "Android";
    auto and_pend = app("A", "4", Status::pending);
    and_pend.device.os = "Android";
    auto b = app("B", "5", Status::sale);
    b.device.os = "iPhone OS";
    const std::vector<ConversionRecord> conv{ios_sale, ios_rej, and_sale, and_pend, b};
    const auto t = sale_by_ios_tables(conv);
    const auto& a = t.at("A");
    CHECK(a.n11 == 1);
    CHECK(a.n10 == 1);
    CHECK(a.n01 == 1);
    CHECK(a.n00 == 1);
    CHECK(t.at("B").n10 == 1);
    CHECK(sale_by_ios_tables(conv, "iPhone OS").at("B").n11 == 1);
}

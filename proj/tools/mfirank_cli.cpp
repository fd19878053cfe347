// mfirank: command-line front end for the MFI ranking pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfirank/mfirank.hpp"

namespace fs = std::filesystem;
using namespace mfirank;

namespace {

struct Overrides {
    std::string config_path;
    std::string features;
    std::optional<std::size_t> min_support;
    std::optional<double> damping;
    std::string loan_type;
    std::string out;
    std::string conversions, products, clicks;
};

void add_common(CLI::App* cmd, Overrides& o, bool with_paths = true) {
    cmd->add_option("--config", o.config_path, "JSON config file");
    cmd->add_option("--features", o.features, "comma-separated feature subset, or 'all'");
    cmd->add_option("--min-support", o.min_support, "minimum co-applicants per reapproval estimate");
    cmd->add_option("--damping", o.damping, "teleport weight in [0, 1)");
    cmd->add_option("--loan-type", o.loan_type, "standard, long-term, interest-free or all");
    cmd->add_option("--out", o.out, "output directory");
    if (with_paths) {
        cmd->add_option("--conversions", o.conversions, "conversion CSV (overrides config)");
        cmd->add_option("--products", o.products, "product CSV (overrides config)");
        cmd->add_option("--clicks", o.clicks, "click CSV (overrides config)");
    }
}

PipelineConfig resolve(const Overrides& o) {
    PipelineConfig c = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
    if (!o.config_path.empty()) {
        // relative dataset paths are taken relative to the config file
        const fs::path base = fs::path(o.config_path).parent_path();
        for (auto* p : {&c.conversions_path, &c.products_path, &c.clicks_path})
            if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
    }
    if (!o.features.empty()) c.features = FeatureSet::parse(o.features);
    if (o.min_support) c.min_support = *o.min_support;
    if (o.damping) c.damping = *o.damping;
    if (!o.loan_type.empty()) c.loan_type = parse_loan_filter(o.loan_type);
    if (!o.out.empty()) c.out_dir = o.out;
    if (!o.conversions.empty()) c.conversions_path = o.conversions;
    if (!o.products.empty()) c.products_path = o.products;
    if (!o.clicks.empty()) c.clicks_path = o.clicks;
    c.check();
    return c;
}

std::ifstream open_input(const std::string& path, std::string_view what) {
    if (path.empty()) throw UsageError(std::string(what) + " path not configured");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + std::string(what) + " file '" + path + "'");
    return in;
}

struct Loaded {
    Datasets data;
    json row_errors = json::object();
    std::size_t n_row_errors = 0;
};

template <class Parsed>
void note_errors(Loaded& l, std::string_view file, const Parsed& parsed) {
    json list = json::array();
    for (const auto& e : parsed.errors) {
        if (list.size() < 20) list.push_back({{"line", e.line}, {"column", e.column}, {"message", e.message}});
    }
    l.row_errors[std::string(file)] = {{"count", parsed.errors.size()}, {"first", list}};
    l.n_row_errors += parsed.errors.size();
}

/// Clicks are optional for validation only.
Loaded load(const PipelineConfig& c, bool clicks_required = true) {
    Loaded l;
    auto conv_in = open_input(c.conversions_path, "conversions");
    auto prod_in = open_input(c.products_path, "products");
    std::optional<std::ifstream> click_in;
    if (clicks_required || !c.clicks_path.empty()) click_in = open_input(c.clicks_path, "clicks");

    auto conv = parse_conversions(conv_in, c.schema);
    note_errors(l, "conversions", conv);
    l.data.conversions = std::move(conv.records);
    auto prod = parse_products(prod_in, c.schema);
    note_errors(l, "products", prod);
    l.data.products = std::move(prod.records);
    if (click_in) {
        auto clk = parse_clicks(*click_in, c.schema);
        note_errors(l, "clicks", clk);
        l.data.clicks = std::move(clk.records);
    }
    return l;
}

/// Collects every output in memory, then writes them all; nothing is written if a step fails.
class Outputs {
public:
    explicit Outputs(const PipelineConfig& c) : dir_(c.out_dir), digest_(config_digest(c)) {}

    const std::string& digest() const { return digest_; }

    void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

    void add_json(std::string name, json j) {
        j["config_digest"] = digest_;
        add(std::move(name), j.dump(2) + "\n");
    }

    /// Also writes a manifest tying CSV outputs to the config digest.
    void commit(std::string_view command, const PipelineConfig& c) {
        json manifest = {{"command", command}, {"config_digest", digest_}, {"config", to_json(c)}};
        json names = json::array();
        for (const auto& [name, _] : files_) names.push_back(name);
        manifest["outputs"] = names;
        add(std::string(command) + "_manifest.json", manifest.dump(2) + "\n");

        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
        for (const auto& [name, content] : files_) {
            const fs::path target = dir_ / name;
            const fs::path tmp = dir_ / (name + ".tmp");
            {
                std::ofstream out(tmp, std::ios::binary);
                if (!out) throw DataError("cannot write '" + tmp.string() + "'");
                out << content;
                if (!out) throw DataError("failed writing '" + tmp.string() + "'");
            }
            fs::rename(tmp, target, ec);
            if (ec) throw DataError("cannot move output into '" + target.string() + "'");
            std::cout << target.string() << '\n';
        }
    }

private:
    fs::path dir_;
    std::string digest_;
    std::vector<std::pair<std::string, std::string>> files_;
};

int cmd_validate(const Overrides& o) {
    const auto c = resolve(o);
    auto loaded = load(c, false);
    const auto report = validate(loaded.data.view());
    Outputs out(c);
    json j = to_json(report);
    j["row_errors"] = loaded.row_errors;
    out.add_json("validation.json", j);
    out.commit("validate", c);
    std::cerr << "validate: " << report.n_mfis << " MFIs, " << report.n_clients << " clients, " << report.n_applications
              << " applications, " << report.n_sales << " sales, " << report.warning_count() << " integrity warnings, "
              << loaded.n_row_errors << " row errors\n";
    return 0;
}

int cmd_features(const Overrides& o) {
    const auto c = resolve(o);
    auto loaded = load(c);
    const auto table = feature_table(loaded.data.view(), c.feature_options());
    Outputs out(c);
    std::ostringstream csv;
    write_feature_csv(csv, table.rows);
    out.add("features.csv", csv.str());
    json j = to_json(table);
    j["loan_type"] = loan_filter_name(c.loan_type);
    out.add_json("features.json", j);
    out.commit("features", c);
    return 0;
}

int cmd_rank(const Overrides& o, const std::string& feature_file) {
    const auto c = resolve(o);
    std::vector<FeatureVector> rows;
    if (!feature_file.empty()) {
        auto in = open_input(feature_file, "feature");
        rows = read_feature_csv(in);
    } else {
        auto loaded = load(c);
        rows = feature_table(loaded.data.view(), c.feature_options()).rows;
    }
    for (const auto& r : rows)
        if (!c.features.is_subset_of(r.active()))
            throw UsageError("feature subset '" + c.features.to_string() + "' not available for '" + r.mfi_id + "'");
    const auto result = rank_mfis(rows, c.features, c.rank_options());
    Outputs out(c);
    out.add_json("rank.json", to_json(result));
    std::ostringstream csv;
    csv << "mfi_id,pi,rank\n";
    for (std::size_t k = 0; k < result.ranked.size(); ++k) {
        const auto& id = result.ranked[k];
        const auto pos = std::find(result.matrix.order.begin(), result.matrix.order.end(), id) - result.matrix.order.begin();
        const std::vector<std::string> row{id, csv::format_number(result.distribution.pi[static_cast<std::size_t>(pos)]),
                                           std::to_string(k + 1)};
        csv::write_row(csv, row);
    }
    out.add("pi.csv", csv.str());
    out.commit("rank", c);
    return 0;
}

int cmd_evaluate(const Overrides& o) {
    const auto c = resolve(o);
    auto loaded = load(c);
    const auto result = evaluate(loaded.data.view(), c.vra_config(), c.min_support);
    Outputs out(c);
    json j = to_json(result);
    j["loan_type"] = loan_filter_name(c.loan_type);
    j["active_features"] = c.features.to_string();
    out.add_json("evaluation.json", j);
    std::ostringstream csv;
    write_daily_csv(csv, result.daily);
    out.add("daily.csv", csv.str());
    out.commit("evaluate", c);
    return 0;
}

std::vector<double> read_sample(const std::string& path) {
    auto in = open_input(path, "sample");
    std::vector<double> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto v = csv::parse_number(line);
        if (!v) {
            if (out.empty() && n == 1) continue; // header
            throw DataError("sample file '" + path + "' line " + std::to_string(n) + ": not a number");
        }
        out.push_back(*v);
    }
    return out;
}

struct AbArgs {
    std::vector<std::int64_t> fisher;
    std::vector<std::string> welch;
    std::vector<std::int64_t> yule;
    double level = 0.995;
};

int cmd_abtest(const Overrides& o, const AbArgs& a) {
    const auto c = resolve(o);
    if (a.fisher.empty() && a.welch.empty() && a.yule.empty()) throw UsageError("abtest: give --fisher, --welch and/or --yule");
    json j = json::object();
    if (!a.fisher.empty()) {
        const stats::Proportion g1{a.fisher[0], a.fisher[1]};
        const stats::Proportion g2{a.fisher[2], a.fisher[3]};
        j["fisher"] = {{"group1", {{"successes", g1.successes}, {"trials", g1.trials}}},
                       {"group2", {{"successes", g2.successes}, {"trials", g2.trials}}},
                       {"alternative", "group1 rate greater"},
                       {"p", stats::fisher_exact_greater(g1, g2)}};
    }
    if (!a.welch.empty()) {
        const auto s1 = read_sample(a.welch[0]);
        const auto s2 = read_sample(a.welch[1]);
        json w = to_json(stats::welch_t_greater(s1, s2));
        w["n1"] = s1.size();
        w["n2"] = s2.size();
        w["alternative"] = "sample1 mean greater";
        j["welch"] = w;
    }
    if (!a.yule.empty()) {
        const stats::TwoByTwo t{a.yule[0], a.yule[1], a.yule[2], a.yule[3]};
        json y = {{"table", a.yule}, {"level", a.level}, {"y", optional_json(stats::yule_colligation(t))}};
        const auto ci = stats::yule_ci(t, a.level);
        y["ci"] = {{"lo", ci.lo}, {"hi", ci.hi}, {"continuity_corrected", ci.continuity_corrected}};
        j["yule"] = y;
    }
    Outputs out(c);
    out.add_json("abtest.json", j);
    std::cerr << j.dump(2) << '\n';
    out.commit("abtest", c);
    return 0;
}

int cmd_report(const Overrides& o, const std::string& evaluation_path) {
    const auto c = resolve(o);
    const std::string path = evaluation_path.empty() ? (fs::path(c.out_dir) / "evaluation.json").string() : evaluation_path;
    std::ifstream in(path);
    if (!in) throw DataError("missing evaluation output '" + path + "' (run evaluate first)");
    json e;
    try {
        e = json::parse(in);
    } catch (const json::parse_error& err) {
        throw DataError("evaluation output '" + path + "' is not valid JSON: " + err.what());
    }
    if (!e.contains("daily")) throw DataError("evaluation output '" + path + "' has no daily series");
    const auto daily = daily_from_json(e.at("daily"));
    const auto weekly = weekly_series(daily);
    Outputs out(c);
    std::ostringstream d, w;
    write_daily_csv(d, daily);
    write_daily_csv(w, weekly);
    out.add("report_daily.csv", d.str());
    out.add("report_weekly.csv", w.str());
    out.add_json("report.json", {{"source", path},
                                 {"source_config_digest", e.value("config_digest", "")},
                                 {"days", daily.size() / 2},
                                 {"weeks", weekly.size() / 2},
                                 {"header", daily_csv_header}});
    out.commit("report", c);
    return 0;
}

struct FixtureArgs {
    std::uint64_t seed = 1;
    int mfis = 5;
    int clients = 100;
    int days = 21;
};

int cmd_fixture(const Overrides& o, const FixtureArgs& a) {
    const auto c = resolve(o);
    FixtureConfig fc;
    fc.days = a.days;
    const auto data = generate_fixture(a.seed, a.mfis, a.clients, fc);
    Outputs out(c);
    std::ostringstream conv, prod, clk;
    write_conversions(conv, data.conversions, c.schema);
    write_products(prod, data.products, c.schema);
    write_clicks(clk, data.clicks, c.schema);
    out.add("conversions.csv", conv.str());
    out.add("products.csv", prod.str());
    out.add("clicks.csv", clk.str());
    PipelineConfig generated = c;
    generated.conversions_path = "conversions.csv";
    generated.products_path = "products.csv";
    generated.clicks_path = "clicks.csv";
    generated.out_dir = "out";
    out.add("config.json", to_json(generated).dump(2) + "\n");
    out.add_json("fixture.json", {{"seed", a.seed}, {"mfis", a.mfis}, {"clients", a.clients}, {"days", a.days},
                                  {"conversions", data.conversions.size()}, {"products", data.products.size()},
                                  {"clicks", data.clicks.size()}});
    out.commit("fixture", c);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MFI ranking pipeline: features, Markov-chain ranking, offline evaluation"};
    app.require_subcommand(1);

    Overrides o_validate, o_features, o_rank, o_evaluate, o_abtest, o_report, o_fixture;
    std::string feature_file, evaluation_path;
    AbArgs ab;
    FixtureArgs fx;

    auto* validate_cmd = app.add_subcommand("validate", "parse the datasets and write a validation report");
    add_common(validate_cmd, o_validate);
    auto* features_cmd = app.add_subcommand("features", "compute the per-MFI feature table");
    add_common(features_cmd, o_features);
    auto* rank_cmd = app.add_subcommand("rank", "rank MFIs from a feature table or from the datasets");
    add_common(rank_cmd, o_rank);
    rank_cmd->add_option("input", feature_file, "feature CSV (mfi_id,rating_norm,lar_norm,fairness,service_p90_sec,epc)");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "weekly schedule, reapproval table and offline simulation");
    add_common(evaluate_cmd, o_evaluate);
    auto* abtest_cmd = app.add_subcommand("abtest", "one-sided A/B statistics");
    add_common(abtest_cmd, o_abtest, false);
    abtest_cmd->add_option("--fisher", ab.fisher, "S1 N1 S2 N2")->expected(4);
    abtest_cmd->add_option("--welch", ab.welch, "SAMPLE1 SAMPLE2 (one number per line)")->expected(2);
    abtest_cmd->add_option("--yule", ab.yule, "N11 N10 N01 N00")->expected(4);
    abtest_cmd->add_option("--level", ab.level, "confidence level for the Yule interval")->check(CLI::Range(0.5, 0.999999));
    auto* report_cmd = app.add_subcommand("report", "daily and weekly plot series from an evaluation");
    add_common(report_cmd, o_report, false);
    report_cmd->add_option("--evaluation", evaluation_path, "evaluation.json (default: <out>/evaluation.json)");
    auto* fixture_cmd = app.add_subcommand("fixture", "write a synthetic dataset");
    add_common(fixture_cmd, o_fixture, false);
    fixture_cmd->add_option("--seed", fx.seed, "generator seed");
    fixture_cmd->add_option("--mfis", fx.mfis, "number of MFIs");
    fixture_cmd->add_option("--clients", fx.clients, "number of clients");
    fixture_cmd->add_option("--days", fx.days, "days covered");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*validate_cmd) return cmd_validate(o_validate);
        if (*features_cmd) return cmd_features(o_features);
        if (*rank_cmd) return cmd_rank(o_rank, feature_file);
        if (*evaluate_cmd) return cmd_evaluate(o_evaluate);
        if (*abtest_cmd) return cmd_abtest(o_abtest, ab);
        if (*report_cmd) return cmd_report(o_report, evaluation_path);
        if (*fixture_cmd) return cmd_fixture(o_fixture, fx);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}

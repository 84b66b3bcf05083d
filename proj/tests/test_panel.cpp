#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bankruin/panel.hpp"

using namespace bankruin;

namespace {

PanelSchema tiny_schema() {
    PanelSchema s;
    s.columns = {{"bank_id", "bank"},  {"date", "year"},
                 {"assets", "assets"}, {"deposits", "deposits"},
                 {"equity", "equity"}, {"surplus_profit", "surplus"},
                 {"national_bank_notes", "notes"}};
    return s;
}

BankPanel load_from(const std::string& text, const PanelSchema& schema, LoadReport& report) {
    std::istringstream in(text);
    return load_panel(in, schema, LoadOptions{}, report);
}

BankObservation obs(const std::string& bank, int year, double assets) {
    BankObservation o;
    o.bank_id = bank;
    o.date = Date{year, 0};
    o.assets = assets;
    return o;
}

}  // namespace

TEST_CASE("load_panel: well-formed file loads with zero rejects") {
    LoadReport report;
    auto panel = load_from(
        "bank,year,assets,deposits,equity,surplus,notes\n"
        "7,1893,100,80,12,6,5\n"
        "7,1894,110,85,13,6,5\n"
        "9,1893,50,40,6,2,2\n",
        tiny_schema(), report);
    CHECK(panel.size() == 3);
    CHECK(report.rejects.empty());
    // sorted by (bank_id, date)
    CHECK(panel.obs[0].bank_id == "7");
    CHECK(panel.obs[2].bank_id == "9");
}

TEST_CASE("load_panel: nonpositive assets rejected with reason") {
    LoadReport report;
    auto panel = load_from(
        "bank,year,assets,deposits,equity,surplus,notes\n"
        "7,1893,0,80,12,6,5\n"
        "9,1893,50,40,6,2,2\n",
        tiny_schema(), report);
    CHECK(panel.size() == 1);
    REQUIRE(report.rejects.size() == 1);
    CHECK(report.rejects[0].line_no == 2);
    CHECK(report.rejects[0].reason == "nonpositive assets");
    CHECK(report.to_text() == "2\tnonpositive assets\n");
}

TEST_CASE("load_panel: malformed rows rejected with line numbers") {
    LoadReport report;
    auto panel = load_from(
        "bank,year,assets,deposits,equity,surplus,notes\n"
        "7,1893,abc,80,12,6,5\n"
        "8,1893,50\n"
        "9,1893,50,40,6,2,2\n",
        tiny_schema(), report);
    CHECK(panel.size() == 1);
    REQUIRE(report.rejects.size() == 2);
    CHECK(report.rejects[0].reason.find("unparseable number") != std::string::npos);
    CHECK(report.rejects[1].reason.find("wrong arity") != std::string::npos);
}

TEST_CASE("load_panel: duplicate (bank_id, date) is a hard error naming the key") {
    LoadReport report;
    CHECK_THROWS_WITH_AS(load_from(
                             "bank,year,assets,deposits,equity,surplus,notes\n"
                             "7,1893,100,80,12,6,5\n"
                             "7,1893,101,81,12,6,5\n",
                             tiny_schema(), report),
                         doctest::Contains("(7, 1893)"), DataError);
}

TEST_CASE("load_panel: era bounds enforced when configured") {
    PanelSchema schema = tiny_schema();
    LoadOptions opts;
    opts.min_year = 1880;
    opts.max_year = 1934;
    std::istringstream in(
        "bank,year,assets,deposits,equity,surplus,notes\n"
        "7,1862,100,80,12,6,5\n"
        "7,1893,100,80,12,6,5\n");
    LoadReport report;
    auto panel = load_panel(in, schema, opts, report);
    CHECK(panel.size() == 1);
    REQUIRE(report.rejects.size() == 1);
    CHECK(report.rejects[0].reason.find("era start") != std::string::npos);
}

TEST_CASE("compute_fundamentals: historical hand arithmetic") {
    BankPanel panel;
    auto o = obs("7", 1893, 100.0);
    o.deposits = 80.0;
    o.equity = 12.0;
    o.national_bank_notes = 5.0;
    o.surplus_profit = 6.0;
    panel.obs.push_back(o);
    panel.sort_rows();
    compute_fundamentals(panel, FeatureConfig{});
    // noncore = (100 - 80 - 12 - 5) / 100
    CHECK(*panel.features[0].noncore == doctest::Approx(0.03).epsilon(1e-12));
    // insolvency = 6 / 12
    CHECK(*panel.features[0].insolvency == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(*panel.features[0].interaction ==
          doctest::Approx(0.5 * 0.03).epsilon(1e-12));
}

TEST_CASE("compute_fundamentals: modern hand arithmetic") {
    BankPanel panel;
    auto o = obs("7", 1993, 200.0);
    o.time_deposits = 30.0;
    o.wholesale_funding = 10.0;
    o.net_income = 4.0;
    panel.obs.push_back(o);
    panel.sort_rows();
    FeatureConfig config;
    config.era = Era::Modern;
    compute_fundamentals(panel, config);
    CHECK(*panel.features[0].noncore == doctest::Approx(0.20).epsilon(1e-12));
    CHECK(*panel.features[0].insolvency == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("compute_fundamentals: interaction is exact product") {
    BankPanel panel;
    for (int k = 0; k < 20; ++k) {
        auto o = obs("b" + std::to_string(k), 1900, 100.0 + k);
        o.deposits = 70.0 + 0.3 * k;
        o.equity = 11.0 + 0.1 * k;
        o.national_bank_notes = 4.0;
        o.surplus_profit = 2.0 + 0.2 * k;
        panel.obs.push_back(o);
    }
    panel.sort_rows();
    compute_fundamentals(panel, FeatureConfig{});
    for (const auto& f : panel.features) {
        REQUIRE(f.interaction.has_value());
        CHECK(*f.interaction == *f.insolvency * *f.noncore);  // bit-exact
    }
}

TEST_CASE("compute_fundamentals: missing inputs stay missing, absent era columns error") {
    BankPanel panel;
    auto complete = obs("a", 1900, 100.0);
    complete.deposits = 80.0;
    complete.equity = 10.0;
    complete.national_bank_notes = 5.0;
    complete.surplus_profit = 2.0;
    auto partial = obs("b", 1900, 100.0);
    partial.deposits = 80.0;  // equity and the rest missing
    panel.obs.push_back(complete);
    panel.obs.push_back(partial);
    panel.sort_rows();
    compute_fundamentals(panel, FeatureConfig{});
    CHECK(panel.features[0].insolvency.has_value());
    CHECK_FALSE(panel.features[1].insolvency.has_value());
    CHECK_FALSE(panel.features[1].noncore.has_value());

    BankPanel modern_missing;
    modern_missing.obs.push_back(obs("a", 1993, 100.0));
    modern_missing.sort_rows();
    FeatureConfig config;
    config.era = Era::Modern;
    CHECK_THROWS_WITH_AS(compute_fundamentals(modern_missing, config),
                         doctest::Contains("net_income"), DataError);
}

TEST_CASE("compute_fundamentals: configurable noncore subtraction set") {
    BankPanel panel;
    auto o = obs("7", 1910, 100.0);
    o.deposits = 80.0;
    o.equity = 12.0;
    o.national_bank_notes = 5.0;
    o.surplus_profit = 6.0;
    panel.obs.push_back(o);
    panel.sort_rows();
    FeatureConfig config;
    config.historical_noncore_subtract = {"deposits", "equity"};
    compute_fundamentals(panel, config);
    CHECK(*panel.features[0].noncore == doctest::Approx(0.08).epsilon(1e-12));
}

TEST_CASE("asset_growth_quintiles: ordered growths land in quintiles 1..5") {
    BankPanel panel;
    double growth[] = {-0.2, -0.1, 0.0, 0.1, 0.2};
    for (int b = 0; b < 5; ++b) {
        panel.obs.push_back(obs("b" + std::to_string(b), 1890, 100.0));
        panel.obs.push_back(obs("b" + std::to_string(b), 1893, 100.0 * std::exp(growth[b])));
    }
    panel.sort_rows();
    auto report = asset_growth_quintiles(panel, 3);
    CHECK(report.n_assigned == 5);
    for (size_t i = 0; i < panel.size(); ++i) {
        const auto& o = panel.obs[i];
        if (o.date.year == 1890) {
            CHECK_FALSE(panel.features[i].growth_quintile.has_value());
        } else {
            int b = o.bank_id[1] - '0';
            CHECK(*panel.features[i].growth_quintile == b + 1);
        }
    }
}

TEST_CASE("asset_growth_quintiles: bank with short history gets missing") {
    BankPanel panel;
    for (int b = 0; b < 6; ++b) {
        panel.obs.push_back(obs("b" + std::to_string(b), 1890, 100.0));
        panel.obs.push_back(obs("b" + std::to_string(b), 1893, 110.0 + b));
    }
    panel.obs.push_back(obs("young", 1892, 90.0));
    panel.obs.push_back(obs("young", 1893, 95.0));
    panel.sort_rows();
    asset_growth_quintiles(panel, 3);
    for (size_t i = 0; i < panel.size(); ++i) {
        if (panel.obs[i].bank_id == "young") {
            CHECK_FALSE(panel.features[i].growth_quintile.has_value());
        }
    }
}

TEST_CASE("asset_growth_quintiles: equal growths tie-break by bank_id, sizes differ by <= 1") {
    BankPanel panel;
    for (int b = 0; b < 10; ++b) {
        std::string id = "b" + std::to_string(b);
        panel.obs.push_back(obs(id, 1890, 100.0));
        panel.obs.push_back(obs(id, 1893, 120.0));  // identical growth everywhere
    }
    panel.sort_rows();
    asset_growth_quintiles(panel, 3);
    int count[6] = {0, 0, 0, 0, 0, 0};
    for (size_t i = 0; i < panel.size(); ++i) {
        if (panel.obs[i].date.year != 1893) continue;
        REQUIRE(panel.features[i].growth_quintile.has_value());
        ++count[*panel.features[i].growth_quintile];
        // deterministic: b0,b1 -> q1; b2,b3 -> q2; ...
        int b = panel.obs[i].bank_id[1] - '0';
        CHECK(*panel.features[i].growth_quintile == b / 2 + 1);
    }
    for (int q = 1; q <= 5; ++q) CHECK(count[q] == 2);
}

TEST_CASE("asset_growth_quintiles: sizes differ by at most one for any cross-section") {
    for (int n : {5, 6, 7, 9, 11, 13, 23, 48}) {
        BankPanel panel;
        for (int b = 0; b < n; ++b) {
            char id[8];
            std::snprintf(id, sizeof(id), "b%03d", b);
            panel.obs.push_back(obs(id, 1890, 100.0));
            panel.obs.push_back(obs(id, 1893, 100.0 + b + (b % 3 == 0 ? 0.0 : 0.5)));
        }
        panel.sort_rows();
        asset_growth_quintiles(panel, 3);
        int count[6] = {0, 0, 0, 0, 0, 0};
        for (size_t i = 0; i < panel.size(); ++i) {
            if (panel.obs[i].date.year != 1893) continue;
            REQUIRE(panel.features[i].growth_quintile.has_value());
            ++count[*panel.features[i].growth_quintile];
        }
        int lo = n, hi = 0, total = 0;
        for (int q = 1; q <= 5; ++q) {
            lo = std::min(lo, count[q]);
            hi = std::max(hi, count[q]);
            total += count[q];
        }
        CHECK(total == n);
        CHECK(hi - lo <= 1);
    }
}

TEST_CASE("asset_growth_quintiles: a year with fewer than 5 banks is skipped") {
    BankPanel panel;
    for (int b = 0; b < 4; ++b) {
        std::string id = "b" + std::to_string(b);
        panel.obs.push_back(obs(id, 1890, 100.0));
        panel.obs.push_back(obs(id, 1893, 110.0 + b));
    }
    panel.sort_rows();
    auto report = asset_growth_quintiles(panel, 3);
    CHECK(report.n_assigned == 0);
    CHECK(report.skipped_years == std::vector<int>{1893});
}

TEST_CASE("label_failures: window membership (t, t+h]") {
    auto make_panel = [] {
        BankPanel panel;
        panel.obs.push_back(obs("7", 1893, 100.0));
        panel.sort_rows();
        return panel;
    };
    auto label_of = [&](int failure_year, int h) {
        BankPanel panel = make_panel();
        std::vector<FailureEvent> events{{"7", Date{failure_year, 0}, {}, {}, {}}};
        label_failures(panel, events, h);
        return static_cast<int>(panel.features[0].label.at(h));
    };
    CHECK(label_of(1894, 1) == 1);  // inside
    CHECK(label_of(1897, 3) == 0);  // outside
    CHECK(label_of(1896, 3) == 1);  // boundary inclusive
}

TEST_CASE("label_failures: monotone in horizon and drops post-failure rows") {
    BankPanel panel;
    for (int y = 1890; y <= 1900; ++y) panel.obs.push_back(obs("7", y, 100.0));
    panel.obs.push_back(obs("9", 1890, 50.0));
    panel.sort_rows();
    std::vector<FailureEvent> events{{"7", Date{1896, 0}, {}, {}, {}}};
    auto r1 = label_failures(panel, events, 1);
    auto r3 = label_failures(panel, events, 3);
    label_failures(panel, events, 5);
    CHECK(r1.n_dropped_post_failure == 5);  // 1896..1900
    CHECK(r3.n_dropped_post_failure == 0);  // already gone
    for (size_t i = 0; i < panel.size(); ++i) {
        CHECK(panel.obs[i].date.frac() < 1896.0);
        const auto& lab = panel.features[i].label;
        if (lab.at(1) == 1) CHECK(lab.at(3) == 1);
        if (lab.at(3) == 1) CHECK(lab.at(5) == 1);
    }
}

TEST_CASE("label_failures: unknown bank warns and is ignored") {
    BankPanel panel;
    panel.obs.push_back(obs("7", 1893, 100.0));
    panel.sort_rows();
    std::vector<FailureEvent> events{{"ghost", Date{1894, 0}, {}, {}, {}}};
    auto report = label_failures(panel, events, 1);
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find("ghost") != std::string::npos);
    CHECK(panel.features[0].label.at(1) == 0);
}

TEST_CASE("filter_de_novo boundary and missing-charter policy") {
    BankPanel panel;
    auto young = obs("y", 1891, 100.0);
    young.charter_date = Date{1890, 0};
    auto boundary = obs("b", 1893, 100.0);
    boundary.charter_date = Date{1890, 0};
    auto unknown = obs("u", 1893, 100.0);
    panel.obs.push_back(young);
    panel.obs.push_back(boundary);
    panel.obs.push_back(unknown);
    panel.sort_rows();
    DeNovoReport report;
    auto filtered = filter_de_novo(panel, 3, report);
    CHECK(report.n_removed == 1);
    CHECK(report.n_missing_charter == 1);
    REQUIRE(filtered.size() == 2);
    CHECK(filtered.obs[0].bank_id == "b");
    CHECK(filtered.obs[1].bank_id == "u");
}

TEST_CASE("deposit_outflow_at_failure: growth, clipping and the strict run rule") {
    FailureEvent ev{"7", Date{1894, 0}, 100.0, 80.0, {}};
    auto r = deposit_outflow_at_failure(ev);
    CHECK(*r.growth == doctest::Approx(-0.20).epsilon(1e-12));
    CHECK(*r.run_flag);

    ev.deposits_at_failure = 100.0;
    r = deposit_outflow_at_failure(ev);
    CHECK(*r.growth == 0.0);
    CHECK_FALSE(*r.run_flag);

    ev.deposits_at_failure = 250.0;  // clipped at +100%
    r = deposit_outflow_at_failure(ev);
    CHECK(*r.growth == 1.0);

    // exactly -7.5% is not a run (strict inequality)
    ev.deposits_at_failure = 92.5;
    r = deposit_outflow_at_failure(ev);
    CHECK_FALSE(*r.run_flag);
    ev.deposits_at_failure = 92.4999;
    r = deposit_outflow_at_failure(ev);
    CHECK(*r.run_flag);

    // missing at-failure deposits: tri-state undefined
    ev.deposits_at_failure.reset();
    r = deposit_outflow_at_failure(ev);
    CHECK_FALSE(r.growth.has_value());
    CHECK_FALSE(r.run_flag.has_value());
}

TEST_CASE("deposit_outflow_stats bins") {
    std::vector<FailureEvent> events = {
        {"a", Date{1894, 0}, 100.0, 60.0, {}},   // -40%
        {"b", Date{1894, 0}, 100.0, 75.0, {}},   // -25%
        {"c", Date{1894, 0}, 100.0, 90.0, {}},   // -10%
        {"d", Date{1894, 0}, 100.0, 95.0, {}},   // -5%
        {"e", Date{1894, 0}, 100.0, 99.0, {}},   // -1%
        {"f", Date{1894, 0}, 100.0, 105.0, {}},  // +5%
        {"g", Date{1894, 0}, {}, {}, {}},        // undefined, skipped
    };
    auto stats = deposit_outflow_stats(events);
    CHECK(stats.n == 6);
    CHECK(stats.n_runs == 3);
    for (double share : stats.bin_share) CHECK(share == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(stats.average == doctest::Approx((-0.40 - 0.25 - 0.10 - 0.05 - 0.01 + 0.05) / 6.0));
}

TEST_CASE("bank_age_years") {
    CHECK(bank_age_years(Date{1893, 0}, Date{1890, 0}) == 3);
    CHECK(bank_age_years(Date{1893, 1}, Date{1890, 4}) == 2);
    CHECK(bank_age_years(Date{1890, 0}, Date{1890, 0}) == 0);
}

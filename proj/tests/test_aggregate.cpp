#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bankruin/aggregate.hpp"
#include "bankruin/rng.hpp"

using namespace bankruin;

namespace {

PredictionRow oos(const std::string& bank, int feature_year, double score, int label = 0) {
    return {bank, Date{feature_year, 0}, score, label, PredictionOrigin::OutOfSample};
}

AggregateSeries series_from(const std::vector<std::pair<double, double>>& rows, int first_year) {
    AggregateSeries s;
    int year = first_year;
    for (auto [predicted, actual] : rows) {
        AggregateSeries::Row row;
        row.year = year++;
        row.predicted = predicted;
        row.actual = actual;
        row.n_scored = 100;
        row.n_at_risk = 100;
        s.rows.push_back(row);
    }
    return s;
}

}  // namespace

TEST_CASE("aggregate_predicted_rate: equal weights take the plain mean") {
    PredictionSet set;
    set.rows = {oos("a", 1900, 0.1), oos("b", 1900, 0.3)};
    auto series = aggregate_predicted_rate(set, AggregateWeights::Equal);
    REQUIRE(series.rows.size() == 1);
    CHECK(series.rows[0].year == 1901);
    CHECK(*series.rows[0].predicted == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("aggregate_predicted_rate: asset weights 90/10") {
    PredictionSet set;
    set.rows = {oos("a", 1900, 0.1), oos("b", 1900, 0.3)};
    BankPanel panel;
    BankObservation a;
    a.bank_id = "a";
    a.date = Date{1900, 0};
    a.assets = 90.0;
    BankObservation b;
    b.bank_id = "b";
    b.date = Date{1900, 0};
    b.assets = 10.0;
    panel.obs = {a, b};
    panel.sort_rows();
    label_failures(panel, {}, 1);
    auto series =
        aggregate_predicted_rate(set, AggregateWeights::AssetShare, &panel);
    REQUIRE(series.rows.size() == 1);
    CHECK(*series.rows[0].predicted == doctest::Approx(0.12).epsilon(1e-12));
}

TEST_CASE("aggregate_predicted_rate: single-bank year returns that score") {
    PredictionSet set;
    set.rows = {oos("solo", 1905, -0.02)};  // negative LPM scores stay unclipped
    auto series = aggregate_predicted_rate(set, AggregateWeights::Equal);
    REQUIRE(series.rows.size() == 1);
    CHECK(*series.rows[0].predicted == -0.02);
}

TEST_CASE("aggregate_predicted_rate: in-sample rows and unscored years are ignored") {
    PredictionSet set;
    set.rows = {oos("a", 1900, 0.1),
                {"b", Date{1900, 0}, 0.9, 0, PredictionOrigin::InSample}};
    auto series = aggregate_predicted_rate(set, AggregateWeights::Equal);
    REQUIRE(series.rows.size() == 1);
    CHECK(series.rows[0].n_scored == 1);
    CHECK(*series.rows[0].predicted == 0.1);
}

TEST_CASE("equal-weight aggregation of a constant score is exactly that constant") {
    PredictionSet set;
    const double c = 0.03125;
    for (int year = 1900; year < 1910; ++year) {
        for (int k = 0; k < 7; ++k) set.rows.push_back(oos("b" + std::to_string(k), year, c));
    }
    auto series = aggregate_predicted_rate(set, AggregateWeights::Equal);
    REQUIRE(series.rows.size() == 10);
    for (const auto& row : series.rows) CHECK(*row.predicted == c);
}

TEST_CASE("aggregation is linear in the scores") {
    CounterRng rng(77, 0);
    PredictionSet base, shifted;
    const double a = 2.5, b = -0.03;
    for (int year = 1900; year < 1912; ++year) {
        for (int k = 0; k < 8; ++k) {
            double score = rng.next_double() * 0.1;
            std::string bank = "b" + std::to_string(k);
            base.rows.push_back(oos(bank, year, score));
            shifted.rows.push_back(oos(bank, year, a * score + b));
        }
    }
    auto s1 = aggregate_predicted_rate(base, AggregateWeights::Equal);
    auto s2 = aggregate_predicted_rate(shifted, AggregateWeights::Equal);
    REQUIRE(s1.rows.size() == s2.rows.size());
    for (size_t i = 0; i < s1.rows.size(); ++i) {
        CHECK(*s2.rows[i].predicted ==
              doctest::Approx(a * *s1.rows[i].predicted + b).epsilon(1e-12));
    }
}

TEST_CASE("aggregate_predicted_rate: actual rate from the panel, both denominators") {
    // year 1900: banks a,b file; a fails in 1901. year 1901: b files.
    BankPanel panel;
    for (auto [bank, year] : std::vector<std::pair<std::string, int>>{
             {"a", 1900}, {"b", 1900}, {"b", 1901}}) {
        BankObservation o;
        o.bank_id = bank;
        o.date = Date{year, 0};
        o.assets = 100.0;
        panel.obs.push_back(std::move(o));
    }
    panel.sort_rows();
    std::vector<FailureEvent> events{{"a", Date{1901, 0}, {}, {}, {}}};
    label_failures(panel, events, 1);

    PredictionSet set;
    set.rows = {oos("a", 1900, 0.4, 1), oos("b", 1900, 0.1, 0)};

    auto prior = aggregate_predicted_rate(set, AggregateWeights::Equal, &panel,
                                          AtRiskDenominator::PriorYearFilers);
    REQUIRE(prior.rows.size() == 1);
    CHECK(prior.rows[0].n_at_risk == 2);
    CHECK(*prior.rows[0].actual == doctest::Approx(0.5).epsilon(1e-15));

    auto current = aggregate_predicted_rate(set, AggregateWeights::Equal, &panel,
                                            AtRiskDenominator::CurrentYearBanks);
    REQUIRE(current.rows.size() == 1);
    CHECK(current.rows[0].n_at_risk == 1);  // only b files in 1901
    CHECK(*current.rows[0].actual == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("aggregate_regression: identity series gives beta 1, alpha 0, R^2 1") {
    CounterRng rng(5, 0);
    std::vector<std::pair<double, double>> rows;
    for (int t = 0; t < 12; ++t) {
        double p = 0.02 + 0.05 * rng.next_double();
        rows.push_back({p, p});
    }
    auto reg = aggregate_regression(series_from(rows, 1900));
    CHECK(std::abs(reg.fit.coef_of("predicted") - 1.0) < 1e-12);
    CHECK(std::abs(reg.fit.coef_of("const")) < 1e-12);
    CHECK(std::abs(reg.fit.stat - 1.0) < 1e-12);
    CHECK(reg.lags == newey_west_lags(newey_west_default_S(12)));
}

TEST_CASE("aggregate_regression: year order does not matter") {
    CounterRng rng(6, 0);
    std::vector<std::pair<double, double>> rows;
    for (int t = 0; t < 15; ++t) {
        double p = 0.05 * rng.next_double();
        rows.push_back({p, p + 0.01 * rng.next_normal()});
    }
    auto series = series_from(rows, 1900);
    auto shuffled = series;
    std::reverse(shuffled.rows.begin(), shuffled.rows.end());
    std::swap(shuffled.rows[2], shuffled.rows[7]);
    auto a = aggregate_regression(series);
    auto b = aggregate_regression(shuffled);
    CHECK(a.fit.coef_of("predicted") == b.fit.coef_of("predicted"));
    CHECK(a.nw_se[1] == b.nw_se[1]);
}

TEST_CASE("aggregate_regression preconditions") {
    // fewer than 8 overlapping years
    std::vector<std::pair<double, double>> few = {{0.1, 0.1}, {0.2, 0.2}, {0.3, 0.3}};
    CHECK_THROWS_WITH_AS(aggregate_regression(series_from(few, 1900)),
                         doctest::Contains("8 overlapping"), DataError);
    // constant predictor
    std::vector<std::pair<double, double>> flat(10, {0.05, 0.04});
    flat[3].second = 0.06;
    CHECK_THROWS_WITH_AS(aggregate_regression(series_from(flat, 1900)),
                         doctest::Contains("degenerate"), EstimationError);
}

TEST_CASE("aggregate_regression: well-specified DGP covers beta = 1") {
    // one 60-year draw; the 50-replication coverage check lives in the
    // acceptance suite
    CounterRng rng(11, 0);
    std::vector<std::pair<double, double>> rows;
    double z = 0.0;
    for (int t = 0; t < 60; ++t) {
        z = 0.5 * z + rng.next_normal();
        double predicted = 0.04 + 0.012 * z;
        double actual = predicted + 0.008 * rng.next_normal();
        rows.push_back({predicted, actual});
    }
    auto reg = aggregate_regression(series_from(rows, 1880));
    double beta = reg.fit.coef_of("predicted");
    double se = reg.nw_se[1];
    CHECK(std::abs(beta - 1.0) < 2.0 * se);
    CHECK(reg.n_years == 60);
}

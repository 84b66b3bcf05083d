#include "bankruin/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

namespace bankruin {

std::string AggregateSeries::to_csv(char delim) const {
    std::string out = "year";
    for (const char* col : {"predicted", "actual", "n_scored", "n_at_risk"}) {
        out += delim;
        out += col;
    }
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.year);
        out += delim;
        out += r.predicted ? format_double(*r.predicted) : "";
        out += delim;
        out += r.actual ? format_double(*r.actual) : "";
        out += delim;
        out += std::to_string(r.n_scored);
        out += delim;
        out += std::to_string(r.n_at_risk);
        out += '\n';
    }
    return out;
}

AggregateSeries aggregate_predicted_rate(const PredictionSet& predictions,
                                         AggregateWeights weights, const BankPanel* panel,
                                         AtRiskDenominator denominator) {
    // asset lookup for AssetShare weights
    std::unordered_map<std::string, double> assets_at;
    if (weights == AggregateWeights::AssetShare) {
        if (!panel) throw UsageError("asset-share weights need the panel");
        for (const auto& o : panel->obs) assets_at[o.bank_id + "@" + o.date.str()] = o.assets;
    }

    struct YearAccum {
        double weight_sum = 0.0;
        double weighted_score = 0.0;
        long n_scored = 0;
        long n_failed_scored = 0;
    };
    std::map<int, YearAccum> by_pred_year;  // prediction year = feature year + 1

    for (const auto& row : predictions.rows) {
        if (row.origin != PredictionOrigin::OutOfSample) continue;
        int pred_year = row.date.year + 1;
        auto& acc = by_pred_year[pred_year];
        double w = 1.0;
        if (weights == AggregateWeights::AssetShare) {
            auto it = assets_at.find(row.bank_id + "@" + row.date.str());
            if (it == assets_at.end()) continue;  // unweighted bank: no asset record
            w = it->second;
        }
        acc.weight_sum += w;
        acc.weighted_score += w * row.score;
        ++acc.n_scored;
        acc.n_failed_scored += row.label;
    }

    // realized failures per prediction year from the panel, when given:
    // numerator = labeled prior-year filers that fail inside the window,
    // denominator per the config switch
    std::map<int, long> failures_in;      // prediction year -> failures
    std::map<int, long> prior_filers;     // prediction year -> labeled filers at t-1
    std::map<int, long> current_filers;   // year -> banks filing in that year
    if (panel) {
        int h = predictions.horizon;
        for (size_t i = 0; i < panel->obs.size(); ++i) {
            int filing_year = panel->obs[i].date.year;
            ++current_filers[filing_year];
            if (!panel->features[i].label.count(h)) continue;
            failures_in[filing_year + 1] += panel->features[i].label.at(h);
            ++prior_filers[filing_year + 1];
        }
    }

    AggregateSeries series;
    for (const auto& [year, acc] : by_pred_year) {
        AggregateSeries::Row row;
        row.year = year;
        row.n_scored = acc.n_scored;
        if (acc.n_scored > 0 && acc.weight_sum > 0.0) {
            row.predicted = acc.weighted_score / acc.weight_sum;
        }
        if (panel) {
            long denom = 0;
            if (denominator == AtRiskDenominator::PriorYearFilers) {
                auto it = prior_filers.find(year);
                if (it != prior_filers.end()) denom = it->second;
            } else {
                auto it = current_filers.find(year);
                if (it != current_filers.end()) denom = it->second;
            }
            if (denom > 0) {
                row.n_at_risk = denom;
                long failed = failures_in.count(year) ? failures_in.at(year) : 0;
                row.actual = static_cast<double>(failed) / static_cast<double>(denom);
            }
        } else if (acc.n_scored > 0) {
            row.n_at_risk = acc.n_scored;
            row.actual =
                static_cast<double>(acc.n_failed_scored) / static_cast<double>(acc.n_scored);
        }
        series.rows.push_back(row);
    }
    return series;
}

AggregateRegression aggregate_regression(const AggregateSeries& series) {
    std::vector<const AggregateSeries::Row*> usable;
    for (const auto& r : series.rows) {
        if (r.predicted && r.actual) usable.push_back(&r);
    }
    if (usable.size() < 8) {
        throw DataError("aggregate regression needs at least 8 overlapping years (have " +
                        std::to_string(usable.size()) + ")");
    }
    std::sort(usable.begin(), usable.end(),
              [](const auto* a, const auto* b) { return a->year < b->year; });

    long t_count = static_cast<long>(usable.size());
    DesignMatrix d;
    d.names = {"const", "predicted"};
    d.X.resize(t_count, 2);
    d.y.resize(t_count);
    for (long t = 0; t < t_count; ++t) {
        d.X(t, 0) = 1.0;
        d.X(t, 1) = *usable[static_cast<size_t>(t)]->predicted;
        d.y[t] = *usable[static_cast<size_t>(t)]->actual;
    }
    double first = d.X(0, 1);
    bool constant_pred = true;
    for (long t = 1; t < t_count; ++t) {
        if (d.X(t, 1) != first) {
            constant_pred = false;
            break;
        }
    }
    if (constant_pred) {
        throw EstimationError("degenerate aggregate regression: predicted rate is constant");
    }

    AggregateRegression out;
    out.fit = ols_fit(d);
    out.S = newey_west_default_S(t_count);
    out.lags = newey_west_lags(out.S);
    out.nw_se = newey_west_se(out.fit, d, out.S);
    out.n_years = t_count;
    return out;
}

}  // namespace bankruin

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bankruin/econometrics.hpp"
#include "bankruin/panel.hpp"
#include "bankruin/prediction.hpp"

namespace bankruin {

enum class AggregateWeights { Equal, AssetShare };
// Denominator for the realized failure rate: banks filing in the prior year
// (and not yet failed), or banks filing in the current year.
enum class AtRiskDenominator { PriorYearFilers, CurrentYearBanks };

// Predicted vs. realized aggregate failure rates. The prediction for year t
// averages out-of-sample scores dated t-1; negative LPM aggregates are
// reported unclipped.
struct AggregateSeries {
    struct Row {
        int year = 0;
        std::optional<double> predicted;
        std::optional<double> actual;
        long n_scored = 0;
        long n_at_risk = 0;
    };
    std::vector<Row> rows;

    std::string to_csv(char delim = ',') const;  // year,predicted,actual,n_scored,n_at_risk
};

// Collapses micro OOS scores into the predicted aggregate failure rate, with
// weights renormalized over the banks actually scored in each year. The
// panel supplies asset weights and the at-risk denominator; pass nullptr to
// fall back to the scored banks themselves.
AggregateSeries aggregate_predicted_rate(
    const PredictionSet& predictions, AggregateWeights weights,
    const BankPanel* panel = nullptr,
    AtRiskDenominator denominator = AtRiskDenominator::PriorYearFilers);

// OLS of the realized rate on the predicted rate with Newey-West standard
// errors at S = 1.3*sqrt(T). Needs at least 8 overlapping years.
struct AggregateRegression {
    FitResult fit;           // coefficients: const, predicted
    Eigen::VectorXd nw_se;
    double S = 0.0;
    int lags = 0;
    long n_years = 0;
};

AggregateRegression aggregate_regression(const AggregateSeries& series);

}  // namespace bankruin

#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bankruin/classification.hpp"
#include "bankruin/econometrics.hpp"
#include "bankruin/panel.hpp"

namespace bankruin {

enum class PredEstimator { Lpm, Logit };

// Failure-prediction model: which regressors enter, the functional form,
// and the labeling horizon.
struct ModelSpec {
    std::set<std::string> regressors;
    PredEstimator estimator = PredEstimator::Lpm;
    int horizon = 1;
    bool allow_interaction_without_parents = false;

    static const std::vector<std::string>& known_regressors();
    static ModelSpec from_json(const nlohmann::json& j);
    static ModelSpec from_file(const std::string& path);
    nlohmann::json to_json() const;
    void validate() const;
};

enum class PredictionOrigin { InSample, OutOfSample };

struct PredictionRow {
    std::string bank_id;
    Date date;
    double score;       // LPM scores may lie outside [0,1]
    int label;
    PredictionOrigin origin;
};

struct PredictionSet {
    std::vector<PredictionRow> rows;  // sorted by (date, bank_id)
    int horizon = 1;

    std::vector<double> scores() const;
    std::vector<int> labels() const;
    std::string to_csv(char delim = ',') const;
    static PredictionSet from_csv(std::istream& in, char delim = ',');
};

// Complete-case design for a model spec. `row_index` maps design rows back
// to panel rows. Quintiles enter as dummies with quintile 1 omitted.
struct PredictionDesign {
    DesignMatrix design;
    std::vector<size_t> row_index;
};

PredictionDesign build_prediction_design(const BankPanel& panel, const ModelSpec& spec);

// Fits the model on all complete cases (needs at least 10 rows per
// parameter) and delegates to ols_fit or logit_fit.
FitResult fit_failure_model(const BankPanel& panel, const ModelSpec& spec);

// In-sample scores for every complete case.
PredictionSet in_sample_predictions(const BankPanel& panel, const ModelSpec& spec);

struct BacktestWindow {
    int year = 0;          // scored year
    long n_train = 0;
    long n_scored = 0;
    bool ok = false;
    std::string message;   // failure reason when !ok
};

struct BacktestResult {
    PredictionSet predictions;
    std::vector<BacktestWindow> windows;
};

// Expanding-window pseudo-out-of-sample backtest with annual refits. The
// model scoring year s trains only on observations whose h-year outcome
// window closed by s-1, so no label information leaks across the forecast
// origin. Window fits run in parallel; assembly is order-independent.
BacktestResult expanding_oos(const BankPanel& panel, const ModelSpec& spec,
                             int initial_train_years = 10, int threads = 1);

// Conditional failure frequencies by feature bins cut at pooled-sample
// percentiles (optionally within-year). One or two features.
struct BinnedProbTable {
    std::vector<std::string> feature_names;         // 1 or 2
    std::vector<std::vector<double>> edge_values;   // pooled cut values per feature
    std::vector<std::vector<double>> edge_percentiles;
    struct Cell {
        int bin1 = 0;
        int bin2 = 0;  // 0 when single feature
        long count = 0;
        long failures = 0;
        std::optional<double> prob;
    };
    std::vector<Cell> cells;
    std::string to_csv(char delim = ',') const;
};

BinnedProbTable binned_failure_prob(const BankPanel& panel,
                                    const std::vector<std::string>& features,
                                    const std::vector<std::vector<double>>& percentile_edges,
                                    int horizon, bool within_year = false);

}  // namespace bankruin

#include "bankruin/prediction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "bankruin/csv.hpp"

namespace bankruin {
namespace {

// percentile by linear interpolation over the sorted sample
double percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw DataError("percentile of empty sample");
    std::sort(values.begin(), values.end());
    double h = (static_cast<double>(values.size()) - 1.0) * pct / 100.0;
    auto lo = static_cast<size_t>(std::floor(h));
    auto hi = static_cast<size_t>(std::ceil(h));
    double w = h - static_cast<double>(lo);
    return values[lo] * (1.0 - w) + values[hi] * w;
}

int bin_of(double value, const std::vector<double>& edges) {
    // (-inf, e1], (e1, e2], ..., (em, +inf)
    for (size_t k = 0; k < edges.size(); ++k) {
        if (value <= edges[k]) return static_cast<int>(k);
    }
    return static_cast<int>(edges.size());
}

std::optional<double> feature_value(const BankPanel& panel, size_t row,
                                    const std::string& name) {
    const FeatureRow& f = panel.features[row];
    const BankObservation& o = panel.obs[row];
    if (name == "insolvency") return f.insolvency;
    if (name == "noncore") return f.noncore;
    if (name == "interaction") return f.interaction;
    if (name == "log_age") return f.log_age;
    if (name == "gdp_growth_3y") return o.gdp_growth_3y;
    if (name == "inflation_3y") return o.inflation_3y;
    throw UsageError("unknown feature '" + name + "'");
}

double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

}  // namespace

const std::vector<std::string>& ModelSpec::known_regressors() {
    static const std::vector<std::string> names = {
        "insolvency", "noncore",        "interaction", "growth_quintiles",
        "gdp_growth_3y", "inflation_3y", "log_age"};
    return names;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("model spec must be a JSON object");
    ModelSpec spec;
    if (j.contains("regressors")) {
        for (const auto& r : j.at("regressors")) {
            spec.regressors.insert(r.get<std::string>());
        }
    }
    if (j.contains("estimator")) {
        std::string e = lower(j.at("estimator").get<std::string>());
        if (e == "lpm" || e == "ols") spec.estimator = PredEstimator::Lpm;
        else if (e == "logit") spec.estimator = PredEstimator::Logit;
        else throw UsageError("unknown estimator '" + e + "' (expected lpm or logit)");
    }
    if (j.contains("horizon")) spec.horizon = j.at("horizon").get<int>();
    if (j.contains("allow_interaction_without_parents")) {
        spec.allow_interaction_without_parents =
            j.at("allow_interaction_without_parents").get<bool>();
    }
    spec.validate();
    return spec;
}

ModelSpec ModelSpec::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open spec file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("spec file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json j;
    j["regressors"] = regressors;
    j["estimator"] = estimator == PredEstimator::Lpm ? "lpm" : "logit";
    j["horizon"] = horizon;
    j["allow_interaction_without_parents"] = allow_interaction_without_parents;
    return j;
}

void ModelSpec::validate() const {
    if (horizon < 1) throw UsageError("model horizon must be >= 1");
    const auto& known = known_regressors();
    for (const auto& r : regressors) {
        if (std::find(known.begin(), known.end(), r) == known.end()) {
            throw UsageError("unknown regressor '" + r + "'");
        }
    }
    if (regressors.count("interaction") && !allow_interaction_without_parents) {
        if (!regressors.count("insolvency") || !regressors.count("noncore")) {
            throw UsageError(
                "spec includes 'interaction' without both parents (insolvency, noncore); set "
                "allow_interaction_without_parents to override");
        }
    }
}

PredictionDesign build_prediction_design(const BankPanel& panel, const ModelSpec& spec) {
    spec.validate();
    if (std::find(panel.horizons.begin(), panel.horizons.end(), spec.horizon) ==
        panel.horizons.end()) {
        throw DataError("labels for horizon " + std::to_string(spec.horizon) +
                        " not computed; run label_failures first");
    }

    std::vector<std::string> scalar_regs;
    bool quintiles = false;
    for (const auto& r : spec.regressors) {
        if (r == "growth_quintiles") quintiles = true;
        else scalar_regs.push_back(r);
    }
    std::sort(scalar_regs.begin(), scalar_regs.end());

    std::vector<std::string> names;
    names.emplace_back("const");
    for (const auto& r : scalar_regs) names.push_back(r);
    if (quintiles) {
        for (int q = 2; q <= 5; ++q) names.push_back("growth_q" + std::to_string(q));
    }

    // complete cases
    std::vector<size_t> rows;
    for (size_t i = 0; i < panel.size(); ++i) {
        bool complete = true;
        for (const auto& r : scalar_regs) {
            if (!feature_value(panel, i, r)) {
                complete = false;
                break;
            }
        }
        if (quintiles && !panel.features[i].growth_quintile) complete = false;
        if (!panel.features[i].label.count(spec.horizon)) complete = false;
        if (complete) rows.push_back(i);
    }

    PredictionDesign out;
    out.row_index = rows;
    auto& d = out.design;
    d.names = names;
    d.X.resize(static_cast<long>(rows.size()), static_cast<long>(names.size()));
    d.y.resize(static_cast<long>(rows.size()));
    d.group.reserve(rows.size());
    d.date.reserve(rows.size());
    for (size_t k = 0; k < rows.size(); ++k) {
        size_t i = rows[k];
        long r = static_cast<long>(k);
        long c = 0;
        d.X(r, c++) = 1.0;
        for (const auto& reg : scalar_regs) d.X(r, c++) = *feature_value(panel, i, reg);
        if (quintiles) {
            int q = *panel.features[i].growth_quintile;
            for (int qq = 2; qq <= 5; ++qq) d.X(r, c++) = q == qq ? 1.0 : 0.0;
        }
        d.y(r) = static_cast<double>(panel.features[i].label.at(spec.horizon));
        d.group.push_back(panel.obs[i].bank_id);
        d.date.push_back(panel.obs[i].date.frac());
    }
    return out;
}

namespace {

FitResult fit_design(const DesignMatrix& d, const ModelSpec& spec) {
    if (d.n_rows() < 10 * d.n_cols()) {
        throw DataError("too few complete cases: " + std::to_string(d.n_rows()) + " rows for " +
                        std::to_string(d.n_cols()) + " parameters (need 10 per parameter)");
    }
    return spec.estimator == PredEstimator::Lpm ? ols_fit(d) : logit_fit(d);
}

double score_one(const Eigen::VectorXd& coef, const Eigen::RowVectorXd& x, PredEstimator est) {
    double eta = x * coef;
    return est == PredEstimator::Logit ? sigmoid(eta) : eta;
}

void sort_predictions(PredictionSet& set) {
    std::sort(set.rows.begin(), set.rows.end(), [](const PredictionRow& a, const PredictionRow& b) {
        if (a.date != b.date) return a.date < b.date;
        return a.bank_id < b.bank_id;
    });
}

}  // namespace

FitResult fit_failure_model(const BankPanel& panel, const ModelSpec& spec) {
    PredictionDesign pd = build_prediction_design(panel, spec);
    return fit_design(pd.design, spec);
}

PredictionSet in_sample_predictions(const BankPanel& panel, const ModelSpec& spec) {
    PredictionDesign pd = build_prediction_design(panel, spec);
    FitResult fit = fit_design(pd.design, spec);

    PredictionSet set;
    set.horizon = spec.horizon;
    set.rows.reserve(pd.row_index.size());
    for (size_t k = 0; k < pd.row_index.size(); ++k) {
        size_t i = pd.row_index[k];
        PredictionRow row;
        row.bank_id = panel.obs[i].bank_id;
        row.date = panel.obs[i].date;
        row.score = score_one(fit.coef, pd.design.X.row(static_cast<long>(k)), spec.estimator);
        row.label = panel.features[i].label.at(spec.horizon);
        row.origin = PredictionOrigin::InSample;
        set.rows.push_back(std::move(row));
    }
    sort_predictions(set);
    return set;
}

BacktestResult expanding_oos(const BankPanel& panel, const ModelSpec& spec,
                             int initial_train_years, int threads) {
    if (initial_train_years < 1) throw UsageError("initial training window must be >= 1 year");
    auto years = panel.distinct_years();
    if (years.empty()) throw DataError("empty panel");
    int y0 = years.front();
    int y_max = years.back();
    if (y_max - y0 < initial_train_years) {
        throw DataError("panel spans " + std::to_string(y_max - y0 + 1) +
                        " years; expanding backtest needs more than " +
                        std::to_string(initial_train_years));
    }

    PredictionDesign all = build_prediction_design(panel, spec);
    const auto& d = all.design;

    std::vector<int> scored_years;
    for (int y : years) {
        if (y >= y0 + initial_train_years) scored_years.push_back(y);
    }

    struct WindowOut {
        BacktestWindow window;
        std::vector<PredictionRow> rows;
    };
    std::vector<WindowOut> outs(scored_years.size());

    auto run_window = [&](size_t wi) {
        int s = scored_years[wi];
        WindowOut& out = outs[wi];
        out.window.year = s;

        // training rows: outcome window (tau, tau+h] closed by s-1
        std::vector<long> train_rows, score_rows;
        for (long r = 0; r < d.n_rows(); ++r) {
            int row_year = panel.obs[all.row_index[static_cast<size_t>(r)]].date.year;
            if (row_year + spec.horizon <= s - 1) train_rows.push_back(r);
            if (row_year == s) score_rows.push_back(r);
        }
        out.window.n_train = static_cast<long>(train_rows.size());
        out.window.n_scored = static_cast<long>(score_rows.size());
        if (score_rows.empty()) {
            out.window.ok = true;
            return;
        }

        DesignMatrix train;
        train.names = d.names;
        train.X.resize(static_cast<long>(train_rows.size()), d.n_cols());
        train.y.resize(static_cast<long>(train_rows.size()));
        for (size_t k = 0; k < train_rows.size(); ++k) {
            train.X.row(static_cast<long>(k)) = d.X.row(train_rows[k]);
            train.y[static_cast<long>(k)] = d.y[train_rows[k]];
        }
        FitResult fit;
        try {
            fit = fit_design(train, spec);
        } catch (const DataError& e) {
            out.window.ok = false;
            out.window.message = e.what();
            return;
        }
        out.window.ok = true;
        for (long r : score_rows) {
            size_t i = all.row_index[static_cast<size_t>(r)];
            PredictionRow row;
            row.bank_id = panel.obs[i].bank_id;
            row.date = panel.obs[i].date;
            row.score = score_one(fit.coef, d.X.row(r), spec.estimator);
            row.label = panel.features[i].label.at(spec.horizon);
            row.origin = PredictionOrigin::OutOfSample;
            out.rows.push_back(std::move(row));
        }
    };

    if (threads <= 1 || scored_years.size() <= 1) {
        for (size_t wi = 0; wi < scored_years.size(); ++wi) run_window(wi);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            while (true) {
                size_t wi = next.fetch_add(1);
                if (wi >= scored_years.size()) break;
                run_window(wi);
            }
        };
        std::vector<std::thread> pool;
        int n_threads = std::min<int>(threads, static_cast<int>(scored_years.size()));
        pool.reserve(static_cast<size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    BacktestResult result;
    result.predictions.horizon = spec.horizon;
    for (auto& out : outs) {
        result.windows.push_back(out.window);
        for (auto& row : out.rows) result.predictions.rows.push_back(std::move(row));
    }
    sort_predictions(result.predictions);
    return result;
}

std::vector<double> PredictionSet::scores() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.score);
    return out;
}

std::vector<int> PredictionSet::labels() const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.label);
    return out;
}

std::string PredictionSet::to_csv(char delim) const {
    std::string out = "bank_id";
    for (const char* col : {"date", "score", "label", "origin"}) {
        out += delim;
        out += col;
    }
    out += '\n';
    for (const auto& r : rows) {
        std::vector<std::string> fields = {
            r.bank_id, r.date.str(), format_double(r.score), std::to_string(r.label),
            r.origin == PredictionOrigin::OutOfSample ? "oos" : "in_sample"};
        out += csv_join(fields, delim);
        out += '\n';
    }
    return out;
}

PredictionSet PredictionSet::from_csv(std::istream& in, char delim) {
    CsvReader reader(in, delim);
    int c_bank = reader.column_index("bank_id");
    int c_date = reader.column_index("date");
    int c_score = reader.column_index("score");
    int c_label = reader.column_index("label");
    int c_origin = reader.column_index("origin");
    if (c_bank < 0 || c_date < 0 || c_score < 0 || c_label < 0) {
        throw DataError("predictions file needs bank_id, date, score, label columns");
    }
    PredictionSet set;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;
        PredictionRow row;
        row.bank_id = fields[static_cast<size_t>(c_bank)];
        auto date = Date::parse(fields[static_cast<size_t>(c_date)]);
        auto score = parse_double(fields[static_cast<size_t>(c_score)]);
        auto label = parse_long(fields[static_cast<size_t>(c_label)]);
        if (!date || !score || !label || (*label != 0 && *label != 1)) {
            throw DataError("predictions file line " + std::to_string(reader.line_no()) +
                            ": bad row");
        }
        row.date = *date;
        row.score = *score;
        row.label = static_cast<int>(*label);
        row.origin = PredictionOrigin::OutOfSample;
        if (c_origin >= 0 && fields[static_cast<size_t>(c_origin)] == "in_sample") {
            row.origin = PredictionOrigin::InSample;
        }
        set.rows.push_back(std::move(row));
    }
    return set;
}

std::string BinnedProbTable::to_csv(char delim) const {
    std::string out = feature_names.size() == 2 ? "bin1,bin2,count,failures,prob"
                                                : "bin1,count,failures,prob";
    if (delim != ',') std::replace(out.begin(), out.end(), ',', delim);
    out += '\n';
    for (const auto& c : cells) {
        std::vector<std::string> fields;
        fields.push_back(std::to_string(c.bin1 + 1));
        if (feature_names.size() == 2) fields.push_back(std::to_string(c.bin2 + 1));
        fields.push_back(std::to_string(c.count));
        fields.push_back(std::to_string(c.failures));
        fields.push_back(c.prob ? format_double(*c.prob) : "");
        out += csv_join(fields, delim);
        out += '\n';
    }
    return out;
}

BinnedProbTable binned_failure_prob(const BankPanel& panel,
                                    const std::vector<std::string>& features,
                                    const std::vector<std::vector<double>>& percentile_edges,
                                    int horizon, bool within_year) {
    if (features.empty() || features.size() > 2) {
        throw UsageError("binned_failure_prob takes one or two features");
    }
    if (percentile_edges.size() != features.size()) {
        throw UsageError("one percentile edge list per feature required");
    }
    for (const auto& edges : percentile_edges) {
        for (size_t k = 1; k < edges.size(); ++k) {
            if (edges[k] <= edges[k - 1]) {
                throw UsageError("percentile edges must be strictly increasing");
            }
        }
        for (double e : edges) {
            if (e <= 0.0 || e >= 100.0) throw UsageError("percentile edges must lie in (0,100)");
        }
    }
    if (std::find(panel.horizons.begin(), panel.horizons.end(), horizon) ==
        panel.horizons.end()) {
        throw DataError("labels for horizon " + std::to_string(horizon) + " not computed");
    }

    // estimation sample: all features and the label present
    std::vector<size_t> rows;
    for (size_t i = 0; i < panel.size(); ++i) {
        bool ok = panel.features[i].label.count(horizon) > 0;
        for (const auto& f : features) {
            if (!feature_value(panel, i, f)) ok = false;
        }
        if (ok) rows.push_back(i);
    }
    if (rows.empty()) throw DataError("no complete cases for binning");

    BinnedProbTable table;
    table.feature_names = features;
    table.edge_percentiles = percentile_edges;

    size_t nb1 = percentile_edges[0].size() + 1;
    size_t nb2 = features.size() == 2 ? percentile_edges[1].size() + 1 : 1;

    // bin assignment per row; `subset_pos` maps subset entries back into `rows`
    std::vector<std::pair<int, int>> assignment(rows.size(), {0, 0});
    auto assign = [&](const std::vector<size_t>& subset, const std::vector<size_t>& subset_pos) {
        for (size_t fi = 0; fi < features.size(); ++fi) {
            std::vector<double> values;
            values.reserve(subset.size());
            for (size_t r : subset) values.push_back(*feature_value(panel, r, features[fi]));
            std::vector<double> cuts;
            for (double pct : percentile_edges[fi]) cuts.push_back(percentile(values, pct));
            for (size_t k = 0; k < subset.size(); ++k) {
                int b = bin_of(values[k], cuts);
                if (fi == 0) assignment[subset_pos[k]].first = b;
                else assignment[subset_pos[k]].second = b;
            }
        }
    };

    // pooled cut values always reported in the table
    for (size_t fi = 0; fi < features.size(); ++fi) {
        std::vector<double> values;
        values.reserve(rows.size());
        for (size_t r : rows) values.push_back(*feature_value(panel, r, features[fi]));
        std::vector<double> cuts;
        for (double pct : percentile_edges[fi]) cuts.push_back(percentile(values, pct));
        table.edge_values.push_back(std::move(cuts));
    }

    if (!within_year) {
        std::vector<size_t> pos(rows.size());
        std::iota(pos.begin(), pos.end(), size_t{0});
        assign(rows, pos);
    } else {
        std::map<int, std::pair<std::vector<size_t>, std::vector<size_t>>> by_year;
        for (size_t k = 0; k < rows.size(); ++k) {
            auto& slot = by_year[panel.obs[rows[k]].date.year];
            slot.first.push_back(rows[k]);
            slot.second.push_back(k);
        }
        for (auto& [year, slot] : by_year) assign(slot.first, slot.second);
    }

    std::vector<BinnedProbTable::Cell> cells(nb1 * nb2);
    for (size_t k = 0; k < rows.size(); ++k) {
        auto [b1, b2] = assignment[k];
        auto& cell = cells[static_cast<size_t>(b1) * nb2 + static_cast<size_t>(b2)];
        ++cell.count;
        cell.failures += panel.features[rows[k]].label.at(horizon);
    }
    for (size_t b1 = 0; b1 < nb1; ++b1) {
        for (size_t b2 = 0; b2 < nb2; ++b2) {
            auto& cell = cells[b1 * nb2 + b2];
            cell.bin1 = static_cast<int>(b1);
            cell.bin2 = static_cast<int>(b2);
            if (cell.count > 0) {
                cell.prob = static_cast<double>(cell.failures) / static_cast<double>(cell.count);
            }
        }
    }
    table.cells = std::move(cells);
    return table;
}

}  // namespace bankruin

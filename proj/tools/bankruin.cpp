// bankruin: batch front end for the bank-failure analysis library.
// Subcommands mirror the analysis families: synth, ingest, features,
// event-study, predict {fit,backtest,metrics}, aggregate,
// receivership {recovery,grid,causes,excess-return}.

#include <CLI11.hpp>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "bankruin/aggregate.hpp"
#include "bankruin/classification.hpp"
#include "bankruin/common.hpp"
#include "bankruin/csv.hpp"
#include "bankruin/econometrics.hpp"
#include "bankruin/event_study.hpp"
#include "bankruin/panel.hpp"
#include "bankruin/prediction.hpp"
#include "bankruin/receivership.hpp"
#include "bankruin/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bankruin;

namespace {

struct GlobalOptions {
    std::string out_dir;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    bool no_timestamp = false;
    char delimiter = ',';
};

char parse_delim(const std::string& s) {
    if (s == "," || s == "comma") return ',';
    if (s == "tab" || s == "\\t" || s == "\t") return '\t';
    throw CLI::ValidationError("--delim", "expected ',' or 'tab'");
}

// All outputs go through a temp file + rename so interrupted runs never
// leave a half-written artifact behind.
void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write to " + tmp.string());
        out << content;
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

fs::path ensure_out_dir(const GlobalOptions& g) {
    if (g.out_dir.empty()) throw UsageError("--out directory required");
    fs::path dir(g.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw DataError("output directory not writable: " + dir.string());
    }
    return dir;
}

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

json base_json(const GlobalOptions& g) {
    json j;
    j["schema_version"] = 1;
    if (!g.no_timestamp) j["generated_at"] = timestamp_utc();
    return j;
}

void write_json(const GlobalOptions& g, const fs::path& dir, const std::string& name, json j) {
    json out = base_json(g);
    out.update(j);
    atomic_write(dir / name, out.dump(2) + "\n");
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read input file: " + path);
    return in;
}

// ---------------------------------------------------------------------------
// shared pipeline: load -> fundamentals -> quintiles -> labels -> age filter
// ---------------------------------------------------------------------------

struct PipelineOptions {
    std::string panel_path;
    std::string schema_path;
    std::string events_path;
    std::string era = "historical";
    std::optional<int> min_year;
    std::optional<int> max_year;
    std::vector<int> horizons = {1};
    int growth_window = 3;
    bool deflate = false;
    int min_age = 3;
};

void add_pipeline_flags(CLI::App* cmd, PipelineOptions& p, bool need_events,
                        bool own_horizons = true) {
    cmd->add_option("--panel", p.panel_path, "panel CSV file")->required();
    cmd->add_option("--schema", p.schema_path,
                    "column-mapping JSON ({field: column}); default: identity mapping");
    auto* ev = cmd->add_option("--events", p.events_path, "failure events CSV");
    if (need_events) ev->required();
    cmd->add_option("--era", p.era, "feature era: historical or modern")
        ->check(CLI::IsMember({"historical", "modern"}));
    cmd->add_option("--min-year", p.min_year, "reject observations before this year");
    cmd->add_option("--max-year", p.max_year, "reject observations after this year");
    if (own_horizons) {
        cmd->add_option("--horizons", p.horizons, "label horizons in years")->delimiter(',');
    }
    cmd->add_option("--window", p.growth_window, "asset growth window in years");
    cmd->add_flag("--deflate", p.deflate, "deflate assets by CPI for growth and log outcomes");
    cmd->add_option("--min-age", p.min_age, "drop banks younger than this (0 disables)");
}

struct Pipeline {
    BankPanel panel;
    std::vector<FailureEvent> events;
    LoadReport load_report;
    QuintileReport quintile_report;
    LabelReport label_report;
    DeNovoReport de_novo_report;
};

Pipeline run_pipeline(const PipelineOptions& p, const GlobalOptions& g) {
    Pipeline pipe;
    PanelSchema schema =
        p.schema_path.empty() ? PanelSchema::identity() : PanelSchema::from_file(p.schema_path);
    LoadOptions load_opts;
    load_opts.delimiter = g.delimiter;
    load_opts.min_year = p.min_year;
    load_opts.max_year = p.max_year;
    auto in = open_input(p.panel_path);
    pipe.panel = load_panel(in, schema, load_opts, pipe.load_report);

    FeatureConfig fc;
    fc.era = era_from_string(p.era);
    compute_fundamentals(pipe.panel, fc);
    pipe.quintile_report = asset_growth_quintiles(pipe.panel, p.growth_window, p.deflate);

    if (!p.events_path.empty()) {
        auto ev_in = open_input(p.events_path);
        pipe.events = load_events(ev_in, g.delimiter);
        for (int h : p.horizons) {
            pipe.label_report = label_failures(pipe.panel, pipe.events, h);
        }
    }
    if (p.min_age > 0) {
        pipe.panel = filter_de_novo(pipe.panel, p.min_age, pipe.de_novo_report);
    }
    return pipe;
}

json pipeline_summary(const Pipeline& pipe) {
    json j;
    j["n_observations"] = pipe.panel.size();
    j["n_rejected"] = pipe.load_report.rejects.size();
    j["n_events"] = pipe.events.size();
    j["n_labeled_positive"] = pipe.label_report.n_positive;
    j["n_dropped_post_failure"] = pipe.label_report.n_dropped_post_failure;
    j["n_removed_de_novo"] = pipe.de_novo_report.n_removed;
    j["n_missing_charter"] = pipe.de_novo_report.n_missing_charter;
    j["quintile_skipped_years"] = pipe.quintile_report.skipped_years;
    j["warnings"] = pipe.label_report.warnings;
    return j;
}

std::string features_csv(const BankPanel& panel, char delim) {
    std::vector<std::string> header = {"bank_id", "date",       "insolvency", "noncore",
                                       "interaction", "growth_quintile", "gdp_growth_3y",
                                       "inflation_3y", "log_age"};
    std::string out;
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) out.push_back(delim);
        out += header[i];
    }
    for (int h : panel.horizons) out += delim + ("label_" + std::to_string(h));
    out += '\n';

    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string{};
    };
    for (size_t i = 0; i < panel.size(); ++i) {
        const auto& o = panel.obs[i];
        const auto& f = panel.features[i];
        std::vector<std::string> row = {
            o.bank_id,
            o.date.str(),
            opt(f.insolvency),
            opt(f.noncore),
            opt(f.interaction),
            f.growth_quintile ? std::to_string(*f.growth_quintile) : "",
            opt(o.gdp_growth_3y),
            opt(o.inflation_3y),
            opt(f.log_age),
        };
        for (int h : panel.horizons) {
            row.push_back(f.label.count(h) ? std::to_string(f.label.at(h)) : "");
        }
        out += csv_join(row, delim);
        out += '\n';
    }
    return out;
}

json metrics_json(const ClassificationCurve& curve, long n) {
    json j;
    j["auc"] = curve.auc;
    j["pr_auc"] = curve.pr_auc;
    j["base_rate"] = curve.base_rate;
    j["pr_auc_to_base_rate"] = curve.pr_auc_to_base_rate();
    j["n"] = n;
    j["n_pos"] = curve.n_pos;
    j["n_neg"] = curve.n_neg;
    return j;
}

std::vector<double> parse_grid(const std::vector<std::string>& raw, const char* flag) {
    std::vector<double> out;
    for (const auto& s : raw) {
        auto v = parse_double(s);
        if (!v) throw UsageError(std::string(flag) + ": unparseable number '" + s + "'");
        out.push_back(*v);
    }
    if (out.empty()) throw UsageError(std::string(flag) + " must list at least one value");
    return out;
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------

struct SynthOptions {
    DgpConfig dgp;
    std::string era = "historical";
};

void cmd_synth(const SynthOptions& s, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    DgpConfig cfg = s.dgp;
    cfg.era = era_from_string(s.era);

    SynthPanel synth = generate_panel(cfg, g.threads);
    atomic_write(dir / "panel.csv", panel_to_csv(synth.panel, g.delimiter));
    atomic_write(dir / "events.csv", events_to_csv(synth.events, g.delimiter));
    atomic_write(dir / "truth.csv", true_probs_to_csv(synth, g.delimiter));
    if (cfg.n_receiverships > 0) {
        auto records = generate_receiverships(cfg);
        std::string out = receivership_csv_header(g.delimiter);
        for (const auto& r : records) out += receivership_csv_row(r, g.delimiter);
        atomic_write(dir / "receiverships.csv", out);
    }
    json meta;
    meta["seed"] = cfg.seed;
    meta["n_banks"] = cfg.n_banks;
    meta["n_years"] = cfg.n_years;
    meta["start_year"] = cfg.start_year;
    meta["era"] = era_name(cfg.era);
    meta["n_observations"] = synth.panel.size();
    meta["n_events"] = synth.events.size();
    meta["n_receiverships"] = cfg.n_receiverships;
    write_json(g, dir, "meta.json", meta);
}

void cmd_ingest(const PipelineOptions& p, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    PanelSchema schema =
        p.schema_path.empty() ? PanelSchema::identity() : PanelSchema::from_file(p.schema_path);
    LoadOptions load_opts;
    load_opts.delimiter = g.delimiter;
    load_opts.min_year = p.min_year;
    load_opts.max_year = p.max_year;
    LoadReport report;
    auto in = open_input(p.panel_path);
    BankPanel panel = load_panel(in, schema, load_opts, report);
    atomic_write(dir / "rejects.txt", report.to_text());

    json summary;
    summary["n_observations"] = report.n_loaded;
    summary["n_rejected"] = report.rejects.size();
    summary["n_banks"] = panel.bank_ranges().size();
    auto years = panel.distinct_years();
    if (!years.empty()) {
        summary["first_year"] = years.front();
        summary["last_year"] = years.back();
    }

    if (!p.events_path.empty()) {
        auto ev_in = open_input(p.events_path);
        auto events = load_events(ev_in, g.delimiter);
        OutflowStats stats = deposit_outflow_stats(events);
        std::string out = "bank_id";
        for (const char* col : {"failure_date", "growth", "run_flag"}) {
            out += g.delimiter;
            out += col;
        }
        out += '\n';
        for (const auto& ev : events) {
            auto r = deposit_outflow_at_failure(ev);
            std::vector<std::string> row = {ev.bank_id, ev.failure_date.str(),
                                            r.growth ? format_double(*r.growth) : "",
                                            r.run_flag ? (*r.run_flag ? "1" : "0") : ""};
            out += csv_join(row, g.delimiter);
            out += '\n';
        }
        atomic_write(dir / "outflows.csv", out);
        json outflow;
        outflow["n_with_outflow"] = stats.n;
        outflow["average_growth"] = stats.average;
        outflow["n_runs"] = stats.n_runs;
        outflow["bin_share"] = {
            {"lt_-30", stats.bin_share[0]},   {"-30_-20", stats.bin_share[1]},
            {"-20_-7.5", stats.bin_share[2]}, {"-7.5_-2.5", stats.bin_share[3]},
            {"-2.5_0", stats.bin_share[4]},   {"ge_0", stats.bin_share[5]}};
        summary["deposit_outflows"] = outflow;
    }
    write_json(g, dir, "summary.json", summary);
}

struct FeatureCmdOptions {
    std::vector<std::string> bin_features;
    std::vector<std::string> bin_edges;   // percentile list per feature, comma-joined
    int bin_horizon = 3;
    bool within_year_bins = false;
};

void cmd_features(const PipelineOptions& p, const FeatureCmdOptions& f, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    Pipeline pipe = run_pipeline(p, g);
    atomic_write(dir / "features.csv", features_csv(pipe.panel, g.delimiter));
    atomic_write(dir / "rejects.txt", pipe.load_report.to_text());
    write_json(g, dir, "summary.json", pipeline_summary(pipe));

    if (!f.bin_features.empty()) {
        if (f.bin_edges.size() != f.bin_features.size()) {
            throw UsageError("--bin-edges must be given once per --bin-feature");
        }
        std::vector<std::vector<double>> edges;
        for (const auto& list : f.bin_edges) {
            std::vector<std::string> parts;
            std::stringstream ss(list);
            std::string part;
            while (std::getline(ss, part, ',')) parts.push_back(part);
            edges.push_back(parse_grid(parts, "--bin-edges"));
        }
        auto table = binned_failure_prob(pipe.panel, f.bin_features, edges, f.bin_horizon,
                                         f.within_year_bins);
        atomic_write(dir / "bins.csv", table.to_csv(g.delimiter));
        json meta;
        meta["features"] = table.feature_names;
        meta["edge_percentiles"] = table.edge_percentiles;
        meta["edge_values"] = table.edge_values;
        meta["horizon"] = f.bin_horizon;
        write_json(g, dir, "bins.json", meta);
    }
}

struct EventStudyOptions {
    std::string outcome = "insolvency";
    int window = 10;
};

void cmd_event_study(const PipelineOptions& p, const EventStudyOptions& e,
                     const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    Pipeline pipe = run_pipeline(p, g);
    OutcomeFn outcome = outcome_by_name(e.outcome, p.deflate);
    EventStudyResult result =
        event_study(pipe.panel, pipe.events, outcome, e.outcome, e.window);
    atomic_write(dir / "event_study.csv", result.to_csv(g.delimiter));
    json j;
    j["outcome"] = result.outcome_name;
    j["n_banks"] = result.n_banks;
    j["n_obs"] = result.n_obs;
    write_json(g, dir, "event_study.json", j);
}

struct PredictOptions {
    std::string spec_path;
    std::optional<int> horizon;
    int train_years = 10;
    std::string predictions_path;
    std::string origin = "all";
    std::vector<double> cutoffs;
};

ModelSpec load_spec(const PredictOptions& po) {
    ModelSpec spec = ModelSpec::from_file(po.spec_path);
    if (po.horizon) {
        spec.horizon = *po.horizon;
        spec.validate();
    }
    return spec;
}

void cmd_predict_fit(PipelineOptions p, const PredictOptions& po, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    ModelSpec spec = load_spec(po);
    p.horizons = {spec.horizon};
    Pipeline pipe = run_pipeline(p, g);
    FitResult fit = fit_failure_model(pipe.panel, spec);
    json j = fit.to_json();
    j["spec"] = spec.to_json();

    PredictionSet scores = in_sample_predictions(pipe.panel, spec);
    atomic_write(dir / "predictions.csv", scores.to_csv(g.delimiter));
    long pos = 0;
    for (const auto& row : scores.rows) pos += row.label;
    if (pos > 0 && pos < static_cast<long>(scores.rows.size())) {
        auto curve = roc_and_auc(scores.scores(), scores.labels());
        j["metrics"] = metrics_json(curve, static_cast<long>(scores.rows.size()));
    }
    write_json(g, dir, "fit.json", j);
}

void cmd_predict_backtest(PipelineOptions p, const PredictOptions& po, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    ModelSpec spec = load_spec(po);
    p.horizons = {spec.horizon};
    Pipeline pipe = run_pipeline(p, g);
    BacktestResult result = expanding_oos(pipe.panel, spec, po.train_years, g.threads);
    atomic_write(dir / "predictions.csv", result.predictions.to_csv(g.delimiter));

    std::string windows = "year";
    for (const char* col : {"n_train", "n_scored", "ok", "message"}) {
        windows += g.delimiter;
        windows += col;
    }
    windows += '\n';
    for (const auto& w : result.windows) {
        std::vector<std::string> row = {std::to_string(w.year), std::to_string(w.n_train),
                                        std::to_string(w.n_scored), w.ok ? "1" : "0", w.message};
        windows += csv_join(row, g.delimiter);
        windows += '\n';
    }
    atomic_write(dir / "windows.csv", windows);

    json j;
    j["spec"] = spec.to_json();
    j["train_years"] = po.train_years;
    j["n_predictions"] = result.predictions.rows.size();
    auto scores = result.predictions.scores();
    auto labels = result.predictions.labels();
    bool two_class = false;
    long pos = 0;
    for (int label : labels) pos += label;
    two_class = pos > 0 && pos < static_cast<long>(labels.size());
    if (two_class) {
        auto curve = roc_and_auc(scores, labels);
        j["metrics"] = metrics_json(curve, static_cast<long>(labels.size()));
    }
    write_json(g, dir, "metrics.json", j);
}

void cmd_predict_metrics(const PredictOptions& po, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    auto in = open_input(po.predictions_path);
    PredictionSet set = PredictionSet::from_csv(in, g.delimiter);

    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& row : set.rows) {
        bool keep = po.origin == "all" ||
                    (po.origin == "oos" && row.origin == PredictionOrigin::OutOfSample) ||
                    (po.origin == "in-sample" && row.origin == PredictionOrigin::InSample);
        if (keep) {
            scores.push_back(row.score);
            labels.push_back(row.label);
        }
    }
    if (scores.empty()) throw DataError("no predictions after origin filter");
    auto curve = roc_and_auc(scores, labels);
    atomic_write(dir / "curve.csv", curve.points_csv(g.delimiter));
    json j = metrics_json(curve, static_cast<long>(scores.size()));
    if (!po.cutoffs.empty()) {
        json rows = json::array();
        for (double c : po.cutoffs) {
            auto rates = confusion_at_cutoff(scores, labels, c);
            rows.push_back({{"cutoff", c},
                            {"tpr", rates.tpr},
                            {"fpr", rates.fpr},
                            {"tnr", rates.tnr},
                            {"fnr", rates.fnr}});
        }
        j["cutoffs"] = rows;
    }
    write_json(g, dir, "metrics.json", j);
}

struct AggregateOptions {
    std::string predictions_path;
    std::string weights = "equal";
    std::string denominator = "prior-year";
};

void cmd_aggregate(PipelineOptions p, const AggregateOptions& a, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    auto in = open_input(a.predictions_path);
    PredictionSet set = PredictionSet::from_csv(in, g.delimiter);
    Pipeline pipe = run_pipeline(p, g);
    set.horizon = p.horizons.empty() ? 1 : p.horizons.front();

    AggregateWeights w =
        a.weights == "assets" ? AggregateWeights::AssetShare : AggregateWeights::Equal;
    AtRiskDenominator denom = a.denominator == "current-year"
                                  ? AtRiskDenominator::CurrentYearBanks
                                  : AtRiskDenominator::PriorYearFilers;
    AggregateSeries series = aggregate_predicted_rate(set, w, &pipe.panel, denom);
    atomic_write(dir / "aggregate.csv", series.to_csv(g.delimiter));

    AggregateRegression reg = aggregate_regression(series);
    json j = reg.fit.to_json();
    json nw = json::object();
    for (size_t i = 0; i < reg.fit.names.size(); ++i) {
        nw[reg.fit.names[i]] = reg.nw_se[static_cast<long>(i)];
    }
    j["newey_west_se"] = nw;
    j["nw_truncation_S"] = reg.S;
    j["nw_lags"] = reg.lags;
    j["n_years"] = reg.n_years;
    j["r_squared"] = reg.fit.stat;
    write_json(g, dir, "regression.json", j);
}

struct ReceivershipOptions {
    std::string records_path;
    std::string variant = "baseline";
    std::string mapping_path;
    std::vector<std::string> rho_raw = {"0", "0.05", "0.1", "0.15", "0.2"};
    std::vector<std::string> v_raw = {"0", "0.025", "0.05", "0.075", "0.1", "0.15", "0.2"};
    std::string run_filter = "all";
    // excess-return inputs
    std::optional<double> p_fail;
    double loss = 0.34;
    double risk_free = 0.0;
    std::string utility = "riskneutral";
    double gamma = 5.0;
    std::string predictions_path;
};

std::vector<ReceivershipRecord> load_records(const ReceivershipOptions& r,
                                             const GlobalOptions& g, const fs::path& dir) {
    auto in = open_input(r.records_path);
    ReceivershipLoad load = load_receiverships(in, g.delimiter);
    LoadReport report;
    report.rejects = load.rejects;
    atomic_write(dir / "rejects.txt", report.to_text());
    if (load.records.empty()) throw DataError("no valid receivership records in " + r.records_path);
    return load.records;
}

void cmd_receivership_recovery(const ReceivershipOptions& r, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    auto records = load_records(r, g, dir);
    RecoveryVariant variant = recovery_variant_from_string(r.variant);

    std::string out = "bank_id";
    for (const char* col : {"recovery_rate", "leverage", "ell_over_r"}) {
        out += g.delimiter;
        out += col;
    }
    out += '\n';
    double sum_r = 0.0;
    std::array<long, 5> bins{};  // <25, 25-50, 50-75, 75-95, >=95
    for (const auto& rec : records) {
        double recov = recovery_rate(rec, variant);
        double lev = leverage(rec, variant);
        std::vector<std::string> row = {rec.bank_id, format_double(recov), format_double(lev),
                                        format_double(lev / recov)};
        out += csv_join(row, g.delimiter);
        out += '\n';
        sum_r += recov;
        if (recov < 0.25) ++bins[0];
        else if (recov < 0.50) ++bins[1];
        else if (recov < 0.75) ++bins[2];
        else if (recov < 0.95) ++bins[3];
        else ++bins[4];
    }
    atomic_write(dir / "recovery.csv", out);

    json j;
    j["variant"] = r.variant;
    j["n_records"] = records.size();
    j["average_recovery_rate"] = sum_r / static_cast<double>(records.size());
    j["recovery_share"] = {
        {"lt_25", static_cast<double>(bins[0]) / static_cast<double>(records.size())},
        {"25_50", static_cast<double>(bins[1]) / static_cast<double>(records.size())},
        {"50_75", static_cast<double>(bins[2]) / static_cast<double>(records.size())},
        {"75_95", static_cast<double>(bins[3]) / static_cast<double>(records.size())},
        {"ge_95", static_cast<double>(bins[4]) / static_cast<double>(records.size())}};

    DepositorLossStats losses = depositor_loss_stats(records);
    if (losses.n > 0) {
        j["depositor_losses"] = {{"n", losses.n},
                                 {"share_with_losses", losses.share_with_losses},
                                 {"conditional_loss", losses.conditional_loss},
                                 {"unconditional_loss", losses.unconditional_loss}};
    }
    try {
        FitResult quality = asset_quality_regression(records);
        j["asset_quality_regression"] = quality.to_json();
        j["asset_quality_regression"]["r_squared"] = quality.stat;
    } catch (const DataError&) {
        // assessments absent; summary stays without the regression
    }
    write_json(g, dir, "recovery.json", j);
}

void cmd_receivership_grid(const ReceivershipOptions& r, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    auto records = load_records(r, g, dir);
    RecoveryVariant variant = recovery_variant_from_string(r.variant);
    RunFilter filter = RunFilter::All;
    if (r.run_filter == "run") filter = RunFilter::RunOnly;
    else if (r.run_filter == "no-run") filter = RunFilter::NoRunOnly;
    else if (r.run_filter != "all") throw UsageError("--run-filter must be all, run or no-run");

    auto grid = insolvency_share_grid(records, parse_grid(r.rho_raw, "--rho"),
                                      parse_grid(r.v_raw, "--v"), filter, variant);
    atomic_write(dir / "grid.csv", grid.to_csv(g.delimiter));
    json j = grid.to_json();
    j["variant"] = r.variant;
    write_json(g, dir, "grid.json", j);
}

void cmd_receivership_causes(const ReceivershipOptions& r, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    auto records = load_records(r, g, dir);
    CauseMapping mapping = r.mapping_path.empty() ? CauseMapping::default_mapping()
                                                  : CauseMapping::from_file(r.mapping_path);
    std::map<FailureCause, long> counts;
    for (const auto& rec : records) ++counts[classify_cause(rec.cause, mapping)];

    std::string out = "category";
    for (const char* col : {"count", "share"}) {
        out += g.delimiter;
        out += col;
    }
    out += '\n';
    for (FailureCause c :
         {FailureCause::EconomicConditions, FailureCause::ExcessiveLending, FailureCause::Losses,
          FailureCause::Fraud, FailureCause::Governance, FailureCause::Run, FailureCause::Other,
          FailureCause::Unclassified}) {
        long n = counts.count(c) ? counts.at(c) : 0;
        std::vector<std::string> row = {
            failure_cause_name(c), std::to_string(n),
            format_double(static_cast<double>(n) / static_cast<double>(records.size()))};
        out += csv_join(row, g.delimiter);
        out += '\n';
    }
    atomic_write(dir / "causes.csv", out);
}

void cmd_receivership_excess_return(const ReceivershipOptions& r, const GlobalOptions& g) {
    fs::path dir = ensure_out_dir(g);
    Utility u;
    std::string kind = lower(r.utility);
    if (kind == "riskneutral" || kind == "risk-neutral") u.kind = UtilityKind::RiskNeutral;
    else if (kind == "log") u.kind = UtilityKind::Log;
    else if (kind == "crra") u = Utility{UtilityKind::Crra, r.gamma};
    else throw UsageError("--utility must be riskneutral, log or crra");

    if (r.p_fail && !r.predictions_path.empty()) {
        throw UsageError("--p and --predictions are mutually exclusive");
    }
    if (r.p_fail) {
        double s = required_excess_return(*r.p_fail, r.loss, r.risk_free, u);
        json j;
        j["p"] = *r.p_fail;
        j["loss"] = r.loss;
        j["risk_free"] = r.risk_free;
        j["utility"] = kind;
        if (u.kind == UtilityKind::Crra) j["gamma"] = u.gamma;
        j["excess_return"] = s;
        j["excess_return_trimmed"] = std::min(s, 1.0);
        write_json(g, dir, "excess_return.json", j);
        return;
    }
    if (r.predictions_path.empty()) {
        throw UsageError("excess-return needs --p or --predictions");
    }
    auto in = open_input(r.predictions_path);
    PredictionSet set = PredictionSet::from_csv(in, g.delimiter);
    std::string out = "bank_id";
    for (const char* col : {"date", "p", "excess_return", "excess_return_trimmed"}) {
        out += g.delimiter;
        out += col;
    }
    out += '\n';
    double sum = 0.0;
    long n = 0;
    for (const auto& row : set.rows) {
        double p = std::min(std::max(row.score, 0.0), 0.999);  // scores used as probabilities
        double s = required_excess_return(p, r.loss, r.risk_free, u);
        std::vector<std::string> fields = {row.bank_id, row.date.str(), format_double(p),
                                           format_double(s), format_double(std::min(s, 1.0))};
        out += csv_join(fields, g.delimiter);
        out += '\n';
        sum += std::min(s, 1.0);
        ++n;
    }
    atomic_write(dir / "excess_returns.csv", out);
    json j;
    j["loss"] = r.loss;
    j["risk_free"] = r.risk_free;
    j["utility"] = kind;
    if (u.kind == UtilityKind::Crra) j["gamma"] = u.gamma;
    j["n"] = n;
    j["average_trimmed"] = n > 0 ? sum / static_cast<double>(n) : 0.0;
    write_json(g, dir, "excess_return.json", j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bank failure analysis pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalOptions g;
    std::string delim_raw = ",";
    app.add_option("--out", g.out_dir, "output directory")->envname("BANKRUIN_OUT");
    app.add_option("--threads", g.threads, "worker threads (results are thread-count invariant)");
    app.add_flag("--no-timestamp", g.no_timestamp, "omit timestamps for byte-stable outputs");
    app.add_option("--delim", delim_raw, "field delimiter: ',' or 'tab'");

    // synth -----------------------------------------------------------------
    SynthOptions synth_opts;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic panel with known DGP");
    synth_cmd->add_option("--seed", synth_opts.dgp.seed, "RNG seed")->required();
    synth_cmd->add_option("--banks", synth_opts.dgp.n_banks, "number of banks");
    synth_cmd->add_option("--years", synth_opts.dgp.n_years, "panel length in years");
    synth_cmd->add_option("--start-year", synth_opts.dgp.start_year, "first panel year");
    synth_cmd->add_option("--era", synth_opts.era, "historical or modern")
        ->check(CLI::IsMember({"historical", "modern"}));
    synth_cmd->add_option("--beta0", synth_opts.dgp.beta0, "failure logit intercept");
    synth_cmd->add_option("--beta-insolvency", synth_opts.dgp.beta_insolvency);
    synth_cmd->add_option("--beta-noncore", synth_opts.dgp.beta_noncore);
    synth_cmd->add_option("--beta-interaction", synth_opts.dgp.beta_interaction);
    synth_cmd->add_option("--beta-gdp", synth_opts.dgp.beta_gdp);
    synth_cmd->add_option("--beta-inflation", synth_opts.dgp.beta_inflation);
    synth_cmd->add_option("--receiverships", synth_opts.dgp.n_receiverships,
                          "also write synthetic receivership records");

    // ingest ----------------------------------------------------------------
    PipelineOptions ingest_opts;
    auto* ingest_cmd = app.add_subcommand("ingest", "validate a panel and report rejects");
    add_pipeline_flags(ingest_cmd, ingest_opts, false);

    // features --------------------------------------------------------------
    PipelineOptions feature_opts;
    FeatureCmdOptions feature_cmd_opts;
    auto* features_cmd = app.add_subcommand("features", "construct fundamentals and labels");
    add_pipeline_flags(features_cmd, feature_opts, false);
    features_cmd->add_option("--bin-feature", feature_cmd_opts.bin_features,
                             "feature(s) for conditional failure bins (max 2)");
    features_cmd->add_option("--bin-edges", feature_cmd_opts.bin_edges,
                             "percentile edges per feature, e.g. 50,75,95");
    features_cmd->add_option("--bin-horizon", feature_cmd_opts.bin_horizon);
    features_cmd->add_flag("--within-year-bins", feature_cmd_opts.within_year_bins);

    // event-study -----------------------------------------------------------
    PipelineOptions es_pipe;
    EventStudyOptions es_opts;
    auto* es_cmd = app.add_subcommand("event-study", "pre-failure dynamics of an outcome");
    add_pipeline_flags(es_cmd, es_pipe, true);
    es_cmd->add_option("--outcome", es_opts.outcome, "outcome column name")->required();
    es_cmd->add_option("--event-window", es_opts.window, "window length in years before failure");

    // predict ---------------------------------------------------------------
    auto* predict_cmd = app.add_subcommand("predict", "failure prediction models");
    predict_cmd->require_subcommand(1);

    PipelineOptions fit_pipe;
    PredictOptions fit_opts;
    auto* fit_cmd = predict_cmd->add_subcommand("fit", "in-sample fit of a model spec");
    add_pipeline_flags(fit_cmd, fit_pipe, true, false);
    fit_cmd->add_option("--spec", fit_opts.spec_path, "model spec JSON")->required();
    fit_cmd->add_option("--horizon", fit_opts.horizon, "label horizon override");

    PipelineOptions bt_pipe;
    PredictOptions bt_opts;
    auto* bt_cmd = predict_cmd->add_subcommand("backtest", "expanding-window OOS predictions");
    add_pipeline_flags(bt_cmd, bt_pipe, true, false);
    bt_cmd->add_option("--spec", bt_opts.spec_path, "model spec JSON")->required();
    bt_cmd->add_option("--horizon", bt_opts.horizon, "label horizon override")->required();
    bt_cmd->add_option("--train-years", bt_opts.train_years, "initial training window");

    PredictOptions metrics_opts;
    auto* metrics_cmd =
        predict_cmd->add_subcommand("metrics", "classification metrics from a prediction file");
    metrics_cmd->add_option("--predictions", metrics_opts.predictions_path)->required();
    metrics_cmd->add_option("--origin", metrics_opts.origin, "all, oos or in-sample")
        ->check(CLI::IsMember({"all", "oos", "in-sample"}));
    metrics_cmd->add_option("--cutoffs", metrics_opts.cutoffs,
                            "classification cutoffs for confusion rates")
        ->delimiter(',');

    // aggregate ---------------------------------------------------------------
    PipelineOptions agg_pipe;
    AggregateOptions agg_opts;
    auto* agg_cmd = app.add_subcommand("aggregate", "aggregate failure-rate forecast");
    add_pipeline_flags(agg_cmd, agg_pipe, true);
    agg_cmd->add_option("--predictions", agg_opts.predictions_path, "backtest predictions CSV")
        ->required();
    agg_cmd->add_option("--weights", agg_opts.weights)->check(CLI::IsMember({"equal", "assets"}));
    agg_cmd->add_option("--denominator", agg_opts.denominator)
        ->check(CLI::IsMember({"prior-year", "current-year"}));

    // receivership ------------------------------------------------------------
    auto* rec_cmd = app.add_subcommand("receivership", "receivership and insolvency analyses");
    rec_cmd->require_subcommand(1);

    ReceivershipOptions rec_recovery;
    auto* recov_cmd = rec_cmd->add_subcommand("recovery", "recovery rates and asset quality");
    recov_cmd->add_option("--records", rec_recovery.records_path)->required();
    recov_cmd->add_option("--variant", rec_recovery.variant)
        ->check(CLI::IsMember({"baseline", "double-liability", "deposits-at-suspension"}));

    ReceivershipOptions rec_grid;
    auto* grid_cmd = rec_cmd->add_subcommand("grid", "fundamental insolvency share by rho and v");
    grid_cmd->add_option("--records", rec_grid.records_path)->required();
    grid_cmd->add_option("--rho", rec_grid.rho_raw, "receivership loss grid")->delimiter(',');
    grid_cmd->add_option("--v", rec_grid.v_raw, "franchise value grid")->delimiter(',');
    grid_cmd->add_option("--run-filter", rec_grid.run_filter)
        ->check(CLI::IsMember({"all", "run", "no-run"}));
    grid_cmd->add_option("--variant", rec_grid.variant)
        ->check(CLI::IsMember({"baseline", "double-liability", "deposits-at-suspension"}));

    ReceivershipOptions rec_causes;
    auto* causes_cmd = rec_cmd->add_subcommand("causes", "classify receiver-reported causes");
    causes_cmd->add_option("--records", rec_causes.records_path)->required();
    causes_cmd->add_option("--mapping", rec_causes.mapping_path,
                           "pattern/category JSON (default mapping built in)");

    ReceivershipOptions rec_excess;
    auto* excess_cmd =
        rec_cmd->add_subcommand("excess-return", "required deposit excess returns");
    excess_cmd->add_option("--p", rec_excess.p_fail, "failure probability");
    excess_cmd->add_option("--predictions", rec_excess.predictions_path,
                           "score file; scores used as probabilities");
    excess_cmd->add_option("--loss", rec_excess.loss, "depositor loss rate");
    excess_cmd->add_option("--risk-free", rec_excess.risk_free);
    excess_cmd->add_option("--utility", rec_excess.utility, "riskneutral, log or crra");
    excess_cmd->add_option("--gamma", rec_excess.gamma, "CRRA risk aversion");

    try {
        app.parse(argc, argv);
        g.delimiter = parse_delim(delim_raw);
        if (g.threads < 1) g.threads = 1;

        if (synth_cmd->parsed()) cmd_synth(synth_opts, g);
        else if (ingest_cmd->parsed()) cmd_ingest(ingest_opts, g);
        else if (features_cmd->parsed()) cmd_features(feature_opts, feature_cmd_opts, g);
        else if (es_cmd->parsed()) cmd_event_study(es_pipe, es_opts, g);
        else if (fit_cmd->parsed()) cmd_predict_fit(fit_pipe, fit_opts, g);
        else if (bt_cmd->parsed()) cmd_predict_backtest(bt_pipe, bt_opts, g);
        else if (metrics_cmd->parsed()) cmd_predict_metrics(metrics_opts, g);
        else if (agg_cmd->parsed()) cmd_aggregate(agg_pipe, agg_opts, g);
        else if (recov_cmd->parsed()) cmd_receivership_recovery(rec_recovery, g);
        else if (grid_cmd->parsed()) cmd_receivership_grid(rec_grid, g);
        else if (causes_cmd->parsed()) cmd_receivership_causes(rec_causes, g);
        else if (excess_cmd->parsed()) cmd_receivership_excess_return(rec_excess, g);
        return 0;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

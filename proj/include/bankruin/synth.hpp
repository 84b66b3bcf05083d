#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bankruin/panel.hpp"
#include "bankruin/receivership.hpp"

namespace bankruin {

// Synthetic data-generating process. The failure logit is the ground truth
// every estimator is checked against; the seed fully determines the output.
struct DgpConfig {
    std::uint64_t seed = 1;
    int n_banks = 500;
    int n_years = 30;
    int start_year = 1880;
    Era era = Era::Historical;

    // failure logit: intercept + insolvency + noncore + interaction
    // + aggregate conditions (common across banks within a year)
    double beta0 = -4.0;
    double beta_insolvency = 0.0;
    double beta_noncore = 0.0;
    double beta_interaction = 0.0;
    double beta_gdp = 0.0;
    double beta_inflation = 0.0;

    // feature draws (jointly normal, persistent within bank)
    double insolvency_mean = 0.3;
    double insolvency_sd = 0.15;
    double noncore_mean = 0.06;
    double noncore_sd = 0.03;
    double feature_corr = 0.2;
    double feature_persistence = 0.5;  // AR(1) within bank

    // balance-sheet scaffolding
    double log_assets_mean = 4.5;
    double log_assets_sd = 1.0;
    double asset_growth_sd = 0.08;
    double equity_share = 0.10;
    double notes_share = 0.03;

    // deposit outflow at failure: P(run) = logistic(run_intercept +
    // run_coef_insolvency * insolvency)
    double run_intercept = -0.5;
    double run_coef_insolvency = 0.0;
    double run_outflow_mean = -0.25;
    double run_outflow_sd = 0.08;
    double no_run_outflow_mean = 0.0;
    double no_run_outflow_sd = 0.02;

    // receivership DGP
    int n_receiverships = 0;
    double recovery_mean = 0.55;
    double recovery_sd = 0.15;
    double leverage_mean = 0.85;
    double leverage_sd = 0.08;
    double recovery_leverage_corr = -0.3;
    double receivership_run_prob = 0.5;
    // split of debt into offsets / secured+preferred; the remainder is
    // claims proved. Zero both to pin leverage exactly at the drawn value.
    double receivership_offsets_share = 0.02;
    double receivership_secured_share = 0.08;

    void validate() const;
};

struct SynthPanel {
    BankPanel panel;
    std::vector<FailureEvent> events;
    // true one-year-ahead failure probability per panel row
    std::vector<double> true_prob;
};

// Reproducible panel with known failure probabilities. Every generated row
// passes the panel invariants, so a load round-trip yields zero rejects.
SynthPanel generate_panel(const DgpConfig& config, int threads = 1);

std::vector<ReceivershipRecord> generate_receiverships(const DgpConfig& config);

// Serialization in the exact ingestion schema of load_panel / load_events.
std::string panel_to_csv(const BankPanel& panel, char delim = ',');
std::string events_to_csv(const std::vector<FailureEvent>& events, char delim = ',');
std::string true_probs_to_csv(const SynthPanel& synth, char delim = ',');

}  // namespace bankruin

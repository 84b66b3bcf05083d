#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bankruin/common.hpp"

namespace bankruin {

enum class Era { Historical, Modern };

Era era_from_string(const std::string& s);
const char* era_name(Era era);

// One bank-period record straight off a call report. `assets` is required
// and positive; everything else is optional and stays missing when the
// source column is absent or blank.
struct BankObservation {
    std::string bank_id;
    Date date;
    double assets = 0.0;
    std::optional<double> deposits;
    std::optional<double> equity;
    std::optional<double> surplus_profit;
    std::optional<double> national_bank_notes;
    std::optional<double> time_deposits;
    std::optional<double> wholesale_funding;
    std::optional<double> net_income;
    std::optional<double> loans;
    std::optional<double> cpi;
    std::optional<double> oreo;
    std::optional<double> demand_deposits;
    std::optional<double> brokered_deposits;
    // aggregate conditions, replicated per row (constant within a year)
    std::optional<double> gdp_growth_3y;
    std::optional<double> inflation_3y;
    std::optional<Date> charter_date;
};

// Derived per-row features. Missing inputs stay missing, never zero-filled.
struct FeatureRow {
    std::optional<double> insolvency;
    std::optional<double> noncore;
    std::optional<double> interaction;
    std::optional<int> growth_quintile;
    std::optional<double> log_age;
    // failure label per horizon, present once label_failures ran for it
    std::map<int, std::uint8_t> label;
};

struct FailureEvent {
    std::string bank_id;
    Date failure_date;
    std::optional<double> deposits_last_call;
    std::optional<double> deposits_at_failure;
    std::optional<double> assets_at_failure;
};

struct BankPanel {
    std::vector<BankObservation> obs;   // sorted by (bank_id, date)
    std::vector<FeatureRow> features;   // parallel to obs
    std::vector<int> horizons;          // horizons with labels computed

    size_t size() const { return obs.size(); }
    void sort_rows();
    // contiguous [first, last) row range per bank, in sorted order
    std::vector<std::pair<size_t, size_t>> bank_ranges() const;
    std::vector<int> distinct_years() const;
};

// Column-mapping schema: BankObservation field name -> source column name.
// bank_id, date and assets must be mapped.
struct PanelSchema {
    std::map<std::string, std::string> columns;

    static PanelSchema from_json(const nlohmann::json& j);
    static PanelSchema from_file(const std::string& path);
    // the schema used by `synth` output; every field maps to its own name
    static PanelSchema identity();
    static const std::vector<std::string>& known_fields();
};

struct LoadOptions {
    char delimiter = ',';
    std::optional<int> min_year;   // era bounds; unset means unbounded
    std::optional<int> max_year;
};

struct LoadReport {
    std::vector<RejectedRow> rejects;
    size_t n_loaded = 0;
    std::string to_text() const;  // one line per reject: line_no<TAB>reason
};

// Streams a delimited file into a panel. Rows violating invariants land in
// the reject report; a duplicate (bank_id, date) is a hard error naming the
// key.
BankPanel load_panel(std::istream& in, const PanelSchema& schema, const LoadOptions& opts,
                     LoadReport& report);

std::vector<FailureEvent> load_events(std::istream& in, char delimiter = ',');

struct FeatureConfig {
    Era era = Era::Historical;
    // items subtracted from assets in the historical noncore numerator
    std::vector<std::string> historical_noncore_subtract = {"deposits", "equity",
                                                            "national_bank_notes"};
};

// Populates insolvency, noncore, interaction and log_age. A required
// era-specific input that is absent from every row is a configuration error
// naming the missing columns.
void compute_fundamentals(BankPanel& panel, const FeatureConfig& config);

struct QuintileReport {
    std::vector<int> skipped_years;  // years with fewer than 5 valid banks
    size_t n_assigned = 0;
};

// Growth in log (optionally CPI-deflated) assets from t-window to t, cut
// into within-year quintiles with deterministic bank_id tie-breaks.
QuintileReport asset_growth_quintiles(BankPanel& panel, int window = 3, bool deflate = false);

struct LabelReport {
    size_t n_positive = 0;
    size_t n_dropped_post_failure = 0;
    std::vector<std::string> warnings;  // unknown bank ids, duplicate events
};

// label_h(b,t) = 1 iff the bank fails in (t, t+h]. Observations dated on or
// after the bank's failure are removed from the panel.
LabelReport label_failures(BankPanel& panel, const std::vector<FailureEvent>& events, int horizon);

struct DeNovoReport {
    size_t n_removed = 0;
    size_t n_missing_charter = 0;  // retained, flagged
};

BankPanel filter_de_novo(const BankPanel& panel, int min_age, DeNovoReport& report);

// Deposit growth from the last call report to failure, clipped above at
// +100%. The run flag is growth < -7.5%, strict.
struct OutflowResult {
    std::optional<double> growth;
    std::optional<bool> run_flag;
};

OutflowResult deposit_outflow_at_failure(const FailureEvent& event);

// Distribution of pre-failure deposit growth across events with defined
// outflows: average plus the share falling in each reporting bin.
struct OutflowStats {
    long n = 0;
    double average = 0.0;
    // bins: <-30%, [-30,-20), [-20,-7.5), [-7.5,-2.5), [-2.5,0), >=0
    std::array<double, 6> bin_share{};
    long n_runs = 0;
};

OutflowStats deposit_outflow_stats(const std::vector<FailureEvent>& events);

int bank_age_years(const Date& obs_date, const Date& charter_date);

}  // namespace bankruin

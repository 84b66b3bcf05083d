#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bankruin/common.hpp"
#include "bankruin/econometrics.hpp"

namespace bankruin {

// One failed-bank receivership as reported by the receiver's tables.
struct ReceivershipRecord {
    std::string bank_id;
    std::optional<Date> receiver_appointed;
    std::optional<Date> receivership_closed;
    double assets_at_suspension = 0.0;
    double additional_assets_received = 0.0;
    double collected_from_assets = 0.0;
    double collected_from_shareholders = 0.0;  // double-liability assessments
    double claims_proved = 0.0;
    double secured_preferred_paid = 0.0;
    double offsets = 0.0;
    std::optional<double> deposits_at_suspension;
    std::optional<double> estimated_good;
    std::optional<double> estimated_doubtful;
    std::optional<double> estimated_worthless;
    std::optional<double> dividends_paid_pct;  // fraction of claims proved
    std::string cause;
    std::optional<bool> run_flag;  // from pre-failure deposit outflows, when known

    double total_assets() const { return assets_at_suspension + additional_assets_received; }
    void check_invariants() const;
};

struct ReceivershipLoad {
    std::vector<ReceivershipRecord> records;
    std::vector<RejectedRow> rejects;
};

ReceivershipLoad load_receiverships(std::istream& in, char delimiter = ',');
std::string receivership_csv_header(char delimiter = ',');
std::string receivership_csv_row(const ReceivershipRecord& r, char delimiter = ',');

// Solvency-ratio variants of Table-style robustness checks. Baseline keeps
// collections from assets over total assets and claims proved in leverage;
// WithDoubleLiability adds shareholder assessments to the recovery
// numerator; DepositsAtSuspensionDenominator swaps claims proved for
// deposits at suspension on the leverage side.
enum class RecoveryVariant { Baseline, WithDoubleLiability, DepositsAtSuspensionDenominator };

RecoveryVariant recovery_variant_from_string(const std::string& s);

double recovery_rate(const ReceivershipRecord& r,
                     RecoveryVariant variant = RecoveryVariant::Baseline);
double leverage(const ReceivershipRecord& r,
                RecoveryVariant variant = RecoveryVariant::Baseline);

// Fundamental insolvency: (1+v)/(1-rho) < ell/R, strict. Requires R > 0,
// rho in [0,1), v >= 0.
bool insolvency_flag(double ell, double recovery, double rho, double v);

enum class RunFilter { All, RunOnly, NoRunOnly };

struct InsolvencyGrid {
    std::vector<double> rho_values;
    std::vector<double> v_values;
    // row-major rho x v
    std::vector<double> insolvent_share;
    std::vector<long> n_insolvent;
    long n_records = 0;
    RunFilter filter = RunFilter::All;

    // populated when run flags are known on the filtered sample
    long n_run_known = 0;
    long n_run = 0;
    std::vector<long> n_run_insolvent;
    std::vector<long> n_run_not_insolvent;
    std::vector<double> run_not_insolvent_share;  // of records with known run flag

    size_t cell(size_t i_rho, size_t i_v) const { return i_rho * v_values.size() + i_v; }
    std::string to_csv(char delim = ',') const;  // matrix-form text table
    nlohmann::json to_json() const;
};

// Share of fundamentally insolvent banks per (rho, v) cell, plus the share
// of run-flagged failures that were not fundamentally insolvent.
InsolvencyGrid insolvency_share_grid(const std::vector<ReceivershipRecord>& records,
                                     const std::vector<double>& rho_grid,
                                     const std::vector<double>& v_grid,
                                     RunFilter filter = RunFilter::All,
                                     RecoveryVariant variant = RecoveryVariant::Baseline);

// No-constant OLS of the recovery rate on shares of assets assessed good,
// doubtful and worthless at suspension.
FitResult asset_quality_regression(const std::vector<ReceivershipRecord>& records);

struct DepositorLossStats {
    long n = 0;
    double share_with_losses = 0.0;
    double conditional_loss = 0.0;    // mean loss given a loss
    double unconditional_loss = 0.0;  // mean over all failures
};

// Depositor loss = max(0, 1 - dividends paid), no discounting.
DepositorLossStats depositor_loss_stats(const std::vector<ReceivershipRecord>& records);

enum class FailureCause {
    EconomicConditions,
    ExcessiveLending,
    Losses,
    Fraud,
    Governance,
    Run,
    Other,
    Unclassified,
};

const char* failure_cause_name(FailureCause cause);

// Ordered pattern -> category table; first exact match after whitespace and
// case normalization wins. Unmatched strings are Unclassified, never guessed.
struct CauseMapping {
    std::vector<std::pair<std::string, FailureCause>> entries;

    static CauseMapping default_mapping();
    static CauseMapping from_json(const nlohmann::json& j);
    static CauseMapping from_file(const std::string& path);
};

FailureCause classify_cause(std::string_view cause, const CauseMapping& mapping);

enum class UtilityKind { RiskNeutral, Log, Crra };

struct Utility {
    UtilityKind kind = UtilityKind::RiskNeutral;
    double gamma = 0.0;  // CRRA only

    double operator()(double c) const;
};

// Excess deposit return s solving
//   (1-p) u(1+r+s) + p u(1-loss) = u(1).
// Risk-neutral has the closed form p*loss/(1-p) - r; Log and CRRA go through
// the bracketed bisection in excess_return_root.
double required_excess_return(double p_fail, double loss, double risk_free, Utility u);

// Bisection on s in [-r, 10] to |residual| < 1e-12; the numerical route kept
// separate so the closed forms can be checked against it.
double excess_return_root(double p_fail, double loss, double risk_free, Utility u);

}  // namespace bankruin

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "bankruin/panel.hpp"

namespace bankruin {

// Extracts the outcome for one row; missing means the row is skipped.
using OutcomeFn =
    std::function<std::optional<double>(const BankObservation&, const FeatureRow&)>;

// Named outcome registry used by the CLI: insolvency, noncore, interaction,
// log_assets (CPI-deflated when deflate is set), deposits_to_assets,
// equity_to_assets, loans_to_assets, noncore components, net_income_to_assets.
OutcomeFn outcome_by_name(const std::string& name, bool deflate_by_cpi);

// Pre-failure dynamics relative to ten years before failure. Keys are event
// times in quarters (annual data lands on multiples of 4); the benchmark
// period at -window years is omitted by construction.
struct EventStudyResult {
    std::map<int, double> beta;       // event-time (quarters) -> coefficient
    std::map<int, double> se;
    std::map<int, long> n_at;         // supporting observations per event time
    std::string outcome_name;
    long n_banks = 0;
    long n_obs = 0;

    static double years_of(int quarters) { return quarters / 4.0; }
    std::string to_csv(char delim = ',') const;  // j,beta,se,n,year_end
};

// FE-OLS of the outcome on event-time dummies with bank fixed effects,
// Driscoll-Kraay standard errors (bandwidth 2). The panel must already be
// restricted to failing banks via the events list.
EventStudyResult event_study(const BankPanel& panel, const std::vector<FailureEvent>& events,
                             const OutcomeFn& outcome, const std::string& outcome_name,
                             int window_years = 10);

}  // namespace bankruin

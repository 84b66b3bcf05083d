#include "bankruin/event_study.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "bankruin/econometrics.hpp"

namespace bankruin {

OutcomeFn outcome_by_name(const std::string& name, bool deflate_by_cpi) {
    auto ratio = [](std::optional<double> num, double denom) -> std::optional<double> {
        if (!num || denom <= 0.0) return std::nullopt;
        return *num / denom;
    };
    if (name == "insolvency") {
        return [](const BankObservation&, const FeatureRow& f) { return f.insolvency; };
    }
    if (name == "noncore") {
        return [](const BankObservation&, const FeatureRow& f) { return f.noncore; };
    }
    if (name == "interaction") {
        return [](const BankObservation&, const FeatureRow& f) { return f.interaction; };
    }
    if (name == "log_assets") {
        return [deflate_by_cpi](const BankObservation& o,
                                const FeatureRow&) -> std::optional<double> {
            if (deflate_by_cpi) {
                if (!o.cpi || *o.cpi <= 0.0) return std::nullopt;
                return std::log(o.assets / *o.cpi);
            }
            return std::log(o.assets);
        };
    }
    if (name == "deposits_to_assets") {
        return [ratio](const BankObservation& o, const FeatureRow&) {
            return ratio(o.deposits, o.assets);
        };
    }
    if (name == "equity_to_assets") {
        return [ratio](const BankObservation& o, const FeatureRow&) {
            return ratio(o.equity, o.assets);
        };
    }
    if (name == "loans_to_assets") {
        return [ratio](const BankObservation& o, const FeatureRow&) {
            return ratio(o.loans, o.assets);
        };
    }
    if (name == "net_income_to_assets") {
        return [ratio](const BankObservation& o, const FeatureRow&) {
            return ratio(o.net_income, o.assets);
        };
    }
    if (name == "time_deposits_to_assets") {
        return [ratio](const BankObservation& o, const FeatureRow&) {
            return ratio(o.time_deposits, o.assets);
        };
    }
    if (name == "oreo_to_loans") {
        return [](const BankObservation& o, const FeatureRow&) -> std::optional<double> {
            if (!o.oreo || !o.loans || *o.loans <= 0.0) return std::nullopt;
            return *o.oreo / *o.loans;
        };
    }
    throw UsageError("unknown outcome '" + name + "'");
}

std::string EventStudyResult::to_csv(char delim) const {
    std::string out = "j";
    for (const char* col : {"beta", "se", "n", "year_end"}) {
        out += delim;
        out += col;
    }
    out += '\n';
    for (const auto& [dq, b] : beta) {
        bool annual = dq % 4 == 0;
        out += format_double(years_of(dq));
        out += delim;
        out += format_double(b);
        out += delim;
        out += format_double(se.at(dq));
        out += delim;
        out += std::to_string(n_at.at(dq));
        out += delim;
        out += annual ? "1" : "0";
        out += '\n';
    }
    return out;
}

EventStudyResult event_study(const BankPanel& panel, const std::vector<FailureEvent>& events,
                             const OutcomeFn& outcome, const std::string& outcome_name,
                             int window_years) {
    if (window_years < 1) throw UsageError("event window must cover at least one year");
    if (panel.features.size() != panel.obs.size()) {
        throw UsageError("panel features not initialized; run compute_fundamentals first");
    }

    std::unordered_map<std::string, Date> failure_of;
    for (const auto& ev : events) {
        auto [it, fresh] = failure_of.try_emplace(ev.bank_id, ev.failure_date);
        if (!fresh && ev.failure_date < it->second) it->second = ev.failure_date;
    }

    const int benchmark = -4 * window_years;  // event time in quarters

    struct Row {
        size_t panel_row;
        int dq;
        double y;
    };
    std::vector<Row> rows;
    bool any_outcome = false;
    for (size_t i = 0; i < panel.obs.size(); ++i) {
        auto it = failure_of.find(panel.obs[i].bank_id);
        if (it == failure_of.end()) continue;
        auto y = outcome(panel.obs[i], panel.features[i]);
        if (!y) continue;
        any_outcome = true;
        double offset = panel.obs[i].date.frac() - it->second.frac();
        int dq = static_cast<int>(std::lround(offset * 4.0));
        if (dq < benchmark || dq > 0) continue;
        rows.push_back({i, dq, *y});
    }
    if (!any_outcome) throw DataError("outcome '" + outcome_name + "' missing everywhere");
    if (rows.empty()) throw DataError("no failer observations inside the event window");

    bool benchmark_seen = false;
    std::set<int> event_times;
    std::map<int, long> n_at;
    for (const auto& r : rows) {
        if (r.dq == benchmark) benchmark_seen = true;
        else event_times.insert(r.dq);
        ++n_at[r.dq];
    }
    if (!benchmark_seen) {
        throw DataError("benchmark period (" + std::to_string(-window_years) +
                        " years before failure) unobserved; dynamics are unidentified");
    }
    if (event_times.empty()) throw DataError("only benchmark-period observations present");

    std::vector<int> dummy_times(event_times.begin(), event_times.end());
    std::unordered_map<int, long> col_of;
    for (size_t k = 0; k < dummy_times.size(); ++k) col_of[dummy_times[k]] = static_cast<long>(k);

    DesignMatrix d;
    d.names.reserve(dummy_times.size());
    for (int dq : dummy_times) {
        d.names.push_back("j" + std::to_string(dq));
    }
    d.X = Eigen::MatrixXd::Zero(static_cast<long>(rows.size()),
                                static_cast<long>(dummy_times.size()));
    d.y.resize(static_cast<long>(rows.size()));
    d.group.reserve(rows.size());
    d.date.reserve(rows.size());
    for (size_t k = 0; k < rows.size(); ++k) {
        long r = static_cast<long>(k);
        if (rows[k].dq != benchmark) d.X(r, col_of[rows[k].dq]) = 1.0;
        d.y[r] = rows[k].y;
        d.group.push_back(panel.obs[rows[k].panel_row].bank_id);
        d.date.push_back(panel.obs[rows[k].panel_row].date.frac());
    }

    DesignMatrix within = within_transform(d);
    FitResult fit = ols_fit(within);
    fit.tag = EstimatorTag::FeOls;
    Eigen::VectorXd dk = driscoll_kraay_se(fit, within, 2);

    EventStudyResult result;
    result.outcome_name = outcome_name;
    result.n_obs = static_cast<long>(rows.size());
    std::set<std::string> banks(d.group.begin(), d.group.end());
    result.n_banks = static_cast<long>(banks.size());
    result.n_at = std::move(n_at);
    for (size_t k = 0; k < dummy_times.size(); ++k) {
        result.beta[dummy_times[k]] = fit.coef[static_cast<long>(k)];
        result.se[dummy_times[k]] = dk[static_cast<long>(k)];
    }
    return result;
}

}  // namespace bankruin

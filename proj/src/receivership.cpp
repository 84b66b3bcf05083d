#include "bankruin/receivership.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>

#include <nlohmann/json.hpp>

#include "bankruin/csv.hpp"

namespace bankruin {
namespace {

constexpr const char* kColumns[] = {
    "bank_id",        "receiver_appointed",   "receivership_closed",
    "assets_at_suspension", "additional_assets_received", "collected_from_assets",
    "collected_from_shareholders", "claims_proved", "secured_preferred_paid",
    "offsets",        "deposits_at_suspension", "estimated_good",
    "estimated_doubtful", "estimated_worthless", "dividends_paid_pct",
    "cause",          "run_flag"};

std::string opt_str(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string{};
}

}  // namespace

void ReceivershipRecord::check_invariants() const {
    auto nonneg = [&](double v, const char* name) {
        if (v < 0.0) throw DataError(std::string(name) + " negative for bank " + bank_id);
    };
    nonneg(assets_at_suspension, "assets_at_suspension");
    nonneg(additional_assets_received, "additional_assets_received");
    nonneg(collected_from_assets, "collected_from_assets");
    nonneg(collected_from_shareholders, "collected_from_shareholders");
    nonneg(claims_proved, "claims_proved");
    nonneg(secured_preferred_paid, "secured_preferred_paid");
    nonneg(offsets, "offsets");
    if (deposits_at_suspension) nonneg(*deposits_at_suspension, "deposits_at_suspension");
    if (estimated_good && estimated_doubtful && estimated_worthless) {
        double total = *estimated_good + *estimated_doubtful + *estimated_worthless;
        if (total > assets_at_suspension * 1.01) {
            throw DataError("asset-quality assessments exceed assets at suspension for bank " +
                            bank_id);
        }
    }
    if (dividends_paid_pct && (*dividends_paid_pct < 0.0 || *dividends_paid_pct > 1.5)) {
        throw DataError("dividends_paid_pct outside [0, 1.5] for bank " + bank_id);
    }
}

ReceivershipLoad load_receiverships(std::istream& in, char delimiter) {
    CsvReader reader(in, delimiter);
    if (reader.column_index("bank_id") < 0) {
        throw DataError("receivership file needs a 'bank_id' column");
    }

    ReceivershipLoad out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;
        auto at = [&](const char* name) -> std::string {
            int idx = reader.column_index(name);
            return idx >= 0 && idx < static_cast<int>(fields.size())
                       ? fields[static_cast<size_t>(idx)]
                       : std::string{};
        };
        auto num = [&](const char* name) -> double {
            std::string raw = at(name);
            if (trim(raw).empty()) return 0.0;
            auto v = parse_double(raw);
            if (!v) throw DataError(std::string("unparseable number in '") + name + "': " + raw);
            return *v;
        };
        auto opt_num = [&](const char* name) -> std::optional<double> {
            std::string raw = at(name);
            if (trim(raw).empty()) return std::nullopt;
            auto v = parse_double(raw);
            if (!v) throw DataError(std::string("unparseable number in '") + name + "': " + raw);
            return v;
        };

        try {
            ReceivershipRecord r;
            r.bank_id = trim(at("bank_id"));
            if (r.bank_id.empty()) throw DataError("missing bank_id");
            if (auto d = Date::parse(at("receiver_appointed"))) r.receiver_appointed = d;
            if (auto d = Date::parse(at("receivership_closed"))) r.receivership_closed = d;
            r.assets_at_suspension = num("assets_at_suspension");
            r.additional_assets_received = num("additional_assets_received");
            r.collected_from_assets = num("collected_from_assets");
            r.collected_from_shareholders = num("collected_from_shareholders");
            r.claims_proved = num("claims_proved");
            r.secured_preferred_paid = num("secured_preferred_paid");
            r.offsets = num("offsets");
            r.deposits_at_suspension = opt_num("deposits_at_suspension");
            r.estimated_good = opt_num("estimated_good");
            r.estimated_doubtful = opt_num("estimated_doubtful");
            r.estimated_worthless = opt_num("estimated_worthless");
            r.dividends_paid_pct = opt_num("dividends_paid_pct");
            r.cause = trim(at("cause"));
            std::string run = trim(at("run_flag"));
            if (run == "1" || lower(run) == "true") r.run_flag = true;
            else if (run == "0" || lower(run) == "false") r.run_flag = false;
            r.check_invariants();
            out.records.push_back(std::move(r));
        } catch (const DataError& e) {
            out.rejects.push_back({reader.line_no(), e.what()});
        }
    }
    return out;
}

std::string receivership_csv_header(char delimiter) {
    std::string out;
    for (const char* col : kColumns) {
        if (!out.empty()) out.push_back(delimiter);
        out += col;
    }
    return out + "\n";
}

std::string receivership_csv_row(const ReceivershipRecord& r, char delimiter) {
    std::vector<std::string> fields = {
        r.bank_id,
        r.receiver_appointed ? r.receiver_appointed->str() : "",
        r.receivership_closed ? r.receivership_closed->str() : "",
        format_double(r.assets_at_suspension),
        format_double(r.additional_assets_received),
        format_double(r.collected_from_assets),
        format_double(r.collected_from_shareholders),
        format_double(r.claims_proved),
        format_double(r.secured_preferred_paid),
        format_double(r.offsets),
        opt_str(r.deposits_at_suspension),
        opt_str(r.estimated_good),
        opt_str(r.estimated_doubtful),
        opt_str(r.estimated_worthless),
        opt_str(r.dividends_paid_pct),
        r.cause,
        r.run_flag ? (*r.run_flag ? "1" : "0") : ""};
    return csv_join(fields, delimiter) + "\n";
}

RecoveryVariant recovery_variant_from_string(const std::string& s) {
    std::string n = lower(trim(s));
    if (n == "baseline") return RecoveryVariant::Baseline;
    if (n == "double-liability" || n == "double_liability") {
        return RecoveryVariant::WithDoubleLiability;
    }
    if (n == "deposits-at-suspension" || n == "deposits_at_suspension") {
        return RecoveryVariant::DepositsAtSuspensionDenominator;
    }
    throw UsageError("unknown recovery variant '" + s + "'");
}

double recovery_rate(const ReceivershipRecord& r, RecoveryVariant variant) {
    double denom = r.total_assets();
    if (denom <= 0.0) {
        throw DataError("recovery_rate: zero asset base for bank " + r.bank_id);
    }
    double numer = r.collected_from_assets;
    if (variant == RecoveryVariant::WithDoubleLiability) {
        numer += r.collected_from_shareholders;
    }
    return numer / denom;
}

double leverage(const ReceivershipRecord& r, RecoveryVariant variant) {
    double denom = r.total_assets();
    if (denom <= 0.0) {
        throw DataError("leverage: zero asset base for bank " + r.bank_id);
    }
    double debt;
    if (variant == RecoveryVariant::DepositsAtSuspensionDenominator) {
        if (!r.deposits_at_suspension) {
            throw DataError("leverage: deposits at suspension unavailable for bank " + r.bank_id);
        }
        debt = *r.deposits_at_suspension + r.offsets + r.secured_preferred_paid;
    } else {
        debt = r.claims_proved + r.offsets + r.secured_preferred_paid;
    }
    return debt / denom;
}

bool insolvency_flag(double ell, double recovery, double rho, double v) {
    if (recovery <= 0.0) throw DataError("insolvency_flag: recovery rate must be positive");
    if (rho < 0.0 || rho >= 1.0) throw UsageError("rho must lie in [0,1)");
    if (v < 0.0) throw UsageError("franchise value v must be non-negative");
    return (1.0 + v) / (1.0 - rho) < ell / recovery;
}

std::string InsolvencyGrid::to_csv(char delim) const {
    std::string out = "rho\\v";
    for (double v : v_values) {
        out += delim;
        out += format_double(v);
    }
    out += '\n';
    for (size_t i = 0; i < rho_values.size(); ++i) {
        out += format_double(rho_values[i]);
        for (size_t j = 0; j < v_values.size(); ++j) {
            out += delim;
            out += format_double(insolvent_share[cell(i, j)]);
        }
        out += '\n';
    }
    return out;
}

nlohmann::json InsolvencyGrid::to_json() const {
    nlohmann::json j;
    j["rho"] = rho_values;
    j["v"] = v_values;
    j["n_records"] = n_records;
    switch (filter) {
        case RunFilter::All: j["run_filter"] = "all"; break;
        case RunFilter::RunOnly: j["run_filter"] = "run"; break;
        case RunFilter::NoRunOnly: j["run_filter"] = "no-run"; break;
    }
    nlohmann::json share = nlohmann::json::array();
    for (size_t i = 0; i < rho_values.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (size_t jv = 0; jv < v_values.size(); ++jv) row.push_back(insolvent_share[cell(i, jv)]);
        share.push_back(row);
    }
    j["insolvent_share"] = share;
    if (n_run_known > 0) {
        j["n_run_known"] = n_run_known;
        j["n_run"] = n_run;
        nlohmann::json rows = nlohmann::json::array();
        for (size_t i = 0; i < rho_values.size(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (size_t jv = 0; jv < v_values.size(); ++jv) {
                row.push_back(run_not_insolvent_share[cell(i, jv)]);
            }
            rows.push_back(row);
        }
        j["run_not_insolvent_share"] = rows;
    }
    return j;
}

InsolvencyGrid insolvency_share_grid(const std::vector<ReceivershipRecord>& records,
                                     const std::vector<double>& rho_grid,
                                     const std::vector<double>& v_grid, RunFilter filter,
                                     RecoveryVariant variant) {
    if (rho_grid.empty() || v_grid.empty()) throw UsageError("rho and v grids must be non-empty");
    for (double rho : rho_grid) {
        if (rho < 0.0 || rho >= 1.0) throw UsageError("rho must lie in [0,1)");
    }
    for (double v : v_grid) {
        if (v < 0.0) throw UsageError("franchise value v must be non-negative");
    }

    struct Entry {
        double ell;
        double recovery;
        std::optional<bool> run;
    };
    std::vector<Entry> entries;
    for (const auto& r : records) {
        if (filter == RunFilter::RunOnly && !(r.run_flag && *r.run_flag)) continue;
        if (filter == RunFilter::NoRunOnly && !(r.run_flag && !*r.run_flag)) continue;
        Entry e{leverage(r, variant), recovery_rate(r, variant), r.run_flag};
        if (e.recovery <= 0.0) {
            throw DataError("insolvency grid: nonpositive recovery rate for bank " + r.bank_id);
        }
        entries.push_back(e);
    }
    if (entries.empty()) throw DataError("insolvency grid: no records after run filter");

    InsolvencyGrid grid;
    grid.rho_values = rho_grid;
    grid.v_values = v_grid;
    grid.filter = filter;
    grid.n_records = static_cast<long>(entries.size());
    size_t n_cells = rho_grid.size() * v_grid.size();
    grid.insolvent_share.assign(n_cells, 0.0);
    grid.n_insolvent.assign(n_cells, 0);
    grid.n_run_insolvent.assign(n_cells, 0);
    grid.n_run_not_insolvent.assign(n_cells, 0);
    grid.run_not_insolvent_share.assign(n_cells, 0.0);

    for (const auto& e : entries) {
        if (e.run) {
            ++grid.n_run_known;
            grid.n_run += *e.run;
        }
    }

    for (size_t i = 0; i < rho_grid.size(); ++i) {
        for (size_t j = 0; j < v_grid.size(); ++j) {
            size_t c = grid.cell(i, j);
            for (const auto& e : entries) {
                bool insolvent = insolvency_flag(e.ell, e.recovery, rho_grid[i], v_grid[j]);
                grid.n_insolvent[c] += insolvent;
                if (e.run && *e.run) {
                    if (insolvent) ++grid.n_run_insolvent[c];
                    else ++grid.n_run_not_insolvent[c];
                }
            }
            grid.insolvent_share[c] =
                static_cast<double>(grid.n_insolvent[c]) / static_cast<double>(entries.size());
            if (grid.n_run_known > 0) {
                grid.run_not_insolvent_share[c] = static_cast<double>(grid.n_run_not_insolvent[c]) /
                                                  static_cast<double>(grid.n_run_known);
            }
        }
    }
    return grid;
}

FitResult asset_quality_regression(const std::vector<ReceivershipRecord>& records) {
    std::vector<const ReceivershipRecord*> usable;
    for (const auto& r : records) {
        if (r.estimated_good && r.estimated_doubtful && r.estimated_worthless &&
            r.assets_at_suspension > 0.0 && r.total_assets() > 0.0) {
            usable.push_back(&r);
        }
    }
    if (usable.size() < 3) {
        throw DataError("asset-quality regression needs at least 3 records with assessments");
    }
    DesignMatrix d;
    d.names = {"good", "doubtful", "worthless"};
    d.X.resize(static_cast<long>(usable.size()), 3);
    d.y.resize(static_cast<long>(usable.size()));
    for (size_t k = 0; k < usable.size(); ++k) {
        const auto& r = *usable[k];
        long row = static_cast<long>(k);
        d.X(row, 0) = *r.estimated_good / r.assets_at_suspension;
        d.X(row, 1) = *r.estimated_doubtful / r.assets_at_suspension;
        d.X(row, 2) = *r.estimated_worthless / r.assets_at_suspension;
        d.y[row] = recovery_rate(r);
    }
    return ols_fit(d);  // no constant, per the reporting convention
}

DepositorLossStats depositor_loss_stats(const std::vector<ReceivershipRecord>& records) {
    DepositorLossStats stats;
    double loss_sum = 0.0;
    long n_with_loss = 0;
    double loss_sum_cond = 0.0;
    for (const auto& r : records) {
        if (!r.dividends_paid_pct) continue;
        ++stats.n;
        double loss = std::max(0.0, 1.0 - *r.dividends_paid_pct);
        loss_sum += loss;
        if (loss > 0.0) {
            ++n_with_loss;
            loss_sum_cond += loss;
        }
    }
    if (stats.n > 0) {
        stats.share_with_losses = static_cast<double>(n_with_loss) / static_cast<double>(stats.n);
        stats.unconditional_loss = loss_sum / static_cast<double>(stats.n);
        stats.conditional_loss = n_with_loss > 0 ? loss_sum_cond / static_cast<double>(n_with_loss)
                                                 : 0.0;
    }
    return stats;
}

const char* failure_cause_name(FailureCause cause) {
    switch (cause) {
        case FailureCause::EconomicConditions: return "economic_conditions";
        case FailureCause::ExcessiveLending: return "excessive_lending";
        case FailureCause::Losses: return "losses";
        case FailureCause::Fraud: return "fraud";
        case FailureCause::Governance: return "governance";
        case FailureCause::Run: return "run";
        case FailureCause::Other: return "other";
        case FailureCause::Unclassified: return "unclassified";
    }
    return "?";
}

namespace {

FailureCause cause_from_name(const std::string& name) {
    for (FailureCause c :
         {FailureCause::EconomicConditions, FailureCause::ExcessiveLending, FailureCause::Losses,
          FailureCause::Fraud, FailureCause::Governance, FailureCause::Run, FailureCause::Other,
          FailureCause::Unclassified}) {
        if (name == failure_cause_name(c)) return c;
    }
    throw UsageError("unknown failure cause category '" + name + "'");
}

}  // namespace

CauseMapping CauseMapping::default_mapping() {
    // Built from the receiver tables' recurring phrasings. Fraud is listed
    // before loss phrasings: fraud wording is the more specific signal.
    CauseMapping m;
    auto add = [&](const char* pattern, FailureCause cause) {
        m.entries.emplace_back(normalize_text(pattern), cause);
    };
    // runs and anticipation of runs
    add("closed by run", FailureCause::Run);
    add("closed by a run", FailureCause::Run);
    add("run on bank", FailureCause::Run);
    add("heavy withdrawals", FailureCause::Run);
    add("closed in anticipation of a run", FailureCause::Run);
    add("closed by directors in anticipation of a run", FailureCause::Run);
    add("rumors of a run", FailureCause::Run);
    add("lack of public confidence", FailureCause::Run);
    // fraud before losses
    add("fraudulent management", FailureCause::Fraud);
    add("defalcation of officers", FailureCause::Fraud);
    add("defalcation of its officers", FailureCause::Fraud);
    add("embezzlement", FailureCause::Fraud);
    add("wrecked by the cashier", FailureCause::Fraud);
    add("dishonesty of officers", FailureCause::Fraud);
    add("excessive loans to officers and directors", FailureCause::Fraud);
    add("fraudulent management and depreciation of securities", FailureCause::Fraud);
    // excessive lending to outside counterparties
    add("excessive loans to others, injudicious banking", FailureCause::ExcessiveLending);
    add("excessive loans", FailureCause::ExcessiveLending);
    add("excessive loans to others", FailureCause::ExcessiveLending);
    add("excessive loans and investments", FailureCause::ExcessiveLending);
    // losses and depleted asset values
    add("injudicious banking", FailureCause::Losses);
    add("losses", FailureCause::Losses);
    add("general losses", FailureCause::Losses);
    add("failure to realize on assets", FailureCause::Losses);
    add("inability to realize on assets", FailureCause::Losses);
    add("depleted reserves", FailureCause::Losses);
    add("depreciation of securities", FailureCause::Losses);
    add("losses and depreciation of assets", FailureCause::Losses);
    // governance
    add("incompetent management", FailureCause::Governance);
    add("bad management", FailureCause::Governance);
    add("injudicious management", FailureCause::Governance);
    add("mismanagement", FailureCause::Governance);
    // external economic conditions
    add("crop failures", FailureCause::EconomicConditions);
    add("crop losses", FailureCause::EconomicConditions);
    add("deflation", FailureCause::EconomicConditions);
    add("local financial depression", FailureCause::EconomicConditions);
    add("general financial depression", FailureCause::EconomicConditions);
    add("failure of large debtors", FailureCause::EconomicConditions);
    add("robbery", FailureCause::EconomicConditions);
    add("local depression", FailureCause::EconomicConditions);
    // other
    add("voluntary liquidation", FailureCause::Other);
    add("in hands of receiver", FailureCause::Other);
    return m;
}

CauseMapping CauseMapping::from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw UsageError("cause mapping must be a JSON array of {pattern, category}");
    }
    CauseMapping m;
    for (const auto& entry : j) {
        if (!entry.is_object() || !entry.contains("pattern") || !entry.contains("category")) {
            throw UsageError("cause mapping entries need 'pattern' and 'category'");
        }
        m.entries.emplace_back(normalize_text(entry.at("pattern").get<std::string>()),
                               cause_from_name(entry.at("category").get<std::string>()));
    }
    return m;
}

CauseMapping CauseMapping::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cause mapping: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("cause mapping " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

FailureCause classify_cause(std::string_view cause, const CauseMapping& mapping) {
    std::string key = normalize_text(cause);
    if (key.empty()) return FailureCause::Unclassified;
    for (const auto& [pattern, category] : mapping.entries) {
        if (key == pattern) return category;
    }
    return FailureCause::Unclassified;
}

double Utility::operator()(double c) const {
    switch (kind) {
        case UtilityKind::RiskNeutral:
            return c;
        case UtilityKind::Log:
            return std::log(c);
        case UtilityKind::Crra:
            if (std::abs(gamma - 1.0) < 1e-12) return std::log(c);
            return (std::pow(c, 1.0 - gamma) - 1.0) / (1.0 - gamma);
    }
    return c;
}

namespace {

void check_excess_return_args(double p, double loss, Utility u) {
    if (p < 0.0 || p >= 1.0) throw UsageError("failure probability must lie in [0,1)");
    if (loss < 0.0 || loss > 1.0) throw UsageError("loss rate must lie in [0,1]");
    if (u.kind != UtilityKind::RiskNeutral && loss >= 1.0) {
        throw DataError("excess return undefined: utility of zero consumption with loss = 1");
    }
    if (u.kind == UtilityKind::Crra && u.gamma < 0.0) {
        throw UsageError("CRRA risk aversion must be non-negative");
    }
}

}  // namespace

double excess_return_root(double p, double loss, double r, Utility u) {
    check_excess_return_args(p, loss, u);
    auto residual = [&](double s) {
        return (1.0 - p) * u(1.0 + r + s) + p * u(1.0 - loss) - u(1.0);
    };
    double lo = -r, hi = 10.0;
    double f_lo = residual(lo);
    if (f_lo == 0.0) return lo;
    if (f_lo > 0.0) throw DataError("excess return bracket invalid at s = -r");
    if (residual(hi) < 0.0) {
        throw DataError("no excess return below 1000% satisfies the indifference condition");
    }
    for (int iter = 0; iter < 200; ++iter) {
        double mid = 0.5 * (lo + hi);
        double f = residual(mid);
        if (std::abs(f) < 1e-12 || (hi - lo) < 1e-15) return mid;
        if (f < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double required_excess_return(double p, double loss, double r, Utility u) {
    check_excess_return_args(p, loss, u);
    if (p == 0.0) return -r;
    switch (u.kind) {
        case UtilityKind::RiskNeutral:
            return p * loss / (1.0 - p) - r;
        case UtilityKind::Log:
        case UtilityKind::Crra:
            return excess_return_root(p, loss, r, u);
    }
    return excess_return_root(p, loss, r, u);
}

}  // namespace bankruin

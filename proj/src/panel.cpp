#include "bankruin/panel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "bankruin/csv.hpp"

namespace bankruin {
namespace {

using FieldSetter = void (*)(BankObservation&, const std::string&, int line_no);

void set_opt(std::optional<double>& slot, const std::string& raw, const char* field, int line_no) {
    if (trim(raw).empty()) return;
    auto v = parse_double(raw);
    if (!v) {
        throw DataError("line " + std::to_string(line_no) + ": unparseable number in '" +
                        field + "': " + raw);
    }
    slot = *v;
}

struct FieldSpec {
    const char* name;
    std::optional<double> BankObservation::* slot;
};

constexpr std::array<FieldSpec, 14> kOptionalFields{{
    {"deposits", &BankObservation::deposits},
    {"equity", &BankObservation::equity},
    {"surplus_profit", &BankObservation::surplus_profit},
    {"national_bank_notes", &BankObservation::national_bank_notes},
    {"time_deposits", &BankObservation::time_deposits},
    {"wholesale_funding", &BankObservation::wholesale_funding},
    {"net_income", &BankObservation::net_income},
    {"loans", &BankObservation::loans},
    {"cpi", &BankObservation::cpi},
    {"oreo", &BankObservation::oreo},
    {"demand_deposits", &BankObservation::demand_deposits},
    {"brokered_deposits", &BankObservation::brokered_deposits},
    {"gdp_growth_3y", &BankObservation::gdp_growth_3y},
    {"inflation_3y", &BankObservation::inflation_3y},
}};

}  // namespace

Era era_from_string(const std::string& s) {
    std::string n = lower(trim(s));
    if (n == "historical") return Era::Historical;
    if (n == "modern") return Era::Modern;
    throw UsageError("unknown era '" + s + "' (expected 'historical' or 'modern')");
}

const char* era_name(Era era) {
    return era == Era::Historical ? "historical" : "modern";
}

void BankPanel::sort_rows() {
    std::vector<size_t> order(obs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (obs[a].bank_id != obs[b].bank_id) return obs[a].bank_id < obs[b].bank_id;
        return obs[a].date < obs[b].date;
    });
    std::vector<BankObservation> new_obs;
    new_obs.reserve(obs.size());
    std::vector<FeatureRow> new_feat;
    bool has_feat = features.size() == obs.size();
    if (has_feat) new_feat.reserve(features.size());
    for (size_t idx : order) {
        new_obs.push_back(std::move(obs[idx]));
        if (has_feat) new_feat.push_back(std::move(features[idx]));
    }
    obs = std::move(new_obs);
    features = std::move(new_feat);
    if (!has_feat) features.assign(obs.size(), FeatureRow{});
}

std::vector<std::pair<size_t, size_t>> BankPanel::bank_ranges() const {
    std::vector<std::pair<size_t, size_t>> ranges;
    size_t i = 0;
    while (i < obs.size()) {
        size_t j = i + 1;
        while (j < obs.size() && obs[j].bank_id == obs[i].bank_id) ++j;
        ranges.emplace_back(i, j);
        i = j;
    }
    return ranges;
}

std::vector<int> BankPanel::distinct_years() const {
    std::set<int> years;
    for (const auto& o : obs) years.insert(o.date.year);
    return {years.begin(), years.end()};
}

const std::vector<std::string>& PanelSchema::known_fields() {
    static const std::vector<std::string> fields = [] {
        std::vector<std::string> f = {"bank_id", "date", "assets", "charter_date"};
        for (const auto& spec : kOptionalFields) f.emplace_back(spec.name);
        return f;
    }();
    return fields;
}

PanelSchema PanelSchema::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("schema must be a JSON object of {field: column}");
    PanelSchema schema;
    const auto& known = known_fields();
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw UsageError("schema maps unknown field '" + it.key() + "'");
        }
        if (!it.value().is_string()) {
            throw UsageError("schema entry '" + it.key() + "' must map to a column name");
        }
        schema.columns[it.key()] = it.value().get<std::string>();
    }
    for (const char* required : {"bank_id", "date", "assets"}) {
        if (!schema.columns.count(required)) {
            throw UsageError(std::string("schema must map required field '") + required + "'");
        }
    }
    return schema;
}

PanelSchema PanelSchema::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("schema file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

PanelSchema PanelSchema::identity() {
    PanelSchema schema;
    for (const auto& f : known_fields()) schema.columns[f] = f;
    return schema;
}

std::string LoadReport::to_text() const {
    std::string out;
    for (const auto& r : rejects) {
        out += std::to_string(r.line_no);
        out += '\t';
        out += r.reason;
        out += '\n';
    }
    return out;
}

BankPanel load_panel(std::istream& in, const PanelSchema& schema, const LoadOptions& opts,
                     LoadReport& report) {
    CsvReader reader(in, opts.delimiter);

    std::map<std::string, int> col;  // field -> column index
    for (const auto& [field, column] : schema.columns) {
        int idx = reader.column_index(column);
        if (idx >= 0) col[field] = idx;
    }
    for (const char* required : {"bank_id", "date", "assets"}) {
        if (!col.count(required)) {
            throw DataError(std::string("input is missing required column '") +
                            schema.columns.at(required) + "' (field " + required + ")");
        }
    }

    BankPanel panel;
    std::set<std::pair<std::string, std::string>> seen_keys;
    std::vector<std::string> fields;
    std::string duplicate_key;
    const size_t arity = reader.header().size();

    while (reader.next(fields)) {
        int line_no = reader.line_no();
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
        if (fields.size() != arity) {
            report.rejects.push_back(
                {line_no, "wrong arity: expected " + std::to_string(arity) + " fields, found " +
                              std::to_string(fields.size())});
            continue;
        }
        auto get = [&](const char* field) -> const std::string& {
            static const std::string empty;
            auto it = col.find(field);
            return it == col.end() ? empty : fields[static_cast<size_t>(it->second)];
        };

        try {
            BankObservation o;
            o.bank_id = trim(get("bank_id"));
            if (o.bank_id.empty()) throw DataError("missing bank_id");

            auto date = Date::parse(get("date"));
            if (!date) throw DataError("unparseable date: " + get("date"));
            o.date = *date;
            if (opts.min_year && o.date.year < *opts.min_year) {
                throw DataError("date " + o.date.str() + " before configured era start " +
                                std::to_string(*opts.min_year));
            }
            if (opts.max_year && o.date.year > *opts.max_year) {
                throw DataError("date " + o.date.str() + " after configured era end " +
                                std::to_string(*opts.max_year));
            }

            const std::string& assets_raw = get("assets");
            auto assets = parse_double(assets_raw);
            if (!assets) throw DataError("unparseable number in 'assets': " + assets_raw);
            if (*assets <= 0.0) throw DataError("nonpositive assets");
            o.assets = *assets;

            for (const auto& spec : kOptionalFields) {
                set_opt(o.*(spec.slot), get(spec.name), spec.name, line_no);
            }
            if (col.count("charter_date") && !trim(get("charter_date")).empty()) {
                auto charter = Date::parse(get("charter_date"));
                if (!charter) throw DataError("unparseable charter_date: " + get("charter_date"));
                o.charter_date = *charter;
            }

            auto key = std::make_pair(o.bank_id, o.date.str());
            if (!seen_keys.insert(key).second) {
                duplicate_key = "duplicate (bank_id, date) key: (" + o.bank_id + ", " +
                                o.date.str() + ") at line " + std::to_string(line_no);
                break;
            }
            panel.obs.push_back(std::move(o));
        } catch (const DataError& e) {
            report.rejects.push_back({line_no, e.what()});
        }
    }

    if (!duplicate_key.empty()) throw DataError(duplicate_key);

    panel.sort_rows();
    report.n_loaded = panel.size();
    return panel;
}

std::vector<FailureEvent> load_events(std::istream& in, char delimiter) {
    CsvReader reader(in, delimiter);
    int c_bank = reader.column_index("bank_id");
    int c_date = reader.column_index("failure_date");
    if (c_bank < 0 || c_date < 0) {
        throw DataError("events file needs 'bank_id' and 'failure_date' columns");
    }
    int c_last = reader.column_index("deposits_last_call");
    int c_fail = reader.column_index("deposits_at_failure");
    int c_assets = reader.column_index("assets_at_failure");

    std::vector<FailureEvent> events;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() == 1 && trim(fields[0]).empty()) continue;
        auto at = [&](int idx) -> std::string {
            return idx >= 0 && idx < static_cast<int>(fields.size())
                       ? fields[static_cast<size_t>(idx)]
                       : std::string{};
        };
        FailureEvent ev;
        ev.bank_id = trim(at(c_bank));
        auto date = Date::parse(at(c_date));
        if (ev.bank_id.empty() || !date) {
            throw DataError("events file line " + std::to_string(reader.line_no()) +
                            ": bank_id and failure_date required");
        }
        ev.failure_date = *date;
        ev.deposits_last_call = parse_double(at(c_last));
        ev.deposits_at_failure = parse_double(at(c_fail));
        ev.assets_at_failure = parse_double(at(c_assets));
        events.push_back(std::move(ev));
    }
    return events;
}

void compute_fundamentals(BankPanel& panel, const FeatureConfig& config) {
    if (panel.features.size() != panel.obs.size()) {
        panel.features.assign(panel.obs.size(), FeatureRow{});
    }

    auto field_value = [](const BankObservation& o,
                          const std::string& name) -> std::optional<double> {
        for (const auto& spec : kOptionalFields) {
            if (name == spec.name) return o.*(spec.slot);
        }
        if (name == "assets") return o.assets;
        throw UsageError("unknown noncore component '" + name + "'");
    };

    // required era inputs must exist somewhere in the panel
    std::vector<std::string> required;
    if (config.era == Era::Historical) {
        required = {"surplus_profit", "equity"};
        for (const auto& item : config.historical_noncore_subtract) required.push_back(item);
    } else {
        required = {"net_income", "time_deposits", "wholesale_funding"};
    }
    std::vector<std::string> absent;
    for (const auto& name : required) {
        bool found = false;
        for (const auto& o : panel.obs) {
            if (field_value(o, name).has_value()) {
                found = true;
                break;
            }
        }
        if (!found) absent.push_back(name);
    }
    if (!absent.empty() && !panel.obs.empty()) {
        std::string msg = "era '" + std::string(era_name(config.era)) +
                          "' inputs absent from every row:";
        for (const auto& a : absent) msg += " " + a;
        throw DataError(msg);
    }

    for (size_t i = 0; i < panel.obs.size(); ++i) {
        const auto& o = panel.obs[i];
        auto& f = panel.features[i];

        if (config.era == Era::Historical) {
            if (o.surplus_profit && o.equity && *o.equity != 0.0) {
                f.insolvency = *o.surplus_profit / *o.equity;
            }
            double numer = o.assets;
            bool complete = true;
            for (const auto& item : config.historical_noncore_subtract) {
                auto v = field_value(o, item);
                if (!v) {
                    complete = false;
                    break;
                }
                numer -= *v;
            }
            if (complete) f.noncore = numer / o.assets;
        } else {
            if (o.net_income) f.insolvency = *o.net_income / o.assets;
            if (o.time_deposits && o.wholesale_funding) {
                f.noncore = (*o.time_deposits + *o.wholesale_funding) / o.assets;
            }
        }
        if (f.insolvency && f.noncore) f.interaction = *f.insolvency * *f.noncore;

        if (o.charter_date) {
            int age = bank_age_years(o.date, *o.charter_date);
            if (age >= 0) f.log_age = std::log(age + 1.0);
        }
    }
}

QuintileReport asset_growth_quintiles(BankPanel& panel, int window, bool deflate) {
    if (window < 1) throw UsageError("quintile window must be >= 1 year");
    if (panel.features.size() != panel.obs.size()) {
        panel.features.assign(panel.obs.size(), FeatureRow{});
    }
    QuintileReport report;

    // real log assets lookup per (bank row range, date)
    auto log_real_assets = [&](const BankObservation& o) -> std::optional<double> {
        if (deflate) {
            if (!o.cpi || *o.cpi <= 0.0) return std::nullopt;
            return std::log(o.assets / *o.cpi);
        }
        return std::log(o.assets);
    };

    struct Candidate {
        double growth;
        size_t row;
    };
    std::map<int, std::vector<Candidate>> by_year;

    for (auto [first, last] : panel.bank_ranges()) {
        std::map<Date, size_t> dated;
        for (size_t r = first; r < last; ++r) dated[panel.obs[r].date] = r;
        for (size_t r = first; r < last; ++r) {
            const auto& o = panel.obs[r];
            Date lag{o.date.year - window, o.date.quarter};
            auto it = dated.find(lag);
            if (it == dated.end()) continue;
            auto now = log_real_assets(o);
            auto before = log_real_assets(panel.obs[it->second]);
            if (!now || !before) continue;
            by_year[o.date.year].push_back({*now - *before, r});
        }
    }

    for (auto& [year, cands] : by_year) {
        std::set<std::string> banks;
        for (const auto& c : cands) banks.insert(panel.obs[c.row].bank_id);
        if (banks.size() < 5) {
            report.skipped_years.push_back(year);
            continue;
        }
        // rank by growth; ties resolved by (bank_id, date) for determinism
        std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
            if (a.growth != b.growth) return a.growth < b.growth;
            const auto& oa = panel.obs[a.row];
            const auto& ob = panel.obs[b.row];
            if (oa.bank_id != ob.bank_id) return oa.bank_id < ob.bank_id;
            return oa.date < ob.date;
        });
        size_t n = cands.size();
        for (size_t rank = 0; rank < n; ++rank) {
            int q = static_cast<int>(rank * 5 / n) + 1;
            panel.features[cands[rank].row].growth_quintile = q;
            ++report.n_assigned;
        }
    }
    return report;
}

LabelReport label_failures(BankPanel& panel, const std::vector<FailureEvent>& events,
                           int horizon) {
    if (horizon < 1) throw UsageError("label horizon must be >= 1");
    if (panel.features.size() != panel.obs.size()) {
        panel.features.assign(panel.obs.size(), FeatureRow{});
    }
    LabelReport report;

    std::unordered_set<std::string> panel_banks;
    for (const auto& o : panel.obs) panel_banks.insert(o.bank_id);

    std::unordered_map<std::string, Date> failure_of;
    for (const auto& ev : events) {
        if (!panel_banks.count(ev.bank_id)) {
            report.warnings.push_back("event for unknown bank_id '" + ev.bank_id + "' ignored");
            continue;
        }
        auto [it, fresh] = failure_of.try_emplace(ev.bank_id, ev.failure_date);
        if (!fresh) {
            report.warnings.push_back("duplicate failure event for bank '" + ev.bank_id +
                                      "'; keeping the earlier date");
            if (ev.failure_date < it->second) it->second = ev.failure_date;
        }
    }

    // drop observations dated on or after the bank's failure
    std::vector<BankObservation> kept_obs;
    std::vector<FeatureRow> kept_feat;
    kept_obs.reserve(panel.obs.size());
    kept_feat.reserve(panel.obs.size());
    for (size_t i = 0; i < panel.obs.size(); ++i) {
        auto it = failure_of.find(panel.obs[i].bank_id);
        if (it != failure_of.end() && panel.obs[i].date.frac() >= it->second.frac()) {
            ++report.n_dropped_post_failure;
            continue;
        }
        kept_obs.push_back(std::move(panel.obs[i]));
        kept_feat.push_back(std::move(panel.features[i]));
    }
    panel.obs = std::move(kept_obs);
    panel.features = std::move(kept_feat);

    for (size_t i = 0; i < panel.obs.size(); ++i) {
        auto it = failure_of.find(panel.obs[i].bank_id);
        std::uint8_t label = 0;
        if (it != failure_of.end()) {
            double t = panel.obs[i].date.frac();
            double f = it->second.frac();
            if (f > t && f <= t + horizon) label = 1;
        }
        panel.features[i].label[horizon] = label;
        report.n_positive += label;
    }
    if (std::find(panel.horizons.begin(), panel.horizons.end(), horizon) ==
        panel.horizons.end()) {
        panel.horizons.push_back(horizon);
        std::sort(panel.horizons.begin(), panel.horizons.end());
    }
    return report;
}

int bank_age_years(const Date& obs_date, const Date& charter_date) {
    return static_cast<int>(std::floor(obs_date.frac() - charter_date.frac() + 1e-9));
}

BankPanel filter_de_novo(const BankPanel& panel, int min_age, DeNovoReport& report) {
    BankPanel out;
    out.horizons = panel.horizons;
    bool has_feat = panel.features.size() == panel.obs.size();
    for (size_t i = 0; i < panel.obs.size(); ++i) {
        const auto& o = panel.obs[i];
        if (!o.charter_date) {
            ++report.n_missing_charter;
        } else if (bank_age_years(o.date, *o.charter_date) < min_age) {
            ++report.n_removed;
            continue;
        }
        out.obs.push_back(o);
        out.features.push_back(has_feat ? panel.features[i] : FeatureRow{});
    }
    return out;
}

OutflowResult deposit_outflow_at_failure(const FailureEvent& event) {
    OutflowResult result;
    if (!event.deposits_last_call || !event.deposits_at_failure) return result;
    if (*event.deposits_last_call <= 0.0) {
        throw DataError("deposit_outflow_at_failure: last-call deposits must be positive for bank " +
                        event.bank_id);
    }
    double growth = *event.deposits_at_failure / *event.deposits_last_call - 1.0;
    result.growth = std::min(growth, 1.0);
    result.run_flag = *result.growth < -0.075;
    return result;
}

OutflowStats deposit_outflow_stats(const std::vector<FailureEvent>& events) {
    OutflowStats stats;
    std::array<long, 6> counts{};
    double sum = 0.0;
    for (const auto& ev : events) {
        auto r = deposit_outflow_at_failure(ev);
        if (!r.growth) continue;
        double g = *r.growth;
        sum += g;
        ++stats.n;
        if (*r.run_flag) ++stats.n_runs;
        if (g < -0.30) ++counts[0];
        else if (g < -0.20) ++counts[1];
        else if (g < -0.075) ++counts[2];
        else if (g < -0.025) ++counts[3];
        else if (g < 0.0) ++counts[4];
        else ++counts[5];
    }
    if (stats.n > 0) {
        stats.average = sum / static_cast<double>(stats.n);
        for (size_t i = 0; i < counts.size(); ++i) {
            stats.bin_share[i] = static_cast<double>(counts[i]) / static_cast<double>(stats.n);
        }
    }
    return stats;
}

}  // namespace bankruin

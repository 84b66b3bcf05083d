#include "bankruin/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "bankruin/csv.hpp"
#include "bankruin/rng.hpp"

namespace bankruin {
namespace {

// stream-id layout: banks use their index, everything else lives far above
constexpr std::uint64_t kMacroStream = 0x4000000000000000ull;
constexpr std::uint64_t kReceivershipBase = 0x8000000000000000ull;

double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

struct MacroSeries {
    std::vector<double> cpi;            // index level per year offset
    std::vector<double> gdp_growth_3y;  // trailing 3-year real growth
    std::vector<double> inflation_3y;   // trailing 3-year inflation
};

MacroSeries draw_macro(const DgpConfig& cfg) {
    CounterRng rng(cfg.seed, kMacroStream);
    const int warmup = 3;
    int n = cfg.n_years + warmup;
    std::vector<double> gdp(n), infl(n);
    double g = 0.02, pi = 0.02;
    for (int t = 0; t < n; ++t) {
        g = 0.02 + 0.5 * (g - 0.02) + 0.015 * rng.next_normal();
        pi = 0.02 + 0.5 * (pi - 0.02) + 0.012 * rng.next_normal();
        gdp[t] = g;
        infl[t] = pi;
    }
    MacroSeries m;
    m.cpi.resize(cfg.n_years);
    m.gdp_growth_3y.resize(cfg.n_years);
    m.inflation_3y.resize(cfg.n_years);
    double level = 10.0;
    for (int t = 0; t < warmup; ++t) level *= 1.0 + infl[t];
    for (int t = 0; t < cfg.n_years; ++t) {
        level *= 1.0 + infl[t + warmup];
        m.cpi[t] = level;
        double g3 = 0.0, p3 = 0.0;
        for (int k = 0; k < 3; ++k) {
            g3 += gdp[t + warmup - k];
            p3 += infl[t + warmup - k];
        }
        m.gdp_growth_3y[t] = g3;
        m.inflation_3y[t] = p3;
    }
    return m;
}

std::string bank_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "B%05d", index + 1);
    return buf;
}

const char* kCauseSamples[] = {
    "Closed by run",
    "Fraudulent management",
    "Injudicious banking",
    "Excessive loans to others, injudicious banking",
    "Crop failures",
    "Incompetent management",
    "Losses",
    "Defalcation of officers",
    "Local financial depression",
    "Cause not stated",
};

}  // namespace

void DgpConfig::validate() const {
    if (n_banks < 1 || n_years < 2) throw UsageError("DGP needs at least 1 bank and 2 years");
    if (insolvency_sd <= 0.0 || noncore_sd <= 0.0) {
        throw UsageError("degenerate DGP: feature standard deviations must be positive");
    }
    if (std::abs(feature_corr) >= 1.0) throw UsageError("feature correlation must lie in (-1,1)");
    if (feature_persistence < 0.0 || feature_persistence >= 1.0) {
        throw UsageError("feature persistence must lie in [0,1)");
    }
    if (recovery_sd < 0.0 || leverage_sd < 0.0) {
        throw UsageError("receivership dispersion must be non-negative");
    }
    if (std::abs(recovery_leverage_corr) > 1.0) {
        throw UsageError("recovery/leverage correlation must lie in [-1,1]");
    }
    if (receivership_offsets_share < 0.0 || receivership_secured_share < 0.0 ||
        receivership_offsets_share + receivership_secured_share >= 1.0) {
        throw UsageError("receivership debt shares must be non-negative and sum below 1");
    }
}

SynthPanel generate_panel(const DgpConfig& cfg, int threads) {
    cfg.validate();
    MacroSeries macro = draw_macro(cfg);

    struct BankOut {
        std::vector<BankObservation> obs;
        std::vector<double> true_prob;
        std::optional<FailureEvent> event;
    };
    std::vector<BankOut> outs(static_cast<size_t>(cfg.n_banks));

    auto run_bank = [&](int b) {
        CounterRng rng(cfg.seed, static_cast<std::uint64_t>(b));
        BankOut& out = outs[static_cast<size_t>(b)];

        int age0 = 3 + static_cast<int>(rng.next_double() * 28.0);
        Date charter{cfg.start_year - age0, 0};
        double log_assets = cfg.log_assets_mean + cfg.log_assets_sd * rng.next_normal();
        double insolvency = cfg.insolvency_mean + cfg.insolvency_sd * rng.next_normal();
        double noncore = cfg.noncore_mean + cfg.noncore_sd * rng.next_normal();

        const double phi = cfg.feature_persistence;
        const double innov_scale = std::sqrt(1.0 - phi * phi);
        const double rho = cfg.feature_corr;

        for (int t = 0; t < cfg.n_years; ++t) {
            int year = cfg.start_year + t;
            if (t > 0) {
                double z1 = rng.next_normal();
                double z2 = rng.next_normal();
                double e1 = z1;
                double e2 = rho * z1 + std::sqrt(1.0 - rho * rho) * z2;
                insolvency = cfg.insolvency_mean + phi * (insolvency - cfg.insolvency_mean) +
                             innov_scale * cfg.insolvency_sd * e1;
                noncore = cfg.noncore_mean + phi * (noncore - cfg.noncore_mean) +
                          innov_scale * cfg.noncore_sd * e2;
                log_assets += cfg.asset_growth_sd * rng.next_normal();
            }
            double ins = clamp(insolvency, -2.0, 2.0);
            double non = clamp(noncore, 0.001, 0.6);
            double assets = std::exp(log_assets);

            BankObservation o;
            o.bank_id = bank_name(b);
            o.date = Date{year, 0};
            o.assets = assets;
            o.charter_date = charter;
            o.cpi = macro.cpi[static_cast<size_t>(t)];
            o.gdp_growth_3y = macro.gdp_growth_3y[static_cast<size_t>(t)];
            o.inflation_3y = macro.inflation_3y[static_cast<size_t>(t)];
            o.loans = 0.6 * assets;
            double equity = cfg.equity_share * assets;
            o.equity = equity;
            if (cfg.era == Era::Historical) {
                o.surplus_profit = ins * equity;
                double notes = cfg.notes_share * assets;
                o.national_bank_notes = notes;
                o.deposits = assets * (1.0 - non) - equity - notes;
            } else {
                o.net_income = ins * assets;
                o.time_deposits = 0.7 * non * assets;
                o.wholesale_funding = 0.3 * non * assets;
                o.deposits = 0.8 * assets;
            }

            double p = sigmoid(cfg.beta0 + cfg.beta_insolvency * ins + cfg.beta_noncore * non +
                               cfg.beta_interaction * ins * non +
                               cfg.beta_gdp * macro.gdp_growth_3y[static_cast<size_t>(t)] +
                               cfg.beta_inflation * macro.inflation_3y[static_cast<size_t>(t)]);
            out.obs.push_back(std::move(o));
            out.true_prob.push_back(p);

            double u = rng.next_double();
            if (u < p) {
                FailureEvent ev;
                ev.bank_id = bank_name(b);
                ev.failure_date = Date{year + 1, 0};
                double deposits = *out.obs.back().deposits;
                ev.deposits_last_call = deposits;
                double p_run = sigmoid(cfg.run_intercept + cfg.run_coef_insolvency * ins);
                bool run = rng.next_double() < p_run;
                double growth = run ? cfg.run_outflow_mean + cfg.run_outflow_sd * rng.next_normal()
                                    : cfg.no_run_outflow_mean +
                                          cfg.no_run_outflow_sd * rng.next_normal();
                growth = clamp(growth, -0.95, 1.5);
                ev.deposits_at_failure = deposits * (1.0 + growth);
                ev.assets_at_failure = assets * (1.0 + 0.5 * growth);
                out.event = std::move(ev);
                break;
            }
        }
    };

    if (threads <= 1) {
        for (int b = 0; b < cfg.n_banks; ++b) run_bank(b);
    } else {
        std::atomic<int> next{0};
        auto worker = [&] {
            while (true) {
                int b = next.fetch_add(1);
                if (b >= cfg.n_banks) break;
                run_bank(b);
            }
        };
        std::vector<std::thread> pool;
        int n_threads = std::min(threads, cfg.n_banks);
        pool.reserve(static_cast<size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    SynthPanel synth;
    for (auto& out : outs) {
        for (size_t i = 0; i < out.obs.size(); ++i) {
            synth.panel.obs.push_back(std::move(out.obs[i]));
            synth.true_prob.push_back(out.true_prob[i]);
        }
        if (out.event) synth.events.push_back(std::move(*out.event));
    }
    synth.panel.features.assign(synth.panel.obs.size(), FeatureRow{});
    return synth;
}

std::vector<ReceivershipRecord> generate_receiverships(const DgpConfig& cfg) {
    cfg.validate();
    std::vector<ReceivershipRecord> records;
    records.reserve(static_cast<size_t>(cfg.n_receiverships));
    const double rho = cfg.recovery_leverage_corr;
    for (int i = 0; i < cfg.n_receiverships; ++i) {
        CounterRng rng(cfg.seed, kReceivershipBase + static_cast<std::uint64_t>(i));
        double z1 = rng.next_normal();
        double z2 = rng.next_normal();
        double recovery = clamp(cfg.recovery_mean + cfg.recovery_sd * z1, 0.02, 1.2);
        double lev = clamp(cfg.leverage_mean +
                               cfg.leverage_sd * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2),
                           0.05, 1.3);

        ReceivershipRecord r;
        r.bank_id = "R" + std::to_string(i + 1);
        int appointed = cfg.start_year + static_cast<int>(rng.next_double() * cfg.n_years);
        r.receiver_appointed = Date{appointed, 0};
        r.receivership_closed = Date{appointed + 1 + static_cast<int>(rng.next_double() * 9.0), 0};

        double assets = std::exp(cfg.log_assets_mean + cfg.log_assets_sd * rng.next_normal());
        r.assets_at_suspension = assets;
        r.additional_assets_received = 0.05 * assets * rng.next_double();
        double total = r.total_assets();
        r.collected_from_assets = recovery * total;
        // double-liability assessments recover more when asset collections
        // fall short
        r.collected_from_shareholders =
            std::max(0.0, 1.0 - recovery) * 0.15 * assets * rng.next_double();

        double debt = lev * total;
        r.offsets = cfg.receivership_offsets_share * debt;
        r.secured_preferred_paid = cfg.receivership_secured_share * debt;
        r.claims_proved = debt - r.offsets - r.secured_preferred_paid;
        r.deposits_at_suspension = r.claims_proved * (0.9 + 0.2 * rng.next_double());

        // quality assessments tilt with the recovery draw: stronger
        // recoveries go with more assets judged good
        double tilt = 2.0 * (recovery - 0.5);
        double w_good = rng.next_double() + std::max(0.0, tilt);
        double w_doubt = rng.next_double() + 0.25;
        double w_worth = rng.next_double() + std::max(0.0, -tilt);
        double w_sum = w_good + w_doubt + w_worth;
        r.estimated_good = assets * 0.98 * w_good / w_sum;
        r.estimated_doubtful = assets * 0.98 * w_doubt / w_sum;
        r.estimated_worthless = assets * 0.98 * w_worth / w_sum;

        double available = r.collected_from_assets - r.secured_preferred_paid - r.offsets;
        r.dividends_paid_pct = clamp(available / r.claims_proved, 0.0, 1.2);

        r.run_flag = rng.next_double() < cfg.receivership_run_prob;
        size_t n_causes = sizeof(kCauseSamples) / sizeof(kCauseSamples[0]);
        r.cause = kCauseSamples[static_cast<size_t>(rng.next_double() * n_causes)];
        r.check_invariants();
        records.push_back(std::move(r));
    }
    return records;
}

std::string panel_to_csv(const BankPanel& panel, char delim) {
    std::string out;
    const auto& fields = PanelSchema::known_fields();
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(delim);
        out += fields[i];
    }
    out += '\n';
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string{};
    };
    for (const auto& o : panel.obs) {
        std::vector<std::string> row = {
            o.bank_id,
            o.date.str(),
            format_double(o.assets),
            o.charter_date ? o.charter_date->str() : "",
            opt(o.deposits),
            opt(o.equity),
            opt(o.surplus_profit),
            opt(o.national_bank_notes),
            opt(o.time_deposits),
            opt(o.wholesale_funding),
            opt(o.net_income),
            opt(o.loans),
            opt(o.cpi),
            opt(o.oreo),
            opt(o.demand_deposits),
            opt(o.brokered_deposits),
            opt(o.gdp_growth_3y),
            opt(o.inflation_3y),
        };
        out += csv_join(row, delim);
        out += '\n';
    }
    return out;
}

std::string events_to_csv(const std::vector<FailureEvent>& events, char delim) {
    std::string out = "bank_id";
    for (const char* col :
         {"failure_date", "deposits_last_call", "deposits_at_failure", "assets_at_failure"}) {
        out += delim;
        out += col;
    }
    out += '\n';
    auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string{};
    };
    for (const auto& ev : events) {
        std::vector<std::string> row = {ev.bank_id, ev.failure_date.str(),
                                        opt(ev.deposits_last_call), opt(ev.deposits_at_failure),
                                        opt(ev.assets_at_failure)};
        out += csv_join(row, delim);
        out += '\n';
    }
    return out;
}

std::string true_probs_to_csv(const SynthPanel& synth, char delim) {
    std::string out = "bank_id";
    for (const char* col : {"date", "true_prob"}) {
        out += delim;
        out += col;
    }
    out += '\n';
    for (size_t i = 0; i < synth.panel.obs.size(); ++i) {
        std::vector<std::string> row = {synth.panel.obs[i].bank_id, synth.panel.obs[i].date.str(),
                                        format_double(synth.true_prob[i])};
        out += csv_join(row, delim);
        out += '\n';
    }
    return out;
}

}  // namespace bankruin

#include "bankruin/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace bankruin {
namespace {

constexpr double kRankTol = 1e-10;

// (X'X)^{-1} from the pivoted QR factor: X P = Q R  =>  (X'X)^{-1} = P R^{-1} R^{-T} P'.
Eigen::MatrixXd xtx_inverse(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, long k) {
    Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    Eigen::MatrixXd inner = rinv * rinv.transpose();
    const auto& perm = qr.colsPermutation();
    return perm * inner * perm.transpose();
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (size_t i = 0; i < names.size(); ++i) {
        if (i) out += ", ";
        out += names[i];
    }
    return out;
}

// Identifies which retained columns a dropped column is a combination of, so
// rank errors can name every participant.
std::vector<std::string> collinear_partners(const DesignMatrix& d,
                                            const std::vector<long>& kept, long dropped) {
    Eigen::MatrixXd sub(d.X.rows(), static_cast<long>(kept.size()));
    for (size_t j = 0; j < kept.size(); ++j) sub.col(static_cast<long>(j)) = d.X.col(kept[j]);
    Eigen::VectorXd b = sub.colPivHouseholderQr().solve(d.X.col(dropped));
    std::vector<std::string> out;
    double scale = std::max(1.0, d.X.col(dropped).cwiseAbs().maxCoeff());
    for (size_t j = 0; j < kept.size(); ++j) {
        if (std::abs(b[static_cast<long>(j)]) * std::max(1.0, sub.col(static_cast<long>(j)).cwiseAbs().maxCoeff()) >
            1e-6 * scale) {
            out.push_back(d.names[static_cast<size_t>(kept[j])]);
        }
    }
    return out;
}

[[noreturn]] void throw_rank_error(const DesignMatrix& d,
                                   const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr) {
    long rank = qr.rank();
    long k = d.n_cols();
    const auto& perm = qr.colsPermutation().indices();
    std::vector<long> kept, dropped;
    for (long j = 0; j < k; ++j) {
        (j < rank ? kept : dropped).push_back(perm[j]);
    }
    std::ostringstream msg;
    msg << "rank-deficient design (rank " << rank << " of " << k << "):";
    for (long dcol : dropped) {
        auto partners = collinear_partners(d, kept, dcol);
        msg << " column '" << d.names[static_cast<size_t>(dcol)] << "' is collinear with {"
            << join_names(partners) << "}";
    }
    throw EstimationError(msg.str());
}

bool has_constant_column(const DesignMatrix& d) {
    for (long j = 0; j < d.n_cols(); ++j) {
        if ((d.X.col(j).array() == 1.0).all()) return true;
    }
    return false;
}

// Stable log(1 + exp(eta)).
double log1pexp(double eta) {
    if (eta > 35.0) return eta + std::log1p(std::exp(-eta));
    return std::log1p(std::exp(eta));
}

// Bartlett-kernel HAC long-run covariance of a sequence of score vectors:
// Omega_0 + sum_j w_j (Omega_j + Omega_j') with w_j = 1 - j/(lags+1).
Eigen::MatrixXd bartlett_long_run(const std::vector<Eigen::VectorXd>& h, int lags) {
    long k = h.empty() ? 0 : h.front().size();
    long t_count = static_cast<long>(h.size());
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (long t = 0; t < t_count; ++t) meat += h[t] * h[t].transpose();
    for (int j = 1; j <= lags && j < t_count; ++j) {
        double w = 1.0 - static_cast<double>(j) / (lags + 1.0);
        Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(k, k);
        for (long t = j; t < t_count; ++t) gamma += h[t] * h[t - j].transpose();
        meat += w * (gamma + gamma.transpose());
    }
    return meat;
}

Eigen::VectorXd sandwich_se(const DesignMatrix& d, const Eigen::MatrixXd& meat) {
    auto qr = d.X.colPivHouseholderQr();
    qr.setThreshold(kRankTol);
    if (qr.rank() < d.n_cols()) throw_rank_error(d, qr);
    Eigen::MatrixXd bread = xtx_inverse(qr, d.n_cols());
    Eigen::MatrixXd v = bread * meat * bread;
    return v.diagonal().cwiseMax(0.0).cwiseSqrt();
}

Eigen::VectorXd residuals_of(const FitResult& fit, const DesignMatrix& d) {
    if (fit.tag == EstimatorTag::Logit) {
        throw UsageError("HAC standard errors expect an OLS or FE-OLS fit");
    }
    if (fit.coef.size() != d.n_cols() || fit.n_obs != d.n_rows()) {
        throw UsageError("fit and design matrix do not match");
    }
    return d.y - d.X * fit.coef;
}

}  // namespace

void DesignMatrix::validate() const {
    if (X.rows() != y.size()) throw UsageError("design matrix rows and response length differ");
    if (static_cast<long>(names.size()) != X.cols()) {
        throw UsageError("design matrix needs one name per column");
    }
    std::set<std::string> seen(names.begin(), names.end());
    if (seen.size() != names.size()) throw UsageError("duplicate column names in design matrix");
    if (!X.allFinite() || !y.allFinite()) {
        throw DataError("design matrix contains non-finite cells; filter complete cases upstream");
    }
    if (X.rows() < X.cols()) throw DataError("fewer rows than regressors");
    if (!group.empty() && static_cast<long>(group.size()) != X.rows()) {
        throw UsageError("group labels must align with rows");
    }
    if (!date.empty() && static_cast<long>(date.size()) != X.rows()) {
        throw UsageError("dates must align with rows");
    }
}

const char* estimator_tag_name(EstimatorTag tag) {
    switch (tag) {
        case EstimatorTag::Ols: return "OLS";
        case EstimatorTag::FeOls: return "FE-OLS";
        case EstimatorTag::Logit: return "Logit";
    }
    return "?";
}

double FitResult::coef_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return coef[static_cast<long>(i)];
    }
    throw UsageError("no coefficient named '" + name + "'");
}

double FitResult::se_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return se[static_cast<long>(i)];
    }
    throw UsageError("no coefficient named '" + name + "'");
}

nlohmann::json FitResult::to_json() const {
    nlohmann::json coefficients = nlohmann::json::object();
    nlohmann::json std_errors = nlohmann::json::object();
    for (size_t i = 0; i < names.size(); ++i) {
        coefficients[names[i]] = coef[static_cast<long>(i)];
        std_errors[names[i]] = se[static_cast<long>(i)];
    }
    nlohmann::json j;
    j["estimator"] = estimator_tag_name(tag);
    j["coefficients"] = coefficients;
    j["se"] = std_errors;
    j["n_obs"] = n_obs;
    j["stat"] = stat;
    if (tag == EstimatorTag::Logit) j["iterations"] = iterations;
    return j;
}

FitResult ols_fit(const DesignMatrix& d) {
    d.validate();
    auto qr = d.X.colPivHouseholderQr();
    qr.setThreshold(kRankTol);
    if (qr.rank() < d.n_cols()) throw_rank_error(d, qr);

    FitResult fit;
    fit.names = d.names;
    fit.tag = EstimatorTag::Ols;
    fit.n_obs = d.n_rows();
    fit.coef = qr.solve(d.y);

    Eigen::VectorXd e = d.y - d.X * fit.coef;
    double ssr = e.squaredNorm();
    double sst;
    if (has_constant_column(d)) {
        sst = (d.y.array() - d.y.mean()).matrix().squaredNorm();
    } else {
        sst = d.y.squaredNorm();
    }
    fit.stat = sst > 0.0 ? 1.0 - ssr / sst : 0.0;

    long dof = d.n_rows() - d.n_cols();
    double sigma2 = dof > 0 ? ssr / static_cast<double>(dof) : 0.0;
    fit.vcov = sigma2 * xtx_inverse(qr, d.n_cols());
    fit.se = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

DesignMatrix within_transform(const DesignMatrix& d) {
    d.validate();
    if (d.group.size() != static_cast<size_t>(d.n_rows())) {
        throw UsageError("within_transform requires a group label for every row");
    }
    struct Accum {
        Eigen::VectorXd x_sum;
        double y_sum = 0.0;
        long count = 0;
    };
    std::unordered_map<std::string, Accum> acc;
    acc.reserve(d.group.size());
    for (long i = 0; i < d.n_rows(); ++i) {
        auto& a = acc[d.group[static_cast<size_t>(i)]];
        if (a.count == 0) a.x_sum = Eigen::VectorXd::Zero(d.n_cols());
        a.x_sum += d.X.row(i).transpose();
        a.y_sum += d.y[i];
        ++a.count;
    }
    DesignMatrix out = d;
    for (long i = 0; i < d.n_rows(); ++i) {
        const auto& a = acc[d.group[static_cast<size_t>(i)]];
        out.X.row(i) -= (a.x_sum / static_cast<double>(a.count)).transpose();
        out.y[i] -= a.y_sum / static_cast<double>(a.count);
    }
    return out;
}

FitResult fe_ols_fit(const DesignMatrix& d) {
    FitResult fit = ols_fit(within_transform(d));
    fit.tag = EstimatorTag::FeOls;
    return fit;
}

FitResult logit_fit(const DesignMatrix& d, int max_iterations) {
    d.validate();
    long n = d.n_rows(), k = d.n_cols();
    bool any_pos = false, any_neg = false;
    for (long i = 0; i < n; ++i) {
        if (d.y[i] == 0.0) any_neg = true;
        else if (d.y[i] == 1.0) any_pos = true;
        else throw DataError("logit response must be 0/1");
    }
    if (!any_pos || !any_neg) {
        throw EstimationError("degenerate labels: logit requires both classes present");
    }

    auto log_lik = [&](const Eigen::VectorXd& eta) {
        double ll = 0.0;
        for (long i = 0; i < n; ++i) ll += d.y[i] * eta[i] - log1pexp(eta[i]);
        return ll;
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    double ll = log_lik(eta);
    double prev_norm = 0.0;
    int saturated_growing = 0;
    Eigen::MatrixXd hessian(k, k);

    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        Eigen::VectorXd p(n), w(n);
        for (long i = 0; i < n; ++i) {
            p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
            w[i] = p[i] * (1.0 - p[i]);
        }
        Eigen::VectorXd score = d.X.transpose() * (d.y - p);
        if (score.cwiseAbs().maxCoeff() < 1e-8) break;

        hessian = d.X.transpose() * w.asDiagonal() * d.X;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw EstimationError("logit information matrix is singular");
        }
        Eigen::VectorXd step = ldlt.solve(score);

        double lambda = 1.0;
        Eigen::VectorXd eta_try;
        double ll_try;
        while (true) {
            eta_try = eta + lambda * (d.X * step);
            ll_try = log_lik(eta_try);
            if (ll_try >= ll || lambda < 1e-10) break;
            lambda *= 0.5;
        }
        beta += lambda * step;
        eta = std::move(eta_try);
        ll = ll_try;

        double beta_norm = beta.norm();
        bool saturated = p.minCoeff() < 1e-10 || p.maxCoeff() > 1.0 - 1e-10;
        if (saturated && beta_norm > prev_norm) ++saturated_growing;
        else saturated_growing = 0;
        if (saturated_growing >= 3) {
            throw SeparationError(
                "complete or quasi-complete separation: fitted probabilities at 0/1 with "
                "diverging coefficients");
        }
        prev_norm = beta_norm;

        if ((lambda * step).cwiseAbs().maxCoeff() < 1e-10) break;
    }
    if (iter == max_iterations) {
        std::ostringstream msg;
        msg << "logit failed to converge after " << max_iterations
            << " iterations; last log-likelihood " << ll << ", |beta| " << beta.norm();
        throw EstimationError(msg.str());
    }

    Eigen::VectorXd p(n), w(n);
    for (long i = 0; i < n; ++i) {
        p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
        w[i] = p[i] * (1.0 - p[i]);
    }
    hessian = d.X.transpose() * w.asDiagonal() * d.X;

    FitResult fit;
    fit.names = d.names;
    fit.tag = EstimatorTag::Logit;
    fit.n_obs = n;
    fit.coef = beta;
    fit.stat = ll;
    fit.iterations = iter + 1;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    fit.vcov = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
    // enforce exact symmetry lost to the solve
    fit.vcov = ((fit.vcov + fit.vcov.transpose()) / 2.0).eval();
    fit.se = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

Eigen::VectorXd hc0_se(const FitResult& fit, const DesignMatrix& d) {
    Eigen::VectorXd e = residuals_of(fit, d);
    long k = d.n_cols();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (long i = 0; i < d.n_rows(); ++i) {
        Eigen::VectorXd xi = d.X.row(i).transpose();
        meat += (e[i] * e[i]) * (xi * xi.transpose());
    }
    return sandwich_se(d, meat);
}

Eigen::VectorXd driscoll_kraay_se(const FitResult& fit, const DesignMatrix& d, int bandwidth) {
    if (bandwidth < 0) throw UsageError("bandwidth must be non-negative");
    if (d.date.size() != static_cast<size_t>(d.n_rows())) {
        throw UsageError("driscoll_kraay_se requires a date for every row");
    }
    Eigen::VectorXd e = residuals_of(fit, d);

    std::map<double, Eigen::VectorXd> by_date;
    for (long i = 0; i < d.n_rows(); ++i) {
        auto [it, fresh] = by_date.try_emplace(d.date[static_cast<size_t>(i)],
                                               Eigen::VectorXd::Zero(d.n_cols()));
        it->second += e[i] * d.X.row(i).transpose();
    }
    if (static_cast<long>(by_date.size()) < bandwidth + 2) {
        throw DataError("driscoll_kraay_se needs at least bandwidth+2 distinct dates (have " +
                        std::to_string(by_date.size()) + ")");
    }
    std::vector<Eigen::VectorXd> h;
    h.reserve(by_date.size());
    for (auto& [date, sum] : by_date) h.push_back(std::move(sum));
    return sandwich_se(d, bartlett_long_run(h, bandwidth));
}

Eigen::VectorXd newey_west_se(const FitResult& fit, const DesignMatrix& d, double S) {
    if (S < 0) throw UsageError("truncation parameter S must be non-negative");
    if (d.n_rows() < 3) throw DataError("newey_west_se needs at least 3 observations");
    Eigen::VectorXd e = residuals_of(fit, d);
    std::vector<Eigen::VectorXd> g;
    g.reserve(static_cast<size_t>(d.n_rows()));
    for (long t = 0; t < d.n_rows(); ++t) g.push_back(e[t] * d.X.row(t).transpose());
    return sandwich_se(d, bartlett_long_run(g, newey_west_lags(S)));
}

int newey_west_lags(double S) { return static_cast<int>(std::floor(S)); }

double newey_west_default_S(long T) { return 1.3 * std::sqrt(static_cast<double>(T)); }

}  // namespace bankruin

#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "bankruin/common.hpp"

namespace bankruin {

// Regression input. Rows are complete cases (no NaNs); `group` carries the
// panel unit for within transforms and `date` the calendar position (year
// fraction) for HAC estimators. Both are optional unless the operation
// needs them.
struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> names;
    std::vector<std::string> group;
    std::vector<double> date;

    long n_rows() const { return X.rows(); }
    long n_cols() const { return X.cols(); }
    void validate() const;
};

enum class EstimatorTag { Ols, FeOls, Logit };

const char* estimator_tag_name(EstimatorTag tag);

struct FitResult {
    std::vector<std::string> names;
    Eigen::VectorXd coef;
    Eigen::MatrixXd vcov;
    Eigen::VectorXd se;
    long n_obs = 0;
    // R-squared for (FE-)OLS, maximized log-likelihood for logit.
    double stat = 0.0;
    EstimatorTag tag = EstimatorTag::Ols;
    int iterations = 0;

    double coef_of(const std::string& name) const;
    double se_of(const std::string& name) const;
    // {estimator, coefficients: {name: value}, se: {name: value}, n_obs, stat}
    nlohmann::json to_json() const;
};

// Least squares through a rank-revealing pivoted QR. Rank decisions use a
// 1e-10 relative tolerance; a rank-deficient design raises EstimationError
// naming the collinear columns.
FitResult ols_fit(const DesignMatrix& d);

// Demeans every regressor and the response within `group`. Singleton groups
// become all-zero rows and are retained.
DesignMatrix within_transform(const DesignMatrix& d);

// within_transform followed by ols_fit, tagged FE-OLS. R-squared is the
// within R-squared.
FitResult fe_ols_fit(const DesignMatrix& d);

// Newton-Raphson logit MLE from a zero start with step-halving. Converges
// when max|score| < 1e-8 or the step falls below 1e-10; detects complete or
// quasi-complete separation and raises SeparationError.
FitResult logit_fit(const DesignMatrix& d, int max_iterations = 100);

// Heteroskedasticity-robust (HC0) standard errors, no small-sample scaling.
Eigen::VectorXd hc0_se(const FitResult& fit, const DesignMatrix& d);

// Driscoll-Kraay standard errors: per-date sums of score contributions run
// through a Bartlett kernel with `bandwidth` lags, sandwiched with
// (X'X)^{-1}. Requires at least bandwidth+2 distinct dates.
Eigen::VectorXd driscoll_kraay_se(const FitResult& fit, const DesignMatrix& d, int bandwidth = 2);

// Newey-West standard errors for a time-ordered design with truncation
// parameter S; Bartlett weights w_j = 1 - j/(floor(S)+1). S may be
// fractional (the default rule 1.3*sqrt(T) usually is).
Eigen::VectorXd newey_west_se(const FitResult& fit, const DesignMatrix& d, double S);

int newey_west_lags(double S);
double newey_west_default_S(long T);

}  // namespace bankruin

#include <doctest.h>

#include <cmath>
#include <vector>

#include "bankruin/econometrics.hpp"
#include "bankruin/rng.hpp"

using namespace bankruin;

namespace {

DesignMatrix simple_design(const std::vector<std::vector<double>>& cols,
                           const std::vector<double>& y,
                           const std::vector<std::string>& names) {
    DesignMatrix d;
    d.names = names;
    d.X.resize(static_cast<long>(y.size()), static_cast<long>(cols.size()));
    d.y.resize(static_cast<long>(y.size()));
    for (size_t j = 0; j < cols.size(); ++j) {
        for (size_t i = 0; i < y.size(); ++i) d.X(static_cast<long>(i), static_cast<long>(j)) = cols[j][i];
    }
    for (size_t i = 0; i < y.size(); ++i) d.y[static_cast<long>(i)] = y[i];
    return d;
}

double max_rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double worst = 0.0;
    for (long i = 0; i < a.size(); ++i) {
        double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-300});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

// brute-force refinement maximizer of the 2-parameter logit log-likelihood;
// independent of the Newton path
std::pair<double, double> grid_search_logit(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    auto log_lik = [&](double a, double b) {
        double ll = 0.0;
        for (long i = 0; i < x.size(); ++i) {
            double eta = a + b * x[i];
            double log1pe = eta > 35.0 ? eta : std::log1p(std::exp(eta));
            ll += y[i] * eta - log1pe;
        }
        return ll;
    };
    double a_lo = -8.0, a_hi = 8.0, b_lo = -8.0, b_hi = 8.0;
    double best_a = 0.0, best_b = 0.0;
    const int n_grid = 41;
    for (int round = 0; round < 7; ++round) {
        double best_ll = -1e300;
        for (int i = 0; i < n_grid; ++i) {
            double a = a_lo + (a_hi - a_lo) * i / (n_grid - 1);
            for (int j = 0; j < n_grid; ++j) {
                double b = b_lo + (b_hi - b_lo) * j / (n_grid - 1);
                double ll = log_lik(a, b);
                if (ll > best_ll) {
                    best_ll = ll;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        double a_step = (a_hi - a_lo) / (n_grid - 1);
        double b_step = (b_hi - b_lo) / (n_grid - 1);
        a_lo = best_a - 2 * a_step;
        a_hi = best_a + 2 * a_step;
        b_lo = best_b - 2 * b_step;
        b_hi = best_b + 2 * b_step;
    }
    return {best_a, best_b};
}

}  // namespace

TEST_CASE("ols_fit: exact interpolation of two points") {
    auto d = simple_design({{1, 1}, {0, 1}}, {1, 3}, {"const", "x"});
    auto fit = ols_fit(d);
    CHECK(fit.coef_of("const") == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fit.coef_of("x") == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("ols_fit: constant response on intercept only has R^2 = 0") {
    auto d = simple_design({{1, 1, 1, 1}}, {5, 5, 5, 5}, {"const"});
    auto fit = ols_fit(d);
    CHECK(fit.coef_of("const") == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(fit.stat == 0.0);
}

TEST_CASE("ols_fit: duplicated regressor raises a rank error naming both columns") {
    auto d = simple_design({{1, 1, 1}, {2, 3, 4}, {2, 3, 4}}, {1, 2, 3}, {"const", "a", "b"});
    CHECK_THROWS_AS(ols_fit(d), EstimationError);
    try {
        ols_fit(d);
    } catch (const EstimationError& e) {
        std::string msg = e.what();
        CHECK(msg.find("a") != std::string::npos);
        CHECK(msg.find("b") != std::string::npos);
    }
}

TEST_CASE("ols_fit: residuals orthogonal to regressors") {
    CounterRng rng(99, 0);
    const long n = 200;
    DesignMatrix d;
    d.names = {"const", "x1", "x2"};
    d.X.resize(n, 3);
    d.y.resize(n);
    for (long i = 0; i < n; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = rng.next_normal();
        d.X(i, 2) = rng.next_normal() * 3.0 + 1.0;
        d.y[i] = 2.0 + 0.5 * d.X(i, 1) - 1.5 * d.X(i, 2) + rng.next_normal();
    }
    auto fit = ols_fit(d);
    Eigen::VectorXd moment = d.X.transpose() * (d.y - d.X * fit.coef);
    double scale = d.X.cwiseAbs().maxCoeff() * d.y.cwiseAbs().maxCoeff();
    CHECK(moment.cwiseAbs().maxCoeff() < 1e-8 * scale);
    // vcov symmetric PSD
    CHECK((fit.vcov - fit.vcov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.vcov);
    CHECK(eig.eigenvalues().minCoeff() > -1e-8 * eig.eigenvalues().cwiseAbs().maxCoeff());
}

TEST_CASE("within_transform: demeaning by group") {
    SUBCASE("pair becomes +/-1") {
        auto d = simple_design({{1, 1}}, {2, 4}, {"x"});
        d.group = {"g", "g"};
        auto w = within_transform(d);
        CHECK(w.y[0] == doctest::Approx(-1.0).epsilon(1e-14));
        CHECK(w.y[1] == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("singleton group becomes zero and is retained") {
        auto d = simple_design({{1}}, {7}, {"x"});
        d.group = {"solo"};
        auto w = within_transform(d);
        CHECK(w.n_rows() == 1);
        CHECK(w.y[0] == 0.0);
        CHECK(w.X(0, 0) == 0.0);
    }
    SUBCASE("two groups demeaned independently") {
        auto d = simple_design({{1, 1, 1, 1}}, {1, 3, 10, 14}, {"x"});
        d.group = {"a", "a", "b", "b"};
        auto w = within_transform(d);
        CHECK(w.y[0] == doctest::Approx(-1.0));
        CHECK(w.y[1] == doctest::Approx(1.0));
        CHECK(w.y[2] == doctest::Approx(-2.0));
        CHECK(w.y[3] == doctest::Approx(2.0));
    }
}

TEST_CASE("fe_ols_fit equals OLS with explicit group dummies") {
    CounterRng rng(123, 0);
    const int n_groups = 12;
    const int per_group = 5;
    const long n = n_groups * per_group;

    DesignMatrix fe;
    fe.names = {"x"};
    fe.X.resize(n, 1);
    fe.y.resize(n);
    DesignMatrix dummies;
    dummies.names = {"x"};
    for (int g = 0; g < n_groups; ++g) dummies.names.push_back("g" + std::to_string(g));
    dummies.X = Eigen::MatrixXd::Zero(n, 1 + n_groups);
    dummies.y.resize(n);

    long row = 0;
    for (int g = 0; g < n_groups; ++g) {
        double effect = 2.0 * rng.next_normal();
        for (int k = 0; k < per_group; ++k, ++row) {
            double x = rng.next_normal();
            double y = effect + 0.7 * x + 0.3 * rng.next_normal();
            fe.X(row, 0) = x;
            fe.y[row] = y;
            fe.group.push_back("g" + std::to_string(g));
            dummies.X(row, 0) = x;
            dummies.X(row, 1 + g) = 1.0;
            dummies.y[row] = y;
        }
    }
    auto fe_fit = fe_ols_fit(fe);
    auto dummy_fit = ols_fit(dummies);
    CHECK(fe_fit.tag == EstimatorTag::FeOls);
    CHECK(std::abs(fe_fit.coef_of("x") - dummy_fit.coef_of("x")) < 1e-8);
}

TEST_CASE("logit_fit: base-rate-only fit returns the log odds") {
    const long n = 40;
    DesignMatrix d;
    d.names = {"const"};
    d.X = Eigen::MatrixXd::Ones(n, 1);
    d.y = Eigen::VectorXd::Zero(n);
    for (long i = 0; i < 10; ++i) d.y[i] = 1.0;  // mean 0.25
    auto fit = logit_fit(d);
    CHECK(std::abs(fit.coef_of("const") - std::log(0.25 / 0.75)) < 1e-8);
    // score at the optimum is tiny
    Eigen::VectorXd p(n);
    for (long i = 0; i < n; ++i) p[i] = 1.0 / (1.0 + std::exp(-fit.coef[0]));
    CHECK((d.X.transpose() * (d.y - p)).cwiseAbs().maxCoeff() < 1e-6);
    // observed-information SE: sqrt(1 / (n p (1-p)))
    CHECK(fit.se_of("const") ==
          doctest::Approx(std::sqrt(1.0 / (40.0 * 0.25 * 0.75))).epsilon(1e-6));
}

TEST_CASE("logit_fit: perfectly separated data raises SeparationError") {
    const long n = 30;
    DesignMatrix d;
    d.names = {"const", "x"};
    d.X.resize(n, 2);
    d.y.resize(n);
    for (long i = 0; i < n; ++i) {
        double x = (i % 2 == 0) ? -1.0 - 0.05 * static_cast<double>(i) : 1.0 + 0.05 * static_cast<double>(i);
        d.X(i, 0) = 1.0;
        d.X(i, 1) = x;
        d.y[i] = x > 0.0 ? 1.0 : 0.0;
    }
    CHECK_THROWS_AS(logit_fit(d), SeparationError);
}

TEST_CASE("logit_fit: single-class labels are rejected") {
    DesignMatrix d;
    d.names = {"const"};
    d.X = Eigen::MatrixXd::Ones(12, 1);
    d.y = Eigen::VectorXd::Zero(12);
    CHECK_THROWS_AS(logit_fit(d), EstimationError);
}

TEST_CASE("logit_fit matches dense grid search on seeded instances") {
    const long n = 40;
    int tested = 0;
    for (int instance = 0; instance < 20; ++instance) {
        CounterRng rng(500 + instance, 7);
        DesignMatrix d;
        d.names = {"const", "x"};
        d.X.resize(n, 2);
        d.y.resize(n);
        double a = -0.8 + 1.6 * rng.next_double();
        double b = -1.2 + 2.4 * rng.next_double();
        bool pos = false, neg = false;
        for (long i = 0; i < n; ++i) {
            double x = rng.next_normal();
            double p = 1.0 / (1.0 + std::exp(-(a + b * x)));
            d.X(i, 0) = 1.0;
            d.X(i, 1) = x;
            d.y[i] = rng.next_double() < p ? 1.0 : 0.0;
            (d.y[i] > 0.5 ? pos : neg) = true;
        }
        REQUIRE((pos && neg));
        FitResult fit = logit_fit(d);  // chosen seeds stay clear of separation
        auto [ga, gb] = grid_search_logit(d.X.col(1), d.y);
        CHECK(std::abs(fit.coef_of("const") - ga) < 1e-4);
        CHECK(std::abs(fit.coef_of("x") - gb) < 1e-4);
        ++tested;
    }
    CHECK(tested == 20);
}

TEST_CASE("driscoll_kraay_se with bandwidth 0 and singleton dates equals HC0") {
    CounterRng rng(321, 0);
    const long n = 60;
    DesignMatrix d;
    d.names = {"const", "x"};
    d.X.resize(n, 2);
    d.y.resize(n);
    for (long i = 0; i < n; ++i) {
        d.X(i, 0) = 1.0;
        d.X(i, 1) = rng.next_normal();
        d.y[i] = 1.0 + 0.4 * d.X(i, 1) + rng.next_normal() * (1.0 + 0.3 * std::abs(d.X(i, 1)));
        d.group.push_back("b" + std::to_string(i));
        d.date.push_back(1900.0 + static_cast<double>(i));
    }
    auto fit = ols_fit(d);
    auto dk = driscoll_kraay_se(fit, d, 0);
    auto hc0 = hc0_se(fit, d);
    CHECK(max_rel_diff(dk, hc0) < 1e-12);
}

TEST_CASE("driscoll_kraay_se on a single bank equals Newey-West at the same lag") {
    CounterRng rng(654, 0);
    const long t_count = 50;
    DesignMatrix d;
    d.names = {"const", "x"};
    d.X.resize(t_count, 2);
    d.y.resize(t_count);
    double u = 0.0;
    for (long t = 0; t < t_count; ++t) {
        u = 0.6 * u + rng.next_normal();
        d.X(t, 0) = 1.0;
        d.X(t, 1) = rng.next_normal();
        d.y[t] = 0.5 + 0.2 * d.X(t, 1) + u;
        d.group.push_back("the_bank");
        d.date.push_back(1900.0 + static_cast<double>(t));
    }
    auto fit = ols_fit(d);
    auto dk = driscoll_kraay_se(fit, d, 3);
    auto nw = newey_west_se(fit, d, 3.0);  // floor(3.0) = 3 lags
    CHECK(max_rel_diff(dk, nw) < 1e-12);
}

TEST_CASE("driscoll_kraay_se: hand-computed sandwich on a tiny panel") {
    // two banks, three dates, intercept-only; meat and bread by hand
    DesignMatrix d;
    d.names = {"const"};
    d.X = Eigen::MatrixXd::Ones(6, 1);
    d.y.resize(6);
    d.y << 1.0, 2.0, 4.0, 1.0, 0.0, 5.0;  // (bank, date) rows: a1 a2 a3 b1 b2 b3
    d.group = {"a", "a", "a", "b", "b", "b"};
    d.date = {1901.0, 1902.0, 1903.0, 1901.0, 1902.0, 1903.0};
    auto fit = ols_fit(d);
    double mean = d.y.mean();
    // per-date score sums h_t = sum of residuals at date t
    double h1 = (1.0 - mean) + (1.0 - mean);
    double h2 = (2.0 - mean) + (0.0 - mean);
    double h3 = (4.0 - mean) + (5.0 - mean);
    // Bartlett with one lag: w1 = 1/2
    double meat = h1 * h1 + h2 * h2 + h3 * h3 + 2.0 * 0.5 * (h2 * h1 + h3 * h2);
    double expected = std::sqrt(meat / 36.0);  // bread = 1/6 on each side
    auto dk = driscoll_kraay_se(fit, d, 1);
    CHECK(dk[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("newey_west_se depends on S only through its floor") {
    CounterRng rng(31, 0);
    DesignMatrix d;
    d.names = {"const", "x"};
    d.X.resize(30, 2);
    d.y.resize(30);
    for (long t = 0; t < 30; ++t) {
        d.X(t, 0) = 1.0;
        d.X(t, 1) = rng.next_normal();
        d.y[t] = 0.4 * d.X(t, 1) + rng.next_normal();
    }
    auto fit = ols_fit(d);
    auto a = newey_west_se(fit, d, 5.0);
    auto b = newey_west_se(fit, d, 5.97);
    auto c = newey_west_se(fit, d, 6.0);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("driscoll_kraay_se errors with too few dates") {
    DesignMatrix d;
    d.names = {"const"};
    d.X = Eigen::MatrixXd::Ones(6, 1);
    d.y.resize(6);
    for (long i = 0; i < 6; ++i) {
        d.y[i] = static_cast<double>(i % 2);
        d.group.push_back("b");
        d.date.push_back(1900.0 + static_cast<double>(i % 3));  // 3 distinct dates
    }
    auto fit = ols_fit(d);
    CHECK_THROWS_AS(driscoll_kraay_se(fit, d, 2), DataError);
}

TEST_CASE("driscoll_kraay_se on i.i.d. panel data is close to classical OLS SEs") {
    // 100 banks x 100 dates = 10,000 draws per replication; single draws of
    // the HAC estimator have ~10% Monte Carlo noise, so compare replication
    // averages
    const int n_banks = 100, n_dates = 100, reps = 12;
    const long n = n_banks * n_dates;
    Eigen::VectorXd dk_sum = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd classical_sum = Eigen::VectorXd::Zero(2);
    for (int rep = 0; rep < reps; ++rep) {
        CounterRng rng(777 + rep, 0);
        DesignMatrix d;
        d.names = {"const", "x"};
        d.X.resize(n, 2);
        d.y.resize(n);
        long row = 0;
        for (int b = 0; b < n_banks; ++b) {
            for (int t = 0; t < n_dates; ++t, ++row) {
                d.X(row, 0) = 1.0;
                d.X(row, 1) = rng.next_normal();
                d.y[row] = 1.0 + 0.5 * d.X(row, 1) + rng.next_normal();
                d.group.push_back("b" + std::to_string(b));
                d.date.push_back(1900.0 + static_cast<double>(t));
            }
        }
        auto fit = ols_fit(d);
        dk_sum += driscoll_kraay_se(fit, d, 2);
        classical_sum += fit.se;
    }
    CHECK(max_rel_diff(dk_sum / reps, classical_sum / reps) < 0.15);
}

TEST_CASE("newey_west_se: truncation rule and white-noise sanity") {
    CHECK(newey_west_lags(newey_west_default_S(100)) == 13);
    CHECK(newey_west_lags(0.9) == 0);
    CHECK(newey_west_default_S(100) == doctest::Approx(13.0).epsilon(1e-12));

    // floor(S) = 0 reduces to HC0
    CounterRng rng(42, 0);
    const long t_small = 40;
    DesignMatrix d;
    d.names = {"const", "x"};
    d.X.resize(t_small, 2);
    d.y.resize(t_small);
    for (long t = 0; t < t_small; ++t) {
        d.X(t, 0) = 1.0;
        d.X(t, 1) = rng.next_normal();
        d.y[t] = 0.1 * d.X(t, 1) + rng.next_normal();
    }
    auto fit = ols_fit(d);
    CHECK(max_rel_diff(newey_west_se(fit, d, 0.9), hc0_se(fit, d)) < 1e-12);

    // white noise, T = 5000: NW at the default rule close to classical
    const long t_big = 5000;
    DesignMatrix big;
    big.names = {"const", "x"};
    big.X.resize(t_big, 2);
    big.y.resize(t_big);
    CounterRng rng2(4242, 0);
    for (long t = 0; t < t_big; ++t) {
        big.X(t, 0) = 1.0;
        big.X(t, 1) = rng2.next_normal();
        big.y[t] = 2.0 + 0.3 * big.X(t, 1) + rng2.next_normal();
    }
    auto big_fit = ols_fit(big);
    auto nw = newey_west_se(big_fit, big, newey_west_default_S(t_big));
    CHECK(max_rel_diff(nw, big_fit.se) < 0.10);
}

TEST_CASE("newey_west_se requires at least 3 observations") {
    DesignMatrix d;
    d.names = {"const"};
    d.X = Eigen::MatrixXd::Ones(2, 1);
    d.y.resize(2);
    d.y << 1.0, 2.0;
    auto fit = ols_fit(d);
    CHECK_THROWS_AS(newey_west_se(fit, d, 1.0), DataError);
}

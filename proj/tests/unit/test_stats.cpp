#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "framelens/errors.hpp"
#include "framelens/rng.hpp"
#include "framelens/stats.hpp"
#include "oracles.hpp"
#include "simulate.hpp"

using namespace framelens;
using namespace framelens::stats;

namespace {

DesignMatrix linear_design(const std::vector<std::vector<double>>& cols, const std::vector<double>& y) {
  DesignMatrix d;
  d.outcome = "y";
  const auto n = static_cast<Eigen::Index>(y.size());
  d.x.resize(n, static_cast<Eigen::Index>(cols.size()) + 1);
  d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    d.columns.push_back("x" + std::to_string(c));
    for (Eigen::Index i = 0; i < n; ++i) d.x(i, static_cast<Eigen::Index>(c)) = cols[c][static_cast<std::size_t>(i)];
  }
  d.columns.push_back("Constant");
  d.x.col(d.x.cols() - 1).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) d.row_ids.push_back(std::to_string(i));
  return d;
}

}  // namespace

TEST_CASE("logistic regression recovers (-1, 0.5) at n = 20000") {
  const auto fit = fit_logistic(testing::simulate_logistic(20000, -1.0, 0.5, 42));
  CHECK(fit.converged);
  CHECK(std::abs(fit.coefficient("Constant").estimate + 1.0) < 0.1);
  CHECK(std::abs(fit.coefficient("x").estimate - 0.5) < 0.1);
  CHECK(fit.coefficient("x").p_value < 1e-10);
}

TEST_CASE("log-likelihood trace never decreases and information criteria agree") {
  const auto fit = fit_logistic(testing::simulate_logistic(2000, 0.3, -0.8, 1));
  for (std::size_t i = 1; i < fit.trace.size(); ++i) CHECK(fit.trace[i] >= fit.trace[i - 1] - 1e-9);
  CHECK(fit.aic == doctest::Approx(-2 * fit.log_likelihood + 2 * 2));
  CHECK(fit.bic == doctest::Approx(-2 * fit.log_likelihood + 2 * std::log(2000.0)));
}

TEST_CASE("logistic fit is the likelihood maximum") {
  const auto d = testing::simulate_logistic(500, 0.2, 1.0, 8);
  const auto fit = fit_logistic(d);
  auto loglik = [&](double b0, double b1) {
    double ll = 0;
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      const double p = testing::inv_logit(b1 * d.x(i, 0) + b0);
      ll += d.y(i) ? std::log(p) : std::log(1 - p);
    }
    return ll;
  };
  const double b0 = fit.coefficient("Constant").estimate, b1 = fit.coefficient("x").estimate;
  CHECK(fit.log_likelihood == doctest::Approx(loglik(b0, b1)));
  for (double e : {-1e-3, 1e-3}) {
    CHECK(loglik(b0 + e, b1) <= fit.log_likelihood);
    CHECK(loglik(b0, b1 + e) <= fit.log_likelihood);
  }
}

TEST_CASE("null coefficient stays near zero") {
  auto d = testing::simulate_logistic(20000, -1.0, 0.0, 77);
  const auto fit = fit_logistic(d);
  CHECK(std::abs(fit.coefficient("x").estimate) < 0.08);
}

TEST_CASE("Wald test holds its size under the null") {
  int rejections = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto fit = fit_logistic(testing::simulate_logistic(5000, -1.0, 0.0, 1000 + static_cast<std::uint64_t>(rep)));
    rejections += fit.coefficient("x").p_value < 0.05;
  }
  const double rate = rejections / 200.0;
  CHECK(rate >= 0.02);
  CHECK(rate <= 0.09);
}

TEST_CASE("degenerate, rank-deficient and separated designs are rejected") {
  auto d = testing::simulate_logistic(200, 0.0, 1.0, 3);
  auto zeros = d;
  zeros.y.setZero();
  CHECK_THROWS_AS(fit_logistic(zeros), DegenerateOutcomeError);

  auto dup = d;
  dup.x.conservativeResize(Eigen::NoChange, 3);
  dup.x.col(2) = dup.x.col(0) * 2.0;
  dup.columns.push_back("x_twice");
  CHECK_THROWS_AS(fit_logistic(dup), RankError);

  auto sep = d;
  for (Eigen::Index i = 0; i < sep.x.rows(); ++i) sep.y(i) = sep.x(i, 0) > 0 ? 1.0 : 0.0;
  try {
    fit_logistic(sep);
    FAIL("expected separation");
  } catch (const SeparationError& e) {
    CHECK(e.column() == "x");
  }
}

TEST_CASE("OLS: exact fit, intercept-only mean and orthogonal residuals") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 - 2.0 * v);
  const auto exact = fit_linear(linear_design({x}, y));
  CHECK(exact.coefficient("x0").estimate == doctest::Approx(-2.0));
  CHECK(exact.coefficient("Constant").estimate == doctest::Approx(3.0));

  const std::vector<double> z{2, 4, 9};
  CHECK(fit_linear(linear_design({}, z)).coefficient("Constant").estimate == doctest::Approx(5.0));

  Rng rng(5);
  std::vector<double> a, b, w;
  for (int i = 0; i < 300; ++i) {
    a.push_back(rng.normal());
    b.push_back(rng.normal());
    w.push_back(1.0 + 0.3 * a.back() - 0.7 * b.back() + rng.normal());
  }
  const auto d = linear_design({a, b}, w);
  const auto fit = fit_linear(d);
  Eigen::VectorXd beta(3);
  beta << fit.coefficients[0].estimate, fit.coefficients[1].estimate, fit.coefficients[2].estimate;
  const Eigen::VectorXd resid = d.y - d.x * beta;
  CHECK((d.x.transpose() * resid).cwiseAbs().maxCoeff() < 1e-8);
  const double rss = resid.squaredNorm();
  CHECK(fit.log_likelihood == doctest::Approx(-150.0 * (std::log(2 * M_PI * rss / 300.0) + 1.0)));
}

TEST_CASE("random intercept sd is recovered from 200 groups of 100") {
  const auto d = testing::simulate_grouped_logistic(200, 100, -0.5, 0.4, 0.5, 2024);
  const auto fit = fit_random_intercepts(d, Family::Logistic);
  REQUIRE(fit.variances.size() == 1);
  const double sd = std::sqrt(fit.variances[0].variance);
  CHECK(sd > 0.35);
  CHECK(sd < 0.65);
  CHECK(std::abs(fit.coefficient("x").estimate - 0.4) < 0.1);
}

TEST_CASE("zero variance reproduces the fixed-only fit") {
  const auto d = testing::simulate_grouped_logistic(50, 40, 0.2, -0.6, 0.0, 9);
  const auto fixed = fit_logistic(d);
  MixedOptions opts;
  opts.fixed_theta = std::vector<double>{0.0};
  const auto forced = fit_random_intercepts(d, Family::Logistic, opts);
  CHECK(forced.variances[0].boundary);
  for (const auto& c : fixed.coefficients) {
    CHECK(std::abs(forced.coefficient(c.name).estimate - c.estimate) < 1e-6);
    CHECK(std::abs(forced.coefficient(c.name).se - c.se) < 1e-6);
  }
  CHECK(std::abs(forced.log_likelihood - fixed.log_likelihood) < 1e-6);
  const auto estimated = fit_random_intercepts(d, Family::Logistic);
  for (const auto& c : fixed.coefficients) CHECK(std::abs(estimated.coefficient(c.name).estimate - c.estimate) < 1e-3);
}

TEST_CASE("a level with one row per group sits on the boundary") {
  auto d = testing::simulate_logistic(300, 0.0, 0.5, 4);
  GroupLevel level{"date", {}, 300};
  for (int i = 0; i < 300; ++i) level.index.push_back(i);
  d.groups.push_back(level);
  const auto fit = fit_random_intercepts(d, Family::Logistic);
  CHECK(fit.variances[0].boundary);
  CHECK_FALSE(fit.warnings.empty());
}

TEST_CASE("linear random intercepts recover the group variance") {
  Rng rng(31);
  const int groups = 60, per = 30;
  std::vector<double> x, y;
  GroupLevel level{"date", {}, groups};
  for (int g = 0; g < groups; ++g) {
    const double u = rng.normal(0.0, 0.8);
    for (int i = 0; i < per; ++i) {
      x.push_back(rng.normal());
      y.push_back(1.0 + 0.5 * x.back() + u + rng.normal());
      level.index.push_back(g);
    }
  }
  auto d = linear_design({x}, y);
  d.groups.push_back(level);
  const auto fit = fit_random_intercepts(d, Family::Linear);
  REQUIRE(fit.variances.size() == 2);
  CHECK(std::sqrt(fit.variances[0].variance) == doctest::Approx(0.8).epsilon(0.3));
  CHECK(fit.variances[1].level == "residual");
  CHECK(fit.variances[1].variance == doctest::Approx(1.0).epsilon(0.15));
  CHECK(fit.coefficient("x0").estimate == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("Holm worked examples") {
  const auto r = holm_bonferroni({0.01, 0.04, 0.03, 0.005}, 0.05);
  CHECK(r.reject == std::vector<bool>{true, false, false, true});
  CHECK(r.adjusted[3] == doctest::Approx(0.02));
  CHECK(r.adjusted[0] == doctest::Approx(0.03));
  CHECK(r.adjusted[2] == doctest::Approx(0.06));
  CHECK(r.adjusted[1] == doctest::Approx(0.06));
  CHECK_THROWS_AS(holm_bonferroni({0.5}, 1.5), ValidationError);
  CHECK_THROWS_AS(holm_bonferroni({-0.1}, 0.05), ValidationError);
}

TEST_CASE("Holm matches the step-down oracle on random p-vectors") {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = 1 + rng.below(50);
    std::vector<double> p;
    for (std::uint64_t i = 0; i < m; ++i) {
      // Mix of tiny, moderate and tied values.
      const double u = rng.uniform();
      p.push_back(rng.bernoulli(0.2) ? std::round(u * 10) / 1000 : std::pow(u, 3));
    }
    const double alpha = rng.bernoulli(0.5) ? 0.05 : 0.005;
    const auto r = holm_bonferroni(p, alpha);
    CHECK(r.reject == testing::oracle_holm_reject(p, alpha));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(r.adjusted[order[i]] >= p[order[i]]);
      CHECK(r.adjusted[order[i]] <= 1.0);
      if (i > 0) CHECK(r.adjusted[order[i]] >= r.adjusted[order[i - 1]]);
      CHECK(r.reject[order[i]] == (r.adjusted[order[i]] <= alpha));
    }
  }
}

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "framelens/design.hpp"
#include "json.hpp"

namespace framelens::stats {

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double statistic = 0.0;  // z for logistic and mixed fits, t for linear
  double p_value = 1.0;
};

struct VarianceComponent {
  std::string level;
  double variance = 0.0;
  bool boundary = false;  // estimate at (or fixed to) zero
};

struct FitResult {
  Family family = Family::Logistic;
  Estimator estimator = Estimator::FixedOnly;
  std::string outcome;
  std::vector<Coefficient> coefficients;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t n = 0;
  int n_parameters = 0;
  std::vector<VarianceComponent> variances;
  int iterations = 0;
  bool converged = false;
  /// Objective after each outer iteration (log-likelihood for IRLS).
  std::vector<double> trace;
  std::vector<std::string> warnings;

  /// Throws ValidationError when absent.
  const Coefficient& coefficient(const std::string& name) const;
  bool has(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
};

struct IrlsOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;          // max absolute coefficient change
  double separation_bound = 15.0;   // |coefficient| treated as diverging
};

/// Maximum likelihood by IRLS with step-halving; Wald standard errors.
FitResult fit_logistic(const DesignMatrix& design, const IrlsOptions& options = {});

/// Ordinary least squares with classical standard errors and t p-values.
FitResult fit_linear(const DesignMatrix& design);

struct MixedOptions {
  int max_evaluations = 600;     // deviance evaluations over the variance parameters
  double tolerance = 1e-9;       // relative spread of simplex deviances
  /// Relative standard deviations per level (random-intercept sd over residual
  /// sd for linear fits, plain sd for logistic). Skips their optimization.
  std::optional<std::vector<double>> fixed_theta;
};

/// Random intercepts for every level in design.groups. Logistic: Laplace
/// approximation with fixed effects found jointly with the modes. Linear:
/// profiled restricted likelihood.
FitResult fit_random_intercepts(const DesignMatrix& design, Family family, const MixedOptions& options = {});

/// Dispatches on estimator; FixedOnly picks fit_logistic or fit_linear.
FitResult fit(const DesignMatrix& design, Family family, Estimator estimator, const MixedOptions& options = {});

struct CorrectedResults {
  std::vector<std::string> labels;
  std::vector<double> raw;
  std::vector<double> adjusted;
  std::vector<bool> reject;
  double alpha = 0.05;
};

/// Holm step-down. Entries stay in input order.
CorrectedResults holm_bonferroni(const std::vector<double>& p_values, double alpha,
                                 std::vector<std::string> labels = {});

}  // namespace framelens::stats

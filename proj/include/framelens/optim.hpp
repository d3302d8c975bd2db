#pragma once

#include <Eigen/Dense>
#include <functional>

namespace framelens::optim {

/// Objective returning f(x) and writing the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  int max_iterations = 500;
  int history = 10;
  double gradient_tolerance = 1e-6;  // on the max-norm of the gradient
  double relative_tolerance = 1e-12;  // on successive objective values
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with backtracking Armijo line search. Deterministic.
LbfgsResult lbfgs(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& options = {});

struct NelderMeadOptions {
  int max_evaluations = 2000;
  double tolerance = 1e-8;  // spread of simplex values
  double initial_step = 0.25;
  double x_tolerance = 1e-6;  // max vertex distance from the best vertex
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                             const NelderMeadOptions& options = {});

}  // namespace framelens::optim

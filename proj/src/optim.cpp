#include "framelens/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <vector>

namespace framelens::optim {

LbfgsResult lbfgs(const Objective& f, Eigen::VectorXd x, const LbfgsOptions& options) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n), g_new(n), x_new(n), direction(n);
  double value = f(x, g);
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  LbfgsResult out;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      out.converged = true;
      break;
    }
    // Two-loop recursion.
    direction = -g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(direction);
      direction -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) {
      direction *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      direction /= std::max(1.0, g.norm());
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(direction);
      direction += (alpha[k] - beta) * s_hist[k];
    }
    double slope = g.dot(direction);
    if (slope >= 0.0) {
      direction = -g / std::max(1.0, g.norm());
      slope = g.dot(direction);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    double value_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * direction;
      value_new = f(x_new, g_new);
      if (std::isfinite(value_new) && value_new <= value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double change = std::fabs(value - value_new);
    x = x_new;
    g = g_new;
    value = value_new;
    if (change <= options.relative_tolerance * std::max(1.0, std::fabs(value))) {
      out.converged = true;
      out.iterations = iter + 1;
      break;
    }
  }
  out.x = std::move(x);
  out.value = value;
  return out;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                             const NelderMeadOptions& options) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> simplex(n + 1, x0);
  std::vector<double> values(n + 1);
  NelderMeadResult out;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++out.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    simplex[i + 1][i] += x0[i] != 0.0 ? options.initial_step * std::max(1.0, std::fabs(x0[i])) : options.initial_step;
  }
  for (Eigen::Index i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  while (out.evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    {
      std::vector<Eigen::VectorXd> s2;
      std::vector<double> v2;
      for (auto i : order) {
        s2.push_back(simplex[i]);
        v2.push_back(values[i]);
      }
      simplex = std::move(s2);
      values = std::move(v2);
    }
    double size = 0.0;
    for (Eigen::Index i = 1; i <= n; ++i) size = std::max(size, (simplex[i] - simplex[0]).lpNorm<Eigen::Infinity>());
    if (std::fabs(values[n] - values[0]) <= options.tolerance * (1.0 + std::fabs(values[0])) && size < options.x_tolerance) {
      out.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[n]);
    const double fr = eval(reflected);
    if (fr < values[0]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[n]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[n] = expanded;
        values[n] = fe;
      } else {
        simplex[n] = reflected;
        values[n] = fr;
      }
      continue;
    }
    if (fr < values[n - 1]) {
      simplex[n] = reflected;
      values[n] = fr;
      continue;
    }
    const bool outside = fr < values[n];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid)) : Eigen::VectorXd(centroid + 0.5 * (simplex[n] - centroid));
    const double fc = eval(contracted);
    if (fc < (outside ? fr : values[n])) {
      simplex[n] = contracted;
      values[n] = fc;
      continue;
    }
    for (Eigen::Index i = 1; i <= n; ++i) {
      simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto best = std::min_element(values.begin(), values.end()) - values.begin();
  out.x = simplex[best];
  out.value = values[best];
  return out;
}

}  // namespace framelens::optim

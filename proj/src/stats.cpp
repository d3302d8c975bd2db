#include "framelens/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Sparse>
#include <boost/math/distributions/students_t.hpp>

#include "framelens/errors.hpp"
#include "framelens/optim.hpp"

namespace framelens::stats {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const Coefficient& FitResult::coefficient(const std::string& name) const {
  for (const auto& c : coefficients) {
    if (c.name == name) return c;
  }
  throw ValidationError("no coefficient named " + name);
}

bool FitResult::has(const std::string& name) const {
  return std::any_of(coefficients.begin(), coefficients.end(), [&](const Coefficient& c) { return c.name == name; });
}

nlohmann::ordered_json FitResult::to_json() const {
  nlohmann::ordered_json j;
  j["family"] = family_name(family);
  j["estimator"] = estimator_name(estimator);
  j["outcome"] = outcome;
  auto& coefs = j["coefficients"] = nlohmann::ordered_json::array();
  for (const auto& c : coefficients) {
    coefs.push_back({{"name", c.name}, {"estimate", c.estimate}, {"se", c.se}, {"statistic", c.statistic},
                     {"p_value", c.p_value}});
  }
  j["n"] = n;
  j["log_likelihood"] = log_likelihood;
  j["aic"] = aic;
  j["bic"] = bic;
  auto& vars = j["variances"] = nlohmann::ordered_json::array();
  for (const auto& v : variances) vars.push_back({{"level", v.level}, {"variance", v.variance}, {"boundary", v.boundary}});
  j["iterations"] = iterations;
  j["converged"] = converged;
  j["warnings"] = warnings;
  return j;
}

namespace {

double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

double bernoulli_loglik(const VectorXd& y, const VectorXd& eta) {
  double ll = 0.0;
  for (Index i = 0; i < y.size(); ++i) ll += y[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

double normal_two_sided(double z) { return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0))); }

void check_rows(const DesignMatrix& d) {
  if (d.x.rows() != d.y.size()) throw ValidationError("design and outcome differ in length");
  if (d.x.rows() <= d.x.cols()) {
    throw ValidationError("need more rows (" + std::to_string(d.x.rows()) + ") than columns (" +
                          std::to_string(d.x.cols()) + ")");
  }
}

void check_rank(const DesignMatrix& d) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(d.x);
  qr.setThreshold(1e-10);
  if (qr.rank() == d.x.cols()) return;
  std::string names;
  for (Index k = qr.rank(); k < d.x.cols(); ++k) {
    if (!names.empty()) names += ", ";
    names += d.columns[static_cast<std::size_t>(qr.colsPermutation().indices()[k])];
  }
  throw RankError("design matrix is rank deficient; dependent columns: " + names);
}

void check_binary(const DesignMatrix& d) {
  double positives = 0.0;
  for (Index i = 0; i < d.y.size(); ++i) {
    if (d.y[i] != 0.0 && d.y[i] != 1.0) throw ValidationError("logistic outcome must be 0/1");
    positives += d.y[i];
  }
  if (positives == 0.0 || positives == static_cast<double>(d.y.size())) {
    throw DegenerateOutcomeError("outcome " + d.outcome + " has a single class; the intercept diverges");
  }
}

void set_information_criteria(FitResult& r) {
  const double k = r.n_parameters;
  r.aic = -2.0 * r.log_likelihood + 2.0 * k;
  r.bic = -2.0 * r.log_likelihood + k * std::log(static_cast<double>(r.n));
}

void fill_wald(FitResult& r, const DesignMatrix& d, const VectorXd& beta, const MatrixXd& cov) {
  r.coefficients.clear();
  for (Index j = 0; j < beta.size(); ++j) {
    Coefficient c;
    c.name = d.columns[static_cast<std::size_t>(j)];
    c.estimate = beta[j];
    c.se = std::sqrt(std::max(0.0, cov(j, j)));
    c.statistic = c.se > 0 ? c.estimate / c.se : 0.0;
    c.p_value = c.se > 0 ? normal_two_sided(c.statistic) : 1.0;
    r.coefficients.push_back(c);
  }
}

}  // namespace

FitResult fit_logistic(const DesignMatrix& d, const IrlsOptions& options) {
  check_rows(d);
  check_binary(d);
  check_rank(d);
  const Index n = d.x.rows(), p = d.x.cols();

  FitResult r;
  r.family = Family::Logistic;
  r.estimator = Estimator::FixedOnly;
  r.outcome = d.outcome;
  r.n = static_cast<std::size_t>(n);
  r.n_parameters = static_cast<int>(p);

  VectorXd beta = VectorXd::Zero(p);
  double ll = bernoulli_loglik(d.y, d.x * beta);
  r.trace.push_back(ll);
  MatrixXd info(p, p);
  for (int it = 1; it <= options.max_iterations; ++it) {
    const VectorXd eta = d.x * beta;
    VectorXd mu(n), w(n);
    for (Index i = 0; i < n; ++i) {
      mu[i] = sigmoid(eta[i]);
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-300);
    }
    info = d.x.transpose() * w.asDiagonal() * d.x;
    const Eigen::LDLT<MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw RankError("singular information matrix");
    const VectorXd delta = ldlt.solve(d.x.transpose() * (d.y - mu));

    double step = 1.0, next = 0.0;
    VectorXd candidate;
    for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
      candidate = beta + step * delta;
      next = bernoulli_loglik(d.y, d.x * candidate);
      if (next >= ll) break;
    }
    if (next < ll) {
      // No ascent along the Newton direction: the current point is the optimum to working precision.
      r.iterations = it;
      r.converged = true;
      break;
    }
    const VectorXd change = candidate - beta;
    for (Index j = 0; j < p; ++j) {
      if (std::fabs(candidate[j]) > options.separation_bound && std::fabs(change[j]) > 1e-3) {
        const auto& name = d.columns[static_cast<std::size_t>(j)];
        throw SeparationError(name, "perfect separation: coefficient of " + name + " diverges (|" +
                                        std::to_string(candidate[j]) + "| > " +
                                        std::to_string(options.separation_bound) + ")");
      }
    }
    beta = candidate;
    ll = next;
    r.trace.push_back(ll);
    r.iterations = it;
    if (change.lpNorm<Eigen::Infinity>() < options.tolerance) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) r.warnings.push_back("IRLS stopped after " + std::to_string(r.iterations) + " iterations");

  const VectorXd eta = d.x * beta;
  VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    const double m = sigmoid(eta[i]);
    w[i] = m * (1.0 - m);
  }
  info = d.x.transpose() * w.asDiagonal() * d.x;
  fill_wald(r, d, beta, info.ldlt().solve(MatrixXd::Identity(p, p)));
  r.log_likelihood = ll;
  set_information_criteria(r);
  return r;
}

FitResult fit_linear(const DesignMatrix& d) {
  check_rows(d);
  check_rank(d);
  const Index n = d.x.rows(), p = d.x.cols();
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(d.x);
  const VectorXd beta = qr.solve(d.y);
  const VectorXd resid = d.y - d.x * beta;
  const double rss = resid.squaredNorm();
  const double df = static_cast<double>(n - p);
  const double sigma2 = rss / df;
  const MatrixXd xtx_inv = (d.x.transpose() * d.x).ldlt().solve(MatrixXd::Identity(p, p));

  FitResult r;
  r.family = Family::Linear;
  r.estimator = Estimator::FixedOnly;
  r.outcome = d.outcome;
  r.n = static_cast<std::size_t>(n);
  r.n_parameters = static_cast<int>(p) + 1;  // coefficients and the residual variance
  r.iterations = 1;
  r.converged = true;
  const boost::math::students_t dist(df);
  for (Index j = 0; j < p; ++j) {
    Coefficient c;
    c.name = d.columns[static_cast<std::size_t>(j)];
    c.estimate = beta[j];
    c.se = std::sqrt(sigma2 * xtx_inv(j, j));
    c.statistic = c.se > 0 ? c.estimate / c.se : 0.0;
    c.p_value = c.se > 0 ? std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(c.statistic))))
                         : (c.estimate == 0.0 ? 1.0 : 0.0);
    r.coefficients.push_back(c);
  }
  const double nn = static_cast<double>(n);
  r.log_likelihood = rss > 0 ? -0.5 * nn * (std::log(2.0 * M_PI * rss / nn) + 1.0)
                             : std::numeric_limits<double>::infinity();
  set_information_criteria(r);
  r.trace.push_back(r.log_likelihood);
  return r;
}

namespace {

// Random-intercept structure: one indicator column per group, levels stacked.
class Intercepts {
 public:
  explicit Intercepts(const DesignMatrix& d) : d_(d), n_(d.x.rows()) {
    for (const auto& g : d.groups) {
      offsets_.push_back(q_);
      q_ += g.n_groups;
    }
    // Fixed sparsity pattern: identity plus every within-row level pair.
    std::vector<Eigen::Triplet<double>> t;
    for (Index k = 0; k < q_; ++k) t.emplace_back(k, k, 0.0);
    for (Index i = 0; i < n_; ++i) {
      for (std::size_t a = 0; a < levels(); ++a) {
        for (std::size_t b = 0; b < levels(); ++b) t.emplace_back(col(i, a), col(i, b), 0.0);
      }
    }
    pattern_.resize(q_, q_);
    pattern_.setFromTriplets(t.begin(), t.end());
    chol_.analyzePattern(pattern_);
  }

  std::size_t levels() const { return d_.groups.size(); }
  Index q() const { return q_; }
  Index col(Index row, std::size_t level) const {
    return offsets_[level] + d_.groups[level].index[static_cast<std::size_t>(row)];
  }

  // Lambda' Z' W Z Lambda + I, factorized in place. False when not positive definite.
  bool factorize(const VectorXd& w, const std::vector<double>& theta) {
    Eigen::SparseMatrix<double> a = pattern_;
    for (Index k = 0; k < a.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) it.valueRef() = 0.0;
    }
    for (Index i = 0; i < n_; ++i) {
      for (std::size_t la = 0; la < levels(); ++la) {
        for (std::size_t lb = 0; lb < levels(); ++lb) {
          a.coeffRef(col(i, la), col(i, lb)) += w[i] * theta[la] * theta[lb];
        }
      }
    }
    for (Index k = 0; k < q_; ++k) a.coeffRef(k, k) += 1.0;
    chol_.factorize(a);
    return chol_.info() == Eigen::Success;
  }

  double logdet() const {
    double s = 0.0;
    const Eigen::SparseMatrix<double> lm = chol_.matrixL();
    for (Index k = 0; k < q_; ++k) s += std::log(lm.coeff(k, k));
    return 2.0 * s;
  }

  template <typename Rhs>
  MatrixXd solve(const Rhs& rhs) const {
    return chol_.solve(MatrixXd(rhs));
  }

  // Lambda' Z' diag(w) M for a dense n x k matrix M.
  MatrixXd zt(const VectorXd& w, const MatrixXd& m, const std::vector<double>& theta) const {
    MatrixXd out = MatrixXd::Zero(q_, m.cols());
    for (Index i = 0; i < n_; ++i) {
      for (std::size_t l = 0; l < levels(); ++l) out.row(col(i, l)) += (w[i] * theta[l]) * m.row(i);
    }
    return out;
  }

  // Z Lambda u.
  VectorXd z(const VectorXd& u, const std::vector<double>& theta) const {
    VectorXd out = VectorXd::Zero(n_);
    for (Index i = 0; i < n_; ++i) {
      for (std::size_t l = 0; l < levels(); ++l) out[i] += theta[l] * u[col(i, l)];
    }
    return out;
  }

 private:
  const DesignMatrix& d_;
  Index n_;
  Index q_ = 0;
  std::vector<Index> offsets_;
  Eigen::SparseMatrix<double> pattern_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> chol_;
};

struct ModeFit {
  double deviance = 0.0;
  double loglik = 0.0;  // conditional log-likelihood at the mode
  VectorXd beta;
  VectorXd u;
  MatrixXd beta_cov;  // inverse Schur complement (times sigma^2 for linear fits)
  double sigma2 = 1.0;
  bool ok = true;
};

// Joint penalized IRLS over (u, beta) for a logistic random-intercept model.
ModeFit logistic_mode(const DesignMatrix& d, Intercepts& re, const std::vector<double>& theta, const VectorXd& beta0) {
  const Index n = d.x.rows(), p = d.x.cols(), q = re.q();
  ModeFit m;
  m.beta = beta0;
  m.u = VectorXd::Zero(q);
  auto eta_of = [&](const VectorXd& beta, const VectorXd& u) { return VectorXd(d.x * beta + re.z(u, theta)); };
  auto objective = [&](const VectorXd& beta, const VectorXd& u) {
    return bernoulli_loglik(d.y, eta_of(beta, u)) - 0.5 * u.squaredNorm();
  };
  double obj = objective(m.beta, m.u);
  MatrixXd s;
  for (int it = 0; it < 100; ++it) {
    const VectorXd eta = eta_of(m.beta, m.u);
    VectorXd mu(n), w(n);
    for (Index i = 0; i < n; ++i) {
      mu[i] = sigmoid(eta[i]);
      w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-300);
    }
    if (!re.factorize(w, theta)) {
      m.ok = false;
      return m;
    }
    const VectorXd resid = d.y - mu;
    const VectorXd g_u = re.zt(VectorXd::Ones(n), resid, theta).col(0) - m.u;
    const VectorXd g_b = d.x.transpose() * resid;
    const MatrixXd b = re.zt(w, d.x, theta);
    const MatrixXd ainv_b = re.solve(b);
    s = d.x.transpose() * w.asDiagonal() * d.x - b.transpose() * ainv_b;
    const Eigen::LDLT<MatrixXd> sl(s);
    const VectorXd ainv_gu = re.solve(g_u);
    const VectorXd db = sl.solve(g_b - b.transpose() * ainv_gu);
    const VectorXd du = ainv_gu - ainv_b * db;

    double step = 1.0, next = obj;
    VectorXd nb, nu;
    for (int h = 0; h < 40; ++h, step *= 0.5) {
      nb = m.beta + step * db;
      nu = m.u + step * du;
      next = objective(nb, nu);
      if (next >= obj) break;
    }
    if (next < obj) break;
    const double change = std::max((nb - m.beta).lpNorm<Eigen::Infinity>(), (nu - m.u).lpNorm<Eigen::Infinity>());
    m.beta = nb;
    m.u = nu;
    obj = next;
    if (change < 1e-10) break;
  }
  const VectorXd eta = eta_of(m.beta, m.u);
  VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = sigmoid(eta[i]);
    w[i] = std::max(mu * (1.0 - mu), 1e-300);
  }
  if (!re.factorize(w, theta)) {
    m.ok = false;
    return m;
  }
  const MatrixXd b = re.zt(w, d.x, theta);
  s = d.x.transpose() * w.asDiagonal() * d.x - b.transpose() * re.solve(b);
  m.beta_cov = s.ldlt().solve(MatrixXd::Identity(p, p));
  m.loglik = bernoulli_loglik(d.y, eta);
  m.deviance = -2.0 * m.loglik + m.u.squaredNorm() + re.logdet();
  return m;
}

// Profiled restricted deviance of a linear random-intercept model.
ModeFit linear_mode(const DesignMatrix& d, Intercepts& re, const std::vector<double>& theta) {
  const Index n = d.x.rows(), p = d.x.cols();
  ModeFit m;
  const VectorXd ones = VectorXd::Ones(n);
  if (!re.factorize(ones, theta)) {
    m.ok = false;
    return m;
  }
  const MatrixXd b = re.zt(ones, d.x, theta);
  const VectorXd zy = re.zt(ones, d.y, theta).col(0);
  const MatrixXd ainv_b = re.solve(b);
  const VectorXd ainv_zy = re.solve(zy);
  const MatrixXd s = d.x.transpose() * d.x - b.transpose() * ainv_b;
  const Eigen::LLT<MatrixXd> sl(s);
  if (sl.info() != Eigen::Success) {
    m.ok = false;
    return m;
  }
  m.beta = sl.solve(d.x.transpose() * d.y - b.transpose() * ainv_zy);
  m.u = ainv_zy - ainv_b * m.beta;
  const double r2 = (d.y - d.x * m.beta - re.z(m.u, theta)).squaredNorm() + m.u.squaredNorm();
  const double dfr = static_cast<double>(n - p);
  double logdet_s = 0.0;
  for (Index k = 0; k < p; ++k) logdet_s += 2.0 * std::log(sl.matrixL()(k, k));
  m.sigma2 = r2 / dfr;
  m.deviance = re.logdet() + logdet_s + dfr * (1.0 + std::log(2.0 * M_PI * r2 / dfr));
  m.loglik = -0.5 * m.deviance;
  m.beta_cov = m.sigma2 * sl.solve(MatrixXd::Identity(p, p));
  return m;
}

}  // namespace

FitResult fit_random_intercepts(const DesignMatrix& d, Family family, const MixedOptions& options) {
  check_rows(d);
  if (family == Family::Logistic) check_binary(d);
  check_rank(d);
  if (d.groups.empty()) throw ValidationError("random-intercept fit needs at least one grouping level");
  for (const auto& g : d.groups) {
    if (g.n_groups < 2) throw ValidationError("random-intercept level " + g.name + " needs at least 2 groups");
  }
  const std::size_t levels = d.groups.size();
  if (options.fixed_theta && options.fixed_theta->size() != levels) {
    throw ValidationError("fixed_theta needs one value per grouping level");
  }

  FitResult r;
  r.family = family;
  r.estimator = Estimator::LaplaceRandomIntercepts;
  r.outcome = d.outcome;
  r.n = d.rows();

  // A level whose groups each hold one row is not identified apart from the residual.
  std::vector<bool> free(levels, true);
  for (std::size_t l = 0; l < levels; ++l) {
    if (d.groups[l].n_groups == static_cast<int>(d.rows())) {
      free[l] = false;
      r.warnings.push_back("level " + d.groups[l].name + " has one row per group; variance fixed at 0 (boundary)");
    }
  }

  Intercepts re(d);
  VectorXd start_beta;
  if (family == Family::Logistic) {
    const FitResult glm = fit_logistic(d);
    start_beta.resize(d.x.cols());
    for (Index j = 0; j < start_beta.size(); ++j) start_beta[j] = glm.coefficients[static_cast<std::size_t>(j)].estimate;
  }

  auto expand = [&](const VectorXd& free_theta) {
    std::vector<double> theta(levels, 0.0);
    Index k = 0;
    for (std::size_t l = 0; l < levels; ++l) {
      if (free[l]) theta[l] = std::fabs(free_theta[k++]);
    }
    return theta;
  };
  auto mode_at = [&](const std::vector<double>& theta) {
    return family == Family::Logistic ? logistic_mode(d, re, theta, start_beta) : linear_mode(d, re, theta);
  };

  std::vector<double> theta(levels, 0.0);
  if (options.fixed_theta) {
    for (std::size_t l = 0; l < levels; ++l) theta[l] = free[l] ? std::fabs((*options.fixed_theta)[l]) : 0.0;
    r.converged = true;
  } else {
    const Index n_free = std::count(free.begin(), free.end(), true);
    if (n_free == 0) {
      r.converged = true;
    } else {
      optim::NelderMeadOptions nm;
      nm.max_evaluations = options.max_evaluations;
      nm.tolerance = options.tolerance;
      nm.initial_step = 0.5;
      nm.x_tolerance = 1e-4;
      auto deviance = [&](const VectorXd& x) {
        const auto m = mode_at(expand(x));
        r.trace.push_back(m.ok ? m.deviance : std::numeric_limits<double>::infinity());
        return r.trace.back();
      };
      const auto res = optim::nelder_mead(deviance, VectorXd::Constant(n_free, 1.0), nm);
      r.iterations = res.evaluations;
      theta = expand(res.x);
      if (!res.converged) {
        throw NonConvergenceError("random-intercept variance search did not converge after " +
                                      std::to_string(res.evaluations) + " evaluations",
                                  theta);
      }
      r.converged = true;
    }
  }

  const ModeFit m = mode_at(theta);
  if (!m.ok) throw NonConvergenceError("random-intercept fit failed at the final variance parameters", theta);
  fill_wald(r, d, m.beta, m.beta_cov);
  for (std::size_t l = 0; l < levels; ++l) {
    const double scale = family == Family::Linear ? m.sigma2 : 1.0;
    const double var = scale * theta[l] * theta[l];
    r.variances.push_back({d.groups[l].name, var, !free[l] || theta[l] < 1e-4});
  }
  if (family == Family::Linear) r.variances.push_back({"residual", m.sigma2, false});
  r.log_likelihood = -0.5 * m.deviance;
  r.n_parameters = static_cast<int>(d.x.cols() + levels) + (family == Family::Linear ? 1 : 0);
  set_information_criteria(r);
  return r;
}

FitResult fit(const DesignMatrix& design, Family family, Estimator estimator, const MixedOptions& options) {
  if (estimator == Estimator::LaplaceRandomIntercepts) return fit_random_intercepts(design, family, options);
  return family == Family::Logistic ? fit_logistic(design) : fit_linear(design);
}

CorrectedResults holm_bonferroni(const std::vector<double>& p_values, double alpha, std::vector<std::string> labels) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p-value outside [0, 1]: " + std::to_string(p));
  }
  if (labels.empty()) {
    for (std::size_t i = 0; i < p_values.size(); ++i) labels.push_back(std::to_string(i));
  }
  if (labels.size() != p_values.size()) throw ValidationError("labels and p-values differ in length");

  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

  CorrectedResults out;
  out.labels = std::move(labels);
  out.raw = p_values;
  out.adjusted.assign(m, 1.0);
  out.reject.assign(m, false);
  out.alpha = alpha;
  double running = 0.0;
  bool rejecting = true;
  for (std::size_t i = 0; i < m; ++i) {
    const double p = p_values[order[i]];
    const double factor = static_cast<double>(m - i);
    running = std::max(running, std::min(1.0, factor * p));
    out.adjusted[order[i]] = running;
    rejecting = rejecting && p <= alpha / factor;
    out.reject[order[i]] = rejecting;
  }
  return out;
}

}  // namespace framelens::stats

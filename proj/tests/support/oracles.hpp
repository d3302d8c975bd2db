#pragma once

// Brute-force reference implementations written from the textbook
// definitions, deliberately sharing no code with the library.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

namespace framelens::testing {

struct OracleCounts {
  double precision, recall, f1;
};

inline OracleCounts oracle_prf1(const std::vector<int>& pred, const std::vector<int>& gold) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tp += pred[i] && gold[i];
    fp += pred[i] && !gold[i];
    fn += !pred[i] && gold[i];
  }
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return {p, r, p + r > 0 ? 2 * p * r / (p + r) : 0.0};
}

// Mean over rows with a gold positive of
//   (1/|Y|) sum_{j in Y} |{k in Y : s_k >= s_j}| / |{k : s_k >= s_j}|.
inline std::optional<double> oracle_lrap(const std::vector<std::vector<double>>& scores,
                                         const std::vector<std::vector<int>>& gold) {
  double total = 0;
  int used = 0;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    const auto& s = scores[r];
    const auto& g = gold[r];
    double row = 0;
    int positives = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!g[j]) continue;
      ++positives;
      double rank = 0, rank_pos = 0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] >= s[j]) {
          ++rank;
          rank_pos += g[k];
        }
      }
      row += rank_pos / rank;
    }
    if (positives == 0) continue;
    total += row / positives;
    ++used;
  }
  if (used == 0) return std::nullopt;
  return total / used;
}

// Two-sided exact binomial(n, 1/2) p-value: total mass of outcomes no more
// likely than the observed one, with exact integer binomial coefficients.
inline double oracle_binomial_two_sided(int k, int n) {
  std::vector<std::vector<std::uint64_t>> pascal(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    pascal[i].assign(static_cast<std::size_t>(i) + 1, 1);
    for (int j = 1; j < i; ++j) pascal[i][j] = pascal[i - 1][j - 1] + pascal[i - 1][j];
  }
  const auto& row = pascal[static_cast<std::size_t>(n)];
  const std::uint64_t observed = row[static_cast<std::size_t>(k)];
  long double mass = 0;
  for (auto c : row)
    if (c <= observed) mass += static_cast<long double>(c);
  const long double p = mass / static_cast<long double>(std::uint64_t{1} << n);
  return static_cast<double>(std::min<long double>(1.0L, p));
}

// Holm step-down by definition: sort ascending, reject while
// p_(i) <= alpha / (m - i), stop at the first failure.
inline std::vector<bool> oracle_holm_reject(const std::vector<double>& p, double alpha) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    if (p[order[i]] > alpha / static_cast<double>(m - i)) break;
    reject[order[i]] = true;
  }
  return reject;
}

// Krippendorff's alpha from ordered pairable-value pairs.
inline std::optional<double> oracle_alpha(const std::vector<std::vector<int>>& units) {
  std::vector<int> pool;
  double within = 0.0;
  for (const auto& u : units) {
    if (u.size() < 2) continue;
    pool.insert(pool.end(), u.begin(), u.end());
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t j = 0; j < u.size(); ++j) d += i != j && u[i] != u[j];
    within += d / static_cast<double>(u.size() - 1);
  }
  const double n = static_cast<double>(pool.size());
  if (n < 2.0) return std::nullopt;
  double across = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = 0; j < pool.size(); ++j) across += i != j && pool[i] != pool[j];
  const double d_e = across / (n * (n - 1.0));
  if (d_e == 0.0) return std::nullopt;
  return 1.0 - (within / n) / d_e;
}

}  // namespace framelens::testing

#include <cmath>
#include <vector>

#include "doctest.h"
#include "framelens/errors.hpp"
#include "framelens/metrics.hpp"
#include "framelens/rng.hpp"
#include "oracles.hpp"

using namespace framelens;

namespace {

struct Instance {
  RealMatrix scores;
  BinaryMatrix pred;
  BinaryMatrix gold;
};

// Scores are quantized to a few levels so ties are common.
Instance random_instance(Rng& rng, std::size_t rows, std::size_t cols) {
  Instance x{RealMatrix(rows, cols), BinaryMatrix(rows, cols), BinaryMatrix(rows, cols)};
  const double density = rng.uniform();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      x.scores(r, c) = static_cast<double>(rng.below(5)) / 4.0;
      x.pred(r, c) = rng.bernoulli(density);
      x.gold(r, c) = rng.bernoulli(density);
    }
  }
  return x;
}

std::vector<int> ints(const std::vector<std::uint8_t>& v) { return {v.begin(), v.end()}; }

std::vector<std::vector<double>> nested(const RealMatrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < m.rows; ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
  return out;
}

std::vector<std::vector<int>> nested(const BinaryMatrix& m) {
  std::vector<std::vector<int>> out;
  for (std::size_t r = 0; r < m.rows; ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
  return out;
}

}  // namespace

TEST_CASE("prf1 and LRAP match definitional oracles") {
  Rng rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    const auto rows = 1 + rng.below(50);
    const auto cols = 1 + rng.below(8);
    const auto x = random_instance(rng, rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
      const auto got = prf1(x.pred.column(c), x.gold.column(c));
      const auto want = testing::oracle_prf1(ints(x.pred.column(c)), ints(x.gold.column(c)));
      CHECK(std::abs(got.precision - want.precision) < 1e-9);
      CHECK(std::abs(got.recall - want.recall) < 1e-9);
      CHECK(std::abs(got.f1 - want.f1) < 1e-9);
    }
    const auto want = testing::oracle_lrap(nested(x.scores), nested(x.gold));
    if (want) {
      CHECK(std::abs(lrap(x.scores, x.gold).value - *want) < 1e-9);
    } else {
      CHECK_THROWS_AS(lrap(x.scores, x.gold), ValidationError);
    }
  }
}

TEST_CASE("macro averages are unweighted means over the typology's frames") {
  Rng rng(7);
  for (Typology t : kTypologies) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto cols = load_schema().count(t);
      const auto x = random_instance(rng, 1 + rng.below(50), cols);
      const auto rep = macro_report(t, x.scores, x.pred, x.gold);
      double p = 0, r = 0, f = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        const auto o = testing::oracle_prf1(ints(x.pred.column(c)), ints(x.gold.column(c)));
        p += o.precision;
        r += o.recall;
        f += o.f1;
      }
      CHECK(std::abs(rep.macro_precision - p / cols) < 1e-9);
      CHECK(std::abs(rep.macro_recall - r / cols) < 1e-9);
      CHECK(std::abs(rep.macro_f1 - f / cols) < 1e-9);
    }
  }
}

TEST_CASE("prf1 edge conventions") {
  const std::vector<std::uint8_t> zeros{0, 0, 0}, ones{1, 1, 1};
  const auto none_predicted = prf1(zeros, ones);
  CHECK(none_predicted.precision == 0.0);
  CHECK(none_predicted.f1 == 0.0);
  const auto no_gold = prf1(ones, zeros);
  CHECK(no_gold.recall == 0.0);
  CHECK(no_gold.support == 0);
  CHECK(prf1(ones, ones).f1 == 1.0);
}

TEST_CASE("LRAP excludes rows without gold positives") {
  RealMatrix s(2, 3);
  BinaryMatrix g(2, 3);
  s(0, 0) = 0.9, s(0, 1) = 0.1, s(0, 2) = 0.5;
  g(0, 1) = 1;
  const auto r = lrap(s, g);
  CHECK(r.value == doctest::Approx(1.0 / 3.0));
  CHECK(r.rows_used == 1);
  CHECK(r.rows_excluded == 1);
}

TEST_CASE("exact McNemar equals binomial mass enumeration for b + c <= 30") {
  for (int n = 1; n <= 30; ++n) {
    for (int b = 0; b <= n; ++b) {
      std::vector<std::uint8_t> a, c;
      for (int i = 0; i < b; ++i) a.push_back(1), c.push_back(0);
      for (int i = b; i < n; ++i) a.push_back(0), c.push_back(1);
      a.push_back(1), c.push_back(1);  // concordant pair, ignored
      const auto got = mcnemar(a, c);
      CHECK(got.exact);
      CHECK(got.b == static_cast<std::size_t>(b));
      CHECK(std::abs(got.p_value - testing::oracle_binomial_two_sided(b, n)) < 1e-12);
    }
  }
}

TEST_CASE("McNemar b=10, c=0") {
  std::vector<std::uint8_t> a(10, 1), b(10, 0);
  const auto r = mcnemar(a, b);
  CHECK(std::abs(r.p_value - 2.0 * std::pow(0.5, 10)) < 1e-12);
  CHECK(std::abs(r.p_value - 0.00195) < 1e-5);
}

TEST_CASE("McNemar identical classifiers give p = 1 and large counts use chi-square") {
  std::vector<std::uint8_t> a{1, 0, 1, 1};
  CHECK(mcnemar(a, a).p_value == 1.0);
  std::vector<std::uint8_t> x(150, 1), y(150, 0);
  for (int i = 0; i < 60; ++i) x[i] = 0, y[i] = 1;
  const auto r = mcnemar(x, y);
  CHECK_FALSE(r.exact);
  const double stat = (std::abs(90.0 - 60.0) - 1.0) * (std::abs(90.0 - 60.0) - 1.0) / 150.0;
  CHECK(r.p_value == doctest::Approx(std::erfc(std::sqrt(stat / 2.0))));
}

TEST_CASE("correctness pairing units") {
  BinaryMatrix p(2, 2), g(2, 2);
  p(0, 0) = 1, g(0, 0) = 1;
  p(1, 1) = 1;
  CHECK(correctness(p, g, PairingUnit::Decision) == std::vector<std::uint8_t>{1, 1, 1, 0});
  CHECK(correctness(p, g, PairingUnit::Instance) == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("bootstrap is seeded and brackets the mean") {
  std::vector<double> values;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) values.push_back(rng.normal(1.0, 1.0));
  const ResampleStatistic mean = [&](std::span<const std::size_t> idx) -> std::optional<double> {
    double s = 0;
    for (auto i : idx) s += values[i];
    return s / static_cast<double>(idx.size());
  };
  const auto a = bootstrap(mean, values.size(), 500, 9);
  const auto b = bootstrap(mean, values.size(), 500, 9);
  CHECK(a.mean == b.mean);
  CHECK(a.ci_low == b.ci_low);
  CHECK(a.ci_low < a.mean);
  CHECK(a.mean < a.ci_high);
  CHECK(a.ci_high - a.ci_low == doctest::Approx(2 * 1.96 / std::sqrt(200.0)).epsilon(0.25));
}

TEST_CASE("bootstrap redraws undefined resamples") {
  // Undefined whenever index 0 is absent: about 37% of resamples of size 3.
  const ResampleStatistic stat = [](std::span<const std::size_t> idx) -> std::optional<double> {
    for (auto i : idx)
      if (i == 0) return 1.0;
    return std::nullopt;
  };
  const auto r = bootstrap(stat, 3, 200, 1);
  CHECK(r.redraws > 0);
  CHECK(r.mean == 1.0);
}

TEST_CASE("region subgroups partition the rows") {
  std::vector<PostRecord> recs(6);
  std::vector<const PostRecord*> ptrs;
  const Region regions[] = {Region::US, Region::GB, Region::EU, Region::US, Region::GB, Region::US};
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].region = regions[i];
    ptrs.push_back(&recs[i]);
  }
  RealMatrix s(6, 2, 0.7);
  BinaryMatrix g(6, 2, 1);
  const auto m = ScoreMatrix::from_scores(Typology::Narrative, {"a", "b", "c", "d", "e", "f"}, s, 0.5);
  const auto sub = subgroup_eval(m, g, ptrs, SubgroupDimension::Region);
  std::size_t total = 0;
  for (const auto& [key, rep] : sub.reports) total += rep.n_instances;
  CHECK(total == 6);
  CHECK(sub.reports.at({SubgroupDimension::Region, "US"}).n_instances == 3);
}

TEST_CASE("evaluation CSV columns") {
  RealMatrix s(2, 2, 0.7);
  BinaryMatrix g(2, 2, 1);
  const auto rep = macro_report(ScoreMatrix::from_scores(Typology::Narrative, {"a", "b"}, s, 0.5), g);
  const auto csv = rep.to_csv();
  CHECK(csv.substr(0, csv.find('\n')) == "frame_type,frame,precision,recall,f1,support,lrap");
}

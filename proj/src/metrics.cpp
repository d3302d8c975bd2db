#include "framelens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "framelens/errors.hpp"
#include "framelens/io.hpp"
#include "framelens/rng.hpp"

namespace framelens {

Prf1 prf1(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("prf1: prediction length " + std::to_string(pred.size()) + " != gold length " +
                          std::to_string(gold.size()));
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && gold[i]) ++tp;
    else if (pred[i]) ++fp;
    else if (gold[i]) ++fn;
  }
  Prf1 out;
  out.support = tp + fn;
  out.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

LrapResult lrap(const RealMatrix& scores, const BinaryMatrix& gold) {
  if (scores.rows != gold.rows || scores.cols != gold.cols) throw ValidationError("lrap: shape mismatch");
  LrapResult out;
  double total = 0.0;
  std::vector<std::size_t> order(scores.cols);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    const auto s = scores.row(r);
    const auto g = gold.row(r);
    const auto positives = static_cast<std::size_t>(std::count(g.begin(), g.end(), 1));
    if (positives == 0) {
      ++out.rows_excluded;
      continue;
    }
    // Walk labels in descending score; tied labels count as ranked at or above each other.
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    double row_sum = 0.0;
    std::size_t seen = 0, seen_pos = 0;
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      std::size_t block_pos = 0;
      while (j < order.size() && s[order[j]] == s[order[i]]) block_pos += g[order[j++]];
      seen += j - i;
      seen_pos += block_pos;
      row_sum += static_cast<double>(block_pos) * static_cast<double>(seen_pos) / static_cast<double>(seen);
      i = j;
    }
    total += row_sum / static_cast<double>(positives);
    ++out.rows_used;
  }
  if (out.rows_used == 0) throw ValidationError("lrap: no row has a gold positive");
  out.value = total / static_cast<double>(out.rows_used);
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

BootstrapResult bootstrap(const ResampleStatistic& statistic, std::size_t n_instances, std::size_t resamples,
                          std::uint64_t seed) {
  if (resamples < 1) throw ValidationError("bootstrap needs at least one resample");
  if (n_instances < 1) throw ValidationError("bootstrap needs at least one instance");
  Rng rng(seed);
  std::vector<double> values;
  values.reserve(resamples);
  std::vector<std::size_t> idx(n_instances);
  BootstrapResult out;
  while (values.size() < resamples) {
    for (auto& i : idx) i = rng.below(n_instances);
    if (auto v = statistic(idx)) {
      values.push_back(*v);
    } else if (++out.redraws > 10 * resamples) {
      throw ValidationError("bootstrap statistic undefined on too many resamples");
    }
  }
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  out.ci_low = quantile_sorted(values, 0.025);
  out.ci_high = quantile_sorted(values, 0.975);
  return out;
}

double binomial_two_sided_half(std::size_t k, std::size_t n) {
  if (n == 0) return 1.0;
  const std::size_t tail = std::min(k, n - k);
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  double sum = 0.0;
  for (std::size_t i = 0; i <= tail; ++i) {
    const double log_choose = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(i) + 1.0) -
                              std::lgamma(static_cast<double>(n - i) + 1.0);
    sum += std::exp(log_choose + log_half_n);
  }
  return std::min(1.0, 2.0 * sum);
}

McNemarResult mcnemar(std::span<const std::uint8_t> correct_a, std::span<const std::uint8_t> correct_b) {
  if (correct_a.size() != correct_b.size()) throw ValidationError("mcnemar: length mismatch");
  McNemarResult out;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if (correct_a[i] && !correct_b[i]) ++out.b;
    if (!correct_a[i] && correct_b[i]) ++out.c;
  }
  const std::size_t n = out.b + out.c;
  if (n == 0) {
    out.p_value = 1.0;
  } else if (n <= 100) {
    out.p_value = binomial_two_sided_half(out.b, n);
  } else {
    out.exact = false;
    const double diff = std::max(0.0, std::fabs(static_cast<double>(out.b) - static_cast<double>(out.c)) - 1.0);
    const double stat = diff * diff / static_cast<double>(n);
    out.p_value = std::erfc(std::sqrt(stat / 2.0));
  }
  return out;
}

std::vector<std::uint8_t> correctness(const BinaryMatrix& pred, const BinaryMatrix& gold, PairingUnit unit) {
  if (pred.rows != gold.rows || pred.cols != gold.cols) throw ValidationError("correctness: shape mismatch");
  std::vector<std::uint8_t> out;
  if (unit == PairingUnit::Decision) {
    out.resize(pred.data.size());
    for (std::size_t i = 0; i < pred.data.size(); ++i) out[i] = pred.data[i] == gold.data[i];
  } else {
    out.resize(pred.rows);
    for (std::size_t r = 0; r < pred.rows; ++r) {
      out[r] = std::equal(pred.row(r).begin(), pred.row(r).end(), gold.row(r).begin());
    }
  }
  return out;
}

EvalReport macro_report(Typology t, const RealMatrix& scores, const BinaryMatrix& predicted,
                        const BinaryMatrix& gold) {
  const auto frames = load_schema().frames(t);
  if (predicted.rows != gold.rows || predicted.cols != gold.cols || scores.rows != gold.rows ||
      scores.cols != gold.cols) {
    throw ValidationError("macro_report: shape mismatch");
  }
  if (gold.cols != frames.size()) throw SchemaMismatchError("macro_report: column count does not match typology");
  EvalReport rep;
  rep.typology = t;
  rep.n_instances = gold.rows;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto p = predicted.column(f);
    const auto g = gold.column(f);
    rep.frames.push_back({frames[f].id, prf1(p, g)});
    rep.macro_precision += rep.frames.back().scores.precision;
    rep.macro_recall += rep.frames.back().scores.recall;
    rep.macro_f1 += rep.frames.back().scores.f1;
  }
  const auto k = static_cast<double>(frames.size());
  rep.macro_precision /= k;
  rep.macro_recall /= k;
  rep.macro_f1 /= k;
  bool any_positive = std::find(gold.data.begin(), gold.data.end(), 1) != gold.data.end();
  if (any_positive) rep.lrap = lrap(scores, gold);
  return rep;
}

EvalReport macro_report(const ScoreMatrix& scores, const BinaryMatrix& gold) {
  return macro_report(scores.typology, scores.scores, scores.labels, gold);
}

void add_bootstrap(EvalReport& report, const RealMatrix& scores, const BinaryMatrix& predicted,
                   const BinaryMatrix& gold, std::size_t resamples, std::uint64_t seed) {
  auto run = [&](auto pick) {
    return bootstrap(
        [&](std::span<const std::size_t> idx) -> std::optional<double> {
          const auto s = scores.select_rows(idx);
          const auto p = predicted.select_rows(idx);
          const auto g = gold.select_rows(idx);
          const auto rep = macro_report(report.typology, s, p, g);
          return pick(rep);
        },
        gold.rows, resamples, seed);
  };
  report.bootstrap["macro_precision"] = run([](const EvalReport& r) { return std::optional(r.macro_precision); });
  report.bootstrap["macro_recall"] = run([](const EvalReport& r) { return std::optional(r.macro_recall); });
  report.bootstrap["macro_f1"] = run([](const EvalReport& r) { return std::optional(r.macro_f1); });
  if (report.lrap) {
    report.bootstrap["lrap"] = run([](const EvalReport& r) -> std::optional<double> {
      if (!r.lrap) return std::nullopt;
      return r.lrap->value;
    });
  }
}

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["typology"] = typology_slug(typology);
  j["n_instances"] = n_instances;
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  if (lrap) {
    j["lrap"] = lrap->value;
    j["lrap_rows_excluded"] = lrap->rows_excluded;
  } else {
    j["lrap"] = nullptr;
  }
  auto& fr = j["frames"] = nlohmann::ordered_json::array();
  for (const auto& f : frames) {
    fr.push_back({{"frame", f.frame_id},
                  {"precision", f.scores.precision},
                  {"recall", f.scores.recall},
                  {"f1", f.scores.f1},
                  {"support", f.scores.support}});
  }
  auto& bs = j["bootstrap"] = nlohmann::ordered_json::object();
  for (const auto& [name, b] : bootstrap) {
    bs[name] = {{"mean", b.mean}, {"ci_low", b.ci_low}, {"ci_high", b.ci_high}};
  }
  j["metadata"] = metadata;
  return j;
}

std::string EvalReport::to_csv(bool with_header) const {
  std::string out;
  if (with_header) out += std::string(kEvalCsvHeader) + "\n";
  const auto& schema = load_schema();
  const std::string lrap_text = lrap ? io::fixed(lrap->value, 3) : "";
  for (const auto& f : frames) {
    out += io::csv_row({std::string(typology_display(typology)), schema.find(f.frame_id)->display_name,
                        io::fixed(f.scores.precision, 3), io::fixed(f.scores.recall, 3), io::fixed(f.scores.f1, 3),
                        std::to_string(f.scores.support), lrap_text});
  }
  return out;
}

SubgroupEval subgroup_eval(const ScoreMatrix& scores, const BinaryMatrix& gold,
                           const std::vector<const PostRecord*>& records, SubgroupDimension dimension) {
  if (records.size() != gold.rows || scores.scores.rows != gold.rows) {
    throw ValidationError("subgroup_eval: records, scores and gold must align");
  }
  SubgroupEval out;
  std::map<SubgroupKey, std::vector<std::size_t>> parts;
  if (dimension == SubgroupDimension::Region) {
    for (Region r : {Region::US, Region::GB, Region::EU}) parts[{dimension, std::string(region_code(r))}];
    for (std::size_t i = 0; i < records.size(); ++i) {
      parts[{dimension, std::string(region_code(records[i]->region))}].push_back(i);
    }
  } else {
    parts[{dimension, "liberal"}];
    parts[{dimension, "conservative"}];
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& ideology = records[i]->author.ideology;
      if (!ideology || *ideology == 0.0) {
        ++out.excluded;
        continue;
      }
      parts[{dimension, *ideology < 0.0 ? "liberal" : "conservative"}].push_back(i);
    }
  }
  for (const auto& [key, idx] : parts) {
    if (idx.empty()) {
      out.notes.push_back("subgroup " + key.value + " is empty; omitted");
      continue;
    }
    auto rep = macro_report(scores.typology, scores.scores.select_rows(idx), scores.labels.select_rows(idx),
                            gold.select_rows(idx));
    rep.metadata["subgroup"] = key.value;
    out.reports.emplace(key, std::move(rep));
  }
  return out;
}

}  // namespace framelens

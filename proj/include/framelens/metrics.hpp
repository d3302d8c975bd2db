#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "framelens/corpus.hpp"
#include "framelens/matrix.hpp"
#include "framelens/schema.hpp"
#include "framelens/score_matrix.hpp"
#include "json.hpp"

namespace framelens {

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Precision is 0 without predicted positives, recall 0 without gold
/// positives, F1 0 when precision + recall is 0.
Prf1 prf1(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gold);

struct LrapResult {
  double value = 0.0;
  std::size_t rows_used = 0;
  std::size_t rows_excluded = 0;  // rows without a gold positive
};

/// Label ranking average precision. Rows without a gold positive are
/// excluded; throws ValidationError when every row lacks one.
LrapResult lrap(const RealMatrix& scores, const BinaryMatrix& gold);

struct BootstrapResult {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t redraws = 0;
};

/// Statistic over a resample given as instance indices; nullopt means undefined.
using ResampleStatistic = std::function<std::optional<double>(std::span<const std::size_t>)>;

/// `resamples` draws with replacement over `n_instances`, percentile 95% CI.
/// Undefined resamples are redrawn, at most 10 * resamples times.
BootstrapResult bootstrap(const ResampleStatistic& statistic, std::size_t n_instances, std::size_t resamples,
                          std::uint64_t seed);

struct McNemarResult {
  std::size_t b = 0;  // A correct, B wrong
  std::size_t c = 0;  // A wrong, B correct
  double p_value = 1.0;
  bool exact = true;
};

/// Exact two-sided binomial test when b + c <= 100, otherwise chi-square
/// with continuity correction.
McNemarResult mcnemar(std::span<const std::uint8_t> correct_a, std::span<const std::uint8_t> correct_b);

/// Two-sided exact binomial p-value for k successes out of n at p = 0.5.
double binomial_two_sided_half(std::size_t k, std::size_t n);

enum class PairingUnit { Decision, Instance };

/// Per-decision (row, frame) or per-instance (all frames exact) correctness.
std::vector<std::uint8_t> correctness(const BinaryMatrix& pred, const BinaryMatrix& gold, PairingUnit unit);

struct FrameMetrics {
  std::string frame_id;
  Prf1 scores;
};

struct EvalReport {
  Typology typology = Typology::Narrative;
  std::vector<FrameMetrics> frames;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::optional<LrapResult> lrap;
  std::size_t n_instances = 0;
  std::map<std::string, BootstrapResult> bootstrap;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  /// Rows for a per-frame table: frame_type, frame, precision, recall, f1, support, lrap.
  std::string to_csv(bool with_header = true) const;
};

inline constexpr const char* kEvalCsvHeader = "frame_type,frame,precision,recall,f1,support,lrap";

/// Per-frame prf1 over the thresholded labels, unweighted macro averages and
/// LRAP over raw scores.
EvalReport macro_report(const ScoreMatrix& scores, const BinaryMatrix& gold);
EvalReport macro_report(Typology t, const RealMatrix& scores, const BinaryMatrix& predicted,
                        const BinaryMatrix& gold);

/// Adds bootstrap mean and CI for macro precision/recall/F1 and LRAP.
void add_bootstrap(EvalReport& report, const RealMatrix& scores, const BinaryMatrix& predicted,
                   const BinaryMatrix& gold, std::size_t resamples, std::uint64_t seed);

enum class SubgroupDimension { Region, IdeologyBin };

struct SubgroupKey {
  SubgroupDimension dimension;
  std::string value;  // US/GB/EU or liberal/conservative

  auto operator<=>(const SubgroupKey&) const = default;
};

struct SubgroupEval {
  std::map<SubgroupKey, EvalReport> reports;
  std::size_t excluded = 0;  // missing ideology or exactly zero
  std::vector<std::string> notes;
};

/// Splits rows by region or by ideology sign (negative liberal, positive
/// conservative) and evaluates each part. `records[i]` describes row i.
SubgroupEval subgroup_eval(const ScoreMatrix& scores, const BinaryMatrix& gold,
                           const std::vector<const PostRecord*>& records, SubgroupDimension dimension);

}  // namespace framelens

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "framelens/schema.hpp"

namespace framelens {

/// Multi-annotator frame labels keyed by (post, annotator, typology).
class AnnotationSet {
 public:
  /// Throws ValidationError if the key already exists, SchemaMismatchError on a malformed vector.
  void add(const std::string& post_id, const std::string& annotator_id, const LabelVector& labels);

  /// annotator -> labels for one post and typology; empty when unannotated.
  const std::map<std::string, LabelVector>& labels(Typology t, const std::string& post_id) const;
  std::vector<std::string> posts(Typology t) const;
  std::set<std::string> posts() const;
  std::set<std::string> annotators() const;
  /// Which annotators labeled which posts, across typologies.
  std::map<std::string, std::set<std::string>> coverage() const;
  bool has(Typology t) const;
  std::size_t size() const;

 private:
  std::map<Typology, std::map<std::string, std::map<std::string, LabelVector>>> entries_;
};

/// Reads newline-delimited {post_id, annotator_id, typology, frames: [ids]}.
AnnotationSet load_annotations(const std::filesystem::path& path);

struct AlphaResult {
  std::optional<double> alpha;  // nullopt: expected disagreement is zero
  std::size_t n_units = 0;      // units with at least two ratings
  std::size_t n_values = 0;     // pairable values

  bool defined() const { return alpha.has_value(); }
};

/// Nominal Krippendorff's alpha from the coincidence matrix. Each inner
/// vector holds the (non-missing) ratings of one unit; units with fewer than
/// two ratings are ignored.
AlphaResult krippendorff_alpha(const std::vector<std::vector<int>>& units);

struct FrameAlpha {
  std::string frame_id;
  AlphaResult result;
};

struct TypologyAgreement {
  Typology typology;
  std::vector<FrameAlpha> frames;
  std::optional<double> mean_alpha;  // unweighted over defined frames
  std::size_t undefined_count = 0;
  AlphaResult pooled;  // every (post, frame) decision as one unit
};

/// Per-frame alpha for one typology. Throws ValidationError when no post has
/// two annotators and UndefinedAgreementError when no frame is defined.
TypologyAgreement typology_alpha(const AnnotationSet& annotations, Typology t);

enum class Provenance { Single, PairConsensus };

struct ConsensusRecord {
  std::string post_id;
  std::map<Typology, LabelVector> labels;
  Provenance provenance = Provenance::Single;
  std::vector<std::string> annotators;
};

struct Adjudication {
  std::string post_id;
  std::string frame_id;
  bool value = false;
};

std::vector<Adjudication> load_adjudications(const std::filesystem::path& path);

struct PendingDisagreement {
  std::string post_id;
  std::string frame_id;
  std::vector<std::string> annotators;
};

struct ConsensusResult {
  std::vector<ConsensusRecord> records;
  std::vector<PendingDisagreement> pending;
};

/// Unanimous frame decisions pass through; every disagreement needs an
/// adjudication entry, otherwise the post is held back as pending.
ConsensusResult consensus_merge(const AnnotationSet& annotations, const std::vector<Adjudication>& adjudications = {});

/// One JSON line per record: {post_id, provenance, annotators, labels: {typology: [frame ids]}}.
std::string consensus_jsonl(const std::vector<ConsensusRecord>& records);

/// Gold labels keyed by post, then typology.
using GoldLabels = std::map<std::string, std::map<Typology, LabelVector>>;
GoldLabels load_gold_labels(const std::filesystem::path& path);

struct HumanMachineAgreement {
  double mean_alpha = 0.0;
  std::map<std::string, double> per_annotator;
  std::size_t n_posts = 0;
};

/// Mean per-frame alpha between the machine and each human, averaged over humans.
HumanMachineAgreement human_machine_alpha(const std::map<std::string, LabelVector>& predictions,
                                          const AnnotationSet& annotations, Typology t);

}  // namespace framelens

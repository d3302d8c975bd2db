#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "framelens/matrix.hpp"
#include "framelens/schema.hpp"

namespace framelens {

/// Classifier output for one typology: rows follow input order, columns
/// follow schema order.
struct ScoreMatrix {
  Typology typology = Typology::Narrative;
  std::vector<std::string> row_ids;
  RealMatrix scores;
  BinaryMatrix labels;
  double threshold = 0.5;

  /// Thresholds with `score >= threshold`.
  static ScoreMatrix from_scores(Typology t, std::vector<std::string> row_ids, RealMatrix scores,
                                 double threshold);
  void rethreshold(double new_threshold);
};

/// CSV with a post_id column, then "<frame>_score" and "<frame>" (0/1) per frame.
/// Scores are written with 17 significant digits so they read back exactly.
std::string predictions_csv(const ScoreMatrix& m);
/// Reads predictions_csv output; the typology is inferred from the frame columns.
ScoreMatrix read_predictions_csv(const std::filesystem::path& path);

}  // namespace framelens

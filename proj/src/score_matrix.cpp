#include "framelens/score_matrix.hpp"

#include <cstdio>

#include "framelens/errors.hpp"
#include "framelens/io.hpp"

namespace framelens {

ScoreMatrix ScoreMatrix::from_scores(Typology t, std::vector<std::string> row_ids, RealMatrix scores,
                                     double threshold) {
  if (scores.cols != load_schema().count(t)) {
    throw SchemaMismatchError("score matrix has " + std::to_string(scores.cols) + " columns, typology " +
                              std::string(typology_slug(t)) + " has " + std::to_string(load_schema().count(t)));
  }
  if (row_ids.size() != scores.rows) throw ValidationError("row id count does not match score rows");
  ScoreMatrix m;
  m.typology = t;
  m.row_ids = std::move(row_ids);
  m.scores = std::move(scores);
  m.rethreshold(threshold);
  return m;
}

void ScoreMatrix::rethreshold(double new_threshold) {
  threshold = new_threshold;
  labels = BinaryMatrix(scores.rows, scores.cols);
  for (std::size_t i = 0; i < scores.data.size(); ++i) labels.data[i] = scores.data[i] >= threshold;
}

std::string predictions_csv(const ScoreMatrix& m) {
  const auto ids = load_schema().ids(m.typology);
  std::vector<std::string> header{"post_id"};
  for (const auto& id : ids) {
    header.push_back(id + "_score");
    header.push_back(id);
  }
  std::string out = io::csv_row(header);
  char buf[40];
  for (std::size_t r = 0; r < m.scores.rows; ++r) {
    std::vector<std::string> row{m.row_ids[r]};
    for (std::size_t c = 0; c < m.scores.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m.scores(r, c));
      row.emplace_back(buf);
      row.emplace_back(m.labels(r, c) ? "1" : "0");
    }
    out += io::csv_row(row);
  }
  return out;
}

ScoreMatrix read_predictions_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigurationError("missing predictions file: " + path.string());
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  io::for_each_line(path, [&](std::size_t, std::string_view line) {
    if (header.empty()) {
      header = io::parse_csv_row(line);
    } else {
      rows.push_back(io::parse_csv_row(line));
    }
  });
  if (header.size() < 3 || header[0] != "post_id" || header.size() % 2 != 1) {
    throw ValidationError(path.string() + ": not a predictions file");
  }
  const auto& schema = load_schema();
  const Frame* first = schema.find(header[2]);
  if (!first) throw SchemaMismatchError(path.string() + ": unknown frame column " + header[2]);
  const Typology t = first->typology;
  const auto ids = schema.ids(t);
  if (header.size() != 1 + 2 * ids.size()) {
    throw SchemaMismatchError(path.string() + ": expected " + std::to_string(ids.size()) + " frames for " +
                              std::string(typology_slug(t)));
  }
  for (std::size_t c = 0; c < ids.size(); ++c) {
    if (header[1 + 2 * c] != ids[c] + "_score" || header[2 + 2 * c] != ids[c]) {
      throw SchemaMismatchError(path.string() + ": frame columns out of schema order at " + ids[c]);
    }
  }
  ScoreMatrix m;
  m.typology = t;
  m.scores = RealMatrix(rows.size(), ids.size());
  m.labels = BinaryMatrix(rows.size(), ids.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      throw ValidationError(path.string() + ": row " + std::to_string(r + 2) + " has the wrong field count");
    }
    m.row_ids.push_back(rows[r][0]);
    for (std::size_t c = 0; c < ids.size(); ++c) {
      m.scores(r, c) = std::stod(rows[r][1 + 2 * c]);
      m.labels(r, c) = rows[r][2 + 2 * c] == "1";
    }
  }
  return m;
}

}  // namespace framelens

#include "framelens/design.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "framelens/errors.hpp"
#include "framelens/schema.hpp"

namespace framelens::stats {

std::string_view family_name(Family f) { return f == Family::Logistic ? "logistic" : "linear"; }

std::string_view estimator_name(Estimator e) {
  return e == Estimator::FixedOnly ? "fixed_only" : "laplace_random_intercepts";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "fixed_only") return Estimator::FixedOnly;
  if (name == "laplace_random_intercepts") return Estimator::LaplaceRandomIntercepts;
  throw ConfigurationError("unknown estimator '" + std::string(name) +
                           "' (expected fixed_only or laplace_random_intercepts)");
}

Predictor parse_predictor(std::string_view name) {
  if (name == "region") return Predictor::Region;
  if (name == "ideology") return Predictor::Ideology;
  throw ConfigurationError("unknown predictor '" + std::string(name) + "' (expected region or ideology)");
}

EngagementOutcome parse_outcome(std::string_view name) {
  if (name == "favorites") return EngagementOutcome::Favorites;
  if (name == "retweets") return EngagementOutcome::Retweets;
  throw ConfigurationError("unknown outcome '" + std::string(name) + "' (expected favorites or retweets)");
}

std::string_view predictor_name(Predictor p) { return p == Predictor::Region ? "region" : "ideology"; }
std::string_view outcome_name(EngagementOutcome o) {
  return o == EngagementOutcome::Favorites ? "favorites" : "retweets";
}

std::vector<GroupLevel> nested_date_groups(const std::vector<CivilDate>& dates) {
  auto level = [&](const std::string& name, auto key) {
    using Key = decltype(key(dates.front()));
    std::map<Key, int> ids;
    for (const auto& d : dates) ids.emplace(key(d), 0);
    int next = 0;
    for (auto& [k, id] : ids) id = next++;
    GroupLevel g{name, {}, next};
    for (const auto& d : dates) g.index.push_back(ids.at(key(d)));
    return g;
  };
  if (dates.empty()) return {{"year", {}, 0}, {"month", {}, 0}, {"date", {}, 0}};
  return {level("year", [](const CivilDate& d) { return d.year; }),
          level("month", [](const CivilDate& d) { return std::make_tuple(d.year, d.month); }),
          level("date", [](const CivilDate& d) { return std::make_tuple(d.year, d.month, d.day); })};
}

std::optional<std::size_t> DesignMatrix::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns.begin());
}

void DesignBuilder::add_numeric(const std::string& name, std::vector<double> values) {
  if (values.size() != rows_) throw ValidationError("column " + name + " has the wrong number of rows");
  names_.push_back(name);
  columns_.push_back(std::move(values));
}

void DesignBuilder::add_categorical(const std::string& prefix, const std::vector<std::string>& values,
                                    const std::string& reference) {
  if (values.size() != rows_) throw ValidationError("column " + prefix + " has the wrong number of rows");
  std::set<std::string> levels(values.begin(), values.end());
  levels.erase(reference);
  for (const auto& level : levels) {
    std::vector<double> col(rows_);
    for (std::size_t i = 0; i < rows_; ++i) col[i] = values[i] == level ? 1.0 : 0.0;
    add_numeric(prefix + level, std::move(col));
  }
}

void DesignBuilder::add_indicator(const std::string& prefix, const std::vector<bool>& values) {
  // Always emitted so an all-zero indicator shows up as a dropped constant column.
  std::vector<double> col;
  col.reserve(values.size());
  for (bool v : values) col.push_back(v ? 1.0 : 0.0);
  add_numeric(prefix + "1", std::move(col));
}

DesignMatrix DesignBuilder::build(std::string outcome, Eigen::VectorXd y, std::vector<std::string> row_ids,
                                  std::vector<GroupLevel> groups, DesignReport report) const {
  const auto n = static_cast<Eigen::Index>(rows_);
  if (y.size() != n || row_ids.size() != rows_) throw ValidationError("outcome and row ids must match the design rows");

  // Sequential Gram-Schmidt against the intercept and the columns kept so far.
  std::vector<Eigen::VectorXd> basis{Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(n, 1))))};
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const Eigen::Map<const Eigen::VectorXd> col(columns_[c].data(), n);
    if (n == 0 || (col.array() == col[0]).all()) {
      report.notes.push_back("dropped constant column " + names_[c]);
      continue;
    }
    Eigen::VectorXd r = col;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) r -= q.dot(r) * q;
    }
    if (r.norm() <= 1e-9 * col.norm()) {
      report.notes.push_back("dropped collinear column " + names_[c]);
      continue;
    }
    basis.push_back(r / r.norm());
    kept.push_back(c);
  }

  DesignMatrix d;
  d.outcome = std::move(outcome);
  d.x.resize(n, static_cast<Eigen::Index>(kept.size() + 1));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    d.columns.push_back(names_[kept[j]]);
    d.x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(columns_[kept[j]].data(), n);
  }
  d.columns.push_back("Constant");
  d.x.col(static_cast<Eigen::Index>(kept.size())).setOnes();
  d.y = std::move(y);
  d.row_ids = std::move(row_ids);
  for (auto& g : groups) {
    if (g.index.size() != rows_) throw ValidationError("group level " + g.name + " has the wrong number of rows");
    if (g.n_groups < 2) {
      report.notes.push_back("dropped random-intercept level " + g.name + " with fewer than 2 groups");
      continue;
    }
    d.groups.push_back(std::move(g));
  }
  d.report = std::move(report);
  return d;
}

namespace {

void add_controls(DesignBuilder& b, const std::vector<const PostRecord*>& rows) {
  auto flag = [&](auto get) {
    std::vector<bool> out;
    for (const auto* r : rows) out.push_back(get(*r));
    return out;
  };
  auto real = [&](auto get) {
    std::vector<double> out;
    for (const auto* r : rows) out.push_back(get(*r));
    return out;
  };
  b.add_indicator("has_hashtag", flag([](const PostRecord& r) { return r.controls.has_hashtag; }));
  b.add_indicator("has_mention", flag([](const PostRecord& r) { return r.controls.has_mention; }));
  b.add_indicator("has_url", flag([](const PostRecord& r) { return r.controls.has_url; }));
  b.add_indicator("is_quote_status", flag([](const PostRecord& r) { return r.is_quote; }));
  b.add_indicator("is_reply", flag([](const PostRecord& r) { return r.is_reply; }));
  b.add_indicator("is_verified", flag([](const PostRecord& r) { return r.author.verified; }));
  b.add_numeric("log_chars", real([](const PostRecord& r) { return r.controls.log_chars; }));
  b.add_numeric("log_followers", real([](const PostRecord& r) { return r.controls.log_followers; }));
  b.add_numeric("log_following", real([](const PostRecord& r) { return r.controls.log_following; }));
  b.add_numeric("log_statuses", real([](const PostRecord& r) { return r.controls.log_statuses; }));
}

std::vector<GroupLevel> groups_for(const std::vector<const PostRecord*>& rows) {
  std::vector<CivilDate> dates;
  for (const auto* r : rows) dates.push_back(r->date);
  return nested_date_groups(dates);
}

std::vector<std::string> ids_for(const std::vector<const PostRecord*>& rows) {
  std::vector<std::string> ids;
  for (const auto* r : rows) ids.push_back(r->post_id);
  return ids;
}

}  // namespace

DesignMatrix build_frame_building_design(const std::vector<PostRecord>& records, const FrameCalls& calls,
                                         Predictor predictor, const std::string& frame_id) {
  if (!load_schema().find(frame_id)) throw SchemaMismatchError("unknown frame id: " + frame_id);
  DesignReport report;
  report.input_rows = records.size();
  std::size_t no_prediction = 0, not_us = 0, no_ideology = 0;
  std::vector<const PostRecord*> rows;
  for (const auto& r : records) {
    if (!calls.contains(r.post_id)) {
      ++no_prediction;
    } else if (predictor == Predictor::Ideology && r.region != Region::US) {
      ++not_us;
    } else if (predictor == Predictor::Ideology && !r.author.ideology) {
      ++no_ideology;
    } else {
      rows.push_back(&r);
    }
  }
  report.excluded_rows = no_prediction + not_us + no_ideology;
  if (no_prediction) report.notes.push_back("excluded " + std::to_string(no_prediction) + " records without predictions");
  if (not_us) report.notes.push_back("excluded " + std::to_string(not_us) + " non-US records");
  if (no_ideology) report.notes.push_back("excluded " + std::to_string(no_ideology) + " records without ideology");

  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y[static_cast<Eigen::Index>(i)] = calls.at(rows[i]->post_id).contains(frame_id) ? 1.0 : 0.0;
  }
  if (rows.empty() || y.sum() == 0.0) {
    throw DegenerateOutcomeError("frame " + frame_id + " is never predicted present in the " +
                                 std::string(predictor_name(predictor)) + " sample");
  }
  if (y.sum() == static_cast<double>(rows.size())) {
    throw DegenerateOutcomeError("frame " + frame_id + " is predicted present on every post in the " +
                                 std::string(predictor_name(predictor)) + " sample");
  }

  DesignBuilder b(rows.size());
  if (predictor == Predictor::Region) {
    std::vector<std::string> regions;
    for (const auto* r : rows) regions.emplace_back(region_code(r->region));
    b.add_categorical("country", regions, "US");
  } else {
    std::vector<double> ideology;
    for (const auto* r : rows) ideology.push_back(*r->author.ideology);
    b.add_numeric("ideology", std::move(ideology));
  }
  add_controls(b, rows);
  return b.build(frame_id, std::move(y), ids_for(rows), groups_for(rows), std::move(report));
}

DesignMatrix build_frame_setting_design(const std::vector<PostRecord>& records, const FrameCalls& calls,
                                        EngagementOutcome outcome, const std::vector<std::string>& frames) {
  const auto& schema = load_schema();
  std::vector<std::string> focal = frames;
  if (focal.empty()) {
    for (const auto& f : schema.all()) focal.push_back(f.id);
  }
  for (const auto& f : focal) {
    if (!schema.find(f)) throw SchemaMismatchError("unknown frame id: " + f);
  }
  std::sort(focal.begin(), focal.end());

  DesignReport report;
  report.input_rows = records.size();
  std::size_t no_prediction = 0, not_us = 0, no_ideology = 0;
  std::vector<const PostRecord*> rows;
  for (const auto& r : records) {
    if (!calls.contains(r.post_id)) {
      ++no_prediction;
    } else if (r.region != Region::US) {
      ++not_us;
    } else if (!r.author.ideology) {
      ++no_ideology;
    } else {
      rows.push_back(&r);
    }
  }
  report.excluded_rows = no_prediction + not_us + no_ideology;
  if (no_prediction) report.notes.push_back("excluded " + std::to_string(no_prediction) + " records without predictions");
  if (not_us) report.notes.push_back("excluded " + std::to_string(not_us) + " non-US records");
  if (no_ideology) report.notes.push_back("excluded " + std::to_string(no_ideology) + " records without ideology");
  if (rows.empty()) throw DegenerateOutcomeError("no US records with ideology and predictions");

  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto count = outcome == EngagementOutcome::Favorites ? rows[i]->favorites : rows[i]->retweets;
    y[static_cast<Eigen::Index>(i)] = std::log1p(static_cast<double>(count));
  }

  DesignBuilder b(rows.size());
  for (const auto& f : focal) {
    std::vector<bool> present;
    for (const auto* r : rows) present.push_back(calls.at(r->post_id).contains(f));
    b.add_indicator(f, present);
  }
  add_controls(b, rows);
  std::vector<double> ideology;
  for (const auto* r : rows) ideology.push_back(*r->author.ideology);
  b.add_numeric("ideology", std::move(ideology));
  return b.build("log_" + std::string(outcome_name(outcome)), std::move(y), ids_for(rows), groups_for(rows),
                 std::move(report));
}

}  // namespace framelens::stats

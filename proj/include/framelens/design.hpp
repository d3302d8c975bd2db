#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "framelens/corpus.hpp"

namespace framelens::stats {

enum class Family { Logistic, Linear };
enum class Estimator { FixedOnly, LaplaceRandomIntercepts };

std::string_view family_name(Family f);
std::string_view estimator_name(Estimator e);
Estimator parse_estimator(std::string_view name);

/// One level of a random-intercept chain. `index[row]` is a group id in [0, n_groups).
struct GroupLevel {
  std::string name;
  std::vector<int> index;
  int n_groups = 0;
};

/// year, month within year, date within month; groups numbered in calendar order.
std::vector<GroupLevel> nested_date_groups(const std::vector<CivilDate>& dates);

struct DesignReport {
  std::size_t input_rows = 0;
  std::size_t excluded_rows = 0;
  std::vector<std::string> notes;  // dropped columns, dropped levels, exclusions
};

/// Fixed-effect columns end with the intercept, named "Constant".
struct DesignMatrix {
  std::string outcome;
  std::vector<std::string> columns;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> row_ids;
  std::vector<GroupLevel> groups;
  DesignReport report;

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::optional<std::size_t> column(const std::string& name) const;
};

/// Accumulates named fixed effects over a fixed set of rows, then assembles a
/// DesignMatrix with an intercept, dropping constant and collinear columns.
class DesignBuilder {
 public:
  explicit DesignBuilder(std::size_t rows) : rows_(rows) {}

  void add_numeric(const std::string& name, std::vector<double> values);
  /// One indicator per non-reference level present, named prefix + level,
  /// in sorted level order. The reference level is never emitted.
  void add_categorical(const std::string& prefix, const std::vector<std::string>& values,
                       const std::string& reference);
  /// Binary shorthand for a 0/1 categorical with reference 0, named prefix + "1".
  void add_indicator(const std::string& prefix, const std::vector<bool>& values);

  DesignMatrix build(std::string outcome, Eigen::VectorXd y, std::vector<std::string> row_ids,
                     std::vector<GroupLevel> groups, DesignReport report = {}) const;

 private:
  std::size_t rows_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

/// Posts mapped to the frame ids predicted present.
using FrameCalls = std::map<std::string, std::set<std::string>>;

enum class Predictor { Region, Ideology };
enum class EngagementOutcome { Favorites, Retweets };

Predictor parse_predictor(std::string_view name);
EngagementOutcome parse_outcome(std::string_view name);
std::string_view predictor_name(Predictor p);
std::string_view outcome_name(EngagementOutcome o);

/// Outcome: presence of `frame_id`. Region mode keeps every record and adds
/// countryEU/countryGB against US; ideology mode keeps US records with an
/// ideology score. Records without predictions are excluded and counted.
DesignMatrix build_frame_building_design(const std::vector<PostRecord>& records, const FrameCalls& calls,
                                         Predictor predictor, const std::string& frame_id);

/// Outcome: ln(1 + count) on US records with ideology. Fixed effects are the
/// indicators of `frames` (all frames when empty), the controls and ideology.
DesignMatrix build_frame_setting_design(const std::vector<PostRecord>& records, const FrameCalls& calls,
                                        EngagementOutcome outcome, const std::vector<std::string>& frames = {});

}  // namespace framelens::stats

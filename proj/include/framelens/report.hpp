#pragma once

#include <optional>
#include <string>
#include <vector>

#include "framelens/stats.hpp"

namespace framelens::report {

/// Standard: * p<0.1, ** p<0.05, *** p<0.01. Strict: * p<0.05, ** p<0.01, *** p<0.005.
enum class StarLegend { Standard, Strict };

StarLegend parse_legend(std::string_view name);
std::string_view legend_name(StarLegend legend);
std::string stars(double p, StarLegend legend);

/// Fixed decimals with thousands separators; negatives use U+2212.
std::string format_number(double value, int decimals);
/// "0.403*** (0.007)". The standard error gains digits (up to 6) when it
/// would otherwise print as zero.
std::string format_cell(double estimate, double se, double p, StarLegend legend);

/// One row per coefficient, then Observations, Log Likelihood, Akaike and
/// Bayesian criteria, then the legend. When `corrected` labels a coefficient,
/// its stars come from the Holm-adjusted p-value.
std::string format_result_table(const stats::FitResult& fit, const std::optional<stats::CorrectedResults>& corrected,
                                StarLegend legend = StarLegend::Standard, const std::string& title = "");

struct ResultRow {
  std::string frame;
  std::string coefficient;
  double estimate = 0.0;
  double se = 0.0;
  double raw_p = 1.0;
  double holm_p = 1.0;
  bool reject = false;
};

inline constexpr const char* kResultsCsvHeader = "frame,coefficient,estimate,se,raw_p,holm_p,reject";
std::string results_csv(const std::vector<ResultRow>& rows);

struct PlotPoint {
  std::string label;
  double estimate = 0.0;
  double se = 0.0;
};

struct PlotPanel {
  std::string title;
  std::vector<PlotPoint> points;
};

/// Coefficient dot plot: one panel per entry, labels on the y axis, estimates
/// with 95% Wald intervals on a shared x axis.
std::string dot_plot_svg(const std::vector<PlotPanel>& panels, const std::string& x_label);

}  // namespace framelens::report

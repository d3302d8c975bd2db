#include "framelens/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "framelens/errors.hpp"
#include "framelens/io.hpp"

namespace framelens::report {

namespace {

constexpr const char* kMinus = "−";

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

StarLegend parse_legend(std::string_view name) {
  if (name == "standard") return StarLegend::Standard;
  if (name == "strict") return StarLegend::Strict;
  throw ConfigurationError("unknown legend '" + std::string(name) + "' (expected standard or strict)");
}

std::string_view legend_name(StarLegend legend) { return legend == StarLegend::Standard ? "standard" : "strict"; }

std::string stars(double p, StarLegend legend) {
  const double one = legend == StarLegend::Standard ? 0.1 : 0.05;
  const double two = legend == StarLegend::Standard ? 0.05 : 0.01;
  const double three = legend == StarLegend::Standard ? 0.01 : 0.005;
  if (p < three) return "***";
  if (p < two) return "**";
  if (p < one) return "*";
  return "";
}

std::string format_number(double value, int decimals) {
  if (!std::isfinite(value)) return value > 0 ? "inf" : (value < 0 ? std::string(kMinus) + "inf" : "nan");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, std::fabs(value));
  std::string digits = buf;
  const auto dot = digits.find('.');
  std::string whole = digits.substr(0, dot);
  const std::string frac = dot == std::string::npos ? "" : digits.substr(dot);
  for (int i = static_cast<int>(whole.size()) - 3; i > 0; i -= 3) whole.insert(static_cast<std::size_t>(i), ",");
  const bool zero = digits.find_first_not_of("0.") == std::string::npos;
  return (value < 0 && !zero ? kMinus : "") + whole + frac;
}

std::string format_cell(double estimate, double se, double p, StarLegend legend) {
  int se_digits = 3;
  while (se_digits < 6 && se > 0 && format_number(se, se_digits).find_first_not_of("0.,") == std::string::npos) {
    ++se_digits;
  }
  return format_number(estimate, 3) + stars(p, legend) + " (" + format_number(se, se_digits) + ")";
}

std::string format_result_table(const stats::FitResult& fit, const std::optional<stats::CorrectedResults>& corrected,
                                StarLegend legend, const std::string& title) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& c : fit.coefficients) {
    double p = c.p_value;
    if (corrected) {
      for (std::size_t i = 0; i < corrected->labels.size(); ++i) {
        if (corrected->labels[i] == c.name) p = corrected->adjusted[i];
      }
    }
    rows.emplace_back(c.name, format_cell(c.estimate, c.se, p, legend));
  }
  std::vector<std::pair<std::string, std::string>> footer{
      {"Observations", format_number(static_cast<double>(fit.n), 0)},
      {"Log Likelihood", format_number(fit.log_likelihood, 3)},
      {"Akaike Inf. Crit.", format_number(fit.aic, 3)},
      {"Bayesian Inf. Crit.", format_number(fit.bic, 3)},
  };
  std::size_t width = 0;
  for (const auto& [name, cell] : rows) width = std::max(width, name.size());
  for (const auto& [name, cell] : footer) width = std::max(width, name.size());

  auto line = [&](const std::string& name, const std::string& cell) {
    return name + std::string(width - name.size() + 2, ' ') + cell + "\n";
  };
  const std::string rule(width + 24, '-');
  std::string out;
  if (!title.empty()) out += title + "\n";
  out += "Dependent variable: " + fit.outcome + "\n" + rule + "\n";
  for (const auto& [name, cell] : rows) out += line(name, cell);
  out += rule + "\n";
  for (const auto& [name, cell] : footer) out += line(name, cell);
  out += rule + "\n";
  out += legend == StarLegend::Standard ? "Note: *p<0.1; **p<0.05; ***p<0.01\n" : "Note: *p<0.05; **p<0.01; ***p<0.005\n";
  if (corrected) out += "Stars on tested coefficients use Holm-adjusted p-values.\n";
  return out;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kResultsCsvHeader) + "\n";
  char buf[64];
  auto g = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out += io::csv_row({r.frame, r.coefficient, g(r.estimate), g(r.se), g(r.raw_p), g(r.holm_p), r.reject ? "1" : "0"});
  }
  return out;
}

std::string dot_plot_svg(const std::vector<PlotPanel>& panels, const std::string& x_label) {
  constexpr double kRow = 22.0, kLabel = 260.0, kPlot = 360.0, kTitle = 28.0, kPad = 16.0, kAxis = 40.0;
  double lo = 0.0, hi = 0.0;
  std::size_t longest = 0;
  for (const auto& panel : panels) {
    for (const auto& pt : panel.points) {
      lo = std::min(lo, pt.estimate - 1.96 * pt.se);
      hi = std::max(hi, pt.estimate + 1.96 * pt.se);
      longest = std::max(longest, pt.label.size());
    }
  }
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double margin = 0.05 * (hi - lo);
  lo -= margin;
  hi += margin;
  const double label_width = std::max(kLabel, 7.0 * static_cast<double>(longest) + 10.0);
  auto x_of = [&](double v) { return label_width + (v - lo) / (hi - lo) * kPlot; };

  double height = kPad;
  for (const auto& panel : panels) height += kTitle + kRow * static_cast<double>(std::max<std::size_t>(panel.points.size(), 1)) + kPad;
  height += kAxis;
  const double width = label_width + kPlot + 2 * kPad;

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  double y = kPad;
  const double top = y;
  for (const auto& panel : panels) {
    svg += "<text x=\"" + num(label_width) + "\" y=\"" + num(y + 16) + "\" font-weight=\"bold\">" +
           xml_escape(panel.title) + "</text>\n";
    y += kTitle;
    if (panel.points.empty()) {
      svg += "<text x=\"" + num(label_width) + "\" y=\"" + num(y + 14) + "\" fill=\"#666\">no surviving frames</text>\n";
      y += kRow;
    }
    for (const auto& pt : panel.points) {
      const double cy = y + kRow / 2;
      svg += "<text x=\"" + num(label_width - 8) + "\" y=\"" + num(cy + 4) + "\" text-anchor=\"end\">" +
             xml_escape(pt.label) + "</text>\n";
      svg += "<line x1=\"" + num(x_of(pt.estimate - 1.96 * pt.se)) + "\" y1=\"" + num(cy) + "\" x2=\"" +
             num(x_of(pt.estimate + 1.96 * pt.se)) + "\" y2=\"" + num(cy) + "\" stroke=\"#333\"/>\n";
      svg += "<circle cx=\"" + num(x_of(pt.estimate)) + "\" cy=\"" + num(cy) + "\" r=\"4\" fill=\"" +
             (pt.estimate >= 0 ? "#1f77b4" : "#d62728") + "\"/>\n";
      y += kRow;
    }
    y += kPad;
  }
  svg += "<line x1=\"" + num(x_of(0)) + "\" y1=\"" + num(top) + "\" x2=\"" + num(x_of(0)) + "\" y2=\"" + num(y) +
         "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  svg += "<line x1=\"" + num(label_width) + "\" y1=\"" + num(y) + "\" x2=\"" + num(label_width + kPlot) + "\" y2=\"" +
         num(y) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg += "<text x=\"" + num(x_of(v)) + "\" y=\"" + num(y + 16) + "\" text-anchor=\"middle\">" + format_number(v, 2) +
           "</text>\n";
  }
  svg += "<text x=\"" + num(label_width + kPlot / 2) + "\" y=\"" + num(y + 34) + "\" text-anchor=\"middle\">" +
         xml_escape(x_label) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace framelens::report

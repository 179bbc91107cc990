#pragma once

// Small-multiples SVG panels of the simulation results: one figure per
// performance metric per data-generating mechanism, panels laid out as
// exposure prevalence (rows) by sample size (columns), overlap scenario
// on the x axis, one line per method.  Missing cells (below the
// convergence threshold) leave gaps in the lines.

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pslab/csv.hpp"

namespace pslab {

enum class FigureMetric { convergence, bias, abs_error, power, coverage, composite };

inline const std::array<FigureMetric, 6>& all_figure_metrics() {
  static const std::array<FigureMetric, 6> m = {
      FigureMetric::convergence, FigureMetric::bias,     FigureMetric::abs_error,
      FigureMetric::power,       FigureMetric::coverage, FigureMetric::composite};
  return m;
}

inline std::string figure_metric_name(FigureMetric m) {
  switch (m) {
    case FigureMetric::convergence: return "convergence";
    case FigureMetric::bias: return "bias";
    case FigureMetric::abs_error: return "abs_error";
    case FigureMetric::power: return "power";
    case FigureMetric::coverage: return "coverage";
    case FigureMetric::composite: return "composite";
  }
  return "?";
}

inline std::string figure_metric_title(FigureMetric m) {
  switch (m) {
    case FigureMetric::convergence: return "Convergence (%)";
    case FigureMetric::bias: return "Bias (true - estimate, log odds)";
    case FigureMetric::abs_error: return "Absolute error (log odds)";
    case FigureMetric::power: return "Power (%)";
    case FigureMetric::coverage: return "Coverage (%)";
    case FigureMetric::composite: return "Mean of coverage and power (%)";
  }
  return "?";
}

inline std::string dgp_tag(Link link, bool unmeasured) {
  std::string tag = link_name(link);
  if (unmeasured) tag += "_u";
  return tag;
}

namespace detail {

inline std::optional<double> metric_value(const ResultRow& r, FigureMetric m) {
  switch (m) {
    case FigureMetric::convergence: return r.convergence_pct;
    case FigureMetric::bias: return r.bias;
    case FigureMetric::abs_error: return r.abs_error;
    case FigureMetric::power: return r.power_pct;
    case FigureMetric::coverage: return r.coverage_pct;
    case FigureMetric::composite:
      if (r.coverage_pct && r.power_pct) return 0.5 * (*r.coverage_pct + *r.power_pct);
      return std::nullopt;
  }
  return std::nullopt;
}

inline const char* method_colour(std::size_t m) {
  static const char* colours[5] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                   "#66a61e"};
  return colours[m % 5];
}

inline std::string method_label(Method m) {
  switch (m) {
    case Method::ps_covariate: return "PS covariate";
    case Method::nn_match: return "NN match";
    case Method::caliper_match: return "Caliper match";
    case Method::iptw: return "IPTW";
    case Method::regression_standardised: return "Logistic regression";
  }
  return "?";
}

inline std::string fmt_tick(double v) {
  char buf[32];
  if (std::fabs(v) >= 1000.0 && std::fmod(v, 1000.0) == 0.0) {
    std::snprintf(buf, sizeof(buf), "%gk", v / 1000.0);
  } else {
    std::snprintf(buf, sizeof(buf), "%g", v);
  }
  return buf;
}

}  // namespace detail

// Render one metric figure for one DGP from result rows.  Returns the SVG
// document as a string.
inline std::string render_figure(const std::vector<ResultRow>& rows, FigureMetric metric,
                                 Link link, bool unmeasured) {
  std::vector<const ResultRow*> subset;
  std::set<std::size_t> n_set;
  std::set<double> prev_set;
  for (const ResultRow& r : rows) {
    if (r.link == link && r.unmeasured_confounder == unmeasured) {
      subset.push_back(&r);
      n_set.insert(r.n);
      prev_set.insert(r.exposure_probability);
    }
  }
  std::vector<std::size_t> sizes(n_set.begin(), n_set.end());            // ascending
  std::vector<double> prevalences(prev_set.rbegin(), prev_set.rend());   // descending

  // Value lookup: (n, prevalence, scenario, method) -> value.
  auto key_of = [](std::size_t n, double p, int s, int m) {
    std::ostringstream os;
    os << n << '|' << p << '|' << s << '|' << m;
    return os.str();
  };
  std::map<std::string, double> values;
  std::set<int> scenario_set;
  for (const ResultRow* r : subset) {
    auto idx = method_from_name(r->method);
    if (!idx) continue;
    scenario_set.insert(r->scenario);
    const auto v = detail::metric_value(*r, metric);
    if (v) {
      values[key_of(r->n, r->exposure_probability, r->scenario,
                    static_cast<int>(*idx))] = *v;
    }
  }
  std::vector<int> scenarios(scenario_set.begin(), scenario_set.end());

  // Shared y range across panels.
  double y_min = 0.0, y_max = 100.0;
  const bool percent = metric == FigureMetric::convergence ||
                       metric == FigureMetric::power ||
                       metric == FigureMetric::coverage ||
                       metric == FigureMetric::composite;
  if (!percent) {
    y_min = 0.0;
    y_max = 0.0;
    for (const auto& [k, v] : values) {
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
    if (y_min == y_max) {
      y_min -= 1.0;
      y_max += 1.0;
    }
    const double pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;
  }

  const double panel_w = 160.0, panel_h = 120.0, gap = 14.0;
  const double left = 70.0, top = 70.0, bottom = 46.0, right = 20.0;
  const std::size_t ncol = std::max<std::size_t>(sizes.size(), 1);
  const std::size_t nrow = std::max<std::size_t>(prevalences.size(), 1);
  double legend_w = 0.0;
  for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
    legend_w += 26.0 + 7.2 * detail::method_label(kAllMethods[m]).size();
  }
  const double width = std::max(left + ncol * panel_w + (ncol - 1) * gap + right,
                                left + legend_w + right);
  const double height = top + nrow * panel_h + (nrow - 1) * gap + bottom;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height
      << "\" font-family=\"Helvetica,Arial,sans-serif\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"22\" font-size=\"15\" font-weight=\"bold\">"
      << figure_metric_title(metric) << " — " << dgp_tag(link, unmeasured)
      << " outcome model</text>\n";

  // Legend.
  double lx = left;
  for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
    svg << "<line x1=\"" << lx << "\" y1=\"38\" x2=\"" << lx + 18
        << "\" y2=\"38\" stroke=\"" << detail::method_colour(m)
        << "\" stroke-width=\"2.5\"/>\n";
    svg << "<text x=\"" << lx + 22 << "\" y=\"42\" font-size=\"11\">"
        << detail::method_label(kAllMethods[m]) << "</text>\n";
    lx += 26.0 + 7.2 * detail::method_label(kAllMethods[m]).size();
  }

  auto x_of = [&](std::size_t col, int scenario) {
    const double x0 = left + col * (panel_w + gap);
    if (scenarios.size() <= 1) return x0 + panel_w / 2.0;
    const double f = static_cast<double>(scenario - scenarios.front()) /
                     (scenarios.back() - scenarios.front());
    return x0 + 12.0 + f * (panel_w - 24.0);
  };
  auto y_of = [&](std::size_t row_i, double v) {
    const double y0 = top + row_i * (panel_h + gap);
    const double f = (v - y_min) / (y_max - y_min);
    return y0 + panel_h - 8.0 - f * (panel_h - 16.0);
  };

  for (std::size_t row_i = 0; row_i < nrow; ++row_i) {
    for (std::size_t col = 0; col < ncol; ++col) {
      const double x0 = left + col * (panel_w + gap);
      const double y0 = top + row_i * (panel_h + gap);
      svg << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel_w
          << "\" height=\"" << panel_h
          << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"0.8\"/>\n";
      if (row_i == 0 && col < sizes.size()) {
        svg << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << y0 - 6
            << "\" font-size=\"11\" text-anchor=\"middle\">n = "
            << detail::fmt_tick(static_cast<double>(sizes[col])) << "</text>\n";
      }
      if (col == 0 && row_i < prevalences.size()) {
        svg << "<text x=\"" << x0 - 8 << "\" y=\"" << y0 + panel_h / 2
            << "\" font-size=\"11\" text-anchor=\"end\">Pr(E)=" << prevalences[row_i]
            << "</text>\n";
      }
      // y ticks on the first column.
      if (col == 0) {
        for (int t = 0; t <= 2; ++t) {
          const double v = y_min + (y_max - y_min) * t / 2.0;
          const double y = y_of(row_i, v);
          svg << "<text x=\"" << x0 - 34 << "\" y=\"" << y + 3
              << "\" font-size=\"9\" fill=\"#555\">";
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.3g", v);
          svg << buf << "</text>\n";
          svg << "<line x1=\"" << x0 - 3 << "\" y1=\"" << y << "\" x2=\"" << x0
              << "\" y2=\"" << y << "\" stroke=\"#555\" stroke-width=\"0.6\"/>\n";
        }
      }
      // x ticks on the bottom row.
      if (row_i == nrow - 1) {
        for (int s : scenarios) {
          svg << "<text x=\"" << x_of(col, s) << "\" y=\"" << y0 + panel_h + 14
              << "\" font-size=\"9\" text-anchor=\"middle\" fill=\"#555\">" << s
              << "</text>\n";
        }
      }
      // Zero reference line for signed metrics.
      if (!percent && y_min < 0.0 && y_max > 0.0) {
        const double yz = y_of(row_i, 0.0);
        svg << "<line x1=\"" << x0 << "\" y1=\"" << yz << "\" x2=\"" << x0 + panel_w
            << "\" y2=\"" << yz
            << "\" stroke=\"#ccc\" stroke-width=\"0.7\" stroke-dasharray=\"3,3\"/>\n";
      }

      if (col >= sizes.size() || row_i >= prevalences.size()) continue;
      for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
        // Consecutive runs of present values become polyline segments;
        // missing scenarios break the line.
        std::vector<std::pair<double, double>> seg;
        auto flush = [&]() {
          if (seg.size() == 1) {
            svg << "<circle cx=\"" << seg[0].first << "\" cy=\"" << seg[0].second
                << "\" r=\"2\" fill=\"" << detail::method_colour(m) << "\"/>\n";
          } else if (seg.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << detail::method_colour(m)
                << "\" stroke-width=\"1.8\" points=\"";
            for (const auto& [px, py] : seg) svg << px << ',' << py << ' ';
            svg << "\"/>\n";
          }
          seg.clear();
        };
        for (int s : scenarios) {
          const auto it = values.find(
              key_of(sizes[col], prevalences[row_i], s, static_cast<int>(m)));
          if (it == values.end()) {
            flush();
            continue;
          }
          const double v = std::clamp(it->second, y_min, y_max);
          seg.emplace_back(x_of(col, s), y_of(row_i, v));
        }
        flush();
      }
    }
  }
  svg << "<text x=\"" << left + (ncol * panel_w + (ncol - 1) * gap) / 2 << "\" y=\""
      << height - 12 << "\" font-size=\"11\" text-anchor=\"middle\">PS overlap "
         "scenario</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

// Write fig_<metric>_<dgp>.svg for every metric and every DGP present in
// the rows.  Returns the file names written.
inline std::vector<std::string> emit_figures(const std::vector<ResultRow>& rows,
                                             const std::string& out_dir) {
  if (rows.empty()) throw std::runtime_error("no result rows to plot");
  std::set<std::pair<int, bool>> dgps;
  for (const ResultRow& r : rows) {
    dgps.insert({static_cast<int>(r.link), r.unmeasured_confounder});
  }
  std::vector<std::string> written;
  for (const auto& [link_i, unmeasured] : dgps) {
    const Link link = static_cast<Link>(link_i);
    for (FigureMetric metric : all_figure_metrics()) {
      const std::string name =
          "fig_" + figure_metric_name(metric) + "_" + dgp_tag(link, unmeasured) + ".svg";
      const std::string path = out_dir + "/" + name;
      std::ofstream out(path, std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open for writing: " + path);
      out << render_figure(rows, metric, link, unmeasured);
      if (!out.good()) throw std::runtime_error("write failed: " + path);
      written.push_back(name);
    }
  }
  return written;
}

}  // namespace pslab

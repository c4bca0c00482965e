// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rosetta/eval.hpp"

namespace rosetta::report {

struct Series {
  std::vector<std::string> labels;
  std::vector<std::optional<double>> values;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 520;
  int height = 340;
};

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

/// Single-series line chart. Missing values break nothing: the polyline
/// simply skips them. With no values at all a placeholder is drawn.
inline std::string line_chart(const ChartSpec& spec, const Series& s) {
  const double left = 60, right = 20, top = 40, bottom = 50;
  const double pw = spec.width - left - right, ph = spec.height - top - bottom;
  double ymax = 0.0;
  for (const auto& v : s.values)
    if (v) ymax = std::max(ymax, *v);
  ymax = ymax <= 0.0 ? 1.0 : ymax * 1.1;
  const std::size_t n = s.labels.size();
  auto x_at = [&](std::size_t i) { return left + (n <= 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(n - 1)); };
  auto y_at = [&](double v) { return top + ph * (1.0 - v / ymax); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
       std::to_string(spec.height) + "\" viewBox=\"0 0 " + std::to_string(spec.width) + " " +
       std::to_string(spec.height) + "\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(spec.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
       escape_xml(spec.title) + "</text>\n";
  o += "<line x1=\"" + num(left) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(left + pw) + "\" y2=\"" + num(top + ph) +
       "\" stroke=\"black\"/>\n";
  o += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" + num(top + ph) +
       "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    o += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y_at(v) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(v) + "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    o += "<text x=\"" + num(x_at(i)) + "\" y=\"" + num(top + ph + 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + escape_xml(s.labels[i]) + "</text>\n";
  }
  o += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(spec.height - 10.0) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape_xml(spec.x_label) + "</text>\n";
  o += "<text x=\"14\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 " +
       num(top + ph / 2) + ")\">" + escape_xml(spec.y_label) + "</text>\n";

  std::string points;
  for (std::size_t i = 0; i < n; ++i) {
    if (!s.values[i]) continue;
    if (!points.empty()) points += " ";
    points += num(x_at(i)) + "," + num(y_at(*s.values[i]));
  }
  if (points.empty()) {
    o += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(top + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" fill=\"gray\">no data</text>\n";
  } else {
    o += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
      if (!s.values[i]) continue;
      o += "<circle cx=\"" + num(x_at(i)) + "\" cy=\"" + num(y_at(*s.values[i])) + "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
  }
  o += "</svg>\n";
  return o;
}

struct Metric {
  const char* key;
  const char* label;
  std::optional<double> (*get)(const eval::BinSummary&);
};

inline const std::vector<Metric>& report_metrics() {
  static const std::vector<Metric> kMetrics = {
      {"cer", "mean CER", [](const eval::BinSummary& b) { return b.count ? std::optional<double>(b.cer_mean) : std::nullopt; }},
      {"ter", "mean TER", [](const eval::BinSummary& b) { return b.count ? std::optional<double>(b.ter_mean) : std::nullopt; }},
      {"ter_no_ooc", "mean TER excluding <ooc>", [](const eval::BinSummary& b) { return b.ter_no_ooc_mean; }},
      {"f1_ooc", "F1 on <ooc>", [](const eval::BinSummary& b) { return b.f1_ooc(); }},
  };
  return kMetrics;
}

/// Text table: overall Table-style CER row plus per-bin means.
inline std::string summary_text(const std::vector<eval::SampleMetrics>& samples) {
  std::string o;
  o += "samples: " + std::to_string(samples.size()) + "\n\n";
  if (!samples.empty()) {
    const auto row = eval::comparison_row("model", samples);
    o += "CER (%)   mean";
    for (int p : eval::comparison_percentiles()) o += "     p" + std::to_string(p);
    o += "\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%14.2f", row.mean);
    o += std::string("          ") + (buf + 10);
    for (double v : row.percentiles) {
      std::snprintf(buf, sizeof buf, "%8.2f", v);
      o += buf;
    }
    o += "\n\n";
  }
  const auto rows = eval::summarize(samples);
  o += "axis  bin          count      cer      ter  ter_no_ooc   f1_ooc\n";
  auto cell = [](const std::optional<double>& v) {
    char buf[32];
    if (v) std::snprintf(buf, sizeof buf, "%9.4f", *v);
    else std::snprintf(buf, sizeof buf, "%9s", "-");
    return std::string(buf);
  };
  for (const auto& r : rows) {
    if ((r.alpha_bin < 0) == (r.beta_bin < 0)) continue;
    const bool alpha = r.alpha_bin >= 0;
    char head[64];
    std::snprintf(head, sizeof head, "%-5s %-11s %6zu", alpha ? "alpha" : "beta",
                  eval::bin_label(alpha ? r.alpha_bin : r.beta_bin).c_str(), r.count);
    o += head;
    o += cell(r.count ? std::optional<double>(r.cer_mean) : std::nullopt);
    o += cell(r.count ? std::optional<double>(r.ter_mean) : std::nullopt);
    o += "  " + cell(r.ter_no_ooc_mean);
    o += cell(r.f1_ooc());
    o += "\n";
  }
  return o;
}

/// Writes `<metric>_vs_alpha.svg`, `<metric>_vs_beta.svg` and summary.txt.
inline std::vector<std::filesystem::path> write_report(const std::vector<eval::SampleMetrics>& samples,
                                                        const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory", dir.string());
  const auto rows = eval::summarize(samples);
  std::vector<std::filesystem::path> written;
  for (const auto& metric : report_metrics()) {
    for (const bool alpha : {true, false}) {
      Series s;
      for (int b = 0; b < eval::kBinCount; ++b) {
        s.labels.push_back(eval::bin_label(b));
        for (const auto& r : rows)
          if ((alpha ? r.alpha_bin : r.beta_bin) == b && (alpha ? r.beta_bin : r.alpha_bin) < 0) s.values.push_back(metric.get(r));
      }
      ChartSpec spec;
      spec.title = std::string(metric.label) + " vs " + (alpha ? "alpha" : "beta");
      spec.x_label = alpha ? "query coverage rate alpha" : "irrelevant-symbol rate beta";
      spec.y_label = metric.label;
      const auto path = dir / (std::string(metric.key) + (alpha ? "_vs_alpha.svg" : "_vs_beta.svg"));
      detail::write_file_atomic(path, line_chart(spec, s));
      written.push_back(path);
    }
  }
  const auto path = dir / "summary.txt";
  detail::write_file_atomic(path, summary_text(samples));
  written.push_back(path);
  return written;
}

}  // namespace rosetta::report

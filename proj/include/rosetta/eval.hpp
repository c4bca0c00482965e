// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rosetta/datagen.hpp"
#include "rosetta/metrics.hpp"
#include "rosetta/model/checkpoint.hpp"
#include "rosetta/model/network.hpp"
#include "rosetta/parallel.hpp"

namespace rosetta::eval {

// --- bins --------------------------------------------------------------------

/// Four quarter-width bins over [0, 1) plus a separate bin for exactly 1.0.
inline constexpr int kBinCount = 5;

inline int bin_index(double x) {
  if (x >= 1.0) return 4;
  if (x < 0.0) return 0;
  return std::min(3, static_cast<int>(std::floor(x * 4.0)));
}

inline std::string bin_label(int b) {
  static const char* kLabels[kBinCount] = {"[0,0.25)", "[0.25,0.5)", "[0.5,0.75)", "[0.75,1)", "{1}"};
  return kLabels[b];
}

// --- per-sample metrics ------------------------------------------------------

struct SampleMetrics {
  std::string sample_id;
  double alpha = 0.0;
  double beta = 0.0;
  double cer = 0.0;
  double ter = 0.0;
  std::optional<double> ter_no_ooc;
  metrics::OocCounts ooc;
  std::size_t cer_edits = 0;
  std::size_t gt_chars = 0;
  std::size_t ter_edits = 0;
  std::size_t gt_tokens = 0;
  std::u32string truth;
  std::u32string prediction;
  std::size_t out_of_range = 0;

  int alpha_bin() const { return bin_index(alpha); }
  int beta_bin() const { return bin_index(beta); }
};

/// Scores one prediction. `ooc` is the <ooc> id, or -1 for vocabularies
/// without one.
inline SampleMetrics score(std::string id, double alpha, double beta, const TokenSeq& pred_tokens,
                           const TokenSeq& gt_tokens, std::u32string pred_text, std::u32string gt_text, TokenId ooc) {
  SampleMetrics m;
  m.sample_id = std::move(id);
  m.alpha = alpha;
  m.beta = beta;
  m.cer_edits = metrics::edit_distance(pred_text, gt_text);
  m.gt_chars = gt_text.size();
  m.cer = metrics::cer(pred_text, gt_text);
  m.ter_edits = metrics::edit_distance(pred_tokens, gt_tokens);
  m.gt_tokens = gt_tokens.size();
  m.ter = metrics::ter(pred_tokens, gt_tokens);
  const auto alignment = metrics::align(pred_tokens, gt_tokens);
  m.ter_no_ooc = metrics::ter_excluding_ooc(pred_tokens, gt_tokens, ooc, alignment);
  m.ooc = metrics::f1_ooc_counts(pred_tokens, gt_tokens, ooc, alignment);
  m.truth = std::move(gt_text);
  m.prediction = std::move(pred_text);
  return m;
}

/// Dataset samples must be representable by the model's vocabulary.
inline void check_compatible(const model::ModelConfig& config, const DatasetManifest& data) {
  if (config.fusion == model::Fusion::single) {
    for (const auto& r : data.records)
      for (char32_t c : r.query_text)
        if (!StaticTokenizer::letter(c))
          throw ConfigMismatch("baseline checkpoint cannot score sample " + r.id + ": symbol outside a-z");
    return;
  }
  for (const auto& r : data.records) {
    for (const TokenSeq* seq : {&r.context_tokens, &r.target_tokens})
      for (TokenId t : *seq)
        if (t < 0 || t >= config.vocab_size)
          throw ConfigMismatch("sample " + r.id + " uses token " + std::to_string(t) + " outside the checkpoint vocabulary");
    if (unique_symbols(r.context_text).size() > static_cast<std::size_t>(config.label_tokens))
      throw ConfigMismatch("sample " + r.id + " has more context symbols than label tokens");
  }
}

template <typename Real>
SampleMetrics evaluate_sample(const model::Network<Real>& net, const model::ParamStore<Real>& params,
                              const RenderedSample& s) {
  const auto& c = net.config();
  if (c.fusion == model::Fusion::paired) {
    const ContextTokenizer cat(Vocabulary(static_cast<std::size_t>(c.label_tokens)));
    const TokenSeq pred = net.generate(params, &s.context_image, s.context_tokens, s.query_image);
    Decoded text = cat.decode_with(pred, s.token_map);
    SampleMetrics m = score(s.id, s.alpha_actual, s.beta_actual, pred, s.target_tokens, std::move(text.text),
                            s.query_text, cat.vocabulary().ooc());
    m.out_of_range = text.out_of_range_count;
    return m;
  }
  const TokenSeq pred = net.generate(params, nullptr, {}, s.query_image);
  return score(s.id, s.alpha_actual, s.beta_actual, pred, StaticTokenizer::encode(s.query_text),
               StaticTokenizer::decode(pred), s.query_text, -1);
}

/// Scores every record of `data` with the given network; results are in
/// manifest order regardless of thread count.
template <typename Real>
std::vector<SampleMetrics> evaluate(const model::Network<Real>& net, const model::ParamStore<Real>& params,
                                    const DatasetManifest& data, unsigned threads = 1) {
  check_compatible(net.config(), data);
  const ContextTokenizer cat(Vocabulary(static_cast<std::size_t>(net.config().label_tokens)));
  std::vector<SampleMetrics> out(data.records.size());
  parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = evaluate_sample(net, params, data.load_sample(i, cat)); });
  return out;
}

/// Loads a checkpoint in its stored precision and evaluates `data`.
inline std::vector<SampleMetrics> evaluate_checkpoint(const std::filesystem::path& checkpoint, const DatasetManifest& data,
                                                      unsigned threads = 1) {
  const model::ModelConfig config = model::peek_checkpoint_config(checkpoint);
  if (config.precision == model::Precision::f64) {
    auto ck = model::load_checkpoint<double>(checkpoint);
    return evaluate(model::Network<double>(ck.config), ck.params, data, threads);
  }
  auto ck = model::load_checkpoint<float>(checkpoint);
  return evaluate(model::Network<float>(ck.config), ck.params, data, threads);
}

// --- aggregation -------------------------------------------------------------

/// One summary row. A bin of -1 means "all".
struct BinSummary {
  int alpha_bin = -1;
  int beta_bin = -1;
  std::size_t count = 0;
  double cer_mean = 0.0;
  double ter_mean = 0.0;
  std::optional<double> ter_no_ooc_mean;
  std::size_t ter_no_ooc_count = 0;
  std::optional<double> cer_micro;
  std::optional<double> ter_micro;
  metrics::OocCounts ooc;
  std::optional<double> f1_ooc() const { return metrics::f1_score(ooc); }
};

inline BinSummary summarize_group(const std::vector<const SampleMetrics*>& group, int alpha_bin, int beta_bin) {
  BinSummary s;
  s.alpha_bin = alpha_bin;
  s.beta_bin = beta_bin;
  s.count = group.size();
  double no_ooc = 0.0;
  std::size_t cer_e = 0, cer_n = 0, ter_e = 0, ter_n = 0;
  for (const SampleMetrics* m : group) {
    s.cer_mean += m->cer;
    s.ter_mean += m->ter;
    if (m->ter_no_ooc) {
      no_ooc += *m->ter_no_ooc;
      ++s.ter_no_ooc_count;
    }
    cer_e += m->cer_edits;
    cer_n += m->gt_chars;
    ter_e += m->ter_edits;
    ter_n += m->gt_tokens;
    s.ooc += m->ooc;
  }
  if (s.count) {
    s.cer_mean /= static_cast<double>(s.count);
    s.ter_mean /= static_cast<double>(s.count);
  }
  if (s.ter_no_ooc_count) s.ter_no_ooc_mean = no_ooc / static_cast<double>(s.ter_no_ooc_count);
  if (cer_n) s.cer_micro = static_cast<double>(cer_e) / static_cast<double>(cer_n);
  if (ter_n) s.ter_micro = static_cast<double>(ter_e) / static_cast<double>(ter_n);
  return s;
}

/// Rows: overall, each alpha bin, each beta bin, then every (alpha, beta)
/// cell. Empty bins are kept with count 0.
inline std::vector<BinSummary> summarize(const std::vector<SampleMetrics>& samples) {
  std::vector<BinSummary> rows;
  auto collect = [&](int a, int b) {
    std::vector<const SampleMetrics*> group;
    for (const auto& m : samples)
      if ((a < 0 || m.alpha_bin() == a) && (b < 0 || m.beta_bin() == b)) group.push_back(&m);
    rows.push_back(summarize_group(group, a, b));
  };
  collect(-1, -1);
  for (int a = 0; a < kBinCount; ++a) collect(a, -1);
  for (int b = 0; b < kBinCount; ++b) collect(-1, b);
  for (int a = 0; a < kBinCount; ++a)
    for (int b = 0; b < kBinCount; ++b) collect(a, b);
  return rows;
}

// --- percentiles -------------------------------------------------------------

/// Linear interpolation between closest ranks: rank = p/100 * (n-1).
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline const std::vector<int>& comparison_percentiles() {
  static const std::vector<int> kP = {50, 60, 70, 80, 90, 100};
  return kP;
}

/// Mean CER and CER percentiles, in percent.
struct ComparisonRow {
  std::string model;
  std::size_t count = 0;
  double mean = 0.0;
  std::vector<double> percentiles;
};

inline ComparisonRow comparison_row(std::string name, const std::vector<SampleMetrics>& samples) {
  ComparisonRow row;
  row.model = std::move(name);
  row.count = samples.size();
  std::vector<double> cers;
  for (const auto& m : samples) cers.push_back(100.0 * m.cer);
  if (cers.empty()) return row;
  for (double c : cers) row.mean += c;
  row.mean /= static_cast<double>(cers.size());
  for (int p : comparison_percentiles()) row.percentiles.push_back(percentile(cers, p));
  return row;
}

// --- CSV ---------------------------------------------------------------------

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

inline constexpr const char* kMetricsHeader = "sample_id,alpha,beta,cer,ter,ter_no_ooc,ooc_tp,ooc_fp,ooc_fn";

inline std::string metrics_csv(const std::vector<SampleMetrics>& samples) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& m : samples) {
    out += m.sample_id + "," + fmt(m.alpha) + "," + fmt(m.beta) + "," + fmt(m.cer) + "," + fmt(m.ter) + "," +
           fmt(m.ter_no_ooc) + "," + std::to_string(m.ooc.tp) + "," + std::to_string(m.ooc.fp) + "," +
           std::to_string(m.ooc.fn) + "\n";
  }
  return out;
}

/// CSV cell for a bin index; -1 is the whole population.
inline std::string bin_name(int b) { return b < 0 ? "all" : std::to_string(b); }

inline std::string bins_csv(const std::vector<BinSummary>& rows) {
  std::string out =
      "alpha_bin,beta_bin,count,cer_mean,ter_mean,ter_no_ooc_mean,cer_micro,ter_micro,ooc_tp,ooc_fp,ooc_fn,f1_ooc\n";
  for (const auto& r : rows) {
    out += bin_name(r.alpha_bin) + "," + bin_name(r.beta_bin) + "," + std::to_string(r.count) + "," +
           (r.count ? fmt(r.cer_mean) : "") + "," + (r.count ? fmt(r.ter_mean) : "") + "," + fmt(r.ter_no_ooc_mean) +
           "," + fmt(r.cer_micro) + "," + fmt(r.ter_micro) + "," + std::to_string(r.ooc.tp) + "," +
           std::to_string(r.ooc.fp) + "," + std::to_string(r.ooc.fn) + "," + fmt(r.f1_ooc()) + "\n";
  }
  return out;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "model,count,mean_cer";
  for (int p : comparison_percentiles()) out += ",p" + std::to_string(p);
  out += "\n";
  for (const auto& r : rows) {
    out += r.model + "," + std::to_string(r.count) + "," + (r.count ? fmt(r.mean) : "");
    for (std::size_t i = 0; i < comparison_percentiles().size(); ++i)
      out += "," + (i < r.percentiles.size() ? fmt(r.percentiles[i]) : std::string());
    out += "\n";
  }
  return out;
}

inline std::string predictions_jsonl(const std::vector<SampleMetrics>& samples) {
  std::string out;
  for (const auto& m : samples) {
    nlohmann::ordered_json j{{"sample_id", m.sample_id},
                             {"truth", utf8::encode(m.truth)},
                             {"prediction", utf8::encode(m.prediction)},
                             {"out_of_range", m.out_of_range}};
    out += j.dump() + "\n";
  }
  return out;
}

/// Writes metrics.csv, bins.csv and predictions.jsonl into `dir`.
inline void write_sweep(const std::filesystem::path& dir, const std::vector<SampleMetrics>& samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory", dir.string());
  detail::write_file_atomic(dir / "metrics.csv", metrics_csv(samples));
  detail::write_file_atomic(dir / "bins.csv", bins_csv(summarize(samples)));
  detail::write_file_atomic(dir / "predictions.jsonl", predictions_jsonl(samples));
}

namespace detail_csv {
inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double number(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("metrics CSV line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}
}  // namespace detail_csv

/// Parses a metrics CSV written by `metrics_csv`. Throws ValidationError on
/// any schema mismatch.
inline std::vector<SampleMetrics> parse_metrics_csv(std::istream& in) {
  std::string line;
  std::vector<SampleMetrics> out;
  if (!std::getline(in, line)) return out;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw ValidationError("metrics CSV header mismatch");
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto f = detail_csv::split(line);
    if (f.size() != 9) throw ValidationError("metrics CSV line " + std::to_string(n) + ": expected 9 fields");
    SampleMetrics m;
    m.sample_id = f[0];
    m.alpha = detail_csv::number(f[1], n);
    m.beta = detail_csv::number(f[2], n);
    m.cer = detail_csv::number(f[3], n);
    m.ter = detail_csv::number(f[4], n);
    if (!f[5].empty()) m.ter_no_ooc = detail_csv::number(f[5], n);
    m.ooc.tp = static_cast<std::size_t>(detail_csv::number(f[6], n));
    m.ooc.fp = static_cast<std::size_t>(detail_csv::number(f[7], n));
    m.ooc.fn = static_cast<std::size_t>(detail_csv::number(f[8], n));
    out.push_back(std::move(m));
  }
  return out;
}

inline std::vector<SampleMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read metrics CSV", path.string());
  return parse_metrics_csv(in);
}

}  // namespace rosetta::eval

// SPDX-License-Identifier: Apache-2.0
//
// rosetta: dataset generation, training, evaluation and reporting.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "rosetta/rosetta.hpp"

namespace fs = std::filesystem;
using namespace rosetta;

namespace {

struct Globals {
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

std::u32string read_alphabet(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read alphabet", file.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::u32string symbols;
  for (char32_t c : utf8::decode(bytes))
    if (c != U'\n' && c != U'\r') symbols.push_back(c);
  return unique_symbols(symbols);
}

IntRange parse_int_range(const std::string& s, const char* what) {
  int lo = 0, hi = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d,%d%c", &lo, &hi, &tail) == 2) return {lo, hi};
  if (std::sscanf(s.c_str(), "%d%c", &lo, &tail) == 1) return {lo, lo};
  throw ValidationError(std::string("--") + what + " expects LO,HI");
}

RealRange parse_real_range(const std::string& s, const char* what) {
  double lo = 0, hi = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%lf,%lf%c", &lo, &hi, &tail) == 2) return {lo, hi};
  if (std::sscanf(s.c_str(), "%lf%c", &lo, &tail) == 1) return {lo, lo};
  throw ValidationError(std::string("--") + what + " expects LO,HI");
}

std::vector<std::string> font_paths(const std::string& dir, const std::string& index) {
  if (!index.empty()) return read_font_index(index);
  if (!dir.empty()) return list_font_files(dir);
  return {};
}

nlohmann::ordered_json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read config", file.string());
  try {
    return nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(file.string() + ": " + e.what());
  }
}

void make_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory", out.string());
}

void print_effective(const char* command, const nlohmann::ordered_json& j) {
  std::cout << command << ": effective configuration (flags > config file > defaults)\n" << j.dump(2) << "\n";
}

// --- shared generator flags --------------------------------------------------

struct GenFlags {
  std::string fonts_dir, font_index, alphabet_file, words_file, archetype = "random";
  std::string query_len, alpha, s_add, font_size;
  bool context_repeats = false;

  void add(CLI::App* app) {
    app->add_option("--fonts", fonts_dir, "Directory of TrueType fonts");
    app->add_option("--font-index", font_index, "Font index written by fonts-scan");
    app->add_option("--alphabet", alphabet_file, "UTF-8 file listing the alphabet symbols (default a-z)");
    app->add_option("--words", words_file, "Word list used for queries (one per line)");
    app->add_option("--archetype", archetype, "random | held_out_text | symbolic | new_alphabet")
        ->check(CLI::IsMember({"random", "held_out_text", "symbolic", "new_alphabet"}));
    app->add_option("--query-len", query_len, "Query length range LO,HI");
    app->add_option("--alpha", alpha, "Coverage rate range LO,HI");
    app->add_option("--s-add", s_add, "Added irrelevant symbols range LO,HI");
    app->add_option("--font-size", font_size, "Font size range LO,HI (points)");
    app->add_flag("--context-repeats", context_repeats, "Repeat context symbols 1-2 times");
  }

  /// Applies the given flags on top of `p`.
  void apply(GenParams& p) const {
    auto fonts = font_paths(fonts_dir, font_index);
    if (!fonts.empty()) p.fonts = fonts;
    std::vector<std::u32string> words;
    if (!words_file.empty()) words = read_word_list(words_file);
    if (archetype != "random") {
      const Archetype kind = archetype == "held_out_text" ? Archetype::held_out_text
                             : archetype == "symbolic"    ? Archetype::symbolic
                                                          : Archetype::new_alphabet;
      GenParams a = archetype_params(kind, p.fonts, words, p.seed);
      p.alphabet = a.alphabet;
      p.words = a.words;
    } else if (!words.empty()) {
      p.words = words;
    }
    if (!alphabet_file.empty()) p.alphabet = read_alphabet(alphabet_file);
    if (!query_len.empty()) p.query_len = parse_int_range(query_len, "query-len");
    if (!alpha.empty()) p.alpha = parse_real_range(alpha, "alpha");
    if (!s_add.empty()) p.s_add = parse_int_range(s_add, "s-add");
    if (!font_size.empty()) p.font_size = parse_int_range(font_size, "font-size");
    if (context_repeats) p.context_repeats = true;
  }
};

// --- commands ----------------------------------------------------------------

int cmd_fonts_scan(const std::string& dir, const std::string& alphabet_file, const fs::path& out) {
  const auto paths = list_font_files(dir);
  if (paths.empty()) throw IoError("no font files found", dir);
  const std::u32string alphabet = alphabet_file.empty() ? latin_lowercase() : read_alphabet(alphabet_file);
  const FontLibrary lib = FontLibrary::load(paths, alphabet);
  make_out_dir(out);
  std::vector<std::string> ok;
  for (const auto& f : lib.fonts) ok.push_back(f.path);
  detail::write_file_atomic(out / "fonts.tsv", format_font_index(ok));
  std::string report = "fonts scanned: " + std::to_string(paths.size()) + "\nfonts passing: " +
                       std::to_string(ok.size()) + "\nalphabet size: " + std::to_string(alphabet.size()) + "\n";
  for (const auto& e : lib.excluded) {
    report += "EXCLUDED\t" + e.path + "\t" + e.reason;
    if (!e.missing.empty()) report += "\tmissing=" + utf8::encode(e.missing);
    report += "\n";
  }
  detail::write_file_atomic(out / "coverage.txt", report);
  std::cout << report;
  return 0;
}

int cmd_gen(const GenFlags& flags, const Globals& g, std::size_t count, const std::string& config, const fs::path& out) {
  GenParams p;
  if (!config.empty()) p = read_json_file(config).get<GenParams>();
  if (g.seed_given) p.seed = g.seed;
  flags.apply(p);
  p.validate();
  print_effective("gen", nlohmann::ordered_json(p));
  const FontLibrary lib = FontLibrary::load(p.fonts, p.alphabet);
  for (const auto& e : lib.excluded) std::cerr << "gen: skipping font " << e.path << " (" << e.reason << ")\n";
  const auto m = generate_dataset(p, lib, count, out, resolve_threads(g.threads));
  std::cout << "gen: wrote " << m.records.size() << " samples to " << out.string() << "\n";
  return 0;
}

struct TrainFlags {
  std::string config;
  std::optional<std::uint64_t> steps, checkpoint_every;
  std::optional<int> batch;
  std::optional<double> lr, weight_decay, clip_norm;
  std::optional<std::size_t> overfit;
  std::string precision;
  bool baseline = false;
  std::string resume;
  std::optional<std::uint64_t> stop_at;
  std::optional<int> vit_layers, vit_dim, vit_heads, dec_layers, dec_dim, dec_heads, patch;
};

int cmd_train(const TrainFlags& f, const GenFlags& gf, const Globals& g, const fs::path& out) {
  TrainConfig cfg;
  if (!f.config.empty()) cfg = read_json_file(f.config).get<TrainConfig>();
  if (g.seed_given) cfg.seed = g.seed;
  gf.apply(cfg.gen);
  if (f.steps) cfg.total_steps = *f.steps;
  if (f.checkpoint_every) cfg.checkpoint_every = *f.checkpoint_every;
  if (f.batch) cfg.batch_size = *f.batch;
  if (f.lr) cfg.learning_rate = *f.lr;
  if (f.weight_decay) cfg.weight_decay = *f.weight_decay;
  if (f.clip_norm) cfg.clip_norm = *f.clip_norm;
  if (f.overfit) cfg.overfit_samples = *f.overfit;
  if (f.vit_layers) cfg.model.vit_layers = *f.vit_layers;
  if (f.vit_dim) cfg.model.vit_dim = *f.vit_dim;
  if (f.vit_heads) cfg.model.vit_heads = *f.vit_heads;
  if (f.dec_layers) cfg.model.dec_layers = *f.dec_layers;
  if (f.dec_dim) cfg.model.dec_dim = *f.dec_dim;
  if (f.dec_heads) cfg.model.dec_heads = *f.dec_heads;
  if (f.patch) cfg.model.patch_size = *f.patch;
  if (!f.precision.empty()) cfg.model.precision = f.precision == "f64" ? model::Precision::f64 : model::Precision::f32;
  if (f.baseline) cfg.model = model::ModelConfig::baseline(cfg.model);
  cfg.validate();
  print_effective("train", nlohmann::ordered_json(cfg));

  const FontLibrary lib = FontLibrary::load(cfg.gen.fonts, cfg.gen.alphabet);
  for (const auto& e : lib.excluded) std::cerr << "train: skipping font " << e.path << " (" << e.reason << ")\n";
  FitOptions opt;
  opt.threads = resolve_threads(g.threads);
  if (!f.resume.empty()) opt.resume = f.resume;
  opt.stop_at = f.stop_at;
  const std::uint64_t every = std::max<std::uint64_t>(1, cfg.total_steps / 20);
  opt.on_step = [&](std::uint64_t step, const StepStats& s, double lr) {
    if ((step + 1) % every == 0 || step + 1 == cfg.total_steps)
      std::printf("step %llu lr %.3g loss %.5f token_acc %.4f\n", static_cast<unsigned long long>(step + 1), lr, s.loss,
                  s.token_acc);
    std::fflush(stdout);
  };
  const FitResult r = cfg.model.precision == model::Precision::f64 ? fit<double>(cfg, lib, out, opt)
                                                                    : fit<float>(cfg, lib, out, opt);
  std::cout << "train: " << r.steps_done << " steps, checkpoint " << r.checkpoint.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& data, const std::string& checkpoint, const Globals& g, const fs::path& out,
             bool with_bins) {
  const DatasetManifest m = load_dataset(data);
  const auto samples = eval::evaluate_checkpoint(checkpoint, m, resolve_threads(g.threads));
  make_out_dir(out);
  detail::write_file_atomic(out / "metrics.csv", eval::metrics_csv(samples));
  detail::write_file_atomic(out / "predictions.jsonl", eval::predictions_jsonl(samples));
  if (with_bins) detail::write_file_atomic(out / "bins.csv", eval::bins_csv(eval::summarize(samples)));
  const auto overall = eval::summarize(samples).front();
  std::printf("%s: %zu samples, mean CER %.4f, mean TER %.4f\n", with_bins ? "sweep" : "eval", samples.size(),
              overall.cer_mean, overall.ter_mean);
  return 0;
}

int cmd_sweep(const std::vector<std::string>& data, const std::string& checkpoint, const Globals& g, const fs::path& out) {
  if (data.size() == 1) return cmd_eval(data.front(), checkpoint, g, out, true);
  for (const auto& d : data) {
    const fs::path sub = out / fs::path(d).filename();
    std::cout << "sweep: " << d << " -> " << sub.string() << "\n";
    cmd_eval(d, checkpoint, g, sub, true);
  }
  return 0;
}

int cmd_compare(const std::string& data, const std::string& rosetta_ckpt, const std::string& baseline_ckpt,
                const Globals& g, const fs::path& out) {
  const DatasetManifest m = load_dataset(data);
  for (const auto& r : m.records)
    if (r.alpha < 1.0)
      throw ValidationError("compare needs full-coverage contexts (alpha = 1); sample " + r.id + " has alpha " +
                            std::to_string(r.alpha));
  const unsigned threads = resolve_threads(g.threads);
  const auto ours = eval::evaluate_checkpoint(rosetta_ckpt, m, threads);
  const auto base = eval::evaluate_checkpoint(baseline_ckpt, m, threads);
  make_out_dir(out);
  detail::write_file_atomic(out / "metrics_rosetta.csv", eval::metrics_csv(ours));
  detail::write_file_atomic(out / "metrics_baseline.csv", eval::metrics_csv(base));
  const std::string table = eval::comparison_csv({eval::comparison_row("ocr_baseline", base), eval::comparison_row("rosetta", ours)});
  detail::write_file_atomic(out / "comparison.csv", table);
  std::cout << table;
  return 0;
}

int cmd_report(const std::string& metrics_file, const fs::path& out) {
  const auto samples = eval::read_metrics_csv(metrics_file);
  const auto files = report::write_report(samples, out);
  std::cout << "report: wrote " << files.size() << " files to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rosetta: context-driven symbol recognition toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (default: ROSETTA_THREADS or all cores)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed");

  std::string out;
  auto out_option = [&](CLI::App* sub) { sub->add_option("--out", out, "Output directory")->required(); };

  auto* scan = app.add_subcommand("fonts-scan", "Index fonts and report glyph coverage");
  std::string scan_dir, scan_alphabet;
  scan->add_option("--fonts", scan_dir, "Font directory")->required();
  scan->add_option("--alphabet", scan_alphabet, "UTF-8 alphabet file (default a-z)");
  out_option(scan);

  auto* gen = app.add_subcommand("gen", "Generate an offline dataset");
  GenFlags gen_flags;
  gen_flags.add(gen);
  std::size_t gen_count = 0;
  std::string gen_config;
  gen->add_option("--count", gen_count, "Number of samples")->required();
  gen->add_option("--config", gen_config, "Generator parameters JSON");
  out_option(gen);

  auto* train = app.add_subcommand("train", "Train a model");
  TrainFlags tf;
  GenFlags train_gen;
  train_gen.add(train);
  train->add_option("--config", tf.config, "Training config JSON");
  train->add_option("--steps", tf.steps, "Total optimizer steps");
  train->add_option("--stop-at", tf.stop_at, "Stop early at this step (schedule still uses --steps)");
  train->add_option("--batch", tf.batch, "Batch size");
  train->add_option("--lr", tf.lr, "Peak learning rate");
  train->add_option("--weight-decay", tf.weight_decay, "AdamW weight decay");
  train->add_option("--clip-norm", tf.clip_norm, "Gradient norm clip (0 = off)");
  train->add_option("--overfit", tf.overfit, "Cycle over this many fixed samples");
  train->add_option("--checkpoint-every", tf.checkpoint_every, "Checkpoint period in steps");
  train->add_option("--precision", tf.precision, "f32 | f64")->check(CLI::IsMember({"f32", "f64"}));
  train->add_flag("--baseline", tf.baseline, "Train the context-free OCR baseline");
  train->add_option("--resume", tf.resume, "Resume from a checkpoint");
  train->add_option("--vit-layers", tf.vit_layers);
  train->add_option("--vit-dim", tf.vit_dim);
  train->add_option("--vit-heads", tf.vit_heads);
  train->add_option("--dec-layers", tf.dec_layers);
  train->add_option("--dec-dim", tf.dec_dim);
  train->add_option("--dec-heads", tf.dec_heads);
  train->add_option("--patch", tf.patch);
  out_option(train);

  auto* ev = app.add_subcommand("eval", "Per-sample metrics for a dataset");
  std::string ev_data, ev_ckpt;
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required();
  out_option(ev);

  auto* sweep = app.add_subcommand("sweep", "Alpha/beta binned metrics for one or more datasets");
  std::vector<std::string> sw_data;
  std::string sw_ckpt;
  sweep->add_option("--data", sw_data, "Dataset directories")->required();
  sweep->add_option("--checkpoint", sw_ckpt, "Model checkpoint")->required();
  out_option(sweep);

  auto* cmp = app.add_subcommand("compare", "Compare against the OCR baseline");
  std::string cmp_data, cmp_ours, cmp_base;
  cmp->add_option("--data", cmp_data, "Full-coverage dataset directory")->required();
  cmp->add_option("--checkpoint", cmp_ours, "Context-aware model checkpoint")->required();
  cmp->add_option("--baseline", cmp_base, "OCR baseline checkpoint")->required();
  out_option(cmp);

  auto* rep = app.add_subcommand("report", "SVG charts and a summary from a metrics CSV");
  std::string rep_metrics;
  rep->add_option("--metrics", rep_metrics, "metrics.csv from eval or sweep")->required();
  out_option(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (*scan) return cmd_fonts_scan(scan_dir, scan_alphabet, out);
    if (*gen) return cmd_gen(gen_flags, g, gen_count, gen_config, out);
    if (*train) return cmd_train(tf, train_gen, g, out);
    if (*ev) return cmd_eval(ev_data, ev_ckpt, g, out, false);
    if (*sweep) return cmd_sweep(sw_data, sw_ckpt, g, out);
    if (*cmp) return cmd_compare(cmp_data, cmp_ours, cmp_base, g, out);
    if (*rep) return cmd_report(rep_metrics, out);
  } catch (const Error& e) {
    std::cerr << "rosetta: error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "rosetta: error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "rosetta: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "rosetta: error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

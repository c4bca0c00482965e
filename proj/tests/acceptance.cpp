// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner. `rosetta_acceptance N` checks criterion N (1..10);
// without an argument every criterion runs. One PASS/FAIL line each; the
// exit status is nonzero if any selected criterion fails. Budgets are CPU
// seconds of this process.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "model_checks.hpp"
#include "support.hpp"

using namespace rosetta;
namespace ts = testing_support;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::filesystem::path font_dir() {
  if (const char* env = std::getenv("ROSETTA_FONT_DIR")) return env;
  return ROSETTA_FONT_DIR;
}

/// Real fonts covering a-z, sorted by path.
std::vector<std::string> latin_fonts() {
  std::vector<std::string> out;
  for (const auto& f : FontLibrary::load(list_font_files(font_dir()), latin_lowercase()).fonts) out.push_back(f.path);
  return out;
}

// --- 1: CAT round trip -------------------------------------------------------

Outcome cat_round_trip() {
  std::mt19937_64 rng(101);
  const ContextTokenizer cat;
  const TokenId ooc = cat.vocabulary().ooc();
  std::size_t bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto pool = ts::random_symbol_pool(rng, 1 + rng() % 40);
    // at most 26 distinct symbols in the context
    std::u32string ctx_pool = pool.substr(0, std::min<std::size_t>(pool.size(), 1 + rng() % 26));
    const auto ctx = ts::random_string(rng, ctx_pool, 0, 40);
    const auto s = ts::random_string(rng, pool, 0, 30);
    const auto enc = cat.encode_context(ctx);
    const ts::BruteCat ref(ctx);
    const auto tokens = cat.encode_with(s, enc.map);
    std::u32string want;
    for (char32_t c : s) want.push_back(ctx.find(c) == std::u32string::npos ? U'*' : c);
    const auto back = cat.decode_with(tokens, enc.map);
    if (back.text != want || back.out_of_range_count != 0 || tokens != ref.encode(s, ooc) ||
        enc.tokens != ref.encode(ctx, ooc))
      ++bad;
  }
  return {bad == 0, std::to_string(bad) + " mismatches in 10000 pairs"};
}

// --- 2: relabeling equivariance ----------------------------------------------

Outcome relabel_equivariance() {
  std::mt19937_64 rng(202);
  const ContextTokenizer cat;
  const TokenId ooc = cat.vocabulary().ooc();
  std::size_t bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto pool = ts::random_symbol_pool(rng, 2 + rng() % 30);
    const auto ctx = ts::random_string(rng, pool.substr(0, std::min<std::size_t>(pool.size(), 26)), 1, 40);
    const auto s = ts::random_string(rng, pool, 1, 30);
    std::u32string permuted = ctx;
    std::shuffle(permuted.begin(), permuted.end(), rng);

    const auto a = cat.encode_context(ctx), b = cat.encode_context(permuted);
    const auto ta = cat.encode_with(s, a.map), tb = cat.encode_with(s, b.map);
    // Relabel through the symbols: label k under ctx names the same symbol
    // as pi(k) under the permuted context.
    const ts::BruteCat ra(ctx), rb(permuted);
    TokenSeq relabeled;
    for (TokenId k : ta) {
      if (k == ooc) {
        relabeled.push_back(ooc);
        continue;
      }
      const char32_t sym = ra.order[static_cast<std::size_t>(k)];
      relabeled.push_back(rb.encode(std::u32string(1, sym), ooc)[0]);
    }
    TokenSeq ctx_relabeled;
    for (TokenId k : a.tokens) ctx_relabeled.push_back(rb.encode(std::u32string(1, ra.order[static_cast<std::size_t>(k)]), ooc)[0]);
    TokenSeq permuted_ctx_ref;
    for (char32_t c : permuted) permuted_ctx_ref.push_back(rb.encode(std::u32string(1, c), ooc)[0]);
    if (tb != relabeled || b.tokens != permuted_ctx_ref) ++bad;
    // The relabeled context sequence names the same symbols position by position.
    std::u32string names;
    for (TokenId k : ctx_relabeled) names.push_back(rb.order[static_cast<std::size_t>(k)]);
    if (names != ctx) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " mismatches in 1000 permutations"};
}

// --- 3: metric oracles -------------------------------------------------------

std::vector<TokenSeq> all_sequences(std::size_t max_len, const std::vector<TokenId>& alphabet) {
  std::vector<TokenSeq> out{{}}, frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<TokenSeq> next;
    for (const auto& s : frontier)
      for (TokenId t : alphabet) {
        auto e = s;
        e.push_back(t);
        next.push_back(std::move(e));
      }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(303);
  std::size_t bad_random = 0;
  const std::u32string gt_pool = U"abcdefg", pred_pool = U"abcdefg*";
  std::uniform_int_distribution<int> tok(0, 38);
  for (int t = 0; t < 10000; ++t) {
    const auto gt = ts::random_string(rng, gt_pool, 1, 30), pred = ts::random_string(rng, pred_pool, 0, 30);
    const double want = static_cast<double>(ts::levenshtein_table(pred, gt)) / static_cast<double>(gt.size());
    if (metrics::cer(pred, gt) != want) ++bad_random;
    TokenSeq tg, tp;
    for (std::size_t i = 1 + rng() % 30; i > 0; --i) tg.push_back(tok(rng));
    for (std::size_t i = rng() % 31; i > 0; --i) tp.push_back(tok(rng));
    const double want_t = static_cast<double>(ts::levenshtein_table(tp, tg)) / static_cast<double>(tg.size());
    if (metrics::ter(tp, tg) != want_t) ++bad_random;
  }

  const TokenId ooc = Vocabulary{}.ooc();
  const auto seqs = all_sequences(5, {0, 1, ooc});
  std::size_t bad_exhaustive = 0, pairs = 0;
  for (const auto& pred : seqs)
    for (const auto& gt : seqs) {
      ++pairs;
      const auto ref = ts::brute_force_ooc(pred, gt, ooc);
      const auto c = metrics::f1_ooc_counts(pred, gt, ooc);
      if (c.tp != ref.tp || c.fp != ref.fp || c.fn != ref.fn || metrics::ter_excluding_ooc(pred, gt, ooc) != ref.ter_no_ooc)
        ++bad_exhaustive;
    }
  return {bad_random == 0 && bad_exhaustive == 0 && pairs == 364u * 364u,
          std::to_string(bad_random) + " random mismatches, " + std::to_string(bad_exhaustive) + " of " +
              std::to_string(pairs) + " exhaustive pairs differ"};
}

// --- 4: generator bookkeeping ------------------------------------------------

Outcome generator_bookkeeping() {
  const auto fonts_paths = latin_fonts();
  if (fonts_paths.empty()) return {false, "no fonts covering a-z in " + font_dir().string()};
  GenParams params;
  params.fonts = fonts_paths;
  params.seed = 404;
  const auto fonts = FontLibrary::load(params.fonts, params.alphabet);
  ts::TempDir dir("acceptance_gen");
  generate_dataset(params, fonts, 10000, dir.path());
  const auto data = load_dataset(dir.path());
  verify_dataset(data);
  const TokenId ooc = Vocabulary{}.ooc();
  std::size_t bad = 0;
  for (const auto& r : data.records) {
    const std::set<char32_t> uq(r.query_text.begin(), r.query_text.end()), uc(r.context_text.begin(), r.context_text.end());
    std::size_t hit = 0, extra = 0;
    for (char32_t c : uq) hit += uc.count(c);
    for (char32_t c : uc) extra += 1 - uq.count(c);
    const double alpha = uq.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(uq.size());
    const double beta = uc.empty() ? 0.0 : static_cast<double>(extra) / static_cast<double>(uc.size());
    const ts::BruteCat ref(r.context_text);
    bool ok = r.alpha == alpha && r.beta == beta && uc.size() == r.context_text.size();
    ok = ok && r.target_tokens == ref.encode(r.query_text, ooc) && r.context_tokens == ref.encode(r.context_text, ooc);
    for (std::size_t i = 0; ok && i < r.query_text.size(); ++i)
      ok = (r.target_tokens[i] == ooc) == (uc.count(r.query_text[i]) == 0);
    if (!ok) ++bad;
  }
  return {bad == 0 && data.records.size() == 10000,
          std::to_string(bad) + " of " + std::to_string(data.records.size()) + " samples inconsistent"};
}

// --- 5..7: model checks ------------------------------------------------------

Outcome gradient() {
  const auto paired = ts::gradient_check(ts::tiny_config(), 400, 505);
  const auto single = ts::gradient_check(ts::tiny_config(model::Fusion::single), 200, 506);
  const double worst = std::max(paired.worst_rel, single.worst_rel);
  return {worst < 1e-5 && paired.coords + single.coords >= 200,
          fmt("max rel error %.3g over %.0f coordinates (tol 1e-5)", worst, double(paired.coords + single.coords))};
}

Outcome causality() {
  model::ModelConfig c;
  c.precision = model::Precision::f64;
  std::size_t violations = 0;
  for (std::uint64_t seed : {606, 607}) violations += ts::causality_violations(c, seed);
  return {violations == 0, std::to_string(violations) + " earlier-position changes across " + std::to_string(c.dec_layers) +
                               " decoder layers"};
}

Outcome loss_normalization() {
  const double loss = ts::uniform_logit_loss(static_cast<std::size_t>(model::ModelConfig{}.vocab_size), 7);
  const double loss_err = std::abs(loss - std::log(39.0));
  model::ModelConfig c;
  c.precision = model::Precision::f64;
  const double row_err = std::max(ts::softmax_row_error(c, 707), ts::softmax_row_error(ts::tiny_config(), 708));
  return {loss_err <= 1e-9 && row_err <= 1e-12,
          fmt("|loss - ln 39| = %.3g (tol 1e-9), max |row sum - 1| = %.3g (tol 1e-12)", loss_err, row_err)};
}

// --- 8: overfit sanity -------------------------------------------------------

/// Greedy decoding accuracy: matching positions over max(|pred|, |target|),
/// with <eos> counted as one more position.
template <typename Real>
double greedy_accuracy(const model::Network<Real>& net, const model::ParamStore<Real>& p,
                       const std::vector<TrainExample>& examples) {
  std::size_t hits = 0, total = 0;
  for (const auto& e : examples) {
    const auto pred = net.generate(p, &e.context_image, e.context_tokens, e.query_image);
    for (std::size_t i = 0; i < std::min(pred.size(), e.prefix.size()); ++i) hits += pred[i] == e.prefix[i];
    hits += pred.size() == e.prefix.size();  // <eos> in the right place
    total += std::max(pred.size(), e.prefix.size()) + 1;
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

Outcome overfit() {
  const auto all = latin_fonts();
  if (all.size() < 3) return {false, "fewer than 3 fonts in " + font_dir().string()};
  TrainConfig cfg;
  cfg.gen.alphabet = U"abcdefgh";
  cfg.gen.fonts.assign(all.begin(), all.begin() + 3);
  cfg.gen.alpha = {1.0, 1.0};
  cfg.gen.query_len = {1, 10};
  cfg.gen.s_add = {0, 4};
  cfg.overfit_samples = 32;
  cfg.batch_size = 16;
  cfg.total_steps = 600;
  cfg.learning_rate = 1e-3;
  cfg.seed = 808;
  const auto fonts = FontLibrary::load(cfg.gen.fonts, cfg.gen.alphabet);
  ts::TempDir dir("acceptance_overfit");
  const auto r = fit<float>(cfg, fonts, dir.path());
  // final loss: mean over the last full pass through the 32 samples
  const double final_loss = (r.history[r.history.size() - 1].loss + r.history[r.history.size() - 2].loss) / 2;
  const auto ck = model::load_checkpoint<float>(r.checkpoint);
  model::Network<float> net(ck.config);
  std::vector<TrainExample> examples;
  for (std::size_t i = 0; i < cfg.overfit_samples; ++i) examples.push_back(training_example(cfg, fonts, i));
  const double acc = greedy_accuracy(net, ck.params, examples);
  return {final_loss < 0.05 && acc >= 0.99 && cfg.total_steps <= 3000,
          fmt("final loss %.4f (< 0.05), greedy token accuracy %.4f (>= 0.99) after %.0f steps", final_loss, acc,
              double(cfg.total_steps))};
}

// --- 9: trend at toy scale ---------------------------------------------------

constexpr const char* kHeldOutFont = "DejaVuSerif-Italic.ttf";

Outcome trend() {
  const auto all = latin_fonts();
  std::vector<std::string> train_fonts, held;
  for (const auto& p : all) (std::filesystem::path(p).filename() == kHeldOutFont ? held : train_fonts).push_back(p);
  if (held.size() != 1 || train_fonts.size() < 20) return {false, "need 20 training fonts plus " + std::string(kHeldOutFont)};
  train_fonts.resize(20);

  TrainConfig cfg;
  cfg.gen.alphabet = U"abcdefghijkl";
  cfg.gen.fonts = train_fonts;
  cfg.gen.query_len = {1, 4};
  cfg.gen.s_add = {0, 2};
  cfg.gen.font_size = {12, 16};
  cfg.batch_size = 16;
  cfg.total_steps = 14000;
  cfg.learning_rate = 2e-3;
  cfg.seed = 909;
  const auto fonts = FontLibrary::load(cfg.gen.fonts, cfg.gen.alphabet);
  ts::TempDir run("acceptance_trend_run");
  const auto r = fit<float>(cfg, fonts, run.path());

  // Held-out set: fixed-length queries so that the alpha bins differ only in
  // coverage, 200 samples per requested coverage level.
  const auto held_fonts = FontLibrary::load(held, cfg.gen.alphabet);
  std::vector<eval::SampleMetrics> metrics;
  const double levels[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (std::size_t k = 0; k < std::size(levels); ++k) {
    GenParams eval_params = cfg.gen;
    eval_params.fonts = held;
    eval_params.query_len = {4, 4};
    eval_params.alpha = {levels[k], levels[k]};
    eval_params.seed = 9090 + k;
    ts::TempDir data_dir("acceptance_trend_data");
    generate_dataset(eval_params, held_fonts, 200, data_dir.path());
    const auto part = eval::evaluate_checkpoint(r.checkpoint, load_dataset(data_dir.path()));
    metrics.insert(metrics.end(), part.begin(), part.end());
  }
  const auto rows = eval::summarize(metrics);

  std::string detail = "held-out CER by alpha bin:";
  int violations = 0;
  double worst = 0.0;
  bool empty_bin = false;
  for (int b = 0; b < eval::kBinCount; ++b) {
    const auto& row = rows[1 + static_cast<std::size_t>(b)];
    empty_bin = empty_bin || row.count == 0;
    detail += fmt(" %.3f", row.cer_mean) + "(n=" + std::to_string(row.count) + ")";
    if (b > 0) {
      const double rise = row.cer_mean - rows[static_cast<std::size_t>(b)].cer_mean;
      if (rise > 0) {
        ++violations;
        worst = std::max(worst, rise);
      }
    }
  }
  detail += "; " + std::to_string(violations) + " rising step(s), largest " + fmt("%.2f", 100 * worst) + " points";
  return {!empty_bin && (violations == 0 || (violations == 1 && worst <= 0.02)), detail};
}

// --- 10: determinism ---------------------------------------------------------

Outcome determinism() {
  const auto all = latin_fonts();
  if (all.size() < 2) return {false, "fewer than 2 fonts in " + font_dir().string()};
  TrainConfig cfg;
  cfg.gen.fonts.assign(all.begin(), all.begin() + 2);
  cfg.gen.query_len = {1, 8};
  cfg.model.precision = model::Precision::f64;
  cfg.batch_size = 4;
  cfg.total_steps = 4;
  cfg.seed = 1010;
  const auto fonts = FontLibrary::load(cfg.gen.fonts, cfg.gen.alphabet);
  GenParams gen = cfg.gen;
  gen.seed = 1011;

  std::vector<std::string> manifests, logs, checkpoints, csvs;
  for (unsigned threads : {1u, 2u}) {
    ts::TempDir data("acceptance_det_data"), run("acceptance_det_run");
    generate_dataset(gen, fonts, 24, data.path(), threads);
    FitOptions opt;
    opt.threads = threads;
    const auto r = fit<double>(cfg, fonts, run.path(), opt);
    const auto metrics = eval::evaluate_checkpoint(r.checkpoint, load_dataset(data.path()), threads);
    eval::write_sweep(run / "sweep", metrics);
    manifests.push_back(ts::slurp(data / "manifest.jsonl") + ts::slurp(data / "params.json"));
    logs.push_back(ts::slurp(run / "loss.csv"));
    checkpoints.push_back(ts::slurp(run / "model.ckpt"));
    csvs.push_back(ts::slurp(run / "sweep" / "metrics.csv") + ts::slurp(run / "sweep" / "bins.csv"));
  }
  const bool same = manifests[0] == manifests[1] && logs[0] == logs[1] && checkpoints[0] == checkpoints[1] &&
                    csvs[0] == csvs[1] && !manifests[0].empty() && logs[0] != kLossHeader;
  return {same, same ? "manifest, loss log, checkpoint and metric CSVs byte-identical across reruns"
                     : "reruns differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "CAT round trip over random Unicode contexts", 5, cat_round_trip},
      {2, "CAT relabeling equivariance", 5, relabel_equivariance},
      {3, "metric oracles", 60, metric_oracles},
      {4, "generator alpha/beta bookkeeping and ooc rule", 120, generator_bookkeeping},
      {5, "gradient check", 120, gradient},
      {6, "decoder causality at every depth", 60, causality},
      {7, "uniform-logit loss and softmax normalization", 60, loss_normalization},
      {8, "overfit sanity on a fixed 32-sample set", 600, overfit},
      {9, "CER trend over alpha on a held-out font", 1800, trend},
      {10, "determinism of gen, train and eval", 600, determinism},
  };
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);
  if (argc > 1 && (only < 1 || only > 10)) {
    std::fprintf(stderr, "usage: %s [1..10]\n", argv[0]);
    return 2;
  }
  bool all_pass = true;
  for (const auto& c : criteria) {
    if (only && c.id != only) continue;
    const std::clock_t t0 = std::clock();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double cpu = static_cast<double>(std::clock() - t0) / CLOCKS_PER_SEC;
    const bool pass = o.pass && cpu <= c.budget_s;
    all_pass = all_pass && pass;
    std::printf("criterion %d: %s  %s: %s [cpu %.1f s, budget %.0f s]\n", c.id, pass ? "PASS" : "FAIL", c.title,
                o.detail.c_str(), cpu, c.budget_s);
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}

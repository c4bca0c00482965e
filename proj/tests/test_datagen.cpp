// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support.hpp"

using namespace rosetta;
using testing_support::TempDir;

namespace {

struct SyntheticFonts {
  TempDir dir{"fonts"};
  std::vector<std::string> paths;
  FontLibrary lib;
  explicit SyntheticFonts(int n = 3, std::u32string symbols = latin_lowercase()) {
    paths = testing_support::write_test_fonts(dir.path(), symbols, n);
    lib = FontLibrary::load(paths, symbols);
  }
};

GenParams small_params(const std::vector<std::string>& fonts, std::uint64_t seed = 1) {
  GenParams p;
  p.fonts = fonts;
  p.seed = seed;
  p.font_size = {10, 14};
  return p;
}

}  // namespace

TEST(Datagen, ParamsJsonRoundTrip) {
  GenParams p;
  p.alphabet = U"αβγ";
  p.fonts = {"a.ttf", "b.ttf"};
  p.query_len = {2, 7};
  p.alpha = {0.25, 0.75};
  p.words = {U"αβ", U"γ"};
  p.seed = 1234567890123ULL;
  const nlohmann::ordered_json j = p;
  const GenParams q = j.get<GenParams>();
  EXPECT_EQ(q.alphabet, p.alphabet);
  EXPECT_EQ(q.fonts, p.fonts);
  EXPECT_EQ(q.query_len, p.query_len);
  EXPECT_EQ(q.alpha, p.alpha);
  EXPECT_EQ(q.words, p.words);
  EXPECT_EQ(q.seed, p.seed);
}

TEST(Datagen, ValidationRejectsBadRanges) {
  GenParams p;
  p.query_len = {0, 3};
  EXPECT_THROW(p.validate(), ValidationError);
  p = GenParams{};
  p.alpha = {0.5, 1.5};
  EXPECT_THROW(p.validate(), ValidationError);
  p = GenParams{};
  p.alphabet.clear();
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Datagen, CoverageAndIrrelevantRates) {
  EXPECT_DOUBLE_EQ(coverage_rate(U"abca", U"xa"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(irrelevant_rate(U"abca", U"xa"), 0.5);
  EXPECT_DOUBLE_EQ(irrelevant_rate(U"abc", U""), 0.0);
  EXPECT_EQ(covered_count(0.3, 10), 3u);
  EXPECT_EQ(covered_count(1.0, 7), 7u);
  EXPECT_EQ(covered_count(0.0, 7), 0u);
}

TEST(Datagen, ContextHonoursAlphaAndSadd) {
  Rng rng(3);
  const std::u32string alphabet = latin_lowercase();
  for (int t = 0; t < 500; ++t) {
    const std::u32string q = U"hello";
    const double alpha = rng.uniform01();
    const int s_add = static_cast<int>(rng.uniform_int(0, 20));
    const ContextText ctx = build_context_text(q, alphabet, alpha, s_add, rng);
    const auto uq = unique_symbols(q);
    ASSERT_EQ(static_cast<std::size_t>(std::lround(ctx.alpha_actual * uq.size())), covered_count(alpha, uq.size()));
    ASSERT_GE(ctx.alpha_actual + 1e-12, alpha);
    std::size_t extra = 0;
    for (char32_t c : unique_symbols(ctx.text)) extra += uq.find(c) == std::u32string::npos;
    ASSERT_EQ(extra, static_cast<std::size_t>(s_add));
    ASSERT_EQ(unique_symbols(ctx.text).size(), ctx.text.size());
  }
}

TEST(Datagen, ContextNeverExceedsLabelBudget) {
  Rng rng(4);
  std::u32string alphabet;
  for (char32_t c = 0x4E00; c < 0x4E00 + 60; ++c) alphabet.push_back(c);
  const std::u32string q = alphabet.substr(0, 15);
  for (int t = 0; t < 100; ++t) {
    auto ctx = build_context_text(q, alphabet, 1.0, 20, rng);
    ASSERT_LE(unique_symbols(ctx.text).size(), 26u);
  }
}

TEST(Datagen, SampleBookkeepingAndOocRule) {
  SyntheticFonts fonts;
  const GenParams p = small_params(fonts.paths);
  const ContextTokenizer cat;
  for (std::size_t i = 0; i < 200; ++i) {
    const RenderedSample s = make_indexed_sample(p, fonts.lib, i);
    ASSERT_GE(s.query_text.size(), 1u);
    ASSERT_LE(s.query_text.size(), 15u);
    ASSERT_DOUBLE_EQ(s.alpha_actual, coverage_rate(s.query_text, s.context_text));
    ASSERT_DOUBLE_EQ(s.beta_actual, irrelevant_rate(s.query_text, s.context_text));
    ASSERT_EQ(s.target_tokens.size(), s.query_text.size());
    for (std::size_t k = 0; k < s.query_text.size(); ++k) {
      const bool in_ctx = s.context_text.find(s.query_text[k]) != std::u32string::npos;
      ASSERT_EQ(s.target_tokens[k] == cat.vocabulary().ooc(), !in_ctx);
    }
    ASSERT_EQ(s.query_image.height, s.context_image.height);  // same font and size
    ASSERT_EQ(s.id, sample_id(i));
  }
}

TEST(Datagen, IndexedSamplesAreReproducible) {
  SyntheticFonts fonts;
  const GenParams p = small_params(fonts.paths, 99);
  const RenderedSample a = make_indexed_sample(p, fonts.lib, 17);
  const RenderedSample b = make_indexed_sample(p, fonts.lib, 17);
  EXPECT_EQ(a.query_text, b.query_text);
  EXPECT_EQ(a.context_text, b.context_text);
  EXPECT_EQ(a.query_image, b.query_image);
  EXPECT_EQ(a.context_image, b.context_image);
  const RenderedSample c = make_indexed_sample(p, fonts.lib, 18);
  EXPECT_FALSE(a.query_text == c.query_text && a.context_text == c.context_text);
}

TEST(Datagen, FontLibraryExcludesIncompleteFonts) {
  TempDir dir("fontlib");
  std::u32string no_q = latin_lowercase();
  no_q.erase(no_q.find(U'q'), 1);
  testing_support::write_bytes(dir / "b_missing_q.ttf", testing_support::make_test_font(no_q));
  testing_support::write_bytes(dir / "a_full.ttf", testing_support::make_test_font(latin_lowercase()));
  testing_support::write_bytes(dir / "c_broken.ttf", {1, 2, 3, 4});
  const auto files = list_font_files(dir.path());
  ASSERT_EQ(files.size(), 3u);
  EXPECT_NE(files[0].find("a_full"), std::string::npos);
  const FontLibrary lib = FontLibrary::load(files, latin_lowercase());
  ASSERT_EQ(lib.size(), 1u);
  ASSERT_EQ(lib.excluded.size(), 2u);
  EXPECT_EQ(lib.excluded[0].missing, U"q");
  EXPECT_THROW(list_font_files(dir / "nope"), IoError);
}

TEST(Datagen, FontIndexRoundTrip) {
  TempDir dir("fontindex");
  const std::vector<std::string> paths{"/x/a.ttf", "/y/b.ttf"};
  std::ofstream(dir / "fonts.tsv") << format_font_index(paths);
  EXPECT_EQ(read_font_index(dir / "fonts.tsv"), paths);
}

TEST(Datagen, DatasetRoundTripAndDeterminism) {
  SyntheticFonts fonts;
  const GenParams p = small_params(fonts.paths, 5);
  TempDir a("ds_a"), b("ds_b");
  const auto m = generate_dataset(p, fonts.lib, 25, a.path(), 1);
  generate_dataset(p, fonts.lib, 25, b.path(), 3);
  EXPECT_EQ(testing_support::slurp(a / "manifest.jsonl"), testing_support::slurp(b / "manifest.jsonl"));
  EXPECT_EQ(testing_support::slurp(a / "images/000007_q.png"), testing_support::slurp(b / "images/000007_q.png"));

  const DatasetManifest loaded = load_dataset(a.path());
  ASSERT_EQ(loaded.records.size(), 25u);
  EXPECT_NO_THROW(verify_dataset(loaded));
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    const RenderedSample s = loaded.load_sample(i);
    const RenderedSample fresh = make_indexed_sample(p, fonts.lib, i);
    ASSERT_EQ(s.query_image, fresh.query_image);
    ASSERT_EQ(s.target_tokens, fresh.target_tokens);
    ASSERT_EQ(s.context_tokens, m.records[i].context_tokens);
  }
  std::filesystem::remove(a / "images/000003_c.png");
  EXPECT_THROW(verify_dataset(loaded), IoError);
}

TEST(Datagen, EmptyDataset) {
  TempDir dir("empty");
  GenParams p;
  generate_dataset(p, FontLibrary{}, 0, dir.path());
  EXPECT_EQ(testing_support::slurp(dir / "manifest.jsonl"), "");
  EXPECT_TRUE(load_dataset(dir.path()).records.empty());
}

TEST(Datagen, WordQueriesAndNewAlphabet) {
  std::vector<std::u32string> words{U"αβγ", U"δε", U"ζηθικ"};
  const GenParams p = archetype_params(Archetype::new_alphabet, {}, words, 3);
  EXPECT_EQ(p.alphabet, U"αβγδεζηθικ");
  SyntheticFonts fonts(1, p.alphabet);
  GenParams q = p;
  q.fonts = fonts.paths;
  q.font_size = {10, 12};
  for (std::size_t i = 0; i < 20; ++i) {
    const auto s = make_indexed_sample(q, fonts.lib, i);
    EXPECT_NE(std::find(words.begin(), words.end(), s.query_text), words.end());
  }
  const GenParams held = archetype_params(Archetype::held_out_text, {}, {U"cat", U"Dog", U"x"}, 1);
  EXPECT_EQ(held.words, (std::vector<std::u32string>{U"cat", U"x"}));
}

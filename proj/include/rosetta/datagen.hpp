// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rosetta/error.hpp"
#include "rosetta/image.hpp"
#include "rosetta/random.hpp"
#include "rosetta/tokenizer.hpp"
#include "rosetta/truetype.hpp"
#include "rosetta/utf8.hpp"

namespace rosetta {

inline constexpr int kDatasetFormatVersion = 1;

struct IntRange {
  int lo = 0;
  int hi = 0;
  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const RealRange&, const RealRange&) = default;
};

inline std::u32string latin_lowercase() {
  std::u32string s;
  for (char32_t c = U'a'; c <= U'z'; ++c) s.push_back(c);
  return s;
}

/// Generation controls.
struct GenParams {
  std::u32string alphabet = latin_lowercase();
  std::vector<std::string> fonts;
  IntRange query_len{1, 15};
  RealRange alpha{0.0, 1.0};
  IntRange s_add{0, 20};
  IntRange font_size{20, 30};
  std::uint64_t seed = 0;
  /// Each selected context symbol appears 1-2 times instead of once.
  bool context_repeats = false;
  /// When nonempty, queries are drawn from this list instead of random strings.
  std::vector<std::u32string> words;
  int pad = 4;
  double dpi = 96.0;

  void validate() const {
    if (alphabet.empty()) throw ValidationError("alphabet is empty");
    if (query_len.lo < 1 || query_len.hi < query_len.lo) throw ValidationError("invalid query length range");
    if (alpha.lo < 0.0 || alpha.hi > 1.0 || alpha.hi < alpha.lo) throw ValidationError("invalid alpha range");
    if (s_add.lo < 0 || s_add.hi < s_add.lo) throw ValidationError("invalid s_add range");
    if (font_size.lo < 1 || font_size.hi < font_size.lo) throw ValidationError("invalid font size range");
    if (pad < 0) throw ValidationError("negative padding");
  }
};

inline void to_json(nlohmann::ordered_json& j, const GenParams& p) {
  std::vector<std::string> words;
  for (const auto& w : p.words) words.push_back(utf8::encode(w));
  j = nlohmann::ordered_json{
      {"alphabet", utf8::encode(p.alphabet)},
      {"fonts", p.fonts},
      {"query_len", {p.query_len.lo, p.query_len.hi}},
      {"alpha", {p.alpha.lo, p.alpha.hi}},
      {"s_add", {p.s_add.lo, p.s_add.hi}},
      {"font_size", {p.font_size.lo, p.font_size.hi}},
      {"seed", p.seed},
      {"context_repeats", p.context_repeats},
      {"words", words},
      {"pad", p.pad},
      {"dpi", p.dpi},
  };
}

inline void from_json(const nlohmann::ordered_json& j, GenParams& p) {
  GenParams d;
  p.alphabet = utf8::decode(j.value("alphabet", utf8::encode(d.alphabet)));
  p.fonts = j.value("fonts", d.fonts);
  auto int_range = [&](const char* key, IntRange def) {
    if (!j.contains(key)) return def;
    return IntRange{j.at(key).at(0).get<int>(), j.at(key).at(1).get<int>()};
  };
  p.query_len = int_range("query_len", d.query_len);
  p.s_add = int_range("s_add", d.s_add);
  p.font_size = int_range("font_size", d.font_size);
  p.alpha = j.contains("alpha") ? RealRange{j["alpha"].at(0).get<double>(), j["alpha"].at(1).get<double>()} : d.alpha;
  p.seed = j.value("seed", d.seed);
  p.context_repeats = j.value("context_repeats", d.context_repeats);
  p.words.clear();
  for (const auto& w : j.value("words", std::vector<std::string>{})) p.words.push_back(utf8::decode(w));
  p.pad = j.value("pad", d.pad);
  p.dpi = j.value("dpi", d.dpi);
}

// ---------------------------------------------------------------------------
// Fonts

struct LoadedFont {
  std::string path;
  truetype::Font font;
};

/// Fonts usable for an alphabet. Fonts lacking a glyph for any alphabet
/// symbol are dropped at load time and reported in `excluded`.
struct FontLibrary {
  struct Excluded {
    std::string path;
    std::u32string missing;
    std::string reason;
  };
  std::vector<LoadedFont> fonts;
  std::vector<Excluded> excluded;

  static FontLibrary load(const std::vector<std::string>& paths, std::u32string_view alphabet) {
    FontLibrary lib;
    for (const auto& path : paths) {
      try {
        truetype::Font font = truetype::Font::load(path);
        std::u32string missing;
        for (char32_t c : alphabet)
          if (!font.has_glyph(c) && missing.find(c) == std::u32string::npos) missing.push_back(c);
        if (missing.empty()) {
          lib.fonts.push_back({path, std::move(font)});
        } else {
          lib.excluded.push_back({path, missing, "missing glyphs"});
        }
      } catch (const ValidationError& e) {
        lib.excluded.push_back({path, {}, e.what()});
      }
    }
    return lib;
  }

  std::size_t size() const noexcept { return fonts.size(); }
  bool empty() const noexcept { return fonts.empty(); }
};

/// TrueType files in `dir` (non-recursive), sorted by filename.
inline std::vector<std::string> list_font_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("font directory not found", dir.string());
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ttf" || ext == ".otf" || ext == ".ttc") out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
    return std::filesystem::path(a).filename() < std::filesystem::path(b).filename();
  });
  return out;
}

/// Font index file: one `<font_id>\t<filename>` line per font.
inline std::string format_font_index(const std::vector<std::string>& paths) {
  std::string out;
  for (std::size_t i = 0; i < paths.size(); ++i) out += std::to_string(i) + "\t" + paths[i] + "\n";
  return out;
}

inline std::vector<std::string> read_font_index(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read font index", file.string());
  std::vector<std::string> paths;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ValidationError("malformed font index line: " + line);
    std::size_t id = std::stoul(line.substr(0, tab));
    if (id != paths.size()) throw ValidationError("font index ids must be contiguous from 0");
    std::filesystem::path p = line.substr(tab + 1);
    if (p.is_relative()) p = file.parent_path() / p;
    paths.push_back(p.string());
  }
  return paths;
}

// ---------------------------------------------------------------------------
// Rendering

struct RenderOptions {
  int pad = 4;
  double dpi = 96.0;
  /// Insert a space-width gap between consecutive symbols (context layout).
  bool spaced = false;
};

/// Renders `text` on one baseline: black anti-aliased glyphs on white,
/// `pad` pixels of margin on every side. The height depends only on the
/// font metrics and size, so every raster from one (font, size) pair has
/// the same height. Empty text yields a 2*pad wide blank raster.
inline GrayImage render_text(const truetype::Font& font, std::size_t font_id, std::u32string_view text, int size_pt,
                             const RenderOptions& opt = {}) {
  const double px_per_em = size_pt * opt.dpi / 72.0;
  const double scale = px_per_em / font.units_per_em();
  const double ascent = std::ceil(font.ascender() * scale);
  const double descent = std::ceil(-static_cast<double>(font.descender()) * scale);
  const std::size_t height = static_cast<std::size_t>(ascent + std::max(0.0, descent)) + 2 * static_cast<std::size_t>(opt.pad);

  std::vector<std::uint32_t> glyphs;
  glyphs.reserve(text.size());
  for (char32_t c : text) {
    std::uint32_t g = font.glyph_index(c);
    if (g == 0) throw MissingGlyph(c, font_id);
    glyphs.push_back(g);
  }
  double gap = 0.0;
  if (opt.spaced) {
    std::uint32_t space = font.glyph_index(U' ');
    gap = (space ? font.advance_width(space) : font.units_per_em() / 4.0) * scale;
  }
  double advance = 0.0;
  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    advance += font.advance_width(glyphs[i]) * scale;
    if (i + 1 < glyphs.size()) advance += gap;
  }
  const std::size_t width = static_cast<std::size_t>(std::ceil(advance)) + 2 * static_cast<std::size_t>(opt.pad);

  truetype::Canvas canvas(width, height);
  const double baseline = opt.pad + ascent;
  double pen = opt.pad;
  for (std::uint32_t g : glyphs) {
    canvas.add_outline(font.outline(g), scale, pen, baseline);
    pen += font.advance_width(g) * scale + gap;
  }
  GrayImage img(width, height);
  const auto cov = canvas.coverage();
  for (std::size_t i = 0; i < cov.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(255 - std::lround(cov[i] * 255.0));
  return img;
}

// ---------------------------------------------------------------------------
// Text sampling

inline std::u32string sample_query_text(const GenParams& params, Rng& rng) {
  if (params.alphabet.empty()) throw ValidationError("alphabet is empty");
  if (!params.words.empty()) return params.words[rng.index(params.words.size())];
  const auto len = static_cast<std::size_t>(rng.uniform_int(params.query_len.lo, params.query_len.hi));
  std::u32string out(len, U'\0');
  for (auto& c : out) c = params.alphabet[rng.index(params.alphabet.size())];
  return out;
}

/// Distinct symbols of `text` in first-occurrence order.
inline std::u32string unique_symbols(std::u32string_view text) {
  std::u32string out;
  std::unordered_set<char32_t> seen;
  for (char32_t c : text)
    if (seen.insert(c).second) out.push_back(c);
  return out;
}

/// |unique(query) ∩ unique(context)| / |unique(query)|.
inline double coverage_rate(std::u32string_view query, std::u32string_view context) {
  const auto uq = unique_symbols(query);
  if (uq.empty()) return 0.0;
  const auto uc = unique_symbols(context);
  std::size_t hit = 0;
  for (char32_t c : uq)
    if (uc.find(c) != std::u32string::npos) ++hit;
  return static_cast<double>(hit) / static_cast<double>(uq.size());
}

/// |unique(context) \ unique(query)| / |unique(context)|; 0 for an empty context.
inline double irrelevant_rate(std::u32string_view query, std::u32string_view context) {
  const auto uc = unique_symbols(context);
  if (uc.empty()) return 0.0;
  const auto uq = unique_symbols(query);
  std::size_t extra = 0;
  for (char32_t c : uc)
    if (uq.find(c) == std::u32string::npos) ++extra;
  return static_cast<double>(extra) / static_cast<double>(uc.size());
}

struct ContextText {
  std::u32string text;
  double alpha_actual = 0.0;
  double beta_actual = 0.0;
};

/// Number of covered query symbols for a requested coverage rate: ceil(alpha*|U|).
inline std::size_t covered_count(double alpha, std::size_t unique_count) {
  const double raw = alpha * static_cast<double>(unique_count);
  // Absorb representation error so e.g. 0.3*10 does not round up to 4.
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(k, unique_count);
}

inline ContextText build_context_text(std::u32string_view query, std::u32string_view alphabet, double alpha,
                                      int s_add, Rng& rng, bool repeats = false,
                                      std::size_t max_distinct = kDefaultLabelTokens) {
  const std::u32string uq = unique_symbols(query);
  std::vector<char32_t> covered_pool(uq.begin(), uq.end());
  std::vector<char32_t> extra_pool;
  for (char32_t c : unique_symbols(alphabet))
    if (uq.find(c) == std::u32string::npos) extra_pool.push_back(c);

  const std::size_t k = covered_count(std::clamp(alpha, 0.0, 1.0), uq.size());
  std::size_t extra = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, s_add)), extra_pool.size());
  // Large alphabets could otherwise overflow the label vocabulary.
  extra = std::min(extra, max_distinct > k ? max_distinct - k : 0);

  std::vector<char32_t> chosen = rng.sample(covered_pool, k);
  for (char32_t c : rng.sample(extra_pool, extra)) chosen.push_back(c);
  if (repeats) {
    std::vector<char32_t> doubled;
    for (char32_t c : chosen) {
      doubled.push_back(c);
      if (rng.uniform_int(0, 1) == 1) doubled.push_back(c);
    }
    chosen = std::move(doubled);
  }
  rng.shuffle(chosen);

  ContextText out;
  out.text.assign(chosen.begin(), chosen.end());
  out.alpha_actual = coverage_rate(query, out.text);
  out.beta_actual = irrelevant_rate(query, out.text);
  return out;
}

// ---------------------------------------------------------------------------
// Samples

struct RenderedSample {
  std::string id;
  GrayImage query_image;
  GrayImage context_image;
  std::u32string query_text;
  std::u32string context_text;
  TokenSeq context_tokens;
  TokenSeq target_tokens;
  double alpha_actual = 0.0;
  double beta_actual = 0.0;
  std::size_t font_id = 0;
  TokenMap token_map;
};

inline std::string sample_id(std::size_t index) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index;
  return os.str();
}

/// Builds the context-driven ground truth for a (query, context) text pair.
inline void assign_ground_truth(RenderedSample& s, const ContextTokenizer& cat) {
  auto enc = cat.encode_context(s.context_text);
  s.context_tokens = std::move(enc.tokens);
  s.token_map = std::move(enc.map);
  s.target_tokens = cat.encode_with(s.query_text, s.token_map);
}

/// One sample: query text, context text, both rendered with the same font
/// and size, and the tokenizer ground truth.
inline RenderedSample make_sample(const GenParams& params, const FontLibrary& fonts, Rng& rng,
                                  const ContextTokenizer& cat = ContextTokenizer{}) {
  if (fonts.empty()) throw ValidationError("no fonts loaded");
  RenderedSample s;
  s.font_id = rng.index(fonts.size());
  const int size = static_cast<int>(rng.uniform_int(params.font_size.lo, params.font_size.hi));
  s.query_text = sample_query_text(params, rng);
  const double alpha = rng.uniform(params.alpha.lo, params.alpha.hi);
  const int s_add = static_cast<int>(rng.uniform_int(params.s_add.lo, params.s_add.hi));
  ContextText ctx = build_context_text(s.query_text, params.alphabet, alpha, s_add, rng, params.context_repeats,
                                       cat.vocabulary().label_count());
  s.context_text = std::move(ctx.text);
  s.alpha_actual = ctx.alpha_actual;
  s.beta_actual = ctx.beta_actual;

  const auto& font = fonts.fonts[s.font_id].font;
  RenderOptions q_opt{params.pad, params.dpi, false};
  RenderOptions c_opt{params.pad, params.dpi, true};
  s.query_image = render_text(font, s.font_id, s.query_text, size, q_opt);
  s.context_image = render_text(font, s.font_id, s.context_text, size, c_opt);
  assign_ground_truth(s, cat);
  return s;
}

/// Sample `index` of the stream seeded by `params.seed`; independent of any
/// other index, so samples can be produced in any order.
inline RenderedSample make_indexed_sample(const GenParams& params, const FontLibrary& fonts, std::size_t index,
                                          const ContextTokenizer& cat = ContextTokenizer{}) {
  Rng rng(derive_seed(params.seed, index));
  RenderedSample s = make_sample(params, fonts, rng, cat);
  s.id = sample_id(index);
  return s;
}

// ---------------------------------------------------------------------------
// Offline datasets

struct ManifestRecord {
  std::string id;
  std::u32string query_text;
  std::u32string context_text;
  TokenSeq context_tokens;
  TokenSeq target_tokens;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t font_id = 0;
  std::string q_image;
  std::string c_image;
};

inline nlohmann::ordered_json to_json_line(const ManifestRecord& r) {
  return nlohmann::ordered_json{
      {"id", r.id},
      {"query_text", utf8::encode(r.query_text)},
      {"context_text", utf8::encode(r.context_text)},
      {"context_tokens", r.context_tokens},
      {"target_tokens", r.target_tokens},
      {"alpha", r.alpha},
      {"beta", r.beta},
      {"font_id", r.font_id},
      {"q_image", r.q_image},
      {"c_image", r.c_image},
  };
}

inline ManifestRecord record_from_json(const nlohmann::ordered_json& j) {
  static const char* kFields[] = {"id",    "query_text", "context_text", "context_tokens", "target_tokens",
                                  "alpha", "beta",       "font_id",      "q_image",        "c_image"};
  for (const char* f : kFields)
    if (!j.contains(f)) throw ValidationError(std::string("manifest record lacks field ") + f);
  ManifestRecord r;
  r.id = j["id"].get<std::string>();
  r.query_text = utf8::decode(j["query_text"].get<std::string>());
  r.context_text = utf8::decode(j["context_text"].get<std::string>());
  r.context_tokens = j["context_tokens"].get<TokenSeq>();
  r.target_tokens = j["target_tokens"].get<TokenSeq>();
  r.alpha = j["alpha"].get<double>();
  r.beta = j["beta"].get<double>();
  r.font_id = j["font_id"].get<std::size_t>();
  r.q_image = j["q_image"].get<std::string>();
  r.c_image = j["c_image"].get<std::string>();
  return r;
}

struct DatasetManifest {
  std::filesystem::path root;
  GenParams params;
  int format_version = kDatasetFormatVersion;
  std::vector<ManifestRecord> records;

  /// Reassembles a full sample (images read from disk) for record `i`.
  RenderedSample load_sample(std::size_t i, const ContextTokenizer& cat = ContextTokenizer{}) const {
    const ManifestRecord& r = records.at(i);
    RenderedSample s;
    s.id = r.id;
    s.query_image = read_png(root / r.q_image);
    s.context_image = read_png(root / r.c_image);
    s.query_text = r.query_text;
    s.context_text = r.context_text;
    s.alpha_actual = r.alpha;
    s.beta_actual = r.beta;
    s.font_id = r.font_id;
    assign_ground_truth(s, cat);
    return s;
  }
};

namespace detail {
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write", tmp.string());
    out << content;
    if (!out) throw IoError("write failed", tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + ec.message(), path.string());
}
}  // namespace detail

inline std::string params_json(const GenParams& params) {
  nlohmann::ordered_json j;
  j["format_version"] = kDatasetFormatVersion;
  j["generator"] = params;
  return j.dump(2) + "\n";
}

/// Renders `count` samples into `out_dir`. Images are written first, then
/// params.json, then manifest.jsonl via temp file + rename.
inline DatasetManifest generate_dataset(const GenParams& params, const FontLibrary& fonts, std::size_t count,
                                        const std::filesystem::path& out_dir, unsigned threads = 1) {
  namespace fs = std::filesystem;
  params.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create output directory", (out_dir / "images").string());
  if (count > 0 && fonts.empty()) throw ValidationError("no usable fonts");

  DatasetManifest m;
  m.root = out_dir;
  m.params = params;
  m.records.resize(count);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        RenderedSample s = make_indexed_sample(params, fonts, i);
        ManifestRecord& r = m.records[i];
        r.id = s.id;
        r.q_image = "images/" + s.id + "_q.png";
        r.c_image = "images/" + s.id + "_c.png";
        write_png(out_dir / r.q_image, s.query_image);
        write_png(out_dir / r.c_image, s.context_image);
        r.query_text = std::move(s.query_text);
        r.context_text = std::move(s.context_text);
        r.context_tokens = std::move(s.context_tokens);
        r.target_tokens = std::move(s.target_tokens);
        r.alpha = s.alpha_actual;
        r.beta = s.beta_actual;
        r.font_id = s.font_id;
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  detail::write_file_atomic(out_dir / "params.json", params_json(params));
  std::string lines;
  for (const auto& r : m.records) lines += to_json_line(r).dump() + "\n";
  detail::write_file_atomic(out_dir / "manifest.jsonl", lines);
  return m;
}

inline DatasetManifest load_dataset(const std::filesystem::path& dir) {
  DatasetManifest m;
  m.root = dir;
  {
    std::ifstream in(dir / "params.json");
    if (!in) throw IoError("cannot read", (dir / "params.json").string());
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("params.json: ") + e.what());
    }
    m.format_version = j.value("format_version", 0);
    if (m.format_version != kDatasetFormatVersion)
      throw ValidationError("unsupported dataset format version " + std::to_string(m.format_version));
    m.params = j.at("generator").get<GenParams>();
  }
  std::ifstream in(dir / "manifest.jsonl");
  if (!in) throw IoError("cannot read", (dir / "manifest.jsonl").string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::ordered_json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("manifest.jsonl: ") + e.what());
    }
  }
  return m;
}

/// Checks that every referenced image exists and decodes.
inline void verify_dataset(const DatasetManifest& m) {
  for (const auto& r : m.records) {
    for (const auto* rel : {&r.q_image, &r.c_image}) {
      auto path = m.root / *rel;
      if (!std::filesystem::exists(path)) throw IoError("missing image", path.string());
      GrayImage img = read_png(path);
      if (img.width == 0 || img.height == 0) throw ValidationError("empty image " + path.string());
    }
  }
}

// ---------------------------------------------------------------------------
// Evaluation archetypes

enum class Archetype { held_out_text, symbolic, new_alphabet };

/// Evaluation preset. `words` replaces random queries when given; for
/// new_alphabet the alphabet becomes the set of symbols used by the words.
inline GenParams archetype_params(Archetype kind, std::vector<std::string> fonts, std::vector<std::u32string> words,
                                  std::uint64_t seed) {
  GenParams p;
  p.fonts = std::move(fonts);
  p.seed = seed;
  std::erase_if(words, [](const std::u32string& w) { return w.empty() || w.size() > 15; });
  if (kind == Archetype::new_alphabet) {
    if (words.empty()) throw ValidationError("new-alphabet preset needs a word list");
    std::u32string all;
    for (const auto& w : words) all += w;
    p.alphabet = unique_symbols(all);
  } else {
    std::erase_if(words, [&](const std::u32string& w) {
      return std::any_of(w.begin(), w.end(), [&](char32_t c) { return p.alphabet.find(c) == std::u32string::npos; });
    });
  }
  p.words = std::move(words);
  return p;
}

inline std::vector<std::u32string> read_word_list(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read word list", file.string());
  std::vector<std::u32string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(utf8::decode(line));
  }
  return words;
}

}  // namespace rosetta

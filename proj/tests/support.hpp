// SPDX-License-Identifier: Apache-2.0
//
// Test helpers: a synthetic TrueType writer, scratch directories and
// independent reference implementations used as oracles.
#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "rosetta/rosetta.hpp"

namespace testing_support {

// --- synthetic fonts ---------------------------------------------------------

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v & 0xFF));
  }
  void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v & 0xFFFF));
  }
  void pad4() {
    while (bytes.size() % 4) u8(0);
  }
  std::vector<std::uint8_t> bytes;
};

/// Minimal TrueType font: glyph k (1-based) is a baseline bar plus vertical
/// bars encoding the bits of k, so every mapped codepoint has a distinct,
/// non-empty outline. Codepoints must be in the BMP.
/// `variant` changes bar widths so different fonts draw different shapes.
inline std::vector<std::uint8_t> make_test_font(std::u32string codepoints, int variant = 0) {
  std::sort(codepoints.begin(), codepoints.end());
  codepoints.erase(std::unique(codepoints.begin(), codepoints.end()), codepoints.end());
  const std::uint16_t n_glyphs = static_cast<std::uint16_t>(codepoints.size() + 1);
  const int advance = 700;

  // glyf + loca
  ByteWriter glyf;
  std::vector<std::uint32_t> loca{0, 0};  // glyph 0 is empty
  for (std::size_t k = 1; k < n_glyphs; ++k) {
    std::vector<std::array<int, 4>> rects{{50, 0, 650, 80}};
    for (int bit = 0; bit < 6; ++bit)
      if ((k >> bit) & 1) rects.push_back({60 + 100 * bit, 120, 110 + 100 * bit + 10 * (variant % 4), 700});
    glyf.i16(static_cast<std::int16_t>(rects.size()));
    glyf.i16(0);
    glyf.i16(0);
    glyf.i16(static_cast<std::int16_t>(advance));
    glyf.i16(700);
    for (std::size_t r = 0; r < rects.size(); ++r) glyf.u16(static_cast<std::uint16_t>(4 * r + 3));
    glyf.u16(0);  // no instructions
    for (std::size_t i = 0; i < 4 * rects.size(); ++i) glyf.u8(1);  // on-curve, 16-bit deltas
    int px = 0, py = 0;
    std::vector<std::pair<int, int>> pts;
    for (const auto& r : rects) {
      // clockwise: (x0,y0) (x0,y1) (x1,y1) (x1,y0)
      pts.push_back({r[0], r[1]});
      pts.push_back({r[0], r[3]});
      pts.push_back({r[2], r[3]});
      pts.push_back({r[2], r[1]});
    }
    for (auto [x, y] : pts) {
      glyf.i16(static_cast<std::int16_t>(x - px));
      px = x;
      (void)y;
    }
    for (auto [x, y] : pts) {
      glyf.i16(static_cast<std::int16_t>(y - py));
      py = y;
      (void)x;
    }
    glyf.pad4();
    loca.push_back(static_cast<std::uint32_t>(glyf.bytes.size()));
  }
  ByteWriter loca_w;
  for (auto v : loca) loca_w.u32(v);

  ByteWriter head;
  head.u32(0x00010000);
  head.u32(0x00010000);
  head.u32(0);
  head.u32(0x5F0F3CF5);
  head.u16(0);
  head.u16(1000);  // unitsPerEm
  for (int i = 0; i < 4; ++i) head.u32(0);  // created, modified
  head.i16(0);
  head.i16(-200);
  head.i16(static_cast<std::int16_t>(advance));
  head.i16(800);
  head.u16(0);
  head.u16(8);
  head.i16(2);
  head.i16(1);  // long loca
  head.i16(0);

  ByteWriter maxp;
  maxp.u32(0x00005000);
  maxp.u16(n_glyphs);

  ByteWriter hhea;
  hhea.u32(0x00010000);
  hhea.i16(800);
  hhea.i16(-200);
  hhea.i16(0);
  hhea.u16(static_cast<std::uint16_t>(advance));
  for (int i = 0; i < 10; ++i) hhea.i16(0);
  hhea.i16(0);
  hhea.u16(n_glyphs);

  ByteWriter hmtx;
  for (std::size_t g = 0; g < n_glyphs; ++g) {
    hmtx.u16(static_cast<std::uint16_t>(advance));
    hmtx.i16(0);
  }

  // cmap: one (3,1) format-4 subtable, one segment per codepoint.
  ByteWriter cmap;
  const std::uint16_t segs = static_cast<std::uint16_t>(codepoints.size() + 1);
  cmap.u16(0);
  cmap.u16(1);
  cmap.u16(3);
  cmap.u16(1);
  cmap.u32(12);
  cmap.u16(4);
  cmap.u16(static_cast<std::uint16_t>(16 + 8 * segs));
  cmap.u16(0);
  cmap.u16(static_cast<std::uint16_t>(2 * segs));
  cmap.u16(0);
  cmap.u16(0);
  cmap.u16(0);
  for (char32_t c : codepoints) cmap.u16(static_cast<std::uint16_t>(c));
  cmap.u16(0xFFFF);
  cmap.u16(0);
  for (char32_t c : codepoints) cmap.u16(static_cast<std::uint16_t>(c));
  cmap.u16(0xFFFF);
  for (std::size_t i = 0; i < codepoints.size(); ++i)
    cmap.u16(static_cast<std::uint16_t>(static_cast<std::uint32_t>(i + 1) - static_cast<std::uint32_t>(codepoints[i])));
  cmap.u16(1);
  for (std::size_t i = 0; i < segs; ++i) cmap.u16(0);

  std::vector<std::pair<std::string, std::vector<std::uint8_t>*>> tables = {
      {"cmap", &cmap.bytes}, {"glyf", &glyf.bytes}, {"head", &head.bytes}, {"hhea", &hhea.bytes},
      {"hmtx", &hmtx.bytes}, {"loca", &loca_w.bytes}, {"maxp", &maxp.bytes}};
  ByteWriter out;
  out.u32(0x00010000);
  out.u16(static_cast<std::uint16_t>(tables.size()));
  out.u16(0);
  out.u16(0);
  out.u16(0);
  std::uint32_t offset = static_cast<std::uint32_t>(12 + 16 * tables.size());
  for (auto& [tag, data] : tables) {
    for (char ch : tag) out.u8(static_cast<std::uint8_t>(ch));
    out.u32(0);
    out.u32(offset);
    out.u32(static_cast<std::uint32_t>(data->size()));
    offset += static_cast<std::uint32_t>((data->size() + 3) / 4 * 4);
  }
  for (auto& [tag, data] : tables) {
    out.bytes.insert(out.bytes.end(), data->begin(), data->end());
    out.pad4();
  }
  return out.bytes;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rosetta_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Writes `count` synthetic fonts covering `symbols` into `dir`.
inline std::vector<std::string> write_test_fonts(const std::filesystem::path& dir, std::u32string symbols, int count) {
  std::vector<std::string> paths;
  for (int i = 0; i < count; ++i) {
    const auto path = dir / ("synthetic_" + std::to_string(i) + ".ttf");
    write_bytes(path, make_test_font(symbols, i));
    paths.push_back(path.string());
  }
  return paths;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// --- oracles -----------------------------------------------------------------

/// Levenshtein via the full (n+1)x(m+1) table.
template <typename Seq>
std::size_t levenshtein_table(const Seq& a, const Seq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t best = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u);
      best = std::min(best, d[i - 1][j] + 1);
      best = std::min(best, d[i][j - 1] + 1);
      d[i][j] = best;
    }
  return d[n][m];
}

/// Alignment column for the brute-force oracle: 0 = pair, 1 = gt unpaired,
/// 2 = pred unpaired.
struct BruteStep {
  int op;
  int p;
  int g;
};

/// Enumerates alignments of pred against gt and returns the minimal-cost one
/// that is lexicographically smallest when read from the end with
/// pair < gt-unpaired < pred-unpaired. Branches whose cost can no longer
/// reach the full-table optimum are pruned; every minimal alignment is still
/// visited.
inline std::vector<BruteStep> brute_force_alignment(const rosetta::TokenSeq& pred, const rosetta::TokenSeq& gt) {
  const int n = static_cast<int>(pred.size()), m = static_cast<int>(gt.size());
  const std::size_t optimum = levenshtein_table(pred, gt);
  std::vector<BruteStep> best, cur;
  bool found = false;
  auto better = [&]() {
    if (!found) return true;
    // Compare from the end: cur and best have possibly different lengths.
    auto a = cur.rbegin(), b = best.rbegin();
    for (; a != cur.rend() && b != best.rend(); ++a, ++b)
      if (a->op != b->op) return a->op < b->op;
    return a == cur.rend() && b != best.rend();
  };
  std::function<void(int, int, std::size_t)> rec = [&](int i, int j, std::size_t cost) {
    const std::size_t floor = static_cast<std::size_t>(std::abs((n - i) - (m - j)));
    if (cost + floor > optimum) return;
    if (i == n && j == m) {
      if (better()) {
        best = cur;
        found = true;
      }
      return;
    }
    if (i < n && j < m) {
      cur.push_back({0, i, j});
      rec(i + 1, j + 1, cost + (pred[static_cast<std::size_t>(i)] == gt[static_cast<std::size_t>(j)] ? 0 : 1));
      cur.pop_back();
    }
    if (j < m) {
      cur.push_back({1, -1, j});
      rec(i, j + 1, cost + 1);
      cur.pop_back();
    }
    if (i < n) {
      cur.push_back({2, i, -1});
      rec(i + 1, j, cost + 1);
      cur.pop_back();
    }
  };
  rec(0, 0, 0);
  return best;
}

struct BruteOoc {
  std::optional<double> ter_no_ooc;
  std::size_t tp = 0, fp = 0, fn = 0;
};

inline BruteOoc brute_force_ooc(const rosetta::TokenSeq& pred, const rosetta::TokenSeq& gt, rosetta::TokenId ooc) {
  const auto steps = brute_force_alignment(pred, gt);
  BruteOoc r;
  std::vector<bool> drop(pred.size(), false);
  for (const auto& s : steps) {
    const bool po = s.p >= 0 && pred[static_cast<std::size_t>(s.p)] == ooc;
    const bool go = s.g >= 0 && gt[static_cast<std::size_t>(s.g)] == ooc;
    if (s.op == 0 && go) drop[static_cast<std::size_t>(s.p)] = true;
    if (s.op == 0 && po && go) ++r.tp;
    else {
      if (po) ++r.fp;
      if (go) ++r.fn;
    }
  }
  rosetta::TokenSeq p2, g2;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (!drop[i]) p2.push_back(pred[i]);
  for (auto t : gt)
    if (t != ooc) g2.push_back(t);
  if (!g2.empty()) r.ter_no_ooc = static_cast<double>(levenshtein_table(p2, g2)) / static_cast<double>(g2.size());
  return r;
}

/// Reference CAT written from the definition: dictionary by first occurrence.
struct BruteCat {
  std::vector<char32_t> order;
  explicit BruteCat(const std::u32string& context) {
    for (char32_t c : context)
      if (std::find(order.begin(), order.end(), c) == order.end()) order.push_back(c);
  }
  rosetta::TokenSeq encode(const std::u32string& s, rosetta::TokenId ooc) const {
    rosetta::TokenSeq out;
    for (char32_t c : s) {
      auto it = std::find(order.begin(), order.end(), c);
      out.push_back(it == order.end() ? ooc : static_cast<rosetta::TokenId>(it - order.begin()));
    }
    return out;
  }
};

/// Random string over `pool` with length in [lo, hi].
inline std::u32string random_string(std::mt19937_64& rng, const std::u32string& pool, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> len(lo, hi), pick(0, pool.size() - 1);
  std::u32string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.push_back(pool[pick(rng)]);
  return s;
}

/// Random subset of Unicode scalar values drawn from several scripts.
inline std::u32string random_symbol_pool(std::mt19937_64& rng, std::size_t size) {
  static const std::pair<char32_t, char32_t> kBlocks[] = {
      {0x20, 0x7E}, {0x391, 0x3C9}, {0x410, 0x44F}, {0x5D0, 0x5EA}, {0x4E00, 0x9FFF}, {0x1F300, 0x1F5FF}, {0xAC00, 0xD7A3}};
  std::u32string pool;
  std::uniform_int_distribution<std::size_t> block(0, std::size(kBlocks) - 1);
  while (pool.size() < size) {
    const auto [lo, hi] = kBlocks[block(rng)];
    std::uniform_int_distribution<std::uint32_t> cp(lo, hi);
    const char32_t c = cp(rng);
    if (pool.find(c) == std::u32string::npos) pool.push_back(c);
  }
  return pool;
}

}  // namespace testing_support

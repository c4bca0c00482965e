// SPDX-License-Identifier: Apache-2.0
//
// Minimal TrueType reader and scanline rasterizer. Handles glyf-outline
// fonts (simple and composite glyphs) with cmap formats 0, 4, 6 and 12.
// CFF-flavoured OpenType fonts are rejected at load time.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rosetta/error.hpp"

namespace rosetta::truetype {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct OutlinePoint {
  double x = 0.0;
  double y = 0.0;
  bool on_curve = true;
};

using Contour = std::vector<OutlinePoint>;

class Font {
 public:
  static Font load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open font", path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
      return Font(std::move(bytes));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": " + e.what());
    }
  }

  explicit Font(std::vector<std::uint8_t> bytes) : data_(std::move(bytes)) { parse(); }

  int units_per_em() const noexcept { return units_per_em_; }
  int ascender() const noexcept { return ascender_; }
  int descender() const noexcept { return descender_; }
  int line_gap() const noexcept { return line_gap_; }
  std::size_t glyph_count() const noexcept { return num_glyphs_; }

  /// Glyph id for `cp`, 0 (.notdef) when unmapped.
  std::uint32_t glyph_index(char32_t cp) const {
    std::uint32_t g = lookup_cmap(cp);
    if (g == 0 && symbol_cmap_ && cp < 0x100) g = lookup_cmap(0xF000 + cp);
    return g < num_glyphs_ ? g : 0;
  }

  bool has_glyph(char32_t cp) const { return glyph_index(cp) != 0; }

  int advance_width(std::uint32_t glyph) const {
    if (num_hmetrics_ == 0) return units_per_em_ / 2;
    std::uint32_t i = std::min<std::uint32_t>(glyph, num_hmetrics_ - 1);
    return u16(hmtx_ + 4 * i);
  }

  /// Contours of `glyph` in font units, y up. Composite glyphs are expanded.
  std::vector<Contour> outline(std::uint32_t glyph) const {
    std::vector<Contour> out;
    append_outline(glyph, {1, 0, 0, 1, 0, 0}, out, 0);
    return out;
  }

 private:
  struct Affine {
    double a, b, c, d, e, f;  // x' = a x + c y + e ; y' = b x + d y + f
    OutlinePoint apply(const OutlinePoint& p) const {
      return {a * p.x + c * p.y + e, b * p.x + d * p.y + f, p.on_curve};
    }
    Affine then(const Affine& o) const {
      // o applied after *this
      return {o.a * a + o.c * b, o.b * a + o.d * b, o.a * c + o.c * d,
              o.b * c + o.d * d, o.a * e + o.c * f + o.e, o.b * e + o.d * f + o.f};
    }
  };

  void need(std::size_t off, std::size_t n) const {
    if (off + n > data_.size() || off + n < off) throw ValidationError("truncated font data");
  }
  std::uint8_t u8(std::size_t off) const {
    need(off, 1);
    return data_[off];
  }
  std::uint16_t u16(std::size_t off) const {
    need(off, 2);
    return static_cast<std::uint16_t>((data_[off] << 8) | data_[off + 1]);
  }
  std::int16_t i16(std::size_t off) const { return static_cast<std::int16_t>(u16(off)); }
  std::uint32_t u32(std::size_t off) const {
    need(off, 4);
    return (static_cast<std::uint32_t>(data_[off]) << 24) | (static_cast<std::uint32_t>(data_[off + 1]) << 16) |
           (static_cast<std::uint32_t>(data_[off + 2]) << 8) | data_[off + 3];
  }

  std::optional<std::size_t> find_table(std::size_t font_off, const char* tag) const {
    std::size_t n = u16(font_off + 4);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t rec = font_off + 12 + 16 * i;
      need(rec, 16);
      if (std::equal(tag, tag + 4, data_.begin() + static_cast<std::ptrdiff_t>(rec))) return u32(rec + 8);
    }
    return std::nullopt;
  }

  void parse() {
    std::size_t font_off = 0;
    std::uint32_t version = u32(0);
    if (version == 0x74746366u) font_off = u32(12);  // 'ttcf': first face
    version = u32(font_off);
    if (version == 0x4F54544Fu) throw ValidationError("CFF outlines are not supported");
    if (version != 0x00010000u && version != 0x74727565u) throw ValidationError("not a TrueType font");

    auto req = [&](const char* tag) {
      auto off = find_table(font_off, tag);
      if (!off) throw ValidationError(std::string("missing table ") + tag);
      return *off;
    };
    std::size_t head = req("head");
    std::size_t maxp = req("maxp");
    std::size_t hhea = req("hhea");
    hmtx_ = req("hmtx");
    loca_ = req("loca");
    glyf_ = req("glyf");
    std::size_t cmap = req("cmap");

    units_per_em_ = u16(head + 18);
    if (units_per_em_ == 0) throw ValidationError("unitsPerEm is zero");
    long_loca_ = i16(head + 50) != 0;
    num_glyphs_ = u16(maxp + 4);
    ascender_ = i16(hhea + 4);
    descender_ = i16(hhea + 6);
    line_gap_ = i16(hhea + 8);
    num_hmetrics_ = u16(hhea + 34);
    select_cmap(cmap);
  }

  void select_cmap(std::size_t cmap) {
    std::size_t n = u16(cmap + 2);
    int best_rank = -1;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t rec = cmap + 4 + 8 * i;
      std::uint16_t platform = u16(rec);
      std::uint16_t encoding = u16(rec + 2);
      std::size_t sub = cmap + u32(rec + 4);
      std::uint16_t format = u16(sub);
      if (format != 0 && format != 4 && format != 6 && format != 12) continue;
      int rank = -1;
      if (platform == 3 && encoding == 10) rank = 6;
      else if (platform == 0 && format == 12) rank = 5;
      else if (platform == 3 && encoding == 1) rank = 4;
      else if (platform == 0) rank = 3;
      else if (platform == 3 && encoding == 0) rank = 2;
      else if (platform == 1 && encoding == 0) rank = 1;
      if (rank > best_rank) {
        best_rank = rank;
        cmap_ = sub;
        cmap_format_ = format;
        symbol_cmap_ = platform == 3 && encoding == 0;
      }
    }
    if (best_rank < 0) throw ValidationError("no usable cmap subtable");
  }

  std::uint32_t lookup_cmap(char32_t cp) const {
    const std::size_t t = cmap_;
    switch (cmap_format_) {
      case 0:
        return cp < 256 ? u8(t + 6 + cp) : 0;
      case 6: {
        std::uint32_t first = u16(t + 6), count = u16(t + 8);
        if (cp < first || cp >= first + count) return 0;
        return u16(t + 10 + 2 * (cp - first));
      }
      case 4: {
        if (cp > 0xFFFF) return 0;
        std::size_t segs = u16(t + 6) / 2;
        std::size_t ends = t + 14, starts = ends + 2 * segs + 2;
        std::size_t deltas = starts + 2 * segs, ranges = deltas + 2 * segs;
        std::size_t lo = 0, hi = segs;
        while (lo < hi) {
          std::size_t mid = (lo + hi) / 2;
          if (u16(ends + 2 * mid) < cp) lo = mid + 1;
          else hi = mid;
        }
        if (lo == segs) return 0;
        std::uint16_t start = u16(starts + 2 * lo);
        if (cp < start) return 0;
        std::uint16_t delta = u16(deltas + 2 * lo);
        std::uint16_t range = u16(ranges + 2 * lo);
        if (range == 0) return static_cast<std::uint16_t>(cp + delta);
        std::size_t at = ranges + 2 * lo + range + 2 * (cp - start);
        std::uint16_t g = u16(at);
        return g == 0 ? 0 : static_cast<std::uint16_t>(g + delta);
      }
      case 12: {
        std::uint32_t groups = u32(t + 12);
        std::uint32_t lo = 0, hi = groups;
        while (lo < hi) {
          std::uint32_t mid = (lo + hi) / 2;
          std::size_t g = t + 16 + 12 * static_cast<std::size_t>(mid);
          if (u32(g + 4) < cp) lo = mid + 1;
          else hi = mid;
        }
        if (lo == groups) return 0;
        std::size_t g = t + 16 + 12 * static_cast<std::size_t>(lo);
        std::uint32_t start = u32(g);
        if (cp < start) return 0;
        return u32(g + 8) + (cp - start);
      }
      default:
        return 0;
    }
  }

  std::pair<std::size_t, std::size_t> glyph_range(std::uint32_t glyph) const {
    if (glyph >= num_glyphs_) return {0, 0};
    std::size_t a, b;
    if (long_loca_) {
      a = u32(loca_ + 4 * glyph);
      b = u32(loca_ + 4 * glyph + 4);
    } else {
      a = 2 * static_cast<std::size_t>(u16(loca_ + 2 * glyph));
      b = 2 * static_cast<std::size_t>(u16(loca_ + 2 * glyph + 2));
    }
    return {glyf_ + a, glyf_ + b};
  }

  void append_outline(std::uint32_t glyph, const Affine& xf, std::vector<Contour>& out, int depth) const {
    if (depth > 8) throw ValidationError("composite glyph nesting too deep");
    auto [begin, end] = glyph_range(glyph);
    if (end <= begin) return;  // empty glyph (e.g. space)
    std::int16_t contours = i16(begin);
    if (contours >= 0) {
      append_simple(begin, static_cast<std::size_t>(contours), xf, out);
    } else {
      append_composite(begin, xf, out, depth);
    }
  }

  void append_simple(std::size_t g, std::size_t contours, const Affine& xf, std::vector<Contour>& out) const {
    if (contours == 0) return;
    std::vector<std::uint16_t> ends(contours);
    for (std::size_t i = 0; i < contours; ++i) ends[i] = u16(g + 10 + 2 * i);
    std::size_t n_points = static_cast<std::size_t>(ends.back()) + 1;
    std::size_t p = g + 10 + 2 * contours;
    p += 2 + u16(p);  // skip instructions

    std::vector<std::uint8_t> flags;
    flags.reserve(n_points);
    while (flags.size() < n_points) {
      std::uint8_t f = u8(p++);
      flags.push_back(f);
      if (f & 8) {
        std::uint8_t repeat = u8(p++);
        for (int r = 0; r < repeat && flags.size() < n_points; ++r) flags.push_back(f);
      }
    }
    std::vector<OutlinePoint> pts(n_points);
    int v = 0;
    for (std::size_t i = 0; i < n_points; ++i) {
      std::uint8_t f = flags[i];
      if (f & 2) {
        int dx = u8(p++);
        v += (f & 16) ? dx : -dx;
      } else if (!(f & 16)) {
        v += i16(p);
        p += 2;
      }
      pts[i].x = v;
      pts[i].on_curve = f & 1;
    }
    v = 0;
    for (std::size_t i = 0; i < n_points; ++i) {
      std::uint8_t f = flags[i];
      if (f & 4) {
        int dy = u8(p++);
        v += (f & 32) ? dy : -dy;
      } else if (!(f & 32)) {
        v += i16(p);
        p += 2;
      }
      pts[i].y = v;
    }
    std::size_t first = 0;
    for (std::uint16_t e : ends) {
      if (e < first || e >= n_points) throw ValidationError("bad contour end index");
      Contour c;
      for (std::size_t i = first; i <= e; ++i) c.push_back(xf.apply(pts[i]));
      if (c.size() >= 2) out.push_back(std::move(c));
      first = static_cast<std::size_t>(e) + 1;
    }
  }

  void append_composite(std::size_t p, const Affine& xf, std::vector<Contour>& out, int depth) const {
    p += 10;
    for (;;) {
      std::uint16_t flags = u16(p);
      std::uint16_t component = u16(p + 2);
      p += 4;
      double dx = 0, dy = 0;
      if (flags & 0x1) {
        dx = i16(p);
        dy = i16(p + 2);
        p += 4;
      } else {
        dx = static_cast<std::int8_t>(u8(p));
        dy = static_cast<std::int8_t>(u8(p + 1));
        p += 2;
      }
      if (!(flags & 0x2)) dx = dy = 0;  // point matching is not supported
      auto f2dot14 = [&](std::size_t off) { return i16(off) / 16384.0; };
      Affine local{1, 0, 0, 1, dx, dy};
      if (flags & 0x8) {
        local.a = local.d = f2dot14(p);
        p += 2;
      } else if (flags & 0x40) {
        local.a = f2dot14(p);
        local.d = f2dot14(p + 2);
        p += 4;
      } else if (flags & 0x80) {
        local.a = f2dot14(p);
        local.b = f2dot14(p + 2);
        local.c = f2dot14(p + 4);
        local.d = f2dot14(p + 6);
        p += 8;
      }
      append_outline(component, local.then(xf), out, depth + 1);
      if (!(flags & 0x20)) break;
    }
  }

  std::vector<std::uint8_t> data_;
  std::size_t hmtx_ = 0, loca_ = 0, glyf_ = 0, cmap_ = 0;
  std::uint16_t cmap_format_ = 0;
  bool symbol_cmap_ = false;
  bool long_loca_ = false;
  int units_per_em_ = 0;
  int ascender_ = 0, descender_ = 0, line_gap_ = 0;
  std::uint32_t num_glyphs_ = 0;
  std::uint32_t num_hmetrics_ = 0;
};

/// Signed-area coverage accumulator. Lines are added in pixel space (y down);
/// `coverage()` integrates each row into a nonzero-clamped [0,1] coverage map.
class Canvas {
 public:
  Canvas(std::size_t width, std::size_t height)
      : width_(width), height_(height), acc_(width * height + 2, 0.0) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  void line(Point p0, Point p1) {
    if (width_ == 0 || height_ == 0) return;
    const double xmax = static_cast<double>(width_) - 1e-6;
    p0.x = std::clamp(p0.x, 0.0, xmax);
    p1.x = std::clamp(p1.x, 0.0, xmax);
    if (p0.y == p1.y) return;
    double dir = 1.0;
    if (p0.y > p1.y) {
      std::swap(p0, p1);
      dir = -1.0;
    }
    const double dxdy = (p1.x - p0.x) / (p1.y - p0.y);
    double x = p0.x;
    if (p0.y < 0.0) x -= p0.y * dxdy;
    const auto h = static_cast<long>(height_);
    long y_begin = std::max(0L, static_cast<long>(std::floor(p0.y)));
    long y_end = std::min(h, static_cast<long>(std::ceil(p1.y)));
    for (long y = y_begin; y < y_end; ++y) {
      const std::size_t row = static_cast<std::size_t>(y) * width_;
      const double dy = std::min(static_cast<double>(y + 1), p1.y) - std::max(static_cast<double>(y), p0.y);
      const double xnext = x + dxdy * dy;
      const double d = dy * dir;
      const double x0 = std::min(x, xnext), x1 = std::max(x, xnext);
      const double x0floor = std::floor(x0);
      const auto x0i = static_cast<std::size_t>(x0floor);
      const double x1ceil = std::ceil(x1);
      const auto x1i = static_cast<std::size_t>(x1ceil);
      if (x1i <= x0i + 1) {
        const double xmf = 0.5 * (x + xnext) - x0floor;
        acc_[row + x0i] += d - d * xmf;
        acc_[row + x0i + 1] += d * xmf;
      } else {
        const double s = 1.0 / (x1 - x0);
        const double x0f = x0 - x0floor;
        const double a0 = 0.5 * s * (1.0 - x0f) * (1.0 - x0f);
        const double x1f = x1 - x1ceil + 1.0;
        const double am = 0.5 * s * x1f * x1f;
        acc_[row + x0i] += d * a0;
        if (x1i == x0i + 2) {
          acc_[row + x0i + 1] += d * (1.0 - a0 - am);
        } else {
          const double a1 = s * (1.5 - x0f);
          acc_[row + x0i + 1] += d * (a1 - a0);
          for (std::size_t xi = x0i + 2; xi + 1 < x1i; ++xi) acc_[row + xi] += d * s;
          const double a2 = a1 + static_cast<double>(x1i - x0i - 3) * s;
          acc_[row + x1i - 1] += d * (1.0 - a2 - am);
        }
        acc_[row + x1i] += d * am;
      }
      x = xnext;
    }
  }

  void quad(Point p0, Point p1, Point p2, double tolerance = 0.25) {
    const double ddx = p0.x - 2 * p1.x + p2.x;
    const double ddy = p0.y - 2 * p1.y + p2.y;
    const double dd = std::hypot(ddx, ddy);
    const int n = 1 + static_cast<int>(std::floor(std::sqrt(dd / tolerance)));
    Point prev = p0;
    for (int i = 1; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      const double mt = 1.0 - t;
      Point cur{mt * mt * p0.x + 2 * mt * t * p1.x + t * t * p2.x, mt * mt * p0.y + 2 * mt * t * p1.y + t * t * p2.y};
      line(prev, cur);
      prev = cur;
    }
  }

  /// Adds a glyph outline: font units scaled by `scale`, origin at (ox, baseline).
  void add_outline(const std::vector<Contour>& contours, double scale, double ox, double baseline) {
    auto map = [&](const OutlinePoint& p) { return Point{ox + p.x * scale, baseline - p.y * scale}; };
    for (const Contour& c : contours) {
      const std::size_t n = c.size();
      // Start from an on-curve point, or the implied midpoint of two off-curve ones.
      std::size_t start = n;
      for (std::size_t i = 0; i < n; ++i)
        if (c[i].on_curve) {
          start = i;
          break;
        }
      Point first;
      if (start == n) {
        first = map({(c[0].x + c[1].x) / 2, (c[0].y + c[1].y) / 2, true});
        start = 0;
      } else {
        first = map(c[start]);
      }
      Point pen = first;
      std::optional<Point> ctrl;
      for (std::size_t k = 1; k <= n; ++k) {
        const OutlinePoint& op = c[(start + k) % n];
        Point p = map(op);
        if (op.on_curve) {
          if (ctrl) quad(pen, *ctrl, p);
          else line(pen, p);
          pen = p;
          ctrl.reset();
        } else if (ctrl) {
          Point mid{(ctrl->x + p.x) / 2, (ctrl->y + p.y) / 2};
          quad(pen, *ctrl, mid);
          pen = mid;
          ctrl = p;
        } else {
          ctrl = p;
        }
      }
      if (ctrl) quad(pen, *ctrl, first);
      else line(pen, first);
    }
  }

  std::vector<double> coverage() const {
    std::vector<double> out(width_ * height_);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      acc += acc_[i];
      out[i] = std::min(1.0, std::abs(acc));
    }
    return out;
  }

 private:
  std::size_t width_, height_;
  std::vector<double> acc_;
};

}  // namespace rosetta::truetype

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rosetta/error.hpp"

namespace rosetta {

/// One Unicode scalar value. The tokenizer only ever compares symbols for
/// equality, so any script works.
using Symbol = char32_t;
using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr std::size_t kDefaultLabelTokens = 26;
inline constexpr std::size_t kSpecialTokenCount = 13;
inline constexpr Symbol kOocSymbol = U'*';

enum class SpecialToken : int {
  ooc = 0,
  vision_start,
  vision_end,
  bos,
  eos,
  pad,
  sep_context_text,
  sep_query,
  reserved_0,
  reserved_1,
  reserved_2,
  reserved_3,
  reserved_4,
};

inline constexpr std::array<std::string_view, kSpecialTokenCount> kSpecialTokenNames = {
    "ooc",        "vision_start", "vision_end", "bos",        "eos",        "pad",        "sep_context_text",
    "sep_query",  "reserved_0",   "reserved_1", "reserved_2", "reserved_3", "reserved_4",
};

/// Id layout of the context-aware vocabulary: label tokens occupy
/// [0, label_count) and the 13 specials follow in enum order.
class Vocabulary {
 public:
  explicit Vocabulary(std::size_t label_count = kDefaultLabelTokens) : label_count_(label_count) {
    if (label_count == 0) throw ValidationError("vocabulary needs at least one label token");
  }

  std::size_t label_count() const noexcept { return label_count_; }
  std::size_t size() const noexcept { return label_count_ + kSpecialTokenCount; }

  TokenId label(std::size_t k) const { return static_cast<TokenId>(k); }
  TokenId special(SpecialToken kind) const {
    return static_cast<TokenId>(label_count_ + static_cast<std::size_t>(kind));
  }
  TokenId ooc() const { return special(SpecialToken::ooc); }

  bool is_label(TokenId id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < label_count_; }
  std::optional<SpecialToken> special_kind(TokenId id) const noexcept {
    if (id < 0 || static_cast<std::size_t>(id) < label_count_ || static_cast<std::size_t>(id) >= size())
      return std::nullopt;
    return static_cast<SpecialToken>(static_cast<std::size_t>(id) - label_count_);
  }

  std::string name(TokenId id) const {
    if (is_label(id)) return "<t" + std::to_string(id) + ">";
    if (auto kind = special_kind(id)) return "<" + std::string(kSpecialTokenNames[static_cast<int>(*kind)]) + ">";
    return "<invalid:" + std::to_string(id) + ">";
  }

  /// Manifest text: one `<id>\t<kind>\t<name>` line per token, LF endings.
  std::string manifest() const {
    std::string out;
    for (std::size_t id = 0; id < size(); ++id) {
      auto tid = static_cast<TokenId>(id);
      out += std::to_string(id);
      out += is_label(tid) ? "\tlabel\t" : "\tspecial\t";
      out += name(tid);
      out += '\n';
    }
    return out;
  }

 private:
  std::size_t label_count_;
};

/// The context dictionary: symbol <-> label token, built by first occurrence.
class TokenMap {
 public:
  std::size_t size() const noexcept { return reverse_.size(); }
  bool empty() const noexcept { return reverse_.empty(); }

  std::optional<TokenId> find(Symbol s) const {
    auto it = forward_.find(s);
    if (it == forward_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<Symbol> symbol(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= reverse_.size()) return std::nullopt;
    return reverse_[static_cast<std::size_t>(id)];
  }

  /// Symbols ordered by token index.
  const std::u32string& symbols() const noexcept { return reverse_; }

  /// Inserts `s` if new and returns its token.
  TokenId insert(Symbol s) {
    auto [it, inserted] = forward_.try_emplace(s, static_cast<TokenId>(reverse_.size()));
    if (inserted) reverse_.push_back(s);
    return it->second;
  }

  friend bool operator==(const TokenMap& a, const TokenMap& b) { return a.reverse_ == b.reverse_; }

 private:
  std::unordered_map<Symbol, TokenId> forward_;
  std::u32string reverse_;
};

struct ContextEncoding {
  TokenSeq tokens;
  TokenMap map;
};

struct Decoded {
  std::u32string text;
  /// Tokens that had no reverse entry (label index >= map size, or a
  /// structural special) and were rendered as '*'.
  std::size_t out_of_range_count = 0;
};

/// Context-aware tokenizer. Stateless apart from the vocabulary layout.
class ContextTokenizer {
 public:
  explicit ContextTokenizer(Vocabulary vocab = Vocabulary{}) : vocab_(vocab) {}

  const Vocabulary& vocabulary() const noexcept { return vocab_; }

  ContextEncoding encode_context(std::u32string_view context) const {
    ContextEncoding out;
    out.tokens.reserve(context.size());
    for (Symbol s : context) {
      if (!out.map.find(s) && out.map.size() == vocab_.label_count()) {
        throw DistinctSymbolOverflow(count_distinct(context), vocab_.label_count());
      }
      out.tokens.push_back(vocab_.label(static_cast<std::size_t>(out.map.insert(s))));
    }
    return out;
  }

  TokenSeq encode_with(std::u32string_view text, const TokenMap& map) const {
    TokenSeq out;
    out.reserve(text.size());
    for (Symbol s : text) {
      auto id = map.find(s);
      out.push_back(id ? vocab_.label(static_cast<std::size_t>(*id)) : vocab_.ooc());
    }
    return out;
  }

  Decoded decode_with(const TokenSeq& tokens, const TokenMap& map) const {
    Decoded out;
    out.text.reserve(tokens.size());
    for (TokenId id : tokens) {
      if (id == vocab_.ooc()) {
        out.text.push_back(kOocSymbol);
      } else if (auto s = vocab_.is_label(id) ? map.symbol(id) : std::nullopt) {
        out.text.push_back(*s);
      } else {
        out.text.push_back(kOocSymbol);
        ++out.out_of_range_count;
      }
    }
    return out;
  }

 private:
  static std::size_t count_distinct(std::u32string_view text) {
    std::unordered_map<Symbol, int> seen;
    for (Symbol s : text) seen.emplace(s, 0);
    return seen.size();
  }

  Vocabulary vocab_;
};

/// Fixed 26-letter vocabulary used by the context-free OCR baseline:
/// 'a'..'z' followed by <bos>, <eos>, <pad>.
class StaticTokenizer {
 public:
  static constexpr std::size_t kLetters = 26;
  static constexpr TokenId kBos = 26;
  static constexpr TokenId kEos = 27;
  static constexpr TokenId kPad = 28;
  static constexpr std::size_t kSize = 29;

  static std::optional<TokenId> letter(Symbol s) {
    if (s >= U'a' && s <= U'z') return static_cast<TokenId>(s - U'a');
    return std::nullopt;
  }

  static TokenSeq encode(std::u32string_view text) {
    TokenSeq out;
    out.reserve(text.size());
    for (Symbol s : text) {
      auto id = letter(s);
      if (!id) throw ValidationError("static vocabulary covers only a-z");
      out.push_back(*id);
    }
    return out;
  }

  static std::u32string decode(const TokenSeq& tokens) {
    std::u32string out;
    for (TokenId id : tokens) {
      out.push_back(id >= 0 && static_cast<std::size_t>(id) < kLetters ? static_cast<Symbol>(U'a' + id) : kOocSymbol);
    }
    return out;
  }
};

}  // namespace rosetta

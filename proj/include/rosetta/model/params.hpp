// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "rosetta/model/config.hpp"
#include "rosetta/random.hpp"

namespace rosetta::model {

enum class InitKind { normal, zero, one };

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  InitKind init = InitKind::normal;
  std::size_t size() const noexcept { return rows * cols; }
};

struct LinearRef {
  std::size_t weight = 0;  // [out, in] row-major
  std::size_t bias = 0;    // [out]
  int out = 0;
  int in = 0;
  bool has_bias = true;
};

struct NormRef {
  std::size_t gain = 0;
  std::size_t bias = 0;
  int dim = 0;
};

struct BlockRef {
  NormRef ln1;
  LinearRef q, k, v, o;
  NormRef ln2;
  LinearRef fc1, fc2;
};

/// Named-segment index over one flat parameter vector. Every shape follows
/// from the ModelConfig, so the total count is a pure function of it.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& c) {
    c.validate();
    patch = linear("vpg.patch_embed", c.vit_dim, c.patch_inputs());
    for (int l = 0; l < c.vit_layers; ++l) vit.push_back(block("vit." + std::to_string(l), c.vit_dim, c.mlp_ratio));
    vit_norm = norm("vit.norm", c.vit_dim);
    proj = linear("vpg.proj", c.dec_dim, c.vit_dim);
    embed = add("embed.weight", static_cast<std::size_t>(c.vocab_size), static_cast<std::size_t>(c.dec_dim));
    for (int l = 0; l < c.dec_layers; ++l) dec.push_back(block("dec." + std::to_string(l), c.dec_dim, c.mlp_ratio));
    dec_norm = norm("dec.norm", c.dec_dim);
    head = linear("head", c.vocab_size, c.dec_dim, false);
  }

  std::size_t total() const noexcept { return total_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const Segment& segment(const std::string& name) const { return segments_.at(index_.at(name)); }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  LinearRef patch;
  std::vector<BlockRef> vit;
  NormRef vit_norm;
  LinearRef proj;
  std::size_t embed = 0;
  std::vector<BlockRef> dec;
  NormRef dec_norm;
  LinearRef head;

 private:
  std::size_t add(const std::string& name, std::size_t rows, std::size_t cols, InitKind init = InitKind::normal) {
    index_[name] = segments_.size();
    segments_.push_back({name, total_, rows, cols, init});
    std::size_t off = total_;
    total_ += rows * cols;
    return off;
  }
  LinearRef linear(const std::string& name, int out, int in, bool bias = true) {
    LinearRef r;
    r.out = out;
    r.in = in;
    r.has_bias = bias;
    r.weight = add(name + ".weight", static_cast<std::size_t>(out), static_cast<std::size_t>(in));
    if (bias) r.bias = add(name + ".bias", 1, static_cast<std::size_t>(out), InitKind::zero);
    return r;
  }
  NormRef norm(const std::string& name, int dim) {
    NormRef r;
    r.dim = dim;
    r.gain = add(name + ".gain", 1, static_cast<std::size_t>(dim), InitKind::one);
    r.bias = add(name + ".bias", 1, static_cast<std::size_t>(dim), InitKind::zero);
    return r;
  }
  BlockRef block(const std::string& p, int dim, int ratio) {
    BlockRef b;
    b.ln1 = norm(p + ".ln1", dim);
    b.q = linear(p + ".attn.q", dim, dim);
    b.k = linear(p + ".attn.k", dim, dim);
    b.v = linear(p + ".attn.v", dim, dim);
    b.o = linear(p + ".attn.o", dim, dim);
    b.ln2 = norm(p + ".ln2", dim);
    b.fc1 = linear(p + ".mlp.fc1", dim * ratio, dim);
    b.fc2 = linear(p + ".mlp.fc2", dim, dim * ratio);
    return b;
  }

  std::vector<Segment> segments_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t total_ = 0;
};

/// Flat parameter (or gradient) store.
template <typename Real>
struct ParamStore {
  std::vector<Real> values;

  ParamStore() = default;
  explicit ParamStore(std::size_t n) : values(n, Real(0)) {}

  Real* data() noexcept { return values.data(); }
  const Real* data() const noexcept { return values.data(); }
  std::size_t size() const noexcept { return values.size(); }
  Real* at(std::size_t offset) noexcept { return values.data() + offset; }
  const Real* at(std::size_t offset) const noexcept { return values.data() + offset; }

  void zero() { std::fill(values.begin(), values.end(), Real(0)); }

  /// this += other; the caller fixes the summation order across stores.
  void accumulate(const ParamStore& other) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
  }

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<Other>(values[i]);
    return out;
  }
};

/// Truncated normal (sigma, cut at 2 sigma) weights, zero biases, unit gains.
template <typename Real>
ParamStore<Real> init_params(const ParamLayout& layout, std::uint64_t seed, double sigma = 0.02) {
  ParamStore<Real> p(layout.total());
  Rng rng(seed);
  for (const Segment& s : layout.segments()) {
    Real* w = p.at(s.offset);
    for (std::size_t i = 0; i < s.size(); ++i) {
      switch (s.init) {
        case InitKind::zero:
          w[i] = Real(0);
          break;
        case InitKind::one:
          w[i] = Real(1);
          break;
        case InitKind::normal: {
          double z;
          do {
            z = rng.normal();
          } while (std::abs(z) > 2.0);
          w[i] = static_cast<Real>(sigma * z);
          break;
        }
      }
    }
  }
  return p;
}

}  // namespace rosetta::model

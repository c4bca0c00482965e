// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "rosetta/image.hpp"
#include "rosetta/model/layers.hpp"
#include "rosetta/tokenizer.hpp"

namespace rosetta::model {

// --- patches -----------------------------------------------------------------

/// Raw patch pixels on a common grid. Row r*grid_w+c holds the patch at grid
/// cell (r, c); in paired mode the context patch occupies the first
/// patch*patch lanes and the co-located query patch the rest. Pixels are ink
/// intensities 1 - v/255, so white padding is 0.
template <typename Real>
struct PatchGrid {
  int grid_h = 0;
  int grid_w = 0;
  Mat<Real> pixels;
  std::size_t count() const { return static_cast<std::size_t>(grid_h) * static_cast<std::size_t>(grid_w); }
};

/// Both images are padded with white to the elementwise max of their sizes,
/// rounded up to a multiple of `patch`. `context` may be null (baseline).
template <typename Real>
PatchGrid<Real> extract_patches(const GrayImage* context, const GrayImage& query, int patch) {
  std::size_t h = query.height, w = query.width;
  if (context) {
    h = std::max(h, context->height);
    w = std::max(w, context->width);
  }
  const auto P = static_cast<std::size_t>(patch);
  h = std::max<std::size_t>(P, (h + P - 1) / P * P);
  w = std::max<std::size_t>(P, (w + P - 1) / P * P);
  PatchGrid<Real> grid;
  grid.grid_h = static_cast<int>(h / P);
  grid.grid_w = static_cast<int>(w / P);
  const std::size_t lanes = P * P;
  const int images = context ? 2 : 1;
  grid.pixels = Mat<Real>::Zero(static_cast<Eigen::Index>(grid.count()), static_cast<Eigen::Index>(lanes * images));
  auto fill = [&](const GrayImage& img, std::size_t lane0) {
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        const std::size_t cell = (y / P) * static_cast<std::size_t>(grid.grid_w) + x / P;
        const std::size_t lane = lane0 + (y % P) * P + (x % P);
        grid.pixels(static_cast<Eigen::Index>(cell), static_cast<Eigen::Index>(lane)) =
            Real(1) - static_cast<Real>(img.at(y, x)) / Real(255);
      }
    }
  };
  if (context) {
    fill(*context, 0);
    fill(query, lanes);
  } else {
    fill(query, 0);
  }
  return grid;
}

// --- prompt layout -----------------------------------------------------------

/// Assembled decoder input. Paired layout:
///   <bos> <vision_start> [visual] <vision_end> [T_c] <sep_query> [prefix]
/// Baseline layout:
///   [visual] <bos> [prefix]
/// Target positions start at <sep_query> (resp. <bos>): the logits there
/// predict prefix[0], ..., and the last one predicts <eos>.
template <typename Real>
struct MultimodalSequence {
  std::vector<TokenId> tokens;  // -1 at visual slots
  std::vector<Position3> positions;
  std::size_t visual_begin = 0;
  std::size_t visual_count = 0;
  std::size_t target_begin = 0;
  std::size_t target_count = 0;
  Mat<Real> embeddings;
  std::size_t size() const { return tokens.size(); }
};

/// Token/position skeleton of a prompt, without embeddings.
template <typename Real>
MultimodalSequence<Real> layout_prompt(const ModelConfig& c, int grid_h, int grid_w, const TokenSeq& context_tokens,
                                       const TokenSeq& prefix) {
  MultimodalSequence<Real> seq;
  int t = 0;
  auto text = [&](TokenId id) {
    seq.tokens.push_back(id);
    seq.positions.push_back({t, t, t});
    ++t;
  };
  auto visual = [&] {
    seq.visual_begin = seq.tokens.size();
    seq.visual_count = static_cast<std::size_t>(grid_h) * static_cast<std::size_t>(grid_w);
    for (int r = 0; r < grid_h; ++r)
      for (int col = 0; col < grid_w; ++col) {
        seq.tokens.push_back(-1);
        seq.positions.push_back({t, t + r, t + col});
      }
    t += std::max(grid_h, grid_w);
  };
  if (c.fusion == Fusion::paired) {
    Vocabulary vocab(static_cast<std::size_t>(c.label_tokens));
    text(vocab.special(SpecialToken::bos));
    text(vocab.special(SpecialToken::vision_start));
    visual();
    text(vocab.special(SpecialToken::vision_end));
    for (TokenId id : context_tokens) text(id);
    seq.target_begin = seq.tokens.size();
    text(vocab.special(SpecialToken::sep_query));
  } else {
    visual();
    seq.target_begin = seq.tokens.size();
    text(StaticTokenizer::kBos);
  }
  for (TokenId id : prefix) text(id);
  seq.target_count = prefix.size() + 1;
  if (seq.size() > static_cast<std::size_t>(c.max_seq_len)) throw SequenceOverflow(seq.size(), static_cast<std::size_t>(c.max_seq_len));
  for (TokenId id : seq.tokens)
    if (id >= c.vocab_size) throw ValidationError("token id " + std::to_string(id) + " outside vocabulary");
  return seq;
}

/// Token ids the decoder may emit: label tokens, <ooc> and <eos> (or the 26
/// letters and <eos> for the baseline).
inline std::vector<bool> emission_mask(const ModelConfig& c) {
  std::vector<bool> mask(static_cast<std::size_t>(c.vocab_size), false);
  if (c.fusion == Fusion::paired) {
    Vocabulary vocab(static_cast<std::size_t>(c.label_tokens));
    for (int k = 0; k < c.label_tokens; ++k) mask[static_cast<std::size_t>(k)] = true;
    mask[static_cast<std::size_t>(vocab.ooc())] = true;
    mask[static_cast<std::size_t>(vocab.special(SpecialToken::eos))] = true;
  } else {
    for (std::size_t k = 0; k < StaticTokenizer::kLetters; ++k) mask[k] = true;
    mask[static_cast<std::size_t>(StaticTokenizer::kEos)] = true;
  }
  return mask;
}

inline TokenId eos_token(const ModelConfig& c) {
  return c.fusion == Fusion::paired ? Vocabulary(static_cast<std::size_t>(c.label_tokens)).special(SpecialToken::eos)
                                    : StaticTokenizer::kEos;
}

// --- network -----------------------------------------------------------------

/// Everything the backward pass needs from one forward pass.
template <typename Real>
struct Trace {
  PatchGrid<Real> patches;
  Mat<Real> fused;
  std::vector<BlockCache<Real>> vit;
  NormCache<Real> vit_norm;
  Mat<Real> vit_out;
  MultimodalSequence<Real> seq;
  std::vector<BlockCache<Real>> dec;
  NormCache<Real> dec_norm;
  Mat<Real> hidden;  // final-normed decoder states at target positions
  Mat<Real> logits;  // [target_count, vocab]
};

/// The full model as a set of pure functions of (config, params, inputs).
template <typename Real>
class Network {
 public:
  explicit Network(ModelConfig config)
      : config_(config),
        layout_(config),
        vit_plan_(RopePlan::grid2d(config.vit_head_dim(), config.rope_base)),
        dec_plan_(RopePlan::multimodal(config.dec_head_dim(), config.rope_base)) {}

  const ModelConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }

  ParamStore<Real> init(std::uint64_t seed) const { return init_params<Real>(layout_, seed); }
  ParamStore<Real> zero_grads() const { return ParamStore<Real>(layout_.total()); }

  /// Fused patch embeddings: one learned linear map over each grid cell's
  /// concatenated (context, query) patch pixels. Shape [cells, vit_dim].
  Mat<Real> patchify_pair(const ParamStore<Real>& p, const GrayImage* context, const GrayImage& query,
                          PatchGrid<Real>* raw = nullptr) const {
    if ((context != nullptr) != (config_.fusion == Fusion::paired))
      throw ValidationError(config_.fusion == Fusion::paired ? "paired model needs a context image"
                                                             : "baseline model takes no context image");
    PatchGrid<Real> grid = extract_patches<Real>(context, query, config_.patch_size);
    Mat<Real> fused = linear_forward(p, layout_.patch, grid.pixels);
    if (raw) *raw = std::move(grid);
    return fused;
  }

  std::vector<Position3> grid_positions(int grid_h, int grid_w) const {
    std::vector<Position3> pos;
    for (int r = 0; r < grid_h; ++r)
      for (int c = 0; c < grid_w; ++c) pos.push_back({0, r, c});
    return pos;
  }

  /// Vision encoder: bidirectional blocks with 2D rotary positions, then a
  /// final norm. Shape [cells, vit_dim].
  Mat<Real> vit_encode(const ParamStore<Real>& p, const Mat<Real>& fused, int grid_h, int grid_w,
                       Trace<Real>* trace = nullptr) const {
    RopeTable<Real> rope(vit_plan_, grid_positions(grid_h, grid_w));
    std::vector<BlockCache<Real>> local(layout_.vit.size());
    auto& caches = trace ? trace->vit : local;
    caches.resize(layout_.vit.size());
    Mat<Real> x = fused;
    for (std::size_t l = 0; l < layout_.vit.size(); ++l)
      x = block_forward(p, layout_.vit[l], x, config_.vit_heads, false, rope, config_.norm_eps, caches[l]);
    NormCache<Real> local_norm;
    return norm_forward(p, layout_.vit_norm, x, config_.norm_eps, trace ? trace->vit_norm : local_norm);
  }

  /// Projects visual tokens to the decoder width and interleaves them with
  /// embedded text tokens.
  MultimodalSequence<Real> assemble_prompt(const ParamStore<Real>& p, const Mat<Real>& visual_tokens, int grid_h,
                                           int grid_w, const TokenSeq& context_tokens, const TokenSeq& prefix) const {
    MultimodalSequence<Real> seq = layout_prompt<Real>(config_, grid_h, grid_w, context_tokens, prefix);
    const Mat<Real> projected = linear_forward(p, layout_.proj, visual_tokens);
    seq.embeddings.resize(static_cast<Eigen::Index>(seq.size()), config_.dec_dim);
    Eigen::Map<const Mat<Real>> table(p.at(layout_.embed), config_.vocab_size, config_.dec_dim);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      if (seq.tokens[i] >= 0) {
        seq.embeddings.row(row) = table.row(seq.tokens[i]);
      } else {
        seq.embeddings.row(row) = projected.row(static_cast<Eigen::Index>(i - seq.visual_begin));
      }
    }
    return seq;
  }

  /// Causal decoder. Returns logits at the target positions, or at every
  /// position when `all_positions` is set.
  Mat<Real> decoder_forward(const ParamStore<Real>& p, const MultimodalSequence<Real>& seq, bool all_positions = false,
                            Trace<Real>* trace = nullptr) const {
    RopeTable<Real> rope(dec_plan_, seq.positions);
    std::vector<BlockCache<Real>> local(layout_.dec.size());
    auto& caches = trace ? trace->dec : local;
    caches.resize(layout_.dec.size());
    Mat<Real> x = seq.embeddings;
    for (std::size_t l = 0; l < layout_.dec.size(); ++l)
      x = block_forward(p, layout_.dec[l], x, config_.dec_heads, true, rope, config_.norm_eps, caches[l]);
    const Eigen::Index begin = all_positions ? 0 : static_cast<Eigen::Index>(seq.target_begin);
    const Eigen::Index count = all_positions ? x.rows() : static_cast<Eigen::Index>(seq.target_count);
    NormCache<Real> local_norm;
    Mat<Real> h = norm_forward(p, layout_.dec_norm, Mat<Real>(x.middleRows(begin, count)), config_.norm_eps,
                               trace ? trace->dec_norm : local_norm);
    Mat<Real> logits = h * weight_of(p, layout_.head).transpose();
    if (trace) trace->hidden = std::move(h);
    return logits;
  }

  /// Full teacher-forced forward pass. `context` is null for the baseline.
  Mat<Real> forward(const ParamStore<Real>& p, const GrayImage* context, const GrayImage& query,
                    const TokenSeq& context_tokens, const TokenSeq& prefix, Trace<Real>& trace) const {
    trace.fused = patchify_pair(p, context, query, &trace.patches);
    trace.vit_out = vit_encode(p, trace.fused, trace.patches.grid_h, trace.patches.grid_w, &trace);
    trace.seq = assemble_prompt(p, trace.vit_out, trace.patches.grid_h, trace.patches.grid_w, context_tokens, prefix);
    trace.logits = decoder_forward(p, trace.seq, false, &trace);
    return trace.logits;
  }

  /// Mean token cross-entropy over target positions; `targets` has one id per
  /// target position (the prefix followed by <eos>).
  static Real cross_entropy(const Mat<Real>& logits, const TokenSeq& targets, Mat<Real>* dlogits = nullptr) {
    if (static_cast<std::size_t>(logits.rows()) != targets.size())
      throw ValidationError("target count does not match target positions");
    const auto n = logits.rows();
    Real loss = 0;
    if (dlogits) dlogits->resize(n, logits.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Real mx = logits.row(i).maxCoeff();
      const RowVec<Real> e = (logits.row(i).array() - mx).exp().matrix();
      const Real z = e.sum();
      loss += std::log(z) + mx - logits(i, targets[static_cast<std::size_t>(i)]);
      if (dlogits) {
        dlogits->row(i) = e / (z * static_cast<Real>(n));
        (*dlogits)(i, targets[static_cast<std::size_t>(i)]) -= Real(1) / static_cast<Real>(n);
      }
    }
    return loss / static_cast<Real>(n);
  }

  /// Loss of a forward trace and its gradient, accumulated into `g`.
  Real backward(const ParamStore<Real>& p, const Trace<Real>& trace, const TokenSeq& targets, ParamStore<Real>& g) const {
    Mat<Real> dlogits;
    const Real loss = cross_entropy(trace.logits, targets, &dlogits);
    const auto& seq = trace.seq;

    Eigen::Map<Mat<Real>>(g.at(layout_.head.weight), config_.vocab_size, config_.dec_dim).noalias() +=
        dlogits.transpose() * trace.hidden;
    Mat<Real> dh = dlogits * weight_of(p, layout_.head);
    Mat<Real> dx = Mat<Real>::Zero(static_cast<Eigen::Index>(seq.size()), config_.dec_dim);
    dx.middleRows(static_cast<Eigen::Index>(seq.target_begin), static_cast<Eigen::Index>(seq.target_count)) =
        norm_backward(p, layout_.dec_norm, dh, trace.dec_norm, g);

    RopeTable<Real> dec_rope(dec_plan_, seq.positions);
    for (std::size_t l = layout_.dec.size(); l-- > 0;)
      dx = block_backward(p, layout_.dec[l], dx, config_.dec_heads, true, dec_rope, trace.dec[l], g);

    Eigen::Map<Mat<Real>> dtable(g.at(layout_.embed), config_.vocab_size, config_.dec_dim);
    for (std::size_t i = 0; i < seq.size(); ++i)
      if (seq.tokens[i] >= 0) dtable.row(seq.tokens[i]) += dx.row(static_cast<Eigen::Index>(i));

    Mat<Real> dproj = dx.middleRows(static_cast<Eigen::Index>(seq.visual_begin), static_cast<Eigen::Index>(seq.visual_count));
    Mat<Real> dvis = linear_backward(p, layout_.proj, trace.vit_out, dproj, g);
    Mat<Real> dv = norm_backward(p, layout_.vit_norm, dvis, trace.vit_norm, g);
    RopeTable<Real> vit_rope(vit_plan_, grid_positions(trace.patches.grid_h, trace.patches.grid_w));
    for (std::size_t l = layout_.vit.size(); l-- > 0;)
      dv = block_backward(p, layout_.vit[l], dv, config_.vit_heads, false, vit_rope, trace.vit[l], g);
    linear_backward(p, layout_.patch, trace.patches.pixels, dv, g, false);
    return loss;
  }

  /// Forward + backward for one sample. `targets` = prefix + <eos>.
  Real loss_and_grad(const ParamStore<Real>& p, const GrayImage* context, const GrayImage& query,
                     const TokenSeq& context_tokens, const TokenSeq& prefix, ParamStore<Real>& g,
                     Trace<Real>* keep = nullptr) const {
    Trace<Real> local;
    Trace<Real>& trace = keep ? *keep : local;
    forward(p, context, query, context_tokens, prefix, trace);
    return backward(p, trace, with_eos(prefix), g);
  }

  Real loss(const ParamStore<Real>& p, const GrayImage* context, const GrayImage& query, const TokenSeq& context_tokens,
            const TokenSeq& prefix) const {
    Trace<Real> trace;
    return cross_entropy(forward(p, context, query, context_tokens, prefix, trace), with_eos(prefix));
  }

  TokenSeq with_eos(TokenSeq prefix) const {
    prefix.push_back(eos_token(config_));
    return prefix;
  }

  /// Greedy decoding from the target start until <eos> or max_decode_len
  /// tokens. Returned tokens exclude <eos>.
  TokenSeq generate(const ParamStore<Real>& p, const GrayImage* context, const TokenSeq& context_tokens,
                    const GrayImage& query) const {
    PatchGrid<Real> raw;
    Mat<Real> fused = patchify_pair(p, context, query, &raw);
    Mat<Real> visual = vit_encode(p, fused, raw.grid_h, raw.grid_w);
    const std::vector<bool> mask = emission_mask(config_);
    const TokenId eos = eos_token(config_);
    TokenSeq out;
    while (out.size() < static_cast<std::size_t>(config_.max_decode_len)) {
      MultimodalSequence<Real> seq = assemble_prompt(p, visual, raw.grid_h, raw.grid_w, context_tokens, out);
      Mat<Real> logits = decoder_forward(p, seq);
      const auto last = logits.rows() - 1;
      TokenId best = -1;
      Real best_val = -std::numeric_limits<Real>::infinity();
      for (Eigen::Index v = 0; v < logits.cols(); ++v) {
        if (!mask[static_cast<std::size_t>(v)]) continue;
        if (best < 0 || logits(last, v) > best_val) {
          best = static_cast<TokenId>(v);
          best_val = logits(last, v);
        }
      }
      if (best == eos) break;
      out.push_back(best);
    }
    return out;
  }

  /// Context-free baseline forward: logits over the 29-token static vocabulary.
  Mat<Real> ocr_baseline_forward(const ParamStore<Real>& p, const GrayImage& query, const TokenSeq& prefix) const {
    if (config_.fusion != Fusion::single) throw ValidationError("ocr_baseline_forward needs fusion=single");
    Trace<Real> trace;
    return forward(p, nullptr, query, {}, prefix, trace);
  }

 private:
  ModelConfig config_;
  ParamLayout layout_;
  RopePlan vit_plan_;
  RopePlan dec_plan_;
};

}  // namespace rosetta::model

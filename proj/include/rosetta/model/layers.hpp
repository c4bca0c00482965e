// SPDX-License-Identifier: Apache-2.0
//
// Transformer building blocks with explicit backward passes. Forward
// functions fill a cache; backward functions consume it, accumulate
// parameter gradients into a ParamStore of the same layout, and return the
// gradient with respect to their input.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "rosetta/model/params.hpp"

namespace rosetta::model {

template <typename Real>
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using ColVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
template <typename Real>
using RowVec = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

template <typename Real>
Eigen::Map<const Mat<Real>> weight_of(const ParamStore<Real>& p, const LinearRef& r) {
  return Eigen::Map<const Mat<Real>>(p.at(r.weight), r.out, r.in);
}

// --- linear ----------------------------------------------------------------

template <typename Real>
Mat<Real> linear_forward(const ParamStore<Real>& p, const LinearRef& r, const Mat<Real>& x) {
  Mat<Real> y = x * weight_of(p, r).transpose();
  if (r.has_bias) y.rowwise() += Eigen::Map<const RowVec<Real>>(p.at(r.bias), r.out);
  return y;
}

/// Accumulates dW, db; returns dX unless `need_input_grad` is false.
template <typename Real>
Mat<Real> linear_backward(const ParamStore<Real>& p, const LinearRef& r, const Mat<Real>& x, const Mat<Real>& dy,
                          ParamStore<Real>& g, bool need_input_grad = true) {
  Eigen::Map<Mat<Real>> dw(g.at(r.weight), r.out, r.in);
  dw.noalias() += dy.transpose() * x;
  if (r.has_bias) Eigen::Map<RowVec<Real>>(g.at(r.bias), r.out) += dy.colwise().sum();
  if (!need_input_grad) return {};
  return dy * weight_of(p, r);
}

// --- layer norm ------------------------------------------------------------

template <typename Real>
struct NormCache {
  Mat<Real> xhat;
  ColVec<Real> rstd;
};

template <typename Real>
Mat<Real> norm_forward(const ParamStore<Real>& p, const NormRef& r, const Mat<Real>& x, double eps,
                       NormCache<Real>& cache) {
  const auto n = x.rows();
  const auto d = x.cols();
  cache.xhat.resize(n, d);
  cache.rstd.resize(n);
  Eigen::Map<const RowVec<Real>> gain(p.at(r.gain), d), bias(p.at(r.bias), d);
  Mat<Real> y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Real mean = x.row(i).mean();
    const Real var = (x.row(i).array() - mean).square().mean();
    const Real rstd = Real(1) / std::sqrt(var + static_cast<Real>(eps));
    cache.rstd(i) = rstd;
    cache.xhat.row(i) = (x.row(i).array() - mean) * rstd;
    y.row(i) = cache.xhat.row(i).cwiseProduct(gain) + bias;
  }
  return y;
}

template <typename Real>
Mat<Real> norm_backward(const ParamStore<Real>& p, const NormRef& r, const Mat<Real>& dy, const NormCache<Real>& cache,
                        ParamStore<Real>& g) {
  const auto n = dy.rows();
  const auto d = dy.cols();
  Eigen::Map<const RowVec<Real>> gain(p.at(r.gain), d);
  Eigen::Map<RowVec<Real>> dgain(g.at(r.gain), d), dbias(g.at(r.bias), d);
  dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  Mat<Real> dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    RowVec<Real> dxhat = dy.row(i).cwiseProduct(gain);
    const Real m1 = dxhat.mean();
    const Real m2 = dxhat.cwiseProduct(cache.xhat.row(i)).mean();
    dx.row(i) = cache.rstd(i) * (dxhat.array() - m1 - cache.xhat.row(i).array() * m2);
  }
  return dx;
}

// --- GELU (tanh form) --------------------------------------------------------

template <typename Real>
Mat<Real> gelu_forward(const Mat<Real>& u) {
  const Real k = static_cast<Real>(0.7978845608028654);
  const Real c = static_cast<Real>(0.044715);
  return u.unaryExpr([=](Real x) { return Real(0.5) * x * (Real(1) + std::tanh(k * (x + c * x * x * x))); });
}

template <typename Real>
Mat<Real> gelu_backward(const Mat<Real>& u, const Mat<Real>& dy) {
  const Real k = static_cast<Real>(0.7978845608028654);
  const Real c = static_cast<Real>(0.044715);
  Mat<Real> du = u.unaryExpr([=](Real x) {
    const Real t = std::tanh(k * (x + c * x * x * x));
    return Real(0.5) * (Real(1) + t) + Real(0.5) * x * (Real(1) - t * t) * k * (Real(1) + Real(3) * c * x * x);
  });
  return du.cwiseProduct(dy);
}

// --- rotary positions ------------------------------------------------------

/// Three integer coordinates per position: (temporal, row, col).
using Position3 = std::array<int, 3>;

/// Per-pair rotation plan shared by every head: which coordinate drives the
/// pair and at what frequency. Pairs are adjacent lanes (2p, 2p+1).
struct RopePlan {
  std::vector<int> coord;
  std::vector<double> freq;

  /// Vision encoder: first half of the pairs follow the row, second half the column.
  static RopePlan grid2d(int head_dim, double base) {
    RopePlan plan;
    const int pairs = head_dim / 2;
    const int half = pairs / 2;
    for (int p = 0; p < pairs; ++p) {
      const int i = p % half;
      plan.coord.push_back(p < half ? 1 : 2);
      plan.freq.push_back(std::pow(base, -static_cast<double>(i) / half));
    }
    return plan;
  }

  /// Decoder: frequency bands split into (temporal, row, col) sections.
  static RopePlan multimodal(int head_dim, double base) {
    RopePlan plan;
    const int pairs = head_dim / 2;
    const int side = pairs / 3;
    const int temporal = pairs - 2 * side;
    for (int p = 0; p < pairs; ++p) {
      plan.coord.push_back(p < temporal ? 0 : (p < temporal + side ? 1 : 2));
      plan.freq.push_back(std::pow(base, -static_cast<double>(p) / pairs));
    }
    return plan;
  }
};

template <typename Real>
struct RopeTable {
  int pairs = 0;
  Mat<Real> cos, sin;  // [n, pairs]

  RopeTable() = default;
  RopeTable(const RopePlan& plan, const std::vector<Position3>& pos) : pairs(static_cast<int>(plan.coord.size())) {
    const auto n = static_cast<Eigen::Index>(pos.size());
    cos.resize(n, pairs);
    sin.resize(n, pairs);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int p = 0; p < pairs; ++p) {
        const double angle = pos[static_cast<std::size_t>(i)][static_cast<std::size_t>(plan.coord[p])] * plan.freq[p];
        cos(i, p) = static_cast<Real>(std::cos(angle));
        sin(i, p) = static_cast<Real>(std::sin(angle));
      }
    }
  }

  /// Rotates every head of `x` ([n, heads*2*pairs]) in place; `inverse`
  /// applies the transpose rotation (used by the backward pass).
  void apply(Mat<Real>& x, int heads, bool inverse = false) const {
    const int head_dim = 2 * pairs;
    const Real sign = inverse ? Real(-1) : Real(1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (int h = 0; h < heads; ++h) {
        for (int p = 0; p < pairs; ++p) {
          const Eigen::Index a = h * head_dim + 2 * p;
          const Real c = cos(i, p), s = sign * sin(i, p);
          const Real x0 = x(i, a), x1 = x(i, a + 1);
          x(i, a) = x0 * c - x1 * s;
          x(i, a + 1) = x0 * s + x1 * c;
        }
      }
    }
  }
};

// --- attention + block -----------------------------------------------------

template <typename Real>
struct AttentionCache {
  Mat<Real> input;  // normed block input
  Mat<Real> q, k, v;  // q, k after rotation
  std::vector<Mat<Real>> probs;
  Mat<Real> context;
};

template <typename Real>
Mat<Real> attention_forward(const ParamStore<Real>& p, const BlockRef& b, const Mat<Real>& x, int heads, bool causal,
                            const RopeTable<Real>& rope, AttentionCache<Real>& cache) {
  const auto n = x.rows();
  const int d = b.q.out;
  const int hd = d / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(hd));
  cache.input = x;
  cache.q = linear_forward(p, b.q, x);
  cache.k = linear_forward(p, b.k, x);
  cache.v = linear_forward(p, b.v, x);
  rope.apply(cache.q, heads);
  rope.apply(cache.k, heads);
  cache.probs.assign(static_cast<std::size_t>(heads), Mat<Real>());
  cache.context.resize(n, d);
  for (int h = 0; h < heads; ++h) {
    Mat<Real>& s = cache.probs[static_cast<std::size_t>(h)];
    s.noalias() = cache.q.middleCols(h * hd, hd) * cache.k.middleCols(h * hd, hd).transpose();
    s *= scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index visible = causal ? i + 1 : n;
      Real mx = s.row(i).head(visible).maxCoeff();
      Real sum = 0;
      for (Eigen::Index j = 0; j < visible; ++j) {
        s(i, j) = std::exp(s(i, j) - mx);
        sum += s(i, j);
      }
      for (Eigen::Index j = 0; j < visible; ++j) s(i, j) /= sum;
      for (Eigen::Index j = visible; j < n; ++j) s(i, j) = Real(0);
    }
    cache.context.middleCols(h * hd, hd).noalias() = s * cache.v.middleCols(h * hd, hd);
  }
  return linear_forward(p, b.o, cache.context);
}

template <typename Real>
Mat<Real> attention_backward(const ParamStore<Real>& p, const BlockRef& b, const Mat<Real>& dy, int heads, bool causal,
                             const RopeTable<Real>& rope, const AttentionCache<Real>& cache, ParamStore<Real>& g) {
  const auto n = dy.rows();
  const int d = b.q.out;
  const int hd = d / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(hd));
  Mat<Real> dctx = linear_backward(p, b.o, cache.context, dy, g);
  Mat<Real> dq(n, d), dk(n, d), dv(n, d);
  for (int h = 0; h < heads; ++h) {
    const Mat<Real>& prob = cache.probs[static_cast<std::size_t>(h)];
    auto dctx_h = dctx.middleCols(h * hd, hd);
    dv.middleCols(h * hd, hd).noalias() = prob.transpose() * dctx_h;
    Mat<Real> dp = dctx_h * cache.v.middleCols(h * hd, hd).transpose();
    Mat<Real> ds(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index visible = causal ? i + 1 : n;
      Real dot = 0;
      for (Eigen::Index j = 0; j < visible; ++j) dot += dp(i, j) * prob(i, j);
      for (Eigen::Index j = 0; j < visible; ++j) ds(i, j) = prob(i, j) * (dp(i, j) - dot) * scale;
      for (Eigen::Index j = visible; j < n; ++j) ds(i, j) = Real(0);
    }
    dq.middleCols(h * hd, hd).noalias() = ds * cache.k.middleCols(h * hd, hd);
    dk.middleCols(h * hd, hd).noalias() = ds.transpose() * cache.q.middleCols(h * hd, hd);
  }
  rope.apply(dq, heads, true);
  rope.apply(dk, heads, true);
  Mat<Real> dx = linear_backward(p, b.q, cache.input, dq, g);
  dx += linear_backward(p, b.k, cache.input, dk, g);
  dx += linear_backward(p, b.v, cache.input, dv, g);
  return dx;
}

template <typename Real>
struct BlockCache {
  NormCache<Real> norm1;
  AttentionCache<Real> attn;
  NormCache<Real> norm2;
  Mat<Real> h2;  // normed input of the MLP
  Mat<Real> pre;  // fc1 output
  Mat<Real> act;  // GELU output
};

/// Pre-norm transformer block: x + attn(ln1(x)), then + mlp(ln2(.)).
template <typename Real>
Mat<Real> block_forward(const ParamStore<Real>& p, const BlockRef& b, const Mat<Real>& x, int heads, bool causal,
                        const RopeTable<Real>& rope, double eps, BlockCache<Real>& cache) {
  Mat<Real> h1 = norm_forward(p, b.ln1, x, eps, cache.norm1);
  Mat<Real> x1 = x + attention_forward(p, b, h1, heads, causal, rope, cache.attn);
  cache.h2 = norm_forward(p, b.ln2, x1, eps, cache.norm2);
  cache.pre = linear_forward(p, b.fc1, cache.h2);
  cache.act = gelu_forward(cache.pre);
  x1 += linear_forward(p, b.fc2, cache.act);
  return x1;
}

template <typename Real>
Mat<Real> block_backward(const ParamStore<Real>& p, const BlockRef& b, const Mat<Real>& dy, int heads, bool causal,
                         const RopeTable<Real>& rope, const BlockCache<Real>& cache, ParamStore<Real>& g) {
  Mat<Real> dact = linear_backward(p, b.fc2, cache.act, dy, g);
  Mat<Real> dpre = gelu_backward(cache.pre, dact);
  Mat<Real> dh2 = linear_backward(p, b.fc1, cache.h2, dpre, g);
  Mat<Real> dx1 = dy + norm_backward(p, b.ln2, dh2, cache.norm2, g);
  Mat<Real> dh1 = attention_backward(p, b, dx1, heads, causal, rope, cache.attn, g);
  return dx1 + norm_backward(p, b.ln1, dh1, cache.norm1, g);
}

}  // namespace rosetta::model

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "rosetta/error.hpp"

namespace rosetta {

/// Cosine decay without warm-up: 1 at step 0, 0 at step == total.
inline double cosine_multiplier(std::uint64_t step, std::uint64_t total) {
  if (total == 0) return 1.0;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay:
///   p <- p * (1 - lr*wd)
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
///   p <- p - lr * mhat / (sqrt(vhat) + eps)
template <typename Real>
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::size_t n, AdamWOptions opt) : opt_(opt), m_(n, Real(0)), v_(n, Real(0)) {}

  void step(std::vector<Real>& params, const std::vector<Real>& grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) throw ValidationError("optimizer size mismatch");
    ++t_;
    const Real b1 = static_cast<Real>(opt_.beta1);
    const Real b2 = static_cast<Real>(opt_.beta2);
    const Real c1 = static_cast<Real>(1.0 - std::pow(opt_.beta1, static_cast<double>(t_)));
    const Real c2 = static_cast<Real>(1.0 - std::pow(opt_.beta2, static_cast<double>(t_)));
    const Real decay = static_cast<Real>(1.0 - lr * opt_.weight_decay);
    const Real rate = static_cast<Real>(lr);
    const Real eps = static_cast<Real>(opt_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Real g = grads[i];
      m_[i] = b1 * m_[i] + (Real(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Real(1) - b2) * g * g;
      const Real mhat = m_[i] / c1;
      const Real vhat = v_[i] / c2;
      params[i] = params[i] * decay - rate * mhat / (std::sqrt(vhat) + eps);
    }
  }

  std::uint64_t steps() const noexcept { return t_; }
  const std::vector<Real>& first_moment() const noexcept { return m_; }
  const std::vector<Real>& second_moment() const noexcept { return v_; }
  const AdamWOptions& options() const noexcept { return opt_; }

  void restore(std::vector<Real> m, std::vector<Real> v, std::uint64_t t) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw ValidationError("optimizer state size mismatch");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  AdamWOptions opt_;
  std::vector<Real> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace rosetta

// Copyright 2026 The labtx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "labtx/numerics/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "labtx/numerics/ops.hpp"
#include "op_util.hpp"

namespace labtx::ops {
namespace {

// Order-independent sum of a small buffer: sorts in place, then adds.
Real sorted_sum(std::span<Real> terms) {
  std::sort(terms.begin(), terms.end());
  Real total = 0;
  for (Real t : terms) total += t;
  return total;
}

}  // namespace

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    std::span<const std::uint8_t> pad_mask, std::size_t num_heads) {
  if (num_heads < 1) throw ConfigError("attention: num_heads must be >= 1");
  if (q.rank() != 3) throw DimensionError("attention: expected [b,L,h*k], got " + shape_string(q.shape()));
  detail::require_same_shape(q, k, "attention");
  detail::require_same_shape(q, v, "attention");
  const std::size_t b = q.dim(0), len = q.dim(1), width = q.dim(2);
  if (width % num_heads != 0) {
    throw ConfigError("attention: projection width " + std::to_string(width) + " not divisible by " +
                      std::to_string(num_heads) + " heads");
  }
  if (pad_mask.size() != b * len) {
    throw DimensionError("attention: pad mask has " + std::to_string(pad_mask.size()) + " entries for " +
                         shape_string(q.shape()));
  }
  const std::size_t kd = width / num_heads;
  const Real scale = Real{1} / std::sqrt(static_cast<Real>(kd));

  Tensor out(q.shape());
  std::vector<Real> probs(b * num_heads * len * len, Real{0});
  std::vector<Real> terms(len);
  const Real* qd = q.data().data();
  const Real* kdat = k.data().data();
  const Real* vd = v.data().data();
  Real* od = out.mutable_data().data();

  for (std::size_t bi = 0; bi < b; ++bi) {
    const std::uint8_t* pad = pad_mask.data() + bi * len;
    for (std::size_t h = 0; h < num_heads; ++h) {
      const std::size_t col = h * kd;
      for (std::size_t i = 0; i < len; ++i) {
        if (pad[i]) continue;
        Real* p = probs.data() + ((bi * num_heads + h) * len + i) * len;
        const Real* qi = qd + (bi * len + i) * width + col;
        Real mx = -std::numeric_limits<Real>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          const Real* kj = kdat + (bi * len + j) * width + col;
          Real s = 0;
          for (std::size_t c = 0; c < kd; ++c) s += qi[c] * kj[c];
          s *= scale;
          if (pad[j]) s += kMaskedLogit;
          p[j] = s;
          mx = std::max(mx, s);
        }
        for (std::size_t j = 0; j < len; ++j) {
          p[j] = std::exp(p[j] - mx);
          terms[j] = p[j];
        }
        const Real z = sorted_sum(terms);
        for (std::size_t j = 0; j < len; ++j) p[j] /= z;
        Real* oi = od + (bi * len + i) * width + col;
        for (std::size_t c = 0; c < kd; ++c) {
          for (std::size_t j = 0; j < len; ++j) terms[j] = p[j] * vd[(bi * len + j) * width + col + c];
          oi[c] = sorted_sum(terms);
        }
      }
    }
  }

  if (detail::should_record({&q, &k, &v})) {
    detail::ImplPtr qi = q.handle(), ki = k.handle(), vi = v.handle();
    detail::TensorImpl* oi = out.impl();
    std::vector<std::uint8_t> mask(pad_mask.begin(), pad_mask.end());
    detail::record(out, [qi, ki, vi, oi, b, len, width, kd, num_heads, scale, mask = std::move(mask),
                         probs = std::move(probs)] {
      const Real* g = oi->grad.data();
      Real* gq = detail::grad_sink(qi);
      Real* gk = detail::grad_sink(ki);
      Real* gv = detail::grad_sink(vi);
      std::vector<Real> dp(len), ds(len);
      for (std::size_t bi = 0; bi < b; ++bi) {
        const std::uint8_t* pad = mask.data() + bi * len;
        for (std::size_t h = 0; h < num_heads; ++h) {
          const std::size_t col = h * kd;
          for (std::size_t i = 0; i < len; ++i) {
            if (pad[i]) continue;
            const Real* p = probs.data() + ((bi * num_heads + h) * len + i) * len;
            const Real* gi = g + (bi * len + i) * width + col;
            Real weighted = 0;
            for (std::size_t j = 0; j < len; ++j) {
              const Real* vj = vi->data.data() + (bi * len + j) * width + col;
              Real acc = 0;
              for (std::size_t c = 0; c < kd; ++c) acc += gi[c] * vj[c];
              dp[j] = acc;
              weighted += p[j] * acc;
              if (gv) {
                Real* gvj = gv + (bi * len + j) * width + col;
                for (std::size_t c = 0; c < kd; ++c) gvj[c] += p[j] * gi[c];
              }
            }
            for (std::size_t j = 0; j < len; ++j) ds[j] = p[j] * (dp[j] - weighted) * scale;
            const Real* qrow = qi->data.data() + (bi * len + i) * width + col;
            for (std::size_t j = 0; j < len; ++j) {
              if (ds[j] == Real{0}) continue;
              const Real* kj = ki->data.data() + (bi * len + j) * width + col;
              if (gq) {
                Real* gqi = gq + (bi * len + i) * width + col;
                for (std::size_t c = 0; c < kd; ++c) gqi[c] += ds[j] * kj[c];
              }
              if (gk) {
                Real* gkj = gk + (bi * len + j) * width + col;
                for (std::size_t c = 0; c < kd; ++c) gkj[c] += ds[j] * qrow[c];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor multi_head_attention(const Tensor& x, const AttentionWeights& weights, std::size_t key_dim,
                            std::size_t num_heads, std::span<const std::uint8_t> pad_mask) {
  if (num_heads < 1 || key_dim < 1) {
    throw ConfigError("multi_head_attention: num_heads and key_dim must be >= 1");
  }
  if (x.rank() != 3) throw DimensionError("multi_head_attention: expected [b,L,d], got " + shape_string(x.shape()));
  const std::size_t d = x.dim(2), width = num_heads * key_dim;
  const Shape proj{d, width};
  for (const Tensor* w : {&weights.query_w, &weights.key_w, &weights.value_w}) {
    if (w->shape() != proj) {
      throw DimensionError("multi_head_attention: projection " + shape_string(w->shape()) + ", expected " +
                           shape_string(proj));
    }
  }
  if (weights.output_w.shape() != Shape{width, d}) {
    throw DimensionError("multi_head_attention: output projection " + shape_string(weights.output_w.shape()) +
                         ", expected " + shape_string(Shape{width, d}));
  }
  Tensor q = linear(x, weights.query_w, weights.query_b);
  Tensor k = linear(x, weights.key_w, weights.key_b);
  Tensor v = linear(x, weights.value_w, weights.value_b);
  Tensor heads = scaled_dot_product_attention(q, k, v, pad_mask, num_heads);
  return apply_pad_mask(linear(heads, weights.output_w, weights.output_b), pad_mask);
}

}  // namespace labtx::ops

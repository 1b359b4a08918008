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

#ifndef LABTX_NUMERICS_ATTENTION_HPP_
#define LABTX_NUMERICS_ATTENTION_HPP_

#include <cstdint>
#include <span>

#include "labtx/numerics/tensor.hpp"

namespace labtx {

// Projection weights of one multi-head attention layer. query/key/value map
// d_model -> num_heads * key_dim, output maps num_heads * key_dim -> d_model.
struct AttentionWeights {
  Tensor query_w, query_b;
  Tensor key_w, key_b;
  Tensor value_w, value_b;
  Tensor output_w, output_b;
};

// Additive logit applied to padded keys before the softmax.
inline constexpr Real kMaskedLogit = Real{-1e9};

namespace ops {

// Scaled dot-product attention over already-projected q, k, v of shape
// [b, L, num_heads * key_dim], scale 1/sqrt(key_dim). pad_mask has b*L
// entries, nonzero marking padding: padded keys get kMaskedLogit added to
// their logits and padded query rows are zero.
//
// Reductions over the key axis are summed in sorted order, which makes the
// output exactly (bitwise) equivariant under permutations of the L axis.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    std::span<const std::uint8_t> pad_mask, std::size_t num_heads);

// Full layer: projections, attention, concatenated heads, output projection.
// Rows at padded positions of the result are zero.
Tensor multi_head_attention(const Tensor& x, const AttentionWeights& weights, std::size_t key_dim,
                            std::size_t num_heads, std::span<const std::uint8_t> pad_mask);

}  // namespace ops
}  // namespace labtx

#endif  // LABTX_NUMERICS_ATTENTION_HPP_

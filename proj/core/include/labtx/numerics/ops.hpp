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

#ifndef LABTX_NUMERICS_OPS_HPP_
#define LABTX_NUMERICS_OPS_HPP_

#include <cstdint>
#include <random>
#include <span>

#include "labtx/numerics/tensor.hpp"

namespace labtx {

using Rng = std::mt19937_64;

namespace ops {

// Plain matrix product of a[m,k] and b[k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Position-wise dense layer: x[..., in] * weight[in, out] + bias[out].
// bias may be an undefined Tensor.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// Numerically stable softmax along the given axis (max subtraction).
Tensor softmax(const Tensor& x, std::size_t axis);
inline Tensor softmax(const Tensor& x) { return softmax(x, x.rank() - 1); }

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps = Real{1e-5});

// Inverted dropout. Identity when training is false or rate is zero.
Tensor dropout(const Tensor& x, Real rate, Rng& rng, bool training);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Concatenates along the last axis; leading extents must match.
Tensor concat_last(const Tensor& a, const Tensor& b);

// Same data, new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

// Row lookup into table[V, d]. Output shape is ids_shape + [d]. Entries equal
// to pad_id produce zero vectors and receive no gradient; pass a negative
// pad_id to disable. Ids outside [0, V) raise VocabError.
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids, const Shape& ids_shape,
                 std::int32_t pad_id = 0);

// Views x as [rows, width] with width = last extent and picks rows.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);

// Mean over axis 1 of x[b, L, d] skipping positions with pad_mask set.
// Rows with no valid position produce zeros.
Tensor masked_mean_pool(const Tensor& x, std::span<const std::uint8_t> pad_mask);

// Zeroes x[b, L, ...] at positions whose pad_mask entry is nonzero.
Tensor apply_pad_mask(const Tensor& x, std::span<const std::uint8_t> pad_mask);

// Mean of -log(probs[i, target[i]]) over rows of probs[n, V].
Tensor nll_from_probs(const Tensor& probs, std::span<const std::size_t> targets);

// Mean of (pred[i] - target[i])^2. pred is flattened.
Tensor mse(const Tensor& pred, std::span<const Real> target);

// Mean binary cross-entropy of probabilities p against 0/1 labels.
Tensor binary_cross_entropy(const Tensor& p, std::span<const Real> labels);

}  // namespace ops
}  // namespace labtx

#endif  // LABTX_NUMERICS_OPS_HPP_

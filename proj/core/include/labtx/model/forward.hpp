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

// Forward passes of both architectures. Nothing here is positional: every
// op is either position-wise or a padding-masked attention, so permuting the
// bag axis permutes the outputs.
//
// Tensors are recorded on the active tape when one is installed.

#ifndef LABTX_MODEL_FORWARD_HPP_
#define LABTX_MODEL_FORWARD_HPP_

#include <cstdint>
#include <span>

#include "labtx/corpus/bag.hpp"
#include "labtx/model/params.hpp"
#include "labtx/numerics/ops.hpp"

namespace labtx {

// Dropout is applied only when training; rng must then be non-null.
struct ForwardMode {
  bool training = false;
  Rng* rng = nullptr;
};

// Token lookup [b, L] -> [b, L, d]; the pad token embeds to zero.
Tensor categorical_embed(const ModelParams& params, std::span<const Token> tokens, std::size_t batch,
                         std::size_t length);

// value_proj(value) + token_embeddings -> ReLU mix -> LayerNorm. At null
// positions the value channel sees 0 and the null token's embedding is added
// to the code embedding. Raises DataError for a non-null value outside [0, 1].
Tensor continuous_embed(const ModelParams& params, std::span<const Real> values, const Tensor& token_embeddings,
                        std::span<const std::uint8_t> null_flags, std::span<const Token> tokens);

// Post-norm blocks: x = LN(x + Drop(MHA(x))); x = LN(x + Drop(FF(x))).
Tensor backbone_forward(const ModelParams& params, const Tensor& x, std::span<const std::uint8_t> pad_mask,
                        ForwardMode mode);

// [..., d] -> probabilities [..., head_width].
Tensor categorical_head(const ModelParams& params, const Tensor& hidden);

// ([..., d], [..., V]) -> values [..., 1] in (0, 1).
Tensor continuous_head(const ModelParams& params, const Tensor& hidden, const Tensor& probs);

// Final hidden states [b, L, d] for either architecture.
Tensor encode(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode);

struct ModelOutput {
  Tensor probs;   // [rows, head_width]
  Tensor values;  // [rows, 1]; undefined for the baseline
};

// Heads applied at every position: rows = b * L.
ModelOutput forward_all(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode);

// Heads applied only at batch.targets, in target order: rows = targets.
ModelOutput forward_masked(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode);

// Architecture-specific entry points; they check the config mode.
ModelOutput labrador_forward(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode);
Tensor bert_baseline_forward(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode);

// Head output index of a target token, and back.
std::size_t head_index(const ModelConfig& config, Token token);
Token head_token(const ModelConfig& config, std::size_t index);

}  // namespace labtx

#endif  // LABTX_MODEL_FORWARD_HPP_

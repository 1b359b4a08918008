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

#include "labtx/model/forward.hpp"

#include <algorithm>

#include "labtx/error.hpp"
#include "labtx/numerics/attention.hpp"

namespace labtx {
namespace {

Tensor dense(const Tensor& x, const DenseParams& p) { return ops::linear(x, p.weight, p.bias); }

Tensor norm(const Tensor& x, const LayerNormParams& p) { return ops::layer_norm(x, p.gain, p.bias); }

Tensor drop(const Tensor& x, double rate, ForwardMode mode) {
  if (!mode.training || rate == 0.0) return x;
  if (!mode.rng) throw ContractError("training forward needs an rng for dropout");
  return ops::dropout(x, static_cast<Real>(rate), *mode.rng, true);
}

void require_mode(const ModelParams& params, ModelMode mode, const char* what) {
  if (params.config.mode != mode) {
    throw ConfigError(std::string(what) + " called on a " + model_mode_name(params.config.mode) + " model");
  }
}

}  // namespace

Tensor categorical_embed(const ModelParams& params, std::span<const Token> tokens, std::size_t batch,
                         std::size_t length) {
  return ops::embedding(params.token_embedding, tokens, {batch, length}, kPadToken);
}

Tensor continuous_embed(const ModelParams& params, std::span<const Real> values, const Tensor& token_embeddings,
                        std::span<const std::uint8_t> null_flags, std::span<const Token> tokens) {
  require_mode(params, ModelMode::kLabrador, "continuous_embed");
  if (token_embeddings.rank() != 3) {
    throw DimensionError("continuous_embed: token embeddings must be [b,L,d], got " +
                         shape_string(token_embeddings.shape()));
  }
  const std::size_t b = token_embeddings.dim(0), len = token_embeddings.dim(1), n = b * len;
  if (values.size() != n || null_flags.size() != n || tokens.size() != n) {
    throw DimensionError("continuous_embed: expected " + std::to_string(n) + " values, flags and tokens");
  }
  std::vector<Token> null_ids(n, kPadToken);
  bool any_null = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (null_flags[i]) {
      null_ids[i] = params.config.null_token();
      any_null = true;
    } else if (!(values[i] >= Real{0} && values[i] <= Real{1})) {
      throw DataError("continuous_embed: value " + std::to_string(values[i]) + " at flat position " +
                      std::to_string(i) + " outside [0, 1]");
    }
  }
  std::vector<Real> fed(values.begin(), values.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (null_flags[i]) fed[i] = Real{0};
  }
  Tensor tok = token_embeddings;
  if (any_null) tok = ops::add(tok, ops::embedding(params.token_embedding, null_ids, {b, len}, kPadToken));
  const ContinuousEmbeddingParams& p = params.continuous_embedding;
  Tensor x = dense(Tensor({b, len, 1}, std::move(fed)), p.value_proj);
  x = ops::add(x, tok);
  x = ops::relu(dense(x, p.mix));
  return norm(x, p.norm);
}

Tensor backbone_forward(const ModelParams& params, const Tensor& x, std::span<const std::uint8_t> pad_mask,
                        ForwardMode mode) {
  const ModelConfig& c = params.config;
  if (x.rank() != 3 || x.dim(2) != c.d_model) {
    throw DimensionError("backbone: expected [b,L," + std::to_string(c.d_model) + "], got " + shape_string(x.shape()));
  }
  Tensor h = x;
  for (const BlockParams& block : params.blocks) {
    Tensor a = ops::multi_head_attention(h, block.attention, c.resolved_key_dim(), c.num_heads, pad_mask);
    h = norm(ops::add(h, drop(a, c.dropout, mode)), block.attention_norm);
    Tensor f = dense(ops::relu(dense(h, block.ff_in)), block.ff_out);
    h = norm(ops::add(h, drop(f, c.dropout, mode)), block.ff_norm);
  }
  return h;
}

Tensor categorical_head(const ModelParams& params, const Tensor& hidden) {
  const CategoricalHeadParams& p = params.categorical_head;
  return ops::softmax(dense(ops::relu(dense(hidden, p.hidden)), p.logits));
}

Tensor continuous_head(const ModelParams& params, const Tensor& hidden, const Tensor& probs) {
  require_mode(params, ModelMode::kLabrador, "continuous_head");
  const ContinuousHeadParams& p = params.continuous_head;
  Tensor x = ops::concat_last(hidden, probs);
  return ops::sigmoid(dense(ops::relu(dense(x, p.hidden)), p.out));
}

Tensor encode(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode) {
  Tensor x = categorical_embed(params, batch.tokens, batch.batch, batch.length);
  if (params.config.mode == ModelMode::kLabrador) {
    x = continuous_embed(params, batch.values, x, batch.null_flags, batch.tokens);
  }
  return backbone_forward(params, x, batch.pad_mask, mode);
}

namespace {

ModelOutput heads(const ModelParams& params, const Tensor& rows) {
  ModelOutput out;
  out.probs = categorical_head(params, rows);
  if (params.config.mode == ModelMode::kLabrador) out.values = continuous_head(params, rows, out.probs);
  return out;
}

}  // namespace

ModelOutput forward_all(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode) {
  Tensor h = encode(params, batch, mode);
  std::vector<std::size_t> rows(batch.batch * batch.length);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return heads(params, ops::gather_rows(h, rows));
}

ModelOutput forward_masked(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode) {
  if (batch.targets.empty()) throw ContractError("forward_masked: batch has no masked positions");
  Tensor h = encode(params, batch, mode);
  std::vector<std::size_t> rows;
  rows.reserve(batch.targets.size());
  for (const MaskTarget& t : batch.targets) rows.push_back(batch.flat(t.row, t.position));
  return heads(params, ops::gather_rows(h, rows));
}

ModelOutput labrador_forward(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode) {
  require_mode(params, ModelMode::kLabrador, "labrador_forward");
  return forward_all(params, batch, mode);
}

Tensor bert_baseline_forward(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode) {
  require_mode(params, ModelMode::kBert, "bert_baseline_forward");
  return forward_all(params, batch, mode).probs;
}

std::size_t head_index(const ModelConfig& config, Token token) {
  if (token < 1 || static_cast<std::size_t>(token) > config.head_width()) {
    throw VocabError("token " + std::to_string(token) + " has no head output (width " +
                     std::to_string(config.head_width()) + ")");
  }
  return static_cast<std::size_t>(token - 1);
}

Token head_token(const ModelConfig& config, std::size_t index) {
  if (index >= config.head_width()) throw VocabError("head index out of range");
  return static_cast<Token>(index + 1);
}

}  // namespace labtx

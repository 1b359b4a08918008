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

#ifndef LABTX_MODEL_PARAMS_HPP_
#define LABTX_MODEL_PARAMS_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "labtx/model/config.hpp"
#include "labtx/numerics/attention.hpp"
#include "labtx/numerics/tensor.hpp"

namespace labtx {

// Position-wise dense layer, weight [in, out].
struct DenseParams {
  Tensor weight;
  Tensor bias;
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
};

struct BlockParams {
  AttentionWeights attention;
  LayerNormParams attention_norm;
  DenseParams ff_in;
  DenseParams ff_out;
  LayerNormParams ff_norm;
};

// Labrador only: value -> d_model, then a ReLU mix and LayerNorm.
struct ContinuousEmbeddingParams {
  DenseParams value_proj;
  DenseParams mix;
  LayerNormParams norm;
};

struct CategoricalHeadParams {
  DenseParams hidden;
  DenseParams logits;
};

// Labrador only: [h, probs] -> ReLU dense of the same width -> sigmoid scalar.
struct ContinuousHeadParams {
  DenseParams hidden;
  DenseParams out;
};

struct ModelParams {
  ModelConfig config;
  Tensor token_embedding;
  ContinuousEmbeddingParams continuous_embedding;
  std::vector<BlockParams> blocks;
  CategoricalHeadParams categorical_head;
  ContinuousHeadParams continuous_head;

  // Every trainable tensor with a stable dotted name, in a fixed order.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  std::vector<Tensor> trainables() const;
  void set_requires_grad(bool on) const;
  void zero_grad() const;
};

struct ParamShape {
  std::string name;
  Shape shape;
};

// Names and shapes follow from the config alone.
std::vector<ParamShape> param_shapes(const ModelConfig& config);

// Dense weights Xavier-uniform, embeddings N(0, 0.02^2), biases 0, LayerNorm
// gain 1. Pad row 0 of the token table is zero.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Deep copy, detached from any tape.
ModelParams clone_params(const ModelParams& params);

struct ParamCount {
  std::size_t total = 0;
  // Per top-level group: token_embedding, continuous_embedding, blocks,
  // categorical_head, continuous_head.
  std::vector<std::pair<std::string, std::size_t>> groups;
};

// Counts every trainable, embeddings and biases included, without allocating.
ParamCount count_params(const ModelConfig& config);

}  // namespace labtx

#endif  // LABTX_MODEL_PARAMS_HPP_

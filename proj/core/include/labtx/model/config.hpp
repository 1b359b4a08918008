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

#ifndef LABTX_MODEL_CONFIG_HPP_
#define LABTX_MODEL_CONFIG_HPP_

#include <cstddef>
#include <string>

#include "json.hpp"
#include "labtx/ecdf/vocab.hpp"

namespace labtx {

enum class ModelMode {
  kLabrador,  // code tokens plus a continuous value channel, two heads
  kBert,      // decile tokens, categorical head only
};

const char* model_mode_name(ModelMode mode);
ModelMode parse_model_mode(const std::string& name);

struct ModelConfig {
  ModelMode mode = ModelMode::kLabrador;
  std::size_t d_model = 64;
  std::size_t num_layers = 4;
  std::size_t num_heads = 2;
  std::size_t ff_dim = 128;
  // 0 selects the mode default: d_model for Labrador, d_model / num_heads
  // for the baseline.
  std::size_t key_dim = 0;
  double dropout = 0.1;
  // Labrador: number of lab codes. Baseline: Vocab::size() (mask included).
  std::size_t vocab_size = 0;

  std::size_t resolved_key_dim() const;
  // Rows of the token table, pad row 0 included.
  std::size_t embedding_rows() const;
  // Width of the categorical head.
  std::size_t head_width() const;
  Token mask_token() const;
  // Labrador only.
  Token null_token() const;

  // Raises ConfigError on zero extents, a dropout outside [0, 1) or a
  // Labrador key_dim other than d_model.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

ModelConfig config_for_vocab(const Vocab& vocab, ModelConfig shape);

// Reference instances at full scale.
ModelConfig full_scale_labrador(std::size_t num_codes = 529);
ModelConfig full_scale_bert(std::size_t vocab_size = 4251);

nlohmann::json model_config_to_json(const ModelConfig& config);
// Missing keys keep their defaults; unknown keys raise ConfigError.
ModelConfig model_config_from_json(const nlohmann::json& doc, ModelConfig base = {});

}  // namespace labtx

#endif  // LABTX_MODEL_CONFIG_HPP_

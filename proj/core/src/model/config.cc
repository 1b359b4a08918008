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

#include "labtx/model/config.hpp"

#include "labtx/error.hpp"

namespace labtx {

const char* model_mode_name(ModelMode mode) { return mode == ModelMode::kLabrador ? "labrador" : "bert"; }

ModelMode parse_model_mode(const std::string& name) {
  if (name == "labrador") return ModelMode::kLabrador;
  if (name == "bert") return ModelMode::kBert;
  throw ConfigError("unknown model mode '" + name + "' (expected labrador or bert)");
}

std::size_t ModelConfig::resolved_key_dim() const {
  if (key_dim != 0) return key_dim;
  if (mode == ModelMode::kLabrador) return d_model;
  return num_heads == 0 ? 0 : d_model / num_heads;
}

std::size_t ModelConfig::embedding_rows() const {
  return mode == ModelMode::kLabrador ? vocab_size + 3 : vocab_size + 1;
}

std::size_t ModelConfig::head_width() const { return vocab_size; }

Token ModelConfig::mask_token() const {
  return static_cast<Token>(mode == ModelMode::kLabrador ? vocab_size + 1 : vocab_size);
}

Token ModelConfig::null_token() const {
  if (mode != ModelMode::kLabrador) throw ConfigError("the baseline has no null token");
  return static_cast<Token>(vocab_size + 2);
}

void ModelConfig::validate() const {
  const auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model config: " + what);
  };
  need(d_model >= 1, "d_model must be >= 1");
  need(num_heads >= 1, "num_heads must be >= 1");
  need(ff_dim >= 1, "ff_dim must be >= 1");
  need(vocab_size >= 1, "vocab_size must be >= 1");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  need(resolved_key_dim() >= 1, "key_dim resolves to 0 (d_model < num_heads)");
  if (mode == ModelMode::kLabrador) {
    need(key_dim == 0 || key_dim == d_model, "Labrador key_dim must equal d_model, got " + std::to_string(key_dim));
  }
}

ModelConfig config_for_vocab(const Vocab& vocab, ModelConfig shape) {
  if (vocab.mode() == VocabMode::kContinuous) {
    shape.mode = ModelMode::kLabrador;
    shape.vocab_size = vocab.num_codes();
  } else {
    shape.mode = ModelMode::kBert;
    shape.vocab_size = static_cast<std::size_t>(vocab.size());
  }
  shape.validate();
  return shape;
}

ModelConfig full_scale_labrador(std::size_t num_codes) {
  ModelConfig c;
  c.mode = ModelMode::kLabrador;
  c.d_model = 1024;
  c.num_layers = 10;
  c.num_heads = 4;
  c.ff_dim = 1024;
  c.dropout = 0.1;
  c.vocab_size = num_codes;
  return c;
}

ModelConfig full_scale_bert(std::size_t vocab_size) {
  ModelConfig c = full_scale_labrador(vocab_size);
  c.mode = ModelMode::kBert;
  return c;
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"mode", model_mode_name(c.mode)},
          {"d_model", c.d_model},
          {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},
          {"ff_dim", c.ff_dim},
          {"key_dim", c.resolved_key_dim()},
          {"dropout", c.dropout},
          {"vocab_size", c.vocab_size}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc, ModelConfig c) {
  if (!doc.is_object()) throw ConfigError("model config must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "mode") {
        c.mode = parse_model_mode(value.get<std::string>());
      } else if (key == "d_model") {
        c.d_model = value.get<std::size_t>();
      } else if (key == "num_layers") {
        c.num_layers = value.get<std::size_t>();
      } else if (key == "num_heads") {
        c.num_heads = value.get<std::size_t>();
      } else if (key == "ff_dim") {
        c.ff_dim = value.get<std::size_t>();
      } else if (key == "key_dim") {
        c.key_dim = value.get<std::size_t>();
      } else if (key == "dropout") {
        c.dropout = value.get<double>();
      } else if (key == "vocab_size") {
        c.vocab_size = value.get<std::size_t>();
      } else {
        throw ConfigError("unknown model config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  // A stored key_dim equal to the mode default is not an override.
  ModelConfig defaulted = c;
  defaulted.key_dim = 0;
  if (c.key_dim == defaulted.resolved_key_dim()) c.key_dim = 0;
  return c;
}

}  // namespace labtx

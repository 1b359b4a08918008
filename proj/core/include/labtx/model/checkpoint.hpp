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

// A checkpoint is a directory holding
//   manifest.json  {format, config, dtype, meta, tensors:[{name, shape, offset, count}]}
//   tensors.bin    every tensor's data, little-endian, concatenated
// Offsets and counts are in elements of dtype ("f64" or "f32").

#ifndef LABTX_MODEL_CHECKPOINT_HPP_
#define LABTX_MODEL_CHECKPOINT_HPP_

#include <filesystem>

#include "json.hpp"
#include "labtx/model/params.hpp"

namespace labtx {

inline constexpr const char* kCheckpointFormat = "labtx-checkpoint-1";

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params,
                     const nlohmann::json& meta = nlohmann::json::object());

// Raises FormatError on a corrupt or inconsistent checkpoint.
ModelParams load_checkpoint(const std::filesystem::path& dir);

ModelConfig read_checkpoint_config(const std::filesystem::path& dir);
nlohmann::json read_checkpoint_meta(const std::filesystem::path& dir);

}  // namespace labtx

#endif  // LABTX_MODEL_CHECKPOINT_HPP_

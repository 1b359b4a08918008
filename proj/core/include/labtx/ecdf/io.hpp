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

#ifndef LABTX_ECDF_IO_HPP_
#define LABTX_ECDF_IO_HPP_

#include <filesystem>
#include <string>

#include "labtx/ecdf/ecdf.hpp"
#include "labtx/ecdf/vocab.hpp"

namespace labtx {

// ecdfs.json: array of {"code", "n", "values": [...], "probs": [...]}.
// Doubles are written with round-trip precision.
std::string ecdfs_to_json(const EcdfTable& table);
EcdfTable ecdfs_from_json(const std::string& text);
void save_ecdfs(const std::filesystem::path& path, const EcdfTable& table);
EcdfTable load_ecdfs(const std::filesystem::path& path);

// vocab.json: {"mode", "size", "mask_token", ["null_token",]
//              "codes": [{"code", "token", ["binary", "missing_token"]}]}
std::string vocab_to_json(const Vocab& vocab);
Vocab vocab_from_json(const std::string& text);
void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);

// Whole-file helpers shared by the JSON writers. Raise IoError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace labtx

#endif  // LABTX_ECDF_IO_HPP_

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

#include "labtx/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"

namespace labtx {
namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kBlob = "tensors.bin";

const char* native_dtype() { return sizeof(Real) == 8 ? "f64" : "f32"; }

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f64") return 8;
  if (dtype == "f32") return 4;
  throw FormatError("checkpoint dtype '" + dtype + "' is not f32 or f64");
}

void append_le(std::vector<std::uint8_t>& out, Real v) {
  if constexpr (sizeof(Real) == 8) {
    const auto bits = std::bit_cast<std::uint64_t>(static_cast<double>(v));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  } else {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

Real read_le(const std::uint8_t* p, std::size_t width) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < width; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  if (width == 8) return static_cast<Real>(std::bit_cast<double>(bits));
  return static_cast<Real>(std::bit_cast<float>(static_cast<std::uint32_t>(bits)));
}

nlohmann::json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifest;
  if (!std::filesystem::exists(path)) throw IoError("no checkpoint manifest at '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint manifest '" + path.string() + "': " + e.what());
  }
  if (doc.value("format", std::string()) != kCheckpointFormat) {
    throw FormatError("checkpoint manifest '" + path.string() + "' has unknown format");
  }
  return doc;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params, const nlohmann::json& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory '" + dir.string() + "': " + ec.message());

  nlohmann::json index = nlohmann::json::array();
  std::vector<std::uint8_t> blob;
  std::size_t offset = 0;
  for (const auto& [name, t] : params.named_tensors()) {
    index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.numel()}});
    for (Real v : t.data()) append_le(blob, v);
    offset += t.numel();
  }
  std::ofstream out(dir / kBlob, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + (dir / kBlob).string() + "'");
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  out.close();
  if (!out) throw IoError("write to '" + (dir / kBlob).string() + "' failed");

  nlohmann::json doc = {{"format", kCheckpointFormat},
                        {"config", model_config_to_json(params.config)},
                        {"dtype", native_dtype()},
                        {"meta", meta},
                        {"tensors", index}};
  write_text_file(dir / kManifest, doc.dump(1) + "\n");
}

ModelConfig read_checkpoint_config(const std::filesystem::path& dir) {
  return model_config_from_json(read_manifest(dir).at("config"));
}

nlohmann::json read_checkpoint_meta(const std::filesystem::path& dir) {
  return read_manifest(dir).value("meta", nlohmann::json::object());
}

ModelParams load_checkpoint(const std::filesystem::path& dir) {
  const nlohmann::json doc = read_manifest(dir);
  const ModelConfig config = model_config_from_json(doc.at("config"));
  const std::size_t width = dtype_size(doc.at("dtype").get<std::string>());

  std::ifstream in(dir / kBlob, std::ios::binary);
  if (!in) throw IoError("cannot open '" + (dir / kBlob).string() + "'");
  const std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  // Start from a zero-seeded layout, then overwrite every tensor.
  ModelParams params = init_params(config, 0);
  const auto expected = params.named_tensors();
  const auto& tensors = doc.at("tensors");
  if (tensors.size() != expected.size()) {
    throw FormatError("checkpoint lists " + std::to_string(tensors.size()) + " tensors, config implies " +
                      std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& entry = tensors[i];
    auto [name, t] = expected[i];
    if (entry.at("name").get<std::string>() != name) {
      throw FormatError("checkpoint tensor " + std::to_string(i) + " is '" + entry.at("name").get<std::string>() +
                        "', expected '" + name + "'");
    }
    if (entry.at("shape").get<Shape>() != t.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " +
                        shape_string(entry.at("shape").get<Shape>()) + ", config implies " + shape_string(t.shape()));
    }
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (count != t.numel() || (offset + count) * width > blob.size()) {
      throw FormatError("checkpoint tensor '" + name + "' runs past the end of " + kBlob);
    }
    auto data = t.mutable_data();
    for (std::size_t j = 0; j < count; ++j) data[j] = read_le(blob.data() + (offset + j) * width, width);
  }
  return params;
}

}  // namespace labtx

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

// Framed binary shard files for bag corpora.
//
// File layout (all integers little-endian):
//
//   "LBSH" 0x01
//   record*   where record = u32 payload_length, payload
//
//   payload = u32 L, u32 n_mask,
//             L      x (u32 token, f64 value, u8 flags)   flags: bit0 null, bit1 masked
//             n_mask x (u32 position, u32 truth_token, f64 truth_value, u8 truth_null)
//
// A directory of shards carries a manifest.json with the split tag and the
// record count of every file.

#ifndef LABTX_CORPUS_SHARD_HPP_
#define LABTX_CORPUS_SHARD_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labtx/corpus/bag.hpp"

namespace labtx {

inline constexpr char kShardMagic[4] = {'L', 'B', 'S', 'H'};
inline constexpr std::uint8_t kShardVersion = 0x01;
inline constexpr const char* kShardExtension = ".lbs";

struct ShardFile {
  std::filesystem::path path;
  std::size_t record_count = 0;
  std::string split;
};

std::vector<std::uint8_t> encode_bag(const LabBag& bag);
// Raises FormatError on a malformed payload.
LabBag decode_bag(std::span<const std::uint8_t> payload);

// Writes bags to dir/shard-NNNNN.lbs, at most shard_size records per file,
// plus dir/manifest.json. Creates dir if needed.
std::vector<ShardFile> write_shards(std::span<const LabBag> bags, const std::filesystem::path& dir,
                                    std::size_t shard_size, const std::string& split = "");

// Sequential reader over one shard file. Errors name the record index and
// byte offset.
class ShardReader {
 public:
  explicit ShardReader(const std::filesystem::path& path);

  // Next record, or nullopt at a clean end of file.
  std::optional<LabBag> next();
  std::size_t records_read() const { return records_; }

 private:
  std::filesystem::path path_;
  std::vector<std::uint8_t> bytes_;
  std::size_t offset_ = 0;
  std::size_t records_ = 0;
};

// Reads every shard in dir in file-name order. A missing or empty directory
// yields no bags. When a manifest is present, record counts are checked.
std::vector<LabBag> read_shards(const std::filesystem::path& dir);

}  // namespace labtx

#endif  // LABTX_CORPUS_SHARD_HPP_

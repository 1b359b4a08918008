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

#include "labtx/corpus/shard.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"
#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"

namespace labtx {
namespace {

constexpr std::size_t kHeaderSize = sizeof(kShardMagic) + 1;
constexpr std::size_t kElementSize = 4 + 8 + 1;
constexpr std::size_t kTruthSize = 4 + 4 + 8 + 1;
constexpr std::uint8_t kFlagNull = 0x01;
constexpr std::uint8_t kFlagMasked = 0x02;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_bag(const LabBag& bag) {
  validate_bag(bag);
  std::vector<std::uint8_t> out;
  out.reserve(8 + bag.size() * kElementSize + bag.masked.size() * kTruthSize);
  put_u32(out, static_cast<std::uint32_t>(bag.size()));
  put_u32(out, static_cast<std::uint32_t>(bag.masked.size()));
  for (std::size_t i = 0; i < bag.size(); ++i) {
    put_u32(out, static_cast<std::uint32_t>(bag.tokens[i]));
    put_f64(out, bag.values[i]);
    std::uint8_t flags = bag.null_flags[i] ? kFlagNull : 0;
    if (bag.is_masked(i)) flags |= kFlagMasked;
    out.push_back(flags);
  }
  for (const MaskedTruth& t : bag.masked) {
    put_u32(out, t.position);
    put_u32(out, static_cast<std::uint32_t>(t.token));
    put_f64(out, t.value);
    out.push_back(t.is_null ? 1 : 0);
  }
  return out;
}

LabBag decode_bag(std::span<const std::uint8_t> payload) {
  if (payload.size() < 8) throw FormatError("bag payload shorter than its 8-byte header");
  const std::uint32_t len = get_u32(payload.data());
  const std::uint32_t n_mask = get_u32(payload.data() + 4);
  const std::size_t expected = 8 + static_cast<std::size_t>(len) * kElementSize + static_cast<std::size_t>(n_mask) * kTruthSize;
  if (payload.size() != expected) {
    throw FormatError("bag payload is " + std::to_string(payload.size()) + " bytes, header implies " +
                      std::to_string(expected));
  }
  LabBag bag;
  bag.tokens.resize(len);
  bag.values.resize(len);
  bag.null_flags.resize(len);
  std::vector<std::uint8_t> masked_bits(len);
  const std::uint8_t* p = payload.data() + 8;
  for (std::uint32_t i = 0; i < len; ++i, p += kElementSize) {
    bag.tokens[i] = static_cast<Token>(get_u32(p));
    bag.values[i] = get_f64(p + 4);
    const std::uint8_t flags = p[12];
    if (flags & ~(kFlagNull | kFlagMasked)) throw FormatError("unknown flag bits in element " + std::to_string(i));
    bag.null_flags[i] = (flags & kFlagNull) ? 1 : 0;
    masked_bits[i] = (flags & kFlagMasked) ? 1 : 0;
  }
  for (std::uint32_t i = 0; i < n_mask; ++i, p += kTruthSize) {
    MaskedTruth t;
    t.position = get_u32(p);
    t.token = static_cast<Token>(get_u32(p + 4));
    t.value = get_f64(p + 8);
    if (p[16] > 1) throw FormatError("truth null byte must be 0 or 1");
    t.is_null = p[16] == 1;
    if (t.position >= len || !masked_bits[t.position]) {
      throw FormatError("masked truth position " + std::to_string(t.position) + " has no masked element");
    }
    masked_bits[t.position] = 0;
    bag.masked.push_back(t);
  }
  if (std::any_of(masked_bits.begin(), masked_bits.end(), [](std::uint8_t b) { return b != 0; })) {
    throw FormatError("masked element without a truth entry");
  }
  try {
    validate_bag(bag);
  } catch (const DataError& e) {
    throw FormatError(std::string("invalid bag payload: ") + e.what());
  }
  return bag;
}

std::vector<ShardFile> write_shards(std::span<const LabBag> bags, const std::filesystem::path& dir,
                                    std::size_t shard_size, const std::string& split) {
  if (shard_size == 0) throw ConfigError("shard size must be positive");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create shard directory '" + dir.string() + "': " + ec.message());

  std::vector<ShardFile> files;
  nlohmann::json manifest = {{"split", split}, {"format_version", kShardVersion}, {"shards", nlohmann::json::array()}};
  for (std::size_t start = 0, index = 0; start < bags.size(); start += shard_size, ++index) {
    char name[32];
    std::snprintf(name, sizeof(name), "shard-%05zu%s", index, kShardExtension);
    const std::filesystem::path path = dir / name;
    std::vector<std::uint8_t> bytes(std::begin(kShardMagic), std::end(kShardMagic));
    bytes.push_back(kShardVersion);
    const std::size_t end = std::min(bags.size(), start + shard_size);
    for (std::size_t i = start; i < end; ++i) {
      const std::vector<std::uint8_t> payload = encode_bag(bags[i]);
      put_u32(bytes, static_cast<std::uint32_t>(payload.size()));
      bytes.insert(bytes.end(), payload.begin(), payload.end());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open shard '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to shard '" + path.string() + "' failed");
    files.push_back({path, end - start, split});
    manifest["shards"].push_back({{"file", std::string(name)}, {"records", end - start}});
  }
  write_text_file(dir / "manifest.json", manifest.dump(1) + "\n");
  return files;
}

ShardReader::ShardReader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open shard '" + path.string() + "'");
  bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (bytes_.size() < kHeaderSize || !std::equal(std::begin(kShardMagic), std::end(kShardMagic), bytes_.begin(),
                                                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw FormatError("shard '" + path.string() + "': bad magic at byte offset 0");
  }
  if (bytes_[4] != kShardVersion) {
    throw FormatError("shard '" + path.string() + "': unsupported version " + std::to_string(bytes_[4]) +
                      " at byte offset 4");
  }
  offset_ = kHeaderSize;
}

std::optional<LabBag> ShardReader::next() {
  if (offset_ == bytes_.size()) return std::nullopt;
  const std::string where = "shard '" + path_.string() + "' record " + std::to_string(records_) +
                            " at byte offset " + std::to_string(offset_);
  if (bytes_.size() - offset_ < 4) throw FormatError(where + ": truncated length prefix");
  const std::uint32_t len = get_u32(bytes_.data() + offset_);
  if (bytes_.size() - offset_ - 4 < len) {
    throw FormatError(where + ": truncated payload (" + std::to_string(len) + " bytes declared, " +
                      std::to_string(bytes_.size() - offset_ - 4) + " present)");
  }
  LabBag bag;
  try {
    bag = decode_bag(std::span<const std::uint8_t>(bytes_.data() + offset_ + 4, len));
  } catch (const FormatError& e) {
    throw FormatError(where + ": " + e.what());
  }
  offset_ += 4 + len;
  ++records_;
  return bag;
}

std::vector<LabBag> read_shards(const std::filesystem::path& dir) {
  std::vector<LabBag> bags;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return bags;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == kShardExtension) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, std::size_t> declared;
  const auto manifest_path = dir / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    try {
      const auto manifest = nlohmann::json::parse(read_text_file(manifest_path));
      for (const auto& s : manifest.at("shards")) declared[s.at("file").get<std::string>()] = s.at("records").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("shard manifest '" + manifest_path.string() + "': " + e.what());
    }
  }
  for (const auto& path : files) {
    ShardReader reader(path);
    while (auto bag = reader.next()) bags.push_back(std::move(*bag));
    const auto it = declared.find(path.filename().string());
    if (!declared.empty()) {
      if (it == declared.end()) throw FormatError("shard '" + path.string() + "' is not listed in the manifest");
      if (it->second != reader.records_read()) {
        throw FormatError("shard '" + path.string() + "' holds " + std::to_string(reader.records_read()) +
                          " records, manifest declares " + std::to_string(it->second));
      }
    }
  }
  if (!declared.empty() && declared.size() != files.size()) {
    throw FormatError("shard manifest in '" + dir.string() + "' lists files that are missing");
  }
  return bags;
}

}  // namespace labtx

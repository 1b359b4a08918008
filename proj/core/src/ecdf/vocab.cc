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

#include "labtx/ecdf/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "labtx/error.hpp"

namespace labtx {
namespace {

constexpr std::size_t kNoOwner = std::numeric_limits<std::size_t>::max();
constexpr Token kDecileBlock = kNumDeciles + 1;

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<std::string> rank_codes(const CodeCounts& counts) {
  std::vector<std::string> codes;
  codes.reserve(counts.size());
  for (const auto& [code, n] : counts) codes.push_back(code);
  std::sort(codes.begin(), codes.end(), [&](const std::string& a, const std::string& b) {
    const std::size_t ca = counts.at(a), cb = counts.at(b);
    if (ca != cb) return ca > cb;
    return code_id_less(a, b);
  });
  return codes;
}

}  // namespace

const char* vocab_mode_name(VocabMode mode) {
  return mode == VocabMode::kContinuous ? "continuous" : "decile";
}

bool code_id_less(const std::string& a, const std::string& b) {
  if (all_digits(a) && all_digits(b)) {
    const auto strip = [](const std::string& s) {
      const std::size_t nz = s.find_first_not_of('0');
      return nz == std::string::npos ? std::string("0") : s.substr(nz);
    };
    const std::string sa = strip(a), sb = strip(b);
    if (sa.size() != sb.size()) return sa.size() < sb.size();
    if (sa != sb) return sa < sb;
  }
  return a < b;
}

Vocab Vocab::from_entries(VocabMode mode, std::vector<Entry> entries) {
  if (entries.empty()) throw ConfigError("vocabulary has no codes");
  Vocab v;
  v.mode_ = mode;
  Token next = 1;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Entry& e = entries[i];
    if (e.code.empty()) throw ConfigError("vocabulary entry with empty code id");
    if (e.first_token != next) {
      throw ConfigError("vocabulary entry '" + e.code + "' has token " + std::to_string(e.first_token) +
                        ", expected " + std::to_string(next));
    }
    if (!v.by_code_.emplace(e.code, i).second) throw ConfigError("duplicate code '" + e.code + "' in vocabulary");
    if (mode == VocabMode::kContinuous && e.binary) {
      throw ConfigError("continuous vocabulary entry '" + e.code + "' marked binary");
    }
    const Token width = (mode == VocabMode::kContinuous || e.binary) ? 1 : kDecileBlock;
    next += width;
  }
  v.entries_ = std::move(entries);
  v.mask_token_ = next;
  v.owner_.assign(static_cast<std::size_t>(next) + (mode == VocabMode::kContinuous ? 2 : 1), kNoOwner);
  for (std::size_t i = 0; i < v.entries_.size(); ++i) {
    const Entry& e = v.entries_[i];
    const Token width = (mode == VocabMode::kContinuous || e.binary) ? 1 : kDecileBlock;
    for (Token t = e.first_token; t < e.first_token + width; ++t) v.owner_[static_cast<std::size_t>(t)] = i;
  }
  return v;
}

Token Vocab::null_token() const {
  if (mode_ != VocabMode::kContinuous) throw ContractError("decile vocabularies have no global null token");
  return mask_token_ + 1;
}

const Vocab::Entry& Vocab::entry(const std::string& code) const {
  auto it = by_code_.find(code);
  if (it == by_code_.end()) throw VocabError("unknown lab code '" + code + "'");
  return entries_[it->second];
}

Token Vocab::code_token(const std::string& code) const {
  if (mode_ != VocabMode::kContinuous) throw ContractError("code_token() on a decile vocabulary");
  return entry(code).first_token;
}

const std::string& Vocab::code_of(Token token) const {
  if (token <= 0 || static_cast<std::size_t>(token) >= owner_.size() || owner_[static_cast<std::size_t>(token)] == kNoOwner) {
    throw VocabError("token " + std::to_string(token) + " does not belong to a lab code");
  }
  return entries_[owner_[static_cast<std::size_t>(token)]].code;
}

Token Vocab::decile_token(const std::string& code, int decile) const {
  if (mode_ != VocabMode::kDecile) throw ContractError("decile_token() on a continuous vocabulary");
  const Entry& e = entry(code);
  if (e.binary) throw VocabError("binary code '" + code + "' has no decile tokens");
  if (decile < 0 || decile >= kNumDeciles) throw ContractError("decile index " + std::to_string(decile) + " outside 0..9");
  return e.first_token + decile;
}

Token Vocab::missing_token(const std::string& code) const {
  if (mode_ != VocabMode::kDecile) throw ContractError("missing_token() on a continuous vocabulary");
  const Entry& e = entry(code);
  return e.binary ? e.first_token : e.first_token + kNumDeciles;
}

std::optional<int> Vocab::decile_of(Token token) const {
  if (mode_ != VocabMode::kDecile) return std::nullopt;
  if (token <= 0 || static_cast<std::size_t>(token) >= owner_.size()) return std::nullopt;
  const std::size_t owner = owner_[static_cast<std::size_t>(token)];
  if (owner == kNoOwner) return std::nullopt;
  const Entry& e = entries_[owner];
  if (e.binary) return std::nullopt;
  const int offset = token - e.first_token;
  if (offset >= kNumDeciles) return std::nullopt;
  return offset;
}

Vocab build_continuous_vocab(const CodeCounts& counts) {
  if (counts.empty()) throw ConfigError("cannot build a vocabulary from an empty code-frequency table");
  std::vector<Vocab::Entry> entries;
  Token next = 1;
  for (const std::string& code : rank_codes(counts)) entries.push_back({code, next++, false});
  return Vocab::from_entries(VocabMode::kContinuous, std::move(entries));
}

Vocab build_decile_vocab(const EcdfTable& ecdfs, const CodeCounts& counts,
                         const std::set<std::string>& binary_codes) {
  if (counts.empty()) throw ConfigError("cannot build a vocabulary from an empty code-frequency table");
  std::vector<Vocab::Entry> entries;
  Token next = 1;
  for (const std::string& code : rank_codes(counts)) {
    const bool binary = binary_codes.count(code) != 0;
    if (!binary && ecdfs.count(code) == 0) {
      throw ConfigError("numeric code '" + code + "' has no eCDF");
    }
    entries.push_back({code, next, binary});
    next += binary ? 1 : kDecileBlock;
  }
  return Vocab::from_entries(VocabMode::kDecile, std::move(entries));
}

Token value_to_decile_token(const Vocab& vocab, const std::string& code, std::optional<double> p) {
  const Vocab::Entry& e = vocab.entry(code);
  if (vocab.mode() != VocabMode::kDecile) throw ContractError("value_to_decile_token() on a continuous vocabulary");
  if (e.binary) return e.first_token;
  if (!p) return vocab.missing_token(code);
  if (!(*p >= 0.0 && *p <= 1.0)) {
    throw DataError("eCDF probability " + std::to_string(*p) + " for code '" + code + "' outside [0, 1]");
  }
  const int decile = std::min(static_cast<int>(std::floor(*p * kNumDeciles)), kNumDeciles - 1);
  return e.first_token + decile;
}

}  // namespace labtx

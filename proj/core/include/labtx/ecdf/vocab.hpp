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

#ifndef LABTX_ECDF_VOCAB_HPP_
#define LABTX_ECDF_VOCAB_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "labtx/ecdf/ecdf.hpp"

namespace labtx {

using Token = std::int32_t;
using CodeCounts = std::map<std::string, std::size_t>;

// Token 0 is reserved for padding in both vocabulary modes.
inline constexpr Token kPadToken = 0;
inline constexpr int kNumDeciles = 10;

enum class VocabMode {
  kContinuous,  // one token per lab code, values travel separately
  kDecile,      // one token per (code, decile) plus a missing-value token
};

const char* vocab_mode_name(VocabMode mode);

// Ordering used to break frequency ties: all-digit ids compare numerically,
// anything else lexicographically.
bool code_id_less(const std::string& a, const std::string& b);

// Bidirectional lab-code <-> token mapping.
//
// Continuous mode: codes get tokens 1..C by descending training frequency,
// then mask = C+1 and null = C+2.
//
// Decile mode: walking codes by descending frequency, a numeric code owns a
// block of 11 tokens (deciles 0..9, then missing) and a binary code owns a
// single token. One global mask token follows the last block.
class Vocab {
 public:
  struct Entry {
    std::string code;
    Token first_token = 0;  // the code's token (continuous) or block start (decile)
    bool binary = false;    // decile mode only
  };

  // Rebuilds a vocabulary from explicit entries, validating the layout.
  static Vocab from_entries(VocabMode mode, std::vector<Entry> entries);

  VocabMode mode() const { return mode_; }
  std::size_t num_codes() const { return entries_.size(); }
  // Highest token id in use, which is also the count of non-pad tokens.
  Token size() const { return mask_token_ + (mode_ == VocabMode::kContinuous ? 1 : 0); }
  Token mask_token() const { return mask_token_; }
  // Continuous mode only.
  Token null_token() const;

  bool contains(const std::string& code) const { return by_code_.count(code) != 0; }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(const std::string& code) const;

  // Continuous mode: the code's token.
  Token code_token(const std::string& code) const;
  // Lab code owning a regular (non-special) token.
  const std::string& code_of(Token token) const;

  // Decile mode queries.
  bool is_binary(const std::string& code) const { return entry(code).binary; }
  Token decile_token(const std::string& code, int decile) const;
  Token missing_token(const std::string& code) const;
  // Decile index 0..9 of a token, nullopt for missing/binary/special tokens.
  std::optional<int> decile_of(Token token) const;

 private:
  Vocab() = default;

  VocabMode mode_ = VocabMode::kContinuous;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> by_code_;
  std::vector<std::size_t> owner_;  // token -> index into entries_, npos for specials
  Token mask_token_ = 0;
};

// Codes ranked by descending count, ties by code_id_less. Empty table raises
// ConfigError.
Vocab build_continuous_vocab(const CodeCounts& counts);

// Every code not in binary_codes must have an eCDF (ConfigError otherwise).
Vocab build_decile_vocab(const EcdfTable& ecdfs, const CodeCounts& counts,
                         const std::set<std::string>& binary_codes);

// Decile token for an eCDF probability: decile = min(floor(10 p), 9). A
// missing value maps to the code's missing token; binary codes map to their
// single token. Unknown codes raise VocabError.
Token value_to_decile_token(const Vocab& vocab, const std::string& code, std::optional<double> p);

}  // namespace labtx

#endif  // LABTX_ECDF_VOCAB_HPP_

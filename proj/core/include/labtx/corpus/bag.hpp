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

#ifndef LABTX_CORPUS_BAG_HPP_
#define LABTX_CORPUS_BAG_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "labtx/corpus/events.hpp"
#include "labtx/ecdf/ecdf.hpp"
#include "labtx/ecdf/vocab.hpp"
#include "labtx/numerics/ops.hpp"
#include "labtx/numerics/tensor.hpp"

namespace labtx {

inline constexpr std::size_t kMinBagSize = 3;

// What sat at a masked position before masking.
struct MaskedTruth {
  std::uint32_t position = 0;
  Token token = 0;
  double value = 0.0;
  bool is_null = false;

  bool operator==(const MaskedTruth&) const = default;
};

// All labs ordered for one patient at one time.
//
// tokens/values/null_flags are parallel. values hold eCDF probabilities in
// [0, 1] (0 at null positions). At a masked position the token is the mask
// token, the value is 0 and the null flag is cleared; the original content is
// kept in `masked`, which lists positions in ascending order.
//
// patient_id and chart_time are provenance only: shards store the payload
// (tokens, values, flags, masked truths) and leave them empty on read.
struct LabBag {
  std::string patient_id;
  std::int64_t chart_time = 0;
  std::vector<Token> tokens;
  std::vector<double> values;
  std::vector<std::uint8_t> null_flags;
  std::vector<MaskedTruth> masked;

  std::size_t size() const { return tokens.size(); }
  bool is_masked(std::size_t position) const;
};

// Equality over the serialized payload, ignoring provenance.
bool payload_equal(const LabBag& a, const LabBag& b);

// Raises DataError when parallel lists differ in length, a non-null value
// leaves [0, 1] or masked positions are out of range or repeated.
void validate_bag(const LabBag& bag);

struct BagBuildStats {
  std::size_t events_in = 0;
  std::size_t events_out_of_vocab = 0;
  std::size_t bags_formed = 0;
  std::size_t bags_too_small = 0;
  std::size_t bags_kept = 0;
};

// Groups events by exact (patient_id, chart_time), tokenizes with the vocab
// and eCDF-transforms values. Codes outside the vocabulary are dropped and
// counted. Bags with fewer than kMinBagSize labs are dropped. Output bags are
// ordered by (patient_id, chart_time); labs keep their input order.
//
// Continuous vocab: token = code token, missing value -> null flag.
// Decile vocab: token = decile token (missing -> the code's missing token,
// binary codes -> their single token); the eCDF value is kept alongside.
std::vector<LabBag> build_bags(std::span<const LabEvent> events, const Vocab& vocab, const EcdfTable& ecdfs,
                               BagBuildStats* stats = nullptr);

// Masks the given distinct positions.
LabBag mask_positions(const LabBag& bag, std::span<const std::size_t> positions, Token mask_token);

// Masks n_mask distinct positions drawn uniformly. n_mask must lie in
// [1, L] (ContractError otherwise).
LabBag mask_bag(const LabBag& bag, Rng& rng, std::size_t n_mask, Token mask_token);

// Restores masked positions from their recorded truth.
LabBag unmask(const LabBag& bag);

struct MaskTarget {
  std::size_t row = 0;
  std::size_t position = 0;
  Token token = 0;
  double value = 0.0;
  bool is_null = false;
};

// Bags padded to the longest bag of the batch. Padding uses token 0, value
// 0 and pad_mask = 1. Arrays are row-major [batch, length].
struct PaddedBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::vector<Token> tokens;
  std::vector<Real> values;
  std::vector<std::uint8_t> null_flags;
  std::vector<std::uint8_t> pad_mask;
  std::vector<MaskTarget> targets;

  std::size_t flat(std::size_t row, std::size_t position) const { return row * length + position; }
};

PaddedBatch pad_batch(std::span<const LabBag> bags);

}  // namespace labtx

#endif  // LABTX_CORPUS_BAG_HPP_

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

#include "labtx/corpus/bag.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "labtx/error.hpp"
#include "labtx/numerics/init.hpp"

namespace labtx {

bool LabBag::is_masked(std::size_t position) const {
  return std::any_of(masked.begin(), masked.end(), [&](const MaskedTruth& t) { return t.position == position; });
}

bool payload_equal(const LabBag& a, const LabBag& b) {
  return a.tokens == b.tokens && a.values == b.values && a.null_flags == b.null_flags && a.masked == b.masked;
}

void validate_bag(const LabBag& bag) {
  const std::size_t n = bag.tokens.size();
  if (bag.values.size() != n || bag.null_flags.size() != n) throw DataError("bag has ragged parallel lists");
  for (std::size_t i = 0; i < n; ++i) {
    if (!bag.null_flags[i] && !(bag.values[i] >= 0.0 && bag.values[i] <= 1.0)) {
      throw DataError("bag value " + std::to_string(bag.values[i]) + " at position " + std::to_string(i) +
                      " outside [0, 1]");
    }
  }
  for (std::size_t i = 0; i < bag.masked.size(); ++i) {
    if (bag.masked[i].position >= n) throw DataError("masked position outside bag");
    if (i > 0 && bag.masked[i].position <= bag.masked[i - 1].position) {
      throw DataError("masked positions must be distinct and ascending");
    }
  }
}

std::vector<LabBag> build_bags(std::span<const LabEvent> events, const Vocab& vocab, const EcdfTable& ecdfs,
                               BagBuildStats* stats) {
  BagBuildStats local;
  local.events_in = events.size();
  std::map<std::pair<std::string, std::int64_t>, LabBag> groups;
  for (const LabEvent& ev : events) {
    if (!vocab.contains(ev.code)) {
      ++local.events_out_of_vocab;
      continue;
    }
    LabBag& bag = groups[{ev.patient_id, ev.chart_time}];
    bag.patient_id = ev.patient_id;
    bag.chart_time = ev.chart_time;
    const auto ecdf = ecdfs.find(ev.code);
    std::optional<double> prob;
    if (ev.value && ecdf != ecdfs.end()) prob = ecdf->second.apply(*ev.value);
    if (vocab.mode() == VocabMode::kContinuous) {
      bag.tokens.push_back(vocab.code_token(ev.code));
    } else {
      bag.tokens.push_back(value_to_decile_token(vocab, ev.code, prob));
      if (vocab.is_binary(ev.code)) prob.reset();
    }
    bag.values.push_back(prob.value_or(0.0));
    bag.null_flags.push_back(prob ? 0 : 1);
  }
  std::vector<LabBag> bags;
  local.bags_formed = groups.size();
  for (auto& [key, bag] : groups) {
    if (bag.size() < kMinBagSize) {
      ++local.bags_too_small;
      continue;
    }
    bags.push_back(std::move(bag));
  }
  local.bags_kept = bags.size();
  if (stats) *stats = local;
  return bags;
}

LabBag mask_positions(const LabBag& bag, std::span<const std::size_t> positions, Token mask_token) {
  if (!bag.masked.empty()) throw ContractError("bag is already masked");
  std::vector<std::size_t> sorted(positions.begin(), positions.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ContractError("mask positions must be distinct");
  }
  LabBag out = bag;
  for (std::size_t pos : sorted) {
    if (pos >= bag.size()) throw ContractError("mask position " + std::to_string(pos) + " outside bag");
    out.masked.push_back({static_cast<std::uint32_t>(pos), bag.tokens[pos], bag.values[pos], bag.null_flags[pos] != 0});
    out.tokens[pos] = mask_token;
    out.values[pos] = 0.0;
    out.null_flags[pos] = 0;
  }
  return out;
}

LabBag mask_bag(const LabBag& bag, Rng& rng, std::size_t n_mask, Token mask_token) {
  if (n_mask < 1 || n_mask > bag.size()) {
    throw ContractError("cannot mask " + std::to_string(n_mask) + " positions of a bag of " +
                        std::to_string(bag.size()));
  }
  std::vector<std::size_t> order(bag.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Partial Fisher-Yates: the first n_mask slots become a uniform sample.
  for (std::size_t i = 0; i < n_mask; ++i) {
    const std::size_t j = i + init::uniform_index(rng, order.size() - i);
    std::swap(order[i], order[j]);
  }
  order.resize(n_mask);
  return mask_positions(bag, order, mask_token);
}

LabBag unmask(const LabBag& bag) {
  LabBag out = bag;
  for (const MaskedTruth& t : bag.masked) {
    out.tokens[t.position] = t.token;
    out.values[t.position] = t.value;
    out.null_flags[t.position] = t.is_null ? 1 : 0;
  }
  out.masked.clear();
  return out;
}

PaddedBatch pad_batch(std::span<const LabBag> bags) {
  if (bags.empty()) throw ContractError("pad_batch needs at least one bag");
  PaddedBatch batch;
  batch.batch = bags.size();
  for (const LabBag& bag : bags) batch.length = std::max(batch.length, bag.size());
  if (batch.length == 0) throw ContractError("pad_batch: all bags are empty");
  const std::size_t total = batch.batch * batch.length;
  batch.tokens.assign(total, kPadToken);
  batch.values.assign(total, Real{0});
  batch.null_flags.assign(total, 0);
  batch.pad_mask.assign(total, 1);
  for (std::size_t r = 0; r < bags.size(); ++r) {
    const LabBag& bag = bags[r];
    for (std::size_t p = 0; p < bag.size(); ++p) {
      const std::size_t idx = batch.flat(r, p);
      batch.tokens[idx] = bag.tokens[p];
      batch.values[idx] = static_cast<Real>(bag.values[p]);
      batch.null_flags[idx] = bag.null_flags[p];
      batch.pad_mask[idx] = 0;
    }
    for (const MaskedTruth& t : bag.masked) {
      batch.targets.push_back({r, t.position, t.token, t.value, t.is_null});
    }
  }
  return batch;
}

}  // namespace labtx

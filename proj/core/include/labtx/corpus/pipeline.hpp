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

// End-to-end preprocessing of an event stream: rare-code filter, patient
// split, eCDFs and vocabulary fitted on the training split, bag
// construction and offline masking of every split.
//
// A preprocessed directory holds ecdfs.json, vocab.json, summary.json and
// one shard directory per split (train/, val/, test/).

#ifndef LABTX_CORPUS_PIPELINE_HPP_
#define LABTX_CORPUS_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "labtx/corpus/bag.hpp"
#include "labtx/corpus/events.hpp"
#include "labtx/ecdf/ecdf.hpp"
#include "labtx/ecdf/vocab.hpp"

namespace labtx {

struct PreprocessOptions {
  std::size_t min_count = 0;
  std::array<double, 3> splits{0.8, 0.1, 0.1};
  VocabMode mode = VocabMode::kContinuous;
  std::uint64_t seed = 0;
  std::size_t mask_count = 1;
  std::size_t shard_size = 4096;

  // Raises ConfigError for fractions that are negative or do not sum to 1,
  // or a zero mask count or shard size.
  void validate() const;
};

nlohmann::json preprocess_options_to_json(const PreprocessOptions& options);

struct PreprocessSummary {
  std::size_t events_in = 0;
  std::size_t codes_in = 0;
  std::size_t codes_kept = 0;
  std::size_t codes_dropped = 0;
  std::size_t bags_kept = 0;
  std::size_t bags_dropped = 0;
  std::size_t vocab_size = 0;
  std::array<std::size_t, 3> split_bags{};
};

nlohmann::json preprocess_summary_to_json(const PreprocessSummary& summary);

struct PreprocessedCorpus {
  EcdfTable ecdfs;
  Vocab vocab;
  std::vector<LabBag> train;
  std::vector<LabBag> val;
  std::vector<LabBag> test;
  PreprocessSummary summary;

  std::span<const LabBag> split(Split which) const;
};

// Codes with no valued training event are binary in decile mode. Every bag
// gets min(mask_count, size) masks drawn from the seed.
PreprocessedCorpus preprocess_events(std::span<const LabEvent> events, const PreprocessOptions& options);

void write_preprocessed(const std::filesystem::path& dir, const PreprocessedCorpus& corpus,
                        const PreprocessOptions& options);
PreprocessedCorpus read_preprocessed(const std::filesystem::path& dir);

}  // namespace labtx

#endif  // LABTX_CORPUS_PIPELINE_HPP_

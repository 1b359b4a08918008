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

#include "labtx/corpus/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "labtx/corpus/shard.hpp"
#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"

namespace labtx {
namespace {

constexpr std::uint64_t kMaskStream = 0x6d61736b;
constexpr std::array<Split, 3> kSplits{Split::kTrain, Split::kVal, Split::kTest};

void mask_all(std::vector<LabBag>& bags, Rng& rng, std::size_t mask_count, Token mask_token) {
  for (LabBag& bag : bags) bag = mask_bag(bag, rng, std::min(mask_count, bag.size()), mask_token);
}

}  // namespace

nlohmann::json preprocess_options_to_json(const PreprocessOptions& o) {
  return {{"min_count", o.min_count}, {"splits", o.splits},         {"mode", vocab_mode_name(o.mode)},
          {"seed", o.seed},           {"mask_count", o.mask_count}, {"shard_size", o.shard_size}};
}

nlohmann::json preprocess_summary_to_json(const PreprocessSummary& s) {
  return {{"events_in", s.events_in},
          {"codes_in", s.codes_in},
          {"codes_kept", s.codes_kept},
          {"codes_dropped", s.codes_dropped},
          {"bags_kept", s.bags_kept},
          {"bags_dropped", s.bags_dropped},
          {"vocab_size", s.vocab_size},
          {"split_bags", {{"train", s.split_bags[0]}, {"val", s.split_bags[1]}, {"test", s.split_bags[2]}}}};
}

std::span<const LabBag> PreprocessedCorpus::split(Split which) const {
  switch (which) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    case Split::kTest: return test;
  }
  return {};
}

void PreprocessOptions::validate() const {
  double total = 0;
  for (double f : splits) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1, got " + std::to_string(total));
  if (mask_count < 1) throw ConfigError("mask_count must be >= 1");
  if (shard_size < 1) throw ConfigError("shard_size must be >= 1");
}

PreprocessedCorpus preprocess_events(std::span<const LabEvent> events, const PreprocessOptions& options) {
  options.validate();
  PreprocessSummary summary;
  summary.events_in = events.size();
  summary.codes_in = count_codes(events).size();
  const std::vector<LabEvent> kept = filter_rare_codes(events, options.min_count);

  std::set<std::string> ids;
  for (const LabEvent& ev : kept) ids.insert(ev.patient_id);
  if (ids.empty()) throw DataError("no events left after the min-count filter");
  const std::vector<std::string> patients(ids.begin(), ids.end());
  const PatientSplit split = split_patients(patients, options.splits, options.seed);
  const std::array<std::vector<LabEvent>, 3> by_split{events_for(kept, split.train), events_for(kept, split.val),
                                                       events_for(kept, split.test)};

  const CodeCounts counts = count_codes(by_split[0]);
  if (counts.empty()) throw DataError("training split has no events");
  std::map<std::string, std::vector<double>> values;
  for (const LabEvent& ev : by_split[0]) {
    if (ev.value) values[ev.code].push_back(*ev.value);
  }
  EcdfTable ecdfs;
  std::set<std::string> binary;
  for (const auto& [code, n] : counts) {
    const auto it = values.find(code);
    if (it == values.end()) {
      binary.insert(code);
    } else {
      ecdfs.emplace(code, build_ecdf(code, it->second));
    }
  }
  Vocab vocab = options.mode == VocabMode::kContinuous ? build_continuous_vocab(counts)
                                                       : build_decile_vocab(ecdfs, counts, binary);
  summary.codes_kept = vocab.num_codes();
  summary.codes_dropped = summary.codes_in - summary.codes_kept;
  summary.vocab_size = static_cast<std::size_t>(vocab.size());

  std::array<std::vector<LabBag>, 3> bags;
  Rng rng(options.seed ^ kMaskStream);
  for (std::size_t s = 0; s < 3; ++s) {
    BagBuildStats stats;
    bags[s] = build_bags(by_split[s], vocab, ecdfs, &stats);
    summary.bags_kept += stats.bags_kept;
    summary.bags_dropped += stats.bags_too_small;
    summary.split_bags[s] = stats.bags_kept;
    mask_all(bags[s], rng, options.mask_count, vocab.mask_token());
  }
  return PreprocessedCorpus{std::move(ecdfs), std::move(vocab), std::move(bags[0]), std::move(bags[1]),
                            std::move(bags[2]), summary};
}

void write_preprocessed(const std::filesystem::path& dir, const PreprocessedCorpus& corpus,
                        const PreprocessOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  save_ecdfs(dir / "ecdfs.json", corpus.ecdfs);
  save_vocab(dir / "vocab.json", corpus.vocab);
  for (Split s : kSplits) write_shards(corpus.split(s), dir / split_name(s), options.shard_size, split_name(s));
  const nlohmann::json doc = {{"options", preprocess_options_to_json(options)},
                              {"summary", preprocess_summary_to_json(corpus.summary)}};
  write_text_file(dir / "summary.json", doc.dump(1) + "\n");
}

PreprocessedCorpus read_preprocessed(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no preprocessed data directory '" + dir.string() + "'");
  PreprocessSummary summary;
  PreprocessedCorpus corpus{load_ecdfs(dir / "ecdfs.json"),
                            load_vocab(dir / "vocab.json"),
                            read_shards(dir / "train"),
                            read_shards(dir / "val"),
                            read_shards(dir / "test"),
                            summary};
  corpus.summary.vocab_size = static_cast<std::size_t>(corpus.vocab.size());
  corpus.summary.codes_kept = corpus.vocab.num_codes();
  corpus.summary.split_bags = {corpus.train.size(), corpus.val.size(), corpus.test.size()};
  corpus.summary.bags_kept = corpus.train.size() + corpus.val.size() + corpus.test.size();
  return corpus;
}

}  // namespace labtx
